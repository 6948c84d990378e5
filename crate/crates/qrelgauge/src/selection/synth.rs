//! Deterministic synthetic datasets: judged queries, metadata, and a set
//! of retrieval runs whose quality is controlled per system.
//!
//! Score model, per query: every candidate document gets a shared base
//! utility (relevant docs u ~ U(0,1), non-relevant v ~ U(0, 0.3)); system
//! `s` scores relevant docs `quality_s * u` and non-relevant docs `v`,
//! plus optional Gaussian noise per (system, doc). Raising a system's
//! quality moves every relevant document weakly up its ranking, so mean
//! recall is monotone in the quality parameter, strictly so once queries
//! are numerous; with zero noise the recall ranking reproduces the
//! quality order exactly.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocId, DocMeta, Qrels, QueryId, Run, RunSet, Strictness, SystemId};
use crate::rng::{domain, stream};

/// Non-relevant base utilities live in U(0, this); qualities meaningfully
/// separate systems when they straddle it.
const NEGATIVE_SCORE_CEILING: f64 = 0.3;

/// Relevant documents per query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceCount {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

/// Per-system quality parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualitySpec {
    /// Evenly spaced over `[min, max]`, best system last.
    Evenly { min: f64, max: f64 },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_systems: usize,
    pub n_queries: usize,
    pub evidence: EvidenceCount,
    pub corpus_size: usize,
    /// Candidate documents scored per query (evidence included).
    pub pool_size: usize,
    /// Ranked-list length each system reports.
    pub run_depth: usize,
    pub quality: QualitySpec,
    /// Standard deviation of per-(system, doc) score noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_systems: 12,
            n_queries: 200,
            evidence: EvidenceCount::Uniform { min: 5, max: 20 },
            corpus_size: 10_000,
            pool_size: 200,
            run_depth: 100,
            quality: QualitySpec::Evenly { min: 0.3, max: 0.9 },
            noise: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub qrels: Qrels,
    pub runset: RunSet,
    pub meta: DocMeta,
    /// Ground truth, same order as the run set.
    pub qualities: Vec<(SystemId, f64)>,
}

fn validate(config: &SynthConfig) -> Result<Vec<f64>> {
    if config.n_systems == 0 || config.n_queries == 0 {
        return Err(Error::Config("need at least one system and one query".into()));
    }
    let max_evidence = match config.evidence {
        EvidenceCount::Fixed(n) => {
            if n == 0 {
                return Err(Error::Config("evidence count must be >= 1".into()));
            }
            n
        }
        EvidenceCount::Uniform { min, max } => {
            if min == 0 || min > max {
                return Err(Error::Config(format!(
                    "invalid evidence range [{min}, {max}]"
                )));
            }
            max
        }
    };
    if max_evidence > config.corpus_size {
        return Err(Error::Config(format!(
            "evidence per query ({max_evidence}) exceeds corpus size ({})",
            config.corpus_size
        )));
    }
    if config.pool_size < max_evidence || config.pool_size > config.corpus_size {
        return Err(Error::Config(format!(
            "pool size {} must lie in [{max_evidence}, {}]",
            config.pool_size, config.corpus_size
        )));
    }
    if config.run_depth == 0 || config.run_depth > config.pool_size {
        return Err(Error::Config(format!(
            "run depth {} must lie in [1, {}]",
            config.run_depth, config.pool_size
        )));
    }
    if !(config.noise >= 0.0 && config.noise.is_finite()) {
        return Err(Error::Config(format!("invalid noise {}", config.noise)));
    }
    let qualities = match &config.quality {
        QualitySpec::Evenly { min, max } => {
            if !(min.is_finite() && max.is_finite()) || min > max {
                return Err(Error::Config(format!("invalid quality range [{min}, {max}]")));
            }
            let n = config.n_systems;
            (0..n)
                .map(|i| {
                    if n == 1 {
                        *min
                    } else {
                        min + (max - min) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        }
        QualitySpec::Explicit(values) => {
            if values.len() != config.n_systems {
                return Err(Error::Config(format!(
                    "{} qualities given for {} systems",
                    values.len(),
                    config.n_systems
                )));
            }
            if values.iter().any(|q| !q.is_finite() || *q <= 0.0) {
                return Err(Error::Config("qualities must be positive and finite".into()));
            }
            values.clone()
        }
    };
    Ok(qualities)
}

/// Draws `count` distinct indices below `universe`, avoiding `exclude`.
fn sample_distinct<R: Rng>(
    rng: &mut R,
    count: usize,
    universe: usize,
    exclude: &BTreeSet<usize>,
) -> Vec<usize> {
    debug_assert!(count + exclude.len() <= universe);
    if (count + exclude.len()) * 2 <= universe {
        // Rejection sampling: the acceptance rate stays above one half.
        let mut chosen = BTreeSet::new();
        while chosen.len() < count {
            let candidate = rng.random_range(0..universe);
            if !exclude.contains(&candidate) {
                chosen.insert(candidate);
            }
        }
        chosen.into_iter().collect()
    } else {
        // Dense draw: partial Fisher-Yates over the remaining indices.
        let mut remaining: Vec<usize> =
            (0..universe).filter(|i| !exclude.contains(i)).collect();
        for i in 0..count {
            let j = rng.random_range(i..remaining.len());
            remaining.swap(i, j);
        }
        let mut picked: Vec<usize> = remaining[..count].to_vec();
        picked.sort_unstable();
        picked
    }
}

/// Generates qrels, one run per system, and document metadata. Bit-exact
/// for a given config: every random draw comes from a substream keyed by
/// (purpose, query/system index), never from shared sequential state.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthData> {
    let qualities = validate(config)?;
    let doc_width = config.corpus_size.to_string().len().max(4);
    let query_width = config.n_queries.to_string().len().max(3);
    let sys_width = config.n_systems.to_string().len().max(2);
    let doc_id = |index: usize| -> DocId { format!("d{index:0doc_width$}") };

    let mut qrels = Qrels::new();
    let mut used_docs: BTreeSet<usize> = BTreeSet::new();
    // Per query: sorted candidate indices with (is_relevant, base utility).
    type QueryPool = (QueryId, Vec<(usize, bool, f64)>);
    let mut pools: Vec<QueryPool> = Vec::with_capacity(config.n_queries);

    for qi in 0..config.n_queries {
        let query: QueryId = format!("q{qi:0query_width$}");
        let mut ev_rng = stream(config.seed, &[domain::SYNTH_EVIDENCE, qi as u64]);
        let n_evidence = match config.evidence {
            EvidenceCount::Fixed(n) => n,
            EvidenceCount::Uniform { min, max } => ev_rng.random_range(min..=max),
        };
        let evidence = sample_distinct(&mut ev_rng, n_evidence, config.corpus_size, &BTreeSet::new());
        let evidence_set: BTreeSet<usize> = evidence.iter().copied().collect();
        let mut pool_rng = stream(config.seed, &[domain::SYNTH_POOL, qi as u64]);
        let negatives = sample_distinct(
            &mut pool_rng,
            config.pool_size - n_evidence,
            config.corpus_size,
            &evidence_set,
        );

        let mut base_rng = stream(config.seed, &[domain::SYNTH_BASE, qi as u64]);
        let mut candidates: Vec<(usize, bool, f64)> = Vec::with_capacity(config.pool_size);
        for &index in &evidence {
            candidates.push((index, true, base_rng.random::<f64>()));
        }
        for &index in &negatives {
            candidates.push((
                index,
                false,
                base_rng.random::<f64>() * NEGATIVE_SCORE_CEILING,
            ));
        }
        for &index in &evidence {
            qrels.insert(query.clone(), doc_id(index), 1)?;
        }
        used_docs.extend(candidates.iter().map(|&(index, _, _)| index));
        pools.push((query, candidates));
    }

    let mut runs = Vec::with_capacity(config.n_systems);
    let mut quality_table = Vec::with_capacity(config.n_systems);
    for (si, &quality) in qualities.iter().enumerate() {
        let system: SystemId = format!("sys{si:0sys_width$}");
        let mut rankings: BTreeMap<QueryId, Vec<(DocId, f64)>> = BTreeMap::new();
        for (qi, (query, candidates)) in pools.iter().enumerate() {
            let mut noise_rng = stream(config.seed, &[domain::SYNTH_SCORES, si as u64, qi as u64]);
            let mut scored: Vec<(DocId, f64)> = candidates
                .iter()
                .map(|&(index, relevant, base)| {
                    let signal = if relevant { quality * base } else { base };
                    let noise: f64 = if config.noise > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut noise_rng);
                        config.noise * z
                    } else {
                        0.0
                    };
                    (doc_id(index), signal + noise)
                })
                .collect();
            scored.sort_by(|(doc_a, score_a), (doc_b, score_b)| {
                score_b
                    .partial_cmp(score_a)
                    .expect("finite scores")
                    .then_with(|| doc_b.cmp(doc_a))
            });
            scored.truncate(config.run_depth);
            rankings.insert(query.clone(), scored);
        }
        runs.push(Run::new(system.clone(), rankings)?);
        quality_table.push((system, quality));
    }

    let mut meta = DocMeta::new();
    for &index in &used_docs {
        let mut meta_rng = stream(config.seed, &[domain::SYNTH_META, index as u64]);
        let popularity = meta_rng.random_range(0..=1000u64);
        let length = meta_rng.random_range(5..=300u64);
        meta.insert(doc_id(index), popularity, length)?;
    }

    Ok(SynthData {
        qrels,
        runset: RunSet::new(runs, Strictness::Strict)?,
        meta,
        qualities: quality_table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{emit_qrels, emit_run};
    use crate::metrics::{evaluate, MetricSpec};

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_systems: 4,
            n_queries: 30,
            evidence: EvidenceCount::Uniform { min: 3, max: 8 },
            corpus_size: 2_000,
            pool_size: 60,
            run_depth: 40,
            quality: QualitySpec::Evenly { min: 0.3, max: 0.9 },
            noise: 0.02,
            seed: 17,
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = small_config();
        let a = synth_generate(&config).unwrap();
        let b = synth_generate(&config).unwrap();
        assert_eq!(emit_qrels(&a.qrels), emit_qrels(&b.qrels));
        for (ra, rb) in a.runset.runs().iter().zip(b.runset.runs()) {
            assert_eq!(emit_run(ra), emit_run(rb));
        }
        assert_eq!(a.meta, b.meta);
    }

    #[test]
    fn different_seeds_differ() {
        let mut config = small_config();
        let a = synth_generate(&config).unwrap();
        config.seed = 18;
        let b = synth_generate(&config).unwrap();
        assert_ne!(emit_run(&a.runset.runs()[0]), emit_run(&b.runset.runs()[0]));
    }

    #[test]
    fn zero_noise_ranking_matches_quality_order() {
        let mut config = small_config();
        config.noise = 0.0;
        config.n_queries = 50;
        let data = synth_generate(&config).unwrap();
        let matrix = evaluate(
            &data.runset,
            &data.qrels,
            MetricSpec::Recall { k: 20 },
            Strictness::Strict,
        )
        .unwrap();
        let ranking = matrix.ranking().unwrap();
        let by_rank: Vec<&str> = ranking.entries().iter().map(|(s, _)| s.as_str()).collect();
        let mut by_quality: Vec<(&str, f64)> = data
            .qualities
            .iter()
            .map(|(s, q)| (s.as_str(), *q))
            .collect();
        by_quality.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let expected: Vec<&str> = by_quality.into_iter().map(|(s, _)| s).collect();
        assert_eq!(by_rank, expected);
    }

    #[test]
    fn meta_covers_all_relevant_docs() {
        let data = synth_generate(&small_config()).unwrap();
        for query in data.qrels.queries().map(str::to_string).collect::<Vec<_>>() {
            for doc in data.qrels.relevant_set(&query) {
                assert!(data.meta.contains(doc));
            }
        }
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let mut config = small_config();
        config.evidence = EvidenceCount::Fixed(5_000);
        assert!(matches!(synth_generate(&config), Err(Error::Config(_))));
        let mut config = small_config();
        config.pool_size = 10_000;
        assert!(matches!(synth_generate(&config), Err(Error::Config(_))));
        let mut config = small_config();
        config.run_depth = 0;
        assert!(matches!(synth_generate(&config), Err(Error::Config(_))));
        let mut config = small_config();
        config.quality = QualitySpec::Explicit(vec![0.5]);
        assert!(matches!(synth_generate(&config), Err(Error::Config(_))));
    }

    #[test]
    fn dense_sampling_path_is_exact() {
        // pool_size close to corpus_size exercises the Fisher-Yates branch.
        let config = SynthConfig {
            n_systems: 2,
            n_queries: 5,
            evidence: EvidenceCount::Fixed(10),
            corpus_size: 40,
            pool_size: 38,
            run_depth: 20,
            quality: QualitySpec::Evenly { min: 0.4, max: 0.8 },
            noise: 0.0,
            seed: 3,
        };
        let data = synth_generate(&config).unwrap();
        for query in data.qrels.queries().map(str::to_string).collect::<Vec<_>>() {
            assert_eq!(data.qrels.relevant_count(&query), 10);
        }
    }
}
