//! Partial-annotation simulations: single-relevant selection policies,
//! the ranking-stability study they feed, incremental-annotation curves,
//! and a synthetic data generator for end-to-end checks.

mod synth;

pub use synth::{synth_generate, EvidenceCount, QualitySpec, SynthConfig, SynthData};

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, evaluate_on_queries, MetricMatrix, MetricSpec};
use crate::model::{DocMeta, Qrels, QueryId, RunSet, Strictness, SystemId, SystemRanking};
use crate::rankstats::{
    classify_pairs, error_rate, kendall_tau_detail, partial_kendall_tau, PairBucket,
    PairClassification,
};
use crate::rng::{domain, stream};

/// How to pick the single annotated relevant document of each query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Uniform over the query's relevant documents, repeated `trials`
    /// times.
    Random { trials: u32, seed: u64 },
    /// The relevant document with the highest reference count.
    MostPopular,
    /// The longest relevant document.
    Longest,
    /// The shortest relevant document.
    Shortest,
    /// The relevant document ranked highest by the selector system.
    SystemBased { selector: SystemId },
}

impl SelectionPolicy {
    pub fn label(&self) -> String {
        match self {
            SelectionPolicy::Random { .. } => "random".into(),
            SelectionPolicy::MostPopular => "most_popular".into(),
            SelectionPolicy::Longest => "longest".into(),
            SelectionPolicy::Shortest => "shortest".into(),
            SelectionPolicy::SystemBased { selector } => format!("system_based:{selector}"),
        }
    }
}

/// What to do when the selector system retrieves none of a query's
/// relevant documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemBasedFallback {
    /// Keep the query, selecting the lexicographically smallest relevant
    /// document; the query is counted and reported.
    #[default]
    LexSmallest,
    /// Drop the query from the produced judgment set.
    SkipQuery,
}

/// A single-relevant judgment set plus bookkeeping about how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub qrels: Qrels,
    /// Queries where the selector found nothing and the fallback applied.
    pub fallback_queries: Vec<QueryId>,
    /// Queries dropped under [`SystemBasedFallback::SkipQuery`].
    pub skipped_queries: Vec<QueryId>,
}

fn sorted_relevant<'a>(qrels: &'a Qrels, query: &str) -> Result<Vec<&'a str>> {
    let docs: Vec<&str> = qrels.relevant_set(query).into_iter().collect();
    if docs.is_empty() {
        return Err(Error::NoRelevant(query.to_string()));
    }
    Ok(docs)
}

fn pick_random(docs: &[&str], seed: u64, trial: u64, query_index: u64) -> String {
    let mut rng = stream(seed, &[domain::SINGLE_RANDOM, trial, query_index]);
    docs[rng.random_range(0..docs.len())].to_string()
}

fn pick_by_meta(docs: &[&str], meta: &DocMeta, policy: &SelectionPolicy) -> Result<String> {
    let mut best: Option<(&str, u64)> = None;
    for &doc in docs {
        let value = match policy {
            SelectionPolicy::MostPopular => meta
                .popularity(doc)
                .ok_or_else(|| Error::MissingMeta(doc.to_string()))?,
            SelectionPolicy::Longest | SelectionPolicy::Shortest => meta
                .length(doc)
                .ok_or_else(|| Error::MissingMeta(doc.to_string()))?,
            _ => unreachable!("meta policies only"),
        };
        let wins = match (&best, policy) {
            (None, _) => true,
            (Some((_, cur)), SelectionPolicy::Shortest) => value < *cur,
            (Some((_, cur)), _) => value > *cur,
        };
        if wins {
            best = Some((doc, value));
        }
    }
    // Iteration over sorted doc ids plus strict comparisons keeps the
    // lexicographically smallest doc on criterion ties.
    Ok(best.expect("non-empty relevant set").0.to_string())
}

/// Builds a single-relevant judgment set for every query of `full`.
///
/// `Random` here draws trial 0 of its substream; studies iterate trials
/// themselves. Deterministic criterion ties always resolve to the
/// lexicographically smallest doc id.
pub fn select_single(
    full: &Qrels,
    policy: &SelectionPolicy,
    meta: Option<&DocMeta>,
    runs: Option<&RunSet>,
    fallback: SystemBasedFallback,
) -> Result<Selection> {
    let queries: Vec<QueryId> = full.queries().map(str::to_string).collect();
    let mut selection = Selection {
        qrels: Qrels::new(),
        fallback_queries: Vec::new(),
        skipped_queries: Vec::new(),
    };
    for (query_index, query) in queries.iter().enumerate() {
        let docs = sorted_relevant(full, query)?;
        let chosen = match policy {
            SelectionPolicy::Random { seed, .. } => {
                pick_random(&docs, *seed, 0, query_index as u64)
            }
            SelectionPolicy::MostPopular | SelectionPolicy::Longest | SelectionPolicy::Shortest => {
                let meta = meta.ok_or_else(|| {
                    Error::Config(format!("policy {} requires doc metadata", policy.label()))
                })?;
                pick_by_meta(&docs, meta, policy)?
            }
            SelectionPolicy::SystemBased { selector } => {
                let runs = runs.ok_or_else(|| {
                    Error::Config("system-based selection requires runs".into())
                })?;
                let run = runs.get(selector).ok_or_else(|| {
                    Error::MismatchedSystems(format!("unknown selector system `{selector}`"))
                })?;
                match run.first_relevant(full, query) {
                    Some((_, doc)) => doc.to_string(),
                    None => match fallback {
                        SystemBasedFallback::LexSmallest => {
                            selection.fallback_queries.push(query.clone());
                            docs[0].to_string()
                        }
                        SystemBasedFallback::SkipQuery => {
                            selection.skipped_queries.push(query.clone());
                            continue;
                        }
                    },
                }
            }
        };
        selection.qrels.insert(query.clone(), chosen, 1)?;
    }
    Ok(selection)
}

/// Options shared by the selection studies.
#[derive(Debug, Clone, Copy, Default)]
pub struct StudyOptions {
    pub fallback: SystemBasedFallback,
    pub strictness: Strictness,
}

/// Tau and error rate of one policy against the full-annotation ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub label: String,
    pub tau: f64,
    /// Sample standard deviation over trials (random policy only).
    pub tau_std: Option<f64>,
    pub error_rate_pct: f64,
    /// Every system pair was tied in the candidate ranking.
    pub all_ties: bool,
    pub trials: Option<u32>,
}

/// Per-selector outcome of system-based selection. The selector itself is
/// excluded from the tau computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorRow {
    pub selector: SystemId,
    pub tau: f64,
    pub error_rate_pct: f64,
    pub all_ties: bool,
    pub fallback_count: usize,
    pub skipped_count: usize,
}

/// Mean partial tau of one policy restricted to one p-value bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub policy: String,
    pub bucket: PairBucket,
    pub pairs: usize,
    pub mean_partial_tau: Option<f64>,
    pub mean_error_rate_pct: Option<f64>,
}

/// Mean metric score of each system under each selector's judgment set;
/// rank swaps across selectors become visible by plotting these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapScore {
    pub selector: SystemId,
    pub system: SystemId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleRelevantStudy {
    pub reference: SystemRanking,
    pub rows: Vec<PolicyRow>,
    pub selector_rows: Vec<SelectorRow>,
    pub bucket_rows: Vec<BucketRow>,
    pub swap_scores: Vec<SwapScore>,
}

struct Outcome {
    tau: f64,
    all_ties: bool,
    per_bucket: Vec<Option<f64>>,
}

fn rank_against_reference(
    matrix: &MetricMatrix,
    reference: &SystemRanking,
    bucket_pairs: &[BTreeSet<(SystemId, SystemId)>],
) -> Result<Outcome> {
    let ranking = matrix.ranking()?;
    let detail = kendall_tau_detail(&ranking, reference)?;
    let per_bucket = bucket_pairs
        .iter()
        .map(|pairs| {
            if pairs.is_empty() {
                Ok(None)
            } else {
                partial_kendall_tau(&ranking, reference, pairs).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        tau: detail.tau(),
        all_ties: detail.all_tied(),
        per_bucket,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Averages per-bucket values across repetitions, skipping repetitions
/// where the bucket was empty.
fn aggregate_buckets(outcomes: &[Outcome], n_buckets: usize) -> Vec<(Option<f64>, usize)> {
    (0..n_buckets)
        .map(|b| {
            let values: Vec<f64> = outcomes.iter().filter_map(|o| o.per_bucket[b]).collect();
            if values.is_empty() {
                (None, 0)
            } else {
                (Some(mean(&values)), values.len())
            }
        })
        .collect()
}

/// Runs the single-relevant selection study.
///
/// Every policy builds a judgment set with exactly one relevant document
/// per query; systems are re-ranked on it and compared to the ranking
/// from full annotation. Random policies report mean +/- std over their
/// trials. System-based policies are reported per selector (excluding
/// the selector from the comparison) plus an aggregate row, and also
/// contribute per-selector mean scores for swap plots.
pub fn single_relevant_study(
    runset: &RunSet,
    full_qrels: &Qrels,
    policies: &[SelectionPolicy],
    spec: MetricSpec,
    buckets: &[PairBucket],
    meta: Option<&DocMeta>,
    opts: &StudyOptions,
) -> Result<SingleRelevantStudy> {
    if policies.is_empty() {
        return Err(Error::Config("no selection policies given".into()));
    }
    let reference_matrix = evaluate(runset, full_qrels, spec, opts.strictness)?;
    let reference = reference_matrix.ranking()?;
    let queries: Vec<QueryId> = reference_matrix.queries().to_vec();
    let full_on_queries = restrict_qrels(full_qrels, &queries);

    let classification: Option<PairClassification> = if buckets.is_empty() {
        None
    } else {
        Some(classify_pairs(&reference_matrix, buckets)?)
    };
    let bucket_pairs: Vec<BTreeSet<(SystemId, SystemId)>> = classification
        .as_ref()
        .map(|c| (0..buckets.len()).map(|b| c.pairs_in_bucket(b)).collect())
        .unwrap_or_default();

    let eval_selection = |qrels: &Qrels, retained: &[QueryId]| -> Result<MetricMatrix> {
        evaluate_on_queries(runset, qrels, spec, retained.to_vec(), Vec::new())
    };

    let mut study = SingleRelevantStudy {
        reference: reference.clone(),
        rows: Vec::new(),
        selector_rows: Vec::new(),
        bucket_rows: Vec::new(),
        swap_scores: Vec::new(),
    };
    let mut selector_outcomes: Vec<Outcome> = Vec::new();
    let mut system_based_seen = false;

    for policy in policies {
        match policy {
            SelectionPolicy::Random { trials, seed } => {
                if *trials == 0 {
                    return Err(Error::Config("random policy needs trials >= 1".into()));
                }
                let outcomes: Vec<Outcome> = (0..*trials as u64)
                    .into_par_iter()
                    .map(|trial| {
                        let mut qrels = Qrels::new();
                        for (query_index, query) in queries.iter().enumerate() {
                            let docs = sorted_relevant(&full_on_queries, query)?;
                            let doc = pick_random(&docs, *seed, trial, query_index as u64);
                            qrels.insert(query.clone(), doc, 1)?;
                        }
                        let matrix = eval_selection(&qrels, &queries)?;
                        rank_against_reference(&matrix, &reference, &bucket_pairs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let taus: Vec<f64> = outcomes.iter().map(|o| o.tau).collect();
                let tau = mean(&taus);
                study.rows.push(PolicyRow {
                    label: policy.label(),
                    tau,
                    tau_std: (taus.len() > 1).then(|| sample_std(&taus, tau)),
                    error_rate_pct: error_rate(tau)?,
                    all_ties: outcomes.iter().all(|o| o.all_ties),
                    trials: Some(*trials),
                });
                for (b, (value, _)) in aggregate_buckets(&outcomes, buckets.len()).iter().enumerate()
                {
                    study.bucket_rows.push(BucketRow {
                        policy: policy.label(),
                        bucket: buckets[b],
                        pairs: bucket_pairs[b].len(),
                        mean_partial_tau: *value,
                        mean_error_rate_pct: value.map(|v| 100.0 * (1.0 - v) / 2.0),
                    });
                }
            }
            SelectionPolicy::MostPopular | SelectionPolicy::Longest | SelectionPolicy::Shortest => {
                let selection =
                    select_single(&full_on_queries, policy, meta, Some(runset), opts.fallback)?;
                let matrix = eval_selection(&selection.qrels, &queries)?;
                let outcome = rank_against_reference(&matrix, &reference, &bucket_pairs)?;
                study.rows.push(PolicyRow {
                    label: policy.label(),
                    tau: outcome.tau,
                    tau_std: None,
                    error_rate_pct: error_rate(outcome.tau)?,
                    all_ties: outcome.all_ties,
                    trials: None,
                });
                for (b, value) in outcome.per_bucket.iter().enumerate() {
                    study.bucket_rows.push(BucketRow {
                        policy: policy.label(),
                        bucket: buckets[b],
                        pairs: bucket_pairs[b].len(),
                        mean_partial_tau: *value,
                        mean_error_rate_pct: value.map(|v| 100.0 * (1.0 - v) / 2.0),
                    });
                }
            }
            SelectionPolicy::SystemBased { selector } => {
                system_based_seen = true;
                let selection =
                    select_single(&full_on_queries, policy, meta, Some(runset), opts.fallback)?;
                let retained: Vec<QueryId> = selection
                    .qrels
                    .queries()
                    .map(str::to_string)
                    .collect();
                if retained.is_empty() {
                    return Err(Error::NoCommonQueries);
                }
                let matrix = eval_selection(&selection.qrels, &retained)?;
                // Swap-plot scores include every system, selector included.
                for (system, score) in matrix.means() {
                    study.swap_scores.push(SwapScore {
                        selector: selector.clone(),
                        system,
                        score,
                    });
                }
                // The selector is excluded from the comparison: it picked
                // the annotations, so swaps involving it are artificial.
                let candidate = matrix.ranking()?.without(selector);
                let reference_wo = reference.without(selector);
                let detail = kendall_tau_detail(&candidate, &reference_wo)?;
                let per_bucket = bucket_pairs
                    .iter()
                    .map(|pairs| {
                        let kept: BTreeSet<(SystemId, SystemId)> = pairs
                            .iter()
                            .filter(|(a, b)| a != selector && b != selector)
                            .cloned()
                            .collect();
                        if kept.is_empty() {
                            Ok(None)
                        } else {
                            partial_kendall_tau(&candidate, &reference_wo, &kept).map(Some)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                study.selector_rows.push(SelectorRow {
                    selector: selector.clone(),
                    tau: detail.tau(),
                    error_rate_pct: error_rate(detail.tau())?,
                    all_ties: detail.all_tied(),
                    fallback_count: selection.fallback_queries.len(),
                    skipped_count: selection.skipped_queries.len(),
                });
                selector_outcomes.push(Outcome {
                    tau: detail.tau(),
                    all_ties: detail.all_tied(),
                    per_bucket,
                });
            }
        }
    }

    if system_based_seen {
        let taus: Vec<f64> = selector_outcomes.iter().map(|o| o.tau).collect();
        let tau = mean(&taus);
        study.rows.push(PolicyRow {
            label: "system_based".into(),
            tau,
            tau_std: (taus.len() > 1).then(|| sample_std(&taus, tau)),
            error_rate_pct: error_rate(tau)?,
            all_ties: selector_outcomes.iter().all(|o| o.all_ties),
            trials: None,
        });
        for (b, (value, _)) in aggregate_buckets(&selector_outcomes, buckets.len())
            .iter()
            .enumerate()
        {
            study.bucket_rows.push(BucketRow {
                policy: "system_based".into(),
                bucket: buckets[b],
                pairs: bucket_pairs[b].len(),
                mean_partial_tau: *value,
                mean_error_rate_pct: value.map(|v| 100.0 * (1.0 - v) / 2.0),
            });
        }
    }

    Ok(study)
}

fn restrict_qrels(qrels: &Qrels, queries: &[QueryId]) -> Qrels {
    let keep: BTreeSet<&str> = queries.iter().map(String::as_str).collect();
    let mut out = Qrels::new();
    for (query, doc, grade) in qrels.iter() {
        if keep.contains(query) {
            out.insert(query, doc, grade).expect("source qrels are consistent");
        }
    }
    out
}

/// Number of annotated documents a query must reach at fraction `f`:
/// `ceil(f * total)`, clamped to [1, total]. A tiny slack absorbs binary
/// representation error so e.g. f = 0.2 of 5 docs yields exactly 1.
fn fraction_quota(f: f64, total: usize) -> usize {
    let raw = f * total as f64;
    ((raw - 1e-9).ceil() as usize).clamp(1, total)
}

/// One (fraction, bucket) cell of a stability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub mean_partial_tau: f64,
    pub mean_error_rate_pct: f64,
    /// Selectors that contributed (bucket non-empty after exclusion).
    pub selectors: usize,
}

/// Mean partial tau per annotation fraction and p-value bucket, averaged
/// over selector systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub fractions: Vec<f64>,
    pub buckets: Vec<PairBucket>,
    pub selectors: Vec<SystemId>,
    pub bucket_pair_counts: Vec<usize>,
    /// Indexed `[fraction][bucket]`; `None` when no selector had pairs.
    pub cells: Vec<Vec<Option<StabilityCell>>>,
}

/// The default annotation-fraction grid.
pub fn default_fractions() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
}

/// Simulates gradually growing annotation. Each selector system seeds
/// every query with its single-relevant pick; further relevant documents
/// are added in a per-(selector, query) random order, so the annotated
/// set at a smaller fraction is always contained in the set at a larger
/// one. At fraction 1.0 the judgment set is complete by construction.
pub fn incremental_study(
    runset: &RunSet,
    full_qrels: &Qrels,
    fractions: &[f64],
    buckets: &[PairBucket],
    spec: MetricSpec,
    seed: u64,
    opts: &StudyOptions,
) -> Result<StabilityCurve> {
    if fractions.is_empty() {
        return Err(Error::Config("no fractions given".into()));
    }
    for f in fractions {
        if !(*f > 0.0 && *f <= 1.0) {
            return Err(Error::Config(format!("fraction {f} outside (0, 1]")));
        }
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("fractions must be strictly ascending".into()));
    }
    if buckets.is_empty() {
        return Err(Error::Config("incremental study needs buckets".into()));
    }

    let reference_matrix = evaluate(runset, full_qrels, spec, opts.strictness)?;
    let reference = reference_matrix.ranking()?;
    let queries: Vec<QueryId> = reference_matrix.queries().to_vec();
    let full_on_queries = restrict_qrels(full_qrels, &queries);
    let classification = classify_pairs(&reference_matrix, buckets)?;
    let bucket_pairs: Vec<BTreeSet<(SystemId, SystemId)>> = (0..buckets.len())
        .map(|b| classification.pairs_in_bucket(b))
        .collect();
    let selectors: Vec<SystemId> = runset.system_ids().iter().map(|s| s.to_string()).collect();

    // outcomes[selector][fraction][bucket]
    let outcomes: Vec<Vec<Vec<Option<f64>>>> = selectors
        .par_iter()
        .enumerate()
        .map(|(selector_index, selector)| {
            let orders = annotation_orders(
                runset,
                &full_on_queries,
                selector,
                selector_index as u64,
                seed,
                opts.fallback,
            )?;
            let retained: Vec<QueryId> = orders.iter().map(|(q, _)| q.clone()).collect();

            let mut per_fraction = Vec::with_capacity(fractions.len());
            for &fraction in fractions {
                let mut qrels = Qrels::new();
                for (query, order) in &orders {
                    let quota = fraction_quota(fraction, order.len());
                    for doc in &order[..quota] {
                        qrels.insert(query.clone(), doc.clone(), 1)?;
                    }
                }
                let matrix =
                    evaluate_on_queries(runset, &qrels, spec, retained.clone(), Vec::new())?;
                let ranking = matrix.ranking()?;
                let per_bucket = bucket_pairs
                    .iter()
                    .map(|pairs| {
                        if pairs.is_empty() {
                            Ok(None)
                        } else {
                            partial_kendall_tau(&ranking, &reference, pairs).map(Some)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                per_fraction.push(per_bucket);
            }
            Ok(per_fraction)
        })
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<Vec<Option<StabilityCell>>> = (0..fractions.len())
        .map(|fi| {
            (0..buckets.len())
                .map(|bi| {
                    let values: Vec<f64> = outcomes
                        .iter()
                        .filter_map(|per_selector| per_selector[fi][bi])
                        .collect();
                    if values.is_empty() {
                        None
                    } else {
                        let tau = mean(&values);
                        Some(StabilityCell {
                            mean_partial_tau: tau,
                            mean_error_rate_pct: 100.0 * (1.0 - tau) / 2.0,
                            selectors: values.len(),
                        })
                    }
                })
                .collect()
        })
        .collect();

    Ok(StabilityCurve {
        fractions: fractions.to_vec(),
        buckets: buckets.to_vec(),
        selectors,
        bucket_pair_counts: bucket_pairs.iter().map(BTreeSet::len).collect(),
        cells,
    })
}

fn shuffle_in_place(items: &mut [String], seed: u64, labels: &[u64]) {
    use rand::seq::SliceRandom;
    let mut rng = stream(seed, labels);
    items.shuffle(&mut rng);
}

/// The per-query annotation order behind the incremental study: the
/// selector's single-relevant pick first, then the remaining relevant
/// documents in a seeded random order. Truncating every query's list to
/// its fraction quota yields the annotated set at that fraction, so sets
/// are nested across fractions by construction.
pub fn annotation_orders(
    runset: &RunSet,
    full_qrels: &Qrels,
    selector: &str,
    selector_index: u64,
    seed: u64,
    fallback: SystemBasedFallback,
) -> Result<Vec<(QueryId, Vec<String>)>> {
    let policy = SelectionPolicy::SystemBased {
        selector: selector.to_string(),
    };
    let selection = select_single(full_qrels, &policy, None, Some(runset), fallback)?;
    let queries: Vec<QueryId> = full_qrels.queries().map(str::to_string).collect();
    Ok(queries
        .iter()
        .enumerate()
        .filter(|(_, q)| selection.qrels.contains_query(q))
        .map(|(query_index, query)| {
            let seed_doc = selection
                .qrels
                .relevant_set(query)
                .into_iter()
                .next()
                .expect("singleton selection")
                .to_string();
            let mut rest: Vec<String> = full_qrels
                .relevant_set(query)
                .into_iter()
                .filter(|d| *d != seed_doc)
                .map(str::to_string)
                .collect();
            shuffle_in_place(
                &mut rest,
                seed,
                &[domain::INCREMENTAL, selector_index, query_index as u64],
            );
            let mut order = vec![seed_doc];
            order.extend(rest);
            (query.clone(), order)
        })
        .collect())
}

/// See [`annotation_orders`]; quota at `fraction` for a query with
/// `total` relevant documents.
pub fn annotation_quota(fraction: f64, total: usize) -> usize {
    fraction_quota(fraction, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::model::Run;

    fn qrels_from(entries: &[(&str, &[&str])]) -> Qrels {
        let mut qrels = Qrels::new();
        for (query, docs) in entries {
            for doc in *docs {
                qrels.insert(*query, *doc, 1).unwrap();
            }
        }
        qrels
    }

    fn run_from(system: &str, entries: &[(&str, &[(&str, f64)])]) -> Run {
        let mut rankings: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (query, docs) in entries {
            rankings.insert(
                query.to_string(),
                docs.iter().map(|&(d, s)| (d.to_string(), s)).collect(),
            );
        }
        Run::new(system, rankings).unwrap()
    }

    #[test]
    fn singleton_relevant_set_any_policy() {
        let qrels = qrels_from(&[("q1", &["d7"])]);
        for policy in [
            SelectionPolicy::Random { trials: 1, seed: 3 },
            SelectionPolicy::Longest,
        ] {
            let mut meta = DocMeta::new();
            meta.insert("d7", 10, 10).unwrap();
            let selection =
                select_single(&qrels, &policy, Some(&meta), None, Default::default()).unwrap();
            assert!(selection.qrels.is_relevant("q1", "d7"));
            assert_eq!(selection.qrels.relevant_count("q1"), 1);
        }
    }

    #[test]
    fn most_popular_argmax() {
        let qrels = qrels_from(&[("q1", &["d1", "d2"])]);
        let mut meta = DocMeta::new();
        meta.insert("d1", 600, 10).unwrap();
        meta.insert("d2", 9, 10).unwrap();
        let selection = select_single(
            &qrels,
            &SelectionPolicy::MostPopular,
            Some(&meta),
            None,
            Default::default(),
        )
        .unwrap();
        assert!(selection.qrels.is_relevant("q1", "d1"));
    }

    #[test]
    fn longest_and_shortest() {
        let qrels = qrels_from(&[("q1", &["d1", "d2"])]);
        let mut meta = DocMeta::new();
        meta.insert("d1", 0, 48).unwrap();
        meta.insert("d2", 0, 300).unwrap();
        let longest = select_single(
            &qrels,
            &SelectionPolicy::Longest,
            Some(&meta),
            None,
            Default::default(),
        )
        .unwrap();
        assert!(longest.qrels.is_relevant("q1", "d2"));
        let shortest = select_single(
            &qrels,
            &SelectionPolicy::Shortest,
            Some(&meta),
            None,
            Default::default(),
        )
        .unwrap();
        assert!(shortest.qrels.is_relevant("q1", "d1"));
    }

    #[test]
    fn meta_ties_take_lexicographically_smallest() {
        let qrels = qrels_from(&[("q1", &["db", "da"])]);
        let mut meta = DocMeta::new();
        meta.insert("da", 5, 7).unwrap();
        meta.insert("db", 5, 7).unwrap();
        for policy in [
            SelectionPolicy::MostPopular,
            SelectionPolicy::Longest,
            SelectionPolicy::Shortest,
        ] {
            let selection =
                select_single(&qrels, &policy, Some(&meta), None, Default::default()).unwrap();
            assert!(selection.qrels.is_relevant("q1", "da"), "{}", policy.label());
        }
    }

    #[test]
    fn missing_meta_is_an_error() {
        let qrels = qrels_from(&[("q1", &["d1", "d2"])]);
        let mut meta = DocMeta::new();
        meta.insert("d1", 5, 7).unwrap();
        assert!(matches!(
            select_single(
                &qrels,
                &SelectionPolicy::MostPopular,
                Some(&meta),
                None,
                Default::default()
            ),
            Err(Error::MissingMeta(_))
        ));
    }

    #[test]
    fn system_based_first_relevant() {
        let qrels = qrels_from(&[("q1", &["d7", "d2"])]);
        let run = run_from(
            "sel",
            &[("q1", &[("d3", 3.0), ("d7", 2.0), ("d2", 1.0)])],
        );
        let runset = RunSet::new(vec![run], Strictness::Strict).unwrap();
        let selection = select_single(
            &qrels,
            &SelectionPolicy::SystemBased {
                selector: "sel".into(),
            },
            None,
            Some(&runset),
            Default::default(),
        )
        .unwrap();
        assert!(selection.qrels.is_relevant("q1", "d7"));
        assert!(selection.fallback_queries.is_empty());
    }

    #[test]
    fn system_based_fallback_and_skip() {
        let qrels = qrels_from(&[("q1", &["dz", "da"])]);
        let run = run_from("sel", &[("q1", &[("x1", 3.0), ("x2", 2.0)])]);
        let runset = RunSet::new(vec![run], Strictness::Strict).unwrap();
        let policy = SelectionPolicy::SystemBased {
            selector: "sel".into(),
        };
        let fallback = select_single(
            &qrels,
            &policy,
            None,
            Some(&runset),
            SystemBasedFallback::LexSmallest,
        )
        .unwrap();
        assert!(fallback.qrels.is_relevant("q1", "da"));
        assert_eq!(fallback.fallback_queries, vec!["q1".to_string()]);
        let skip = select_single(
            &qrels,
            &policy,
            None,
            Some(&runset),
            SystemBasedFallback::SkipQuery,
        )
        .unwrap();
        assert!(!skip.qrels.contains_query("q1"));
        assert_eq!(skip.skipped_queries, vec!["q1".to_string()]);
    }

    #[test]
    fn random_selection_frequencies_are_uniform() {
        // Chi-square style check: 10k trials over 5 docs, each count
        // within 5 sigma of the binomial mean.
        let docs = ["d1", "d2", "d3", "d4", "d5"];
        let mut counts = BTreeMap::new();
        let trials = 10_000u64;
        for trial in 0..trials {
            let doc = pick_random(&docs, 42, trial, 0);
            *counts.entry(doc).or_insert(0u64) += 1;
        }
        let expected = trials as f64 / docs.len() as f64;
        let sigma = (trials as f64 * 0.2 * 0.8).sqrt();
        for &count in counts.values() {
            assert!(
                (count as f64 - expected).abs() <= 5.0 * sigma,
                "count {count} too far from {expected}"
            );
        }
        assert_eq!(counts.len(), docs.len());
    }

    #[test]
    fn fraction_quota_boundaries() {
        assert_eq!(fraction_quota(1.0, 7), 7);
        assert_eq!(fraction_quota(0.2, 5), 1);
        assert_eq!(fraction_quota(0.21, 5), 2);
        assert_eq!(fraction_quota(0.01, 3), 1);
        assert_eq!(fraction_quota(0.5, 9), 5);
    }

    fn tiny_world() -> (RunSet, Qrels, DocMeta) {
        // Three systems over two queries; sys_a is best, sys_c worst.
        let qrels = qrels_from(&[("q1", &["r1", "r2"]), ("q2", &["r3", "r4"])]);
        let a = run_from(
            "sys_a",
            &[
                ("q1", &[("r1", 5.0), ("r2", 4.0), ("x1", 3.0)]),
                ("q2", &[("r3", 5.0), ("r4", 4.0), ("x2", 3.0)]),
            ],
        );
        let b = run_from(
            "sys_b",
            &[
                ("q1", &[("r1", 5.0), ("x1", 4.0), ("r2", 3.0)]),
                ("q2", &[("r3", 5.0), ("x2", 4.0), ("r4", 3.0)]),
            ],
        );
        let c = run_from(
            "sys_c",
            &[
                ("q1", &[("x1", 5.0), ("x3", 4.0), ("r1", 3.0)]),
                ("q2", &[("x2", 5.0), ("r3", 4.0), ("x4", 3.0)]),
            ],
        );
        let runset = RunSet::new(vec![a, b, c], Strictness::Strict).unwrap();
        let mut meta = DocMeta::new();
        for (i, doc) in ["r1", "r2", "r3", "r4"].iter().enumerate() {
            meta.insert(*doc, (i as u64 + 1) * 10, (4 - i as u64) * 25).unwrap();
        }
        (runset, qrels, meta)
    }

    #[test]
    fn study_runs_all_policies() {
        let (runset, qrels, meta) = tiny_world();
        let policies = vec![
            SelectionPolicy::Random { trials: 8, seed: 7 },
            SelectionPolicy::MostPopular,
            SelectionPolicy::Longest,
            SelectionPolicy::Shortest,
            SelectionPolicy::SystemBased { selector: "sys_a".into() },
            SelectionPolicy::SystemBased { selector: "sys_b".into() },
            SelectionPolicy::SystemBased { selector: "sys_c".into() },
        ];
        let study = single_relevant_study(
            &runset,
            &qrels,
            &policies,
            MetricSpec::Recall { k: 2 },
            &[],
            Some(&meta),
            &StudyOptions::default(),
        )
        .unwrap();
        assert_eq!(study.rows.len(), 5); // 4 policy rows + system_based aggregate
        assert_eq!(study.selector_rows.len(), 3);
        // Swap scores cover every (selector, system) combination.
        assert_eq!(study.swap_scores.len(), 9);
        let random_row = &study.rows[0];
        assert_eq!(random_row.label, "random");
        assert!(random_row.tau_std.is_some());
        assert!(random_row.tau >= -1.0 && random_row.tau <= 1.0);
    }

    #[test]
    fn study_is_deterministic() {
        let (runset, qrels, meta) = tiny_world();
        let policies = vec![SelectionPolicy::Random { trials: 16, seed: 11 }];
        let run = || {
            single_relevant_study(
                &runset,
                &qrels,
                &policies,
                MetricSpec::Recall { k: 2 },
                &[],
                Some(&meta),
                &StudyOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn selector_excluded_from_its_own_tau() {
        let (runset, qrels, _) = tiny_world();
        let study = single_relevant_study(
            &runset,
            &qrels,
            &[SelectionPolicy::SystemBased { selector: "sys_a".into() }],
            MetricSpec::Recall { k: 2 },
            &[],
            None,
            &StudyOptions::default(),
        )
        .unwrap();
        // With sys_a excluded, only the (sys_b, sys_c) pair remains; the
        // detail therefore covers exactly one pair.
        assert_eq!(study.selector_rows.len(), 1);
        let row = &study.selector_rows[0];
        assert!(row.tau == 1.0 || row.tau == -1.0 || row.tau == 0.0);
    }

    #[test]
    fn selector_pick_maximizes_its_own_singleton_score() {
        // The chosen doc is the selector's highest-ranked relevant doc,
        // so no other singleton choice can score better for it.
        let (runset, qrels, _) = tiny_world();
        let selector = "sys_b";
        let policy = SelectionPolicy::SystemBased { selector: selector.into() };
        let selection =
            select_single(&qrels, &policy, None, Some(&runset), Default::default()).unwrap();
        let spec = MetricSpec::Recall { k: 2 };
        let queries: Vec<QueryId> = qrels.queries().map(str::to_string).collect();
        let own = evaluate_on_queries(&runset, &selection.qrels, spec, queries.clone(), vec![])
            .unwrap();
        let own_score = own
            .means()
            .into_iter()
            .find(|(id, _)| id == selector)
            .unwrap()
            .1;
        // Compare against every alternative singleton assignment for q1.
        for alt in ["r1", "r2"] {
            let mut alt_qrels = Qrels::new();
            alt_qrels.insert("q1", alt, 1).unwrap();
            let seed_q2 = selection.qrels.relevant_set("q2").into_iter().next().unwrap();
            alt_qrels.insert("q2", seed_q2, 1).unwrap();
            let m = evaluate_on_queries(&runset, &alt_qrels, spec, queries.clone(), vec![])
                .unwrap();
            let alt_score = m.means().into_iter().find(|(id, _)| id == selector).unwrap().1;
            assert!(own_score >= alt_score - 1e-12);
        }
    }

    #[test]
    fn incremental_counts_match_quota_and_nesting() {
        let (runset, qrels, _) = tiny_world();
        let fractions = [0.5, 1.0];
        let curve = incremental_study(
            &runset,
            &qrels,
            &fractions,
            &crate::rankstats::default_buckets(),
            MetricSpec::Recall { k: 2 },
            5,
            &StudyOptions::default(),
        )
        .unwrap();
        assert_eq!(curve.fractions, vec![0.5, 1.0]);
        // At fraction 1.0 every non-empty bucket hits tau = 1 exactly.
        for cell in curve.cells.last().unwrap().iter().flatten() {
            assert_eq!(cell.mean_partial_tau, 1.0);
            assert_eq!(cell.mean_error_rate_pct, 0.0);
        }
    }

    #[test]
    fn annotation_orders_nest_and_meet_quota() {
        let (runset, qrels, _) = tiny_world();
        let orders =
            annotation_orders(&runset, &qrels, "sys_b", 1, 42, Default::default()).unwrap();
        assert_eq!(orders.len(), 2);
        for (query, order) in &orders {
            // The order is a permutation of the query's relevant set.
            let as_set: BTreeSet<&str> = order.iter().map(String::as_str).collect();
            assert_eq!(as_set, qrels.relevant_set(query));
            // Quota counts across fractions are nested by construction.
            let q_half = annotation_quota(0.5, order.len());
            let q_full = annotation_quota(1.0, order.len());
            assert!(q_half <= q_full);
            assert_eq!(q_full, order.len());
        }
        // Total annotated docs at fraction f is the sum of per-query quotas.
        let total: usize = orders
            .iter()
            .map(|(_, order)| annotation_quota(0.5, order.len()))
            .sum();
        assert_eq!(total, 2); // two queries with |relevant| = 2 each
    }

    #[test]
    fn incremental_rejects_bad_fractions() {
        let (runset, qrels, _) = tiny_world();
        for fractions in [vec![], vec![0.0, 0.5], vec![0.5, 0.5], vec![0.2, 1.2]] {
            assert!(incremental_study(
                &runset,
                &qrels,
                &fractions,
                &crate::rankstats::default_buckets(),
                MetricSpec::Recall { k: 2 },
                5,
                &StudyOptions::default(),
            )
            .is_err());
        }
    }
}
