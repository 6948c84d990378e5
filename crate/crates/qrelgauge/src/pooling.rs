//! Pool construction and coverage accounting: how much of the known
//! relevant material the union of several systems' top-k lists captures,
//! how coverage grows with the number of systems or the pool depth, and
//! logarithmic extrapolation beyond what was measured.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocId, Qrels, QueryId, RunSet, Strictness};
use crate::rng::{domain, stream};

/// Largest number of subsets the exact mode will enumerate.
pub const EXACT_SUBSET_BUDGET: u64 = 100_000;

/// Union over systems of the relevant documents in each top-`k` list.
pub fn pool_union<'a>(
    runset: &'a RunSet,
    qrels: &Qrels,
    query: &str,
    k: usize,
) -> Result<BTreeSet<&'a str>> {
    let mut pool = BTreeSet::new();
    for run in runset.runs() {
        pool.extend(run.relevant_in_top_k(qrels, query, k)?);
    }
    Ok(pool)
}

fn eligible_queries(runset: &RunSet, qrels: &Qrels, mode: Strictness) -> Result<Vec<QueryId>> {
    let mut queries = Vec::new();
    for query in runset.query_universe() {
        if !qrels.contains_query(query) {
            match mode {
                Strictness::Strict => return Err(Error::MissingQuery(query.clone())),
                Strictness::Lenient => continue,
            }
        }
        if qrels.relevant_count(query) == 0 {
            match mode {
                Strictness::Strict => return Err(Error::NoRelevant(query.clone())),
                Strictness::Lenient => continue,
            }
        }
        queries.push(query.clone());
    }
    if queries.is_empty() {
        return Err(Error::NoCommonQueries);
    }
    Ok(queries)
}

/// Mean over queries of `|pool(q)| / |relevant(q)|`.
pub fn coverage(runset: &RunSet, qrels: &Qrels, k: usize, mode: Strictness) -> Result<f64> {
    let queries = eligible_queries(runset, qrels, mode)?;
    let mut total = 0.0;
    for query in &queries {
        let pool = pool_union(runset, qrels, query, k)?;
        total += pool.len() as f64 / qrels.relevant_count(query) as f64;
    }
    Ok(total / queries.len() as f64)
}

/// Per-query bitmasks of which relevant documents each system retrieves
/// in its top-k; unions over system subsets become word-wise ORs.
struct PoolIndex {
    /// Per query: (relevant-count, per-system bitmask blocks).
    queries: Vec<(usize, Vec<Vec<u64>>)>,
}

impl PoolIndex {
    fn build(runset: &RunSet, qrels: &Qrels, k: usize, queries: &[QueryId]) -> Result<Self> {
        let n_systems = runset.len();
        let mut out = Vec::with_capacity(queries.len());
        for query in queries {
            let mut doc_bits: BTreeMap<&str, usize> = BTreeMap::new();
            let mut per_system: Vec<Vec<&str>> = Vec::with_capacity(n_systems);
            for run in runset.runs() {
                let docs: Vec<&str> = run
                    .relevant_in_top_k(qrels, query, k)?
                    .into_iter()
                    .collect();
                for doc in &docs {
                    let next = doc_bits.len();
                    doc_bits.entry(doc).or_insert(next);
                }
                per_system.push(docs);
            }
            let words = doc_bits.len().div_ceil(64).max(1);
            let masks: Vec<Vec<u64>> = per_system
                .into_iter()
                .map(|docs| {
                    let mut mask = vec![0u64; words];
                    for doc in docs {
                        let bit = doc_bits[doc];
                        mask[bit / 64] |= 1u64 << (bit % 64);
                    }
                    mask
                })
                .collect();
            out.push((qrels.relevant_count(query), masks));
        }
        Ok(Self { queries: out })
    }

    /// Coverage of the subset of systems given by `members` (indices).
    #[allow(clippy::needless_range_loop)]
    fn subset_coverage(&self, members: &[usize]) -> f64 {
        let mut total = 0.0;
        for (relevant, masks) in &self.queries {
            let words = masks[0].len();
            let mut covered = 0u32;
            for word in 0..words {
                let acc = members
                    .iter()
                    .fold(0u64, |acc, &member| acc | masks[member][word]);
                covered += acc.count_ones();
            }
            total += covered as f64 / *relevant as f64;
        }
        total / self.queries.len() as f64
    }
}

fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// How to average coverage over size-`t` subsets of the systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// Enumerate every subset; refuses to run past [`EXACT_SUBSET_BUDGET`].
    Exact,
    /// Average over uniformly sampled subsets.
    MonteCarlo { samples: u64, seed: u64 },
}

/// An expected-coverage value; Monte Carlo estimates carry the standard
/// error of the sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Expected coverage of a uniformly random subset of `t` systems.
pub fn expected_coverage(
    runset: &RunSet,
    qrels: &Qrels,
    k: usize,
    t: usize,
    mode: CoverageMode,
    strictness: Strictness,
) -> Result<CoverageEstimate> {
    let n = runset.len();
    if t == 0 || t > n {
        return Err(Error::Range(format!(
            "subset size {t} outside 1..={n} systems"
        )));
    }
    let queries = eligible_queries(runset, qrels, strictness)?;
    let index = PoolIndex::build(runset, qrels, k, &queries)?;
    match mode {
        CoverageMode::Exact => {
            let subsets = binomial(n as u64, t as u64);
            if subsets > EXACT_SUBSET_BUDGET as u128 {
                return Err(Error::EnumerationBudget {
                    subsets,
                    budget: EXACT_SUBSET_BUDGET,
                });
            }
            let mut total = 0.0;
            let mut count = 0u64;
            for members in (0..n).combinations(t) {
                total += index.subset_coverage(&members);
                count += 1;
            }
            Ok(CoverageEstimate {
                value: total / count as f64,
                std_error: None,
            })
        }
        CoverageMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Config("monte carlo needs at least 1 sample".into()));
            }
            let values: Vec<f64> = (0..samples)
                .map(|i| {
                    let mut rng = stream(seed, &[domain::POOL_MC, i]);
                    let mut all: Vec<usize> = (0..n).collect();
                    all.shuffle(&mut rng);
                    let members = &all[..t];
                    index.subset_coverage(members)
                })
                .collect();
            let mean = values.iter().sum::<f64>() / samples as f64;
            let std_error = if samples > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (samples - 1) as f64;
                Some((var / samples as f64).sqrt())
            } else {
                None
            };
            Ok(CoverageEstimate {
                value: mean,
                std_error,
            })
        }
    }
}

/// Closed-form least-squares fit of `y = a + b * ln(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub rmse: f64,
    pub max_error: f64,
}

impl LogFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a + self.b * x.ln()
    }
}

/// Fits `y = a + b * ln(x)` by least squares in (ln x, y) space and
/// reports the in-sample RMSE and maximum absolute residual.
pub fn fit_log(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    for &(x, _) in points {
        if x < 1.0 {
            return Err(Error::Range(format!("fit requires x >= 1, got {x}")));
        }
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|&(x, _)| x.ln()).collect();
    let mean_lx = lx.iter().sum::<f64>() / n;
    let mean_y = points.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mean_lx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all x values are equal".into()));
    }
    let sxy: f64 = lx
        .iter()
        .zip(points)
        .map(|(v, &(_, y))| (v - mean_lx) * (y - mean_y))
        .sum();
    let b = sxy / sxx;
    let a = mean_y - b * mean_lx;
    let fit = LogFit {
        a,
        b,
        rmse: 0.0,
        max_error: 0.0,
    };
    let residuals: Vec<f64> = points.iter().map(|&(x, y)| y - fit.predict(x)).collect();
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let max_error = residuals.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    Ok(LogFit {
        a,
        b,
        rmse,
        max_error,
    })
}

/// Observed points, the fitted log curve, and extrapolated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub points: Vec<(u64, f64)>,
    pub fit: LogFit,
    pub extrapolated: Vec<(u64, f64)>,
}

impl CoverageCurve {
    fn from_points(points: Vec<(u64, f64)>, extrapolate_to: u64) -> Result<Self> {
        // x = 0 points (an empty pool) are reported but cannot enter the
        // logarithmic fit.
        let float_points: Vec<(f64, f64)> = points
            .iter()
            .filter(|&&(x, _)| x >= 1)
            .map(|&(x, y)| (x as f64, y))
            .collect();
        let fit = fit_log(&float_points)?;
        let last_x = points.last().map(|&(x, _)| x).unwrap_or(0);
        let extrapolated = (last_x + 1..=extrapolate_to)
            .map(|x| (x, fit.predict(x as f64)))
            .collect();
        Ok(Self {
            points,
            fit,
            extrapolated,
        })
    }
}

/// Computes expected coverage at every subset size `t = 1..=|systems|`
/// (exact mode), fits the log curve, and extrapolates through `t_max`.
pub fn extrapolate_systems(
    runset: &RunSet,
    qrels: &Qrels,
    k: usize,
    t_max: usize,
    strictness: Strictness,
) -> Result<CoverageCurve> {
    let n = runset.len();
    if t_max <= n {
        return Err(Error::Config(format!(
            "t_max {t_max} must exceed the {n} observed systems"
        )));
    }
    let points: Vec<(u64, f64)> = (1..=n)
        .map(|t| {
            expected_coverage(runset, qrels, k, t, CoverageMode::Exact, strictness)
                .map(|est| (t as u64, est.value))
        })
        .collect::<Result<_>>()?;
    CoverageCurve::from_points(points, t_max as u64)
}

/// Depth-sweep result: how many annotated-relevant pool documents are
/// identified by depth `d`, and how many of those are new relative to an
/// existing judgment set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthAnalysis {
    pub identified: CoverageCurve,
    pub new_docs: CoverageCurve,
}

/// Assigns every relevant pool document its minimum rank across systems,
/// then counts identified and newly-identified documents per depth and
/// extrapolates both curves.
pub fn depth_analysis(
    runset: &RunSet,
    known_qrels: &Qrels,
    pool_qrels: &Qrels,
    depths: &[usize],
    extrapolate_to: usize,
) -> Result<DepthAnalysis> {
    if depths.is_empty() {
        return Err(Error::Config("no depths given".into()));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("depths must be strictly ascending".into()));
    }
    if depths.iter().filter(|&&d| d >= 1).count() < 2 {
        return Err(Error::Config(
            "need at least 2 depths >= 1 to fit a curve".into(),
        ));
    }
    let max_depth = *depths.last().expect("non-empty");
    if extrapolate_to <= max_depth {
        return Err(Error::Config(format!(
            "extrapolation depth {extrapolate_to} must exceed max observed depth {max_depth}"
        )));
    }

    // Minimum rank over systems for each relevant (query, doc) in the pool.
    let mut min_rank: BTreeMap<(QueryId, DocId), usize> = BTreeMap::new();
    for run in runset.runs() {
        for query in runset.query_universe() {
            let list = run
                .ranking(query)
                .ok_or_else(|| Error::MissingQuery(query.clone()))?;
            for (i, (doc, _)) in list.iter().take(max_depth).enumerate() {
                if pool_qrels.is_relevant(query, doc) {
                    let rank = i + 1;
                    min_rank
                        .entry((query.clone(), doc.clone()))
                        .and_modify(|r| *r = (*r).min(rank))
                        .or_insert(rank);
                }
            }
        }
    }

    let mut identified_points = Vec::with_capacity(depths.len());
    let mut new_points = Vec::with_capacity(depths.len());
    for &depth in depths {
        let identified = min_rank.values().filter(|&&r| r <= depth).count();
        let new = min_rank
            .iter()
            .filter(|(_, &r)| r <= depth)
            .filter(|((query, doc), _)| !known_qrels.is_relevant(query, doc))
            .count();
        identified_points.push((depth as u64, identified as f64));
        new_points.push((depth as u64, new as f64));
    }

    Ok(DepthAnalysis {
        identified: CoverageCurve::from_points(identified_points, extrapolate_to as u64)?,
        new_docs: CoverageCurve::from_points(new_points, extrapolate_to as u64)?,
    })
}
