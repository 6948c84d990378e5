//! Ranking-comparison statistics: Kendall's tau over system rankings,
//! the discordant-pair error rate, paired t-tests, p-value buckets,
//! partial tau restricted to bucketed pairs, and the concordance score
//! between significance relations.

mod special;

pub use special::{ln_gamma, regularized_incomplete_beta, student_t_two_sided};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricMatrix;
use crate::model::{SystemId, SystemRanking};

/// A half-open p-value interval `[p_min, p_max)`. As the one exception,
/// an interval ending at 1.0 also contains p = 1.0, so a set of buckets
/// covering [0, 1] can classify every pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBucket {
    p_min: f64,
    p_max: f64,
}

impl PairBucket {
    pub fn new(p_min: f64, p_max: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_min) || !(0.0..=1.0).contains(&p_max) || p_min >= p_max {
            return Err(Error::Config(format!(
                "invalid bucket [{p_min}, {p_max}): need 0 <= p_min < p_max <= 1"
            )));
        }
        Ok(Self { p_min, p_max })
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.p_min && (p < self.p_max || (self.p_max == 1.0 && p == 1.0))
    }

    pub fn label(&self) -> String {
        format!("[{},{})", self.p_min, self.p_max)
    }
}

/// The conventional three buckets: clearly separated pairs, significant
/// pairs, and pairs with no significant difference.
pub fn default_buckets() -> Vec<PairBucket> {
    vec![
        PairBucket::new(0.0, 0.01).unwrap(),
        PairBucket::new(0.01, 0.05).unwrap(),
        PairBucket::new(0.05, 1.0).unwrap(),
    ]
}

/// Buckets used together must not overlap.
pub fn validate_buckets(buckets: &[PairBucket]) -> Result<()> {
    for (i, a) in buckets.iter().enumerate() {
        for b in &buckets[i + 1..] {
            if a.p_min < b.p_max && b.p_min < a.p_max {
                return Err(Error::Config(format!(
                    "buckets {} and {} overlap",
                    a.label(),
                    b.label()
                )));
            }
        }
    }
    Ok(())
}

/// Pair counts backing a Kendall tau value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauDetail {
    pub concordant: u64,
    pub discordant: u64,
    pub tied: u64,
    pub pairs: u64,
}

impl TauDetail {
    pub fn tau(&self) -> f64 {
        (self.concordant as f64 - self.discordant as f64) / self.pairs as f64
    }

    pub fn all_tied(&self) -> bool {
        self.tied == self.pairs
    }
}

fn order_in(ranking: &SystemRanking, a: &str, b: &str) -> Ordering {
    let score_a = ranking.score(a).expect("system present");
    let score_b = ranking.score(b).expect("system present");
    score_a.partial_cmp(&score_b).expect("scores finite")
}

fn check_same_systems(a: &SystemRanking, b: &SystemRanking) -> Result<Vec<SystemId>> {
    let set_a = a.system_set();
    if set_a != b.system_set() {
        return Err(Error::MismatchedSystems(
            "rankings cover different systems".into(),
        ));
    }
    if a.len() < 2 {
        return Err(Error::TooFewSystems(a.len()));
    }
    Ok(set_a.into_iter().map(str::to_string).collect())
}

/// Counts concordant/discordant pairs between two rankings of the same
/// systems. A pair tied (equal mean) in either ranking contributes to
/// neither count; the denominator stays `n choose 2`.
pub fn kendall_tau_detail(a: &SystemRanking, b: &SystemRanking) -> Result<TauDetail> {
    let ids = check_same_systems(a, b)?;
    let mut detail = TauDetail {
        concordant: 0,
        discordant: 0,
        tied: 0,
        pairs: 0,
    };
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            detail.pairs += 1;
            let ord_a = order_in(a, &ids[i], &ids[j]);
            let ord_b = order_in(b, &ids[i], &ids[j]);
            match (ord_a, ord_b) {
                (Ordering::Equal, _) | (_, Ordering::Equal) => detail.tied += 1,
                (x, y) if x == y => detail.concordant += 1,
                _ => detail.discordant += 1,
            }
        }
    }
    Ok(detail)
}

/// Kendall's tau: `(C - D) / (n choose 2)`.
pub fn kendall_tau(a: &SystemRanking, b: &SystemRanking) -> Result<f64> {
    Ok(kendall_tau_detail(a, b)?.tau())
}

/// The probability (in percent) of observing a discordant pair:
/// `100 * (1 - tau) / 2`.
pub fn error_rate(tau: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::Range(format!("tau {tau} outside [-1, 1]")));
    }
    Ok(100.0 * (1.0 - tau) / 2.0)
}

/// Result of a two-sided paired t-test.
///
/// Zero-variance inputs are degenerate rather than errors: all-zero
/// differences give `p = 1`, constant nonzero differences give a signed
/// infinite statistic and `p = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub degenerate: bool,
    pub warning: Option<String>,
}

/// Two-sided paired t-test on per-query differences.
pub fn paired_t_test(diffs: &[f64]) -> Result<TTest> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::TooFewQueries(n));
    }
    let df = (n - 1) as f64;
    if diffs.iter().all(|&d| d == diffs[0]) {
        return Ok(if diffs[0] == 0.0 {
            TTest {
                t: 0.0,
                df,
                p: 1.0,
                degenerate: true,
                warning: None,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(diffs[0]),
                df,
                p: 0.0,
                degenerate: true,
                warning: Some("zero variance with nonzero mean difference".into()),
            }
        });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / df;
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let p = student_t_two_sided(t, df)?;
    Ok(TTest {
        t,
        df,
        p,
        degenerate: false,
        warning: None,
    })
}

/// Classification of one unordered system pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInfo {
    /// The system with the strictly larger mean; `None` on an exact tie.
    pub better: Option<SystemId>,
    pub p: f64,
    /// Index into the bucket list, when some bucket contains `p`.
    pub bucket: Option<usize>,
}

/// All unordered pairs of a matrix classified by mean difference and
/// paired t-test p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassification {
    buckets: Vec<PairBucket>,
    pairs: BTreeMap<(SystemId, SystemId), PairInfo>,
}

impl PairClassification {
    pub fn buckets(&self) -> &[PairBucket] {
        &self.buckets
    }

    pub fn pairs(&self) -> &BTreeMap<(SystemId, SystemId), PairInfo> {
        &self.pairs
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&PairInfo> {
        let key = ordered_key(a, b);
        self.pairs.get(&key)
    }

    /// Unordered pairs whose p-value falls in the given bucket.
    pub fn pairs_in_bucket(&self, bucket: usize) -> BTreeSet<(SystemId, SystemId)> {
        self.pairs
            .iter()
            .filter(|(_, info)| info.bucket == Some(bucket))
            .map(|(key, _)| key.clone())
            .collect()
    }
}

fn ordered_key(a: &str, b: &str) -> (SystemId, SystemId) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Classifies every unordered system pair of the matrix: better system by
/// mean, p-value from the paired t-test on per-query differences, and the
/// containing bucket if any.
pub fn classify_pairs(
    matrix: &MetricMatrix,
    buckets: &[PairBucket],
) -> Result<PairClassification> {
    validate_buckets(buckets)?;
    let systems = matrix.systems();
    if systems.len() < 2 {
        return Err(Error::TooFewSystems(systems.len()));
    }
    let mut pairs = BTreeMap::new();
    for i in 0..systems.len() {
        for j in i + 1..systems.len() {
            let row_i = matrix.row(i);
            let row_j = matrix.row(j);
            let diffs: Vec<f64> = row_i.iter().zip(row_j).map(|(a, b)| a - b).collect();
            let test = paired_t_test(&diffs)?;
            let mean_i = matrix.system_mean(i);
            let mean_j = matrix.system_mean(j);
            let better = match mean_i.partial_cmp(&mean_j).expect("finite means") {
                Ordering::Greater => Some(systems[i].clone()),
                Ordering::Less => Some(systems[j].clone()),
                Ordering::Equal => None,
            };
            let bucket = buckets.iter().position(|b| b.contains(test.p));
            pairs.insert(
                ordered_key(&systems[i], &systems[j]),
                PairInfo {
                    better,
                    p: test.p,
                    bucket,
                },
            );
        }
    }
    Ok(PairClassification {
        buckets: buckets.to_vec(),
        pairs,
    })
}

/// Kendall's tau restricted to a set of unordered pairs: concordant minus
/// discordant over the pair count, ties counting for neither.
pub fn partial_kendall_tau(
    candidate: &SystemRanking,
    reference: &SystemRanking,
    pairs: &BTreeSet<(SystemId, SystemId)>,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyBucket);
    }
    let cand_systems = candidate.system_set();
    let ref_systems = reference.system_set();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for (a, b) in pairs {
        if !cand_systems.contains(a.as_str())
            || !cand_systems.contains(b.as_str())
            || !ref_systems.contains(a.as_str())
            || !ref_systems.contains(b.as_str())
        {
            return Err(Error::MismatchedSystems(format!(
                "pair ({a}, {b}) not covered by both rankings"
            )));
        }
        let ord_c = order_in(candidate, a, b);
        let ord_r = order_in(reference, a, b);
        match (ord_c, ord_r) {
            (Ordering::Equal, _) | (_, Ordering::Equal) => {}
            (x, y) if x == y => concordant += 1,
            _ => discordant += 1,
        }
    }
    Ok((concordant - discordant) as f64 / pairs.len() as f64)
}

/// The directed "significantly better" relation over a set of systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRelation {
    systems: Vec<SystemId>,
    alpha: f64,
    flags: Vec<Vec<bool>>,
}

impl SignificanceRelation {
    /// Builds a relation from an explicit list of directed pairs
    /// `(better, worse)`. Fails if both directions of a pair appear.
    pub fn from_pairs(
        systems: Vec<SystemId>,
        better_pairs: &[(&str, &str)],
        alpha: f64,
    ) -> Result<Self> {
        let index: BTreeMap<&str, usize> = systems
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        if index.len() != systems.len() {
            return Err(Error::Config("duplicate system id".into()));
        }
        let n = systems.len();
        let mut flags = vec![vec![false; n]; n];
        for (a, b) in better_pairs {
            let (&i, &j) = (
                index
                    .get(a)
                    .ok_or_else(|| Error::MismatchedSystems(format!("unknown system `{a}`")))?,
                index
                    .get(b)
                    .ok_or_else(|| Error::MismatchedSystems(format!("unknown system `{b}`")))?,
            );
            if i == j {
                return Err(Error::Config(format!("system `{a}` paired with itself")));
            }
            if flags[j][i] {
                return Err(Error::Config(format!(
                    "both directions of pair ({a}, {b}) marked significant"
                )));
            }
            flags[i][j] = true;
        }
        Ok(Self {
            systems,
            alpha,
            flags,
        })
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Whether `a` is significantly better than `b`.
    pub fn better(&self, a: &str, b: &str) -> bool {
        let ia = self.systems.iter().position(|s| s == a);
        let ib = self.systems.iter().position(|s| s == b);
        match (ia, ib) {
            (Some(i), Some(j)) if i != j => self.flags[i][j],
            _ => false,
        }
    }
}

/// Builds the significance relation of a matrix: system `a` beats `b`
/// when its mean is strictly larger and the pair's p-value is below
/// `alpha`.
#[allow(clippy::needless_range_loop)]
pub fn significance_relation(matrix: &MetricMatrix, alpha: f64) -> Result<SignificanceRelation> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Range(format!("alpha {alpha} outside (0, 1)")));
    }
    let systems: Vec<SystemId> = matrix.systems().to_vec();
    if systems.len() < 2 {
        return Err(Error::TooFewSystems(systems.len()));
    }
    let n = systems.len();
    let mut flags = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let diffs: Vec<f64> = matrix
                .row(i)
                .iter()
                .zip(matrix.row(j))
                .map(|(a, b)| a - b)
                .collect();
            let test = paired_t_test(&diffs)?;
            if test.p < alpha {
                match matrix
                    .system_mean(i)
                    .partial_cmp(&matrix.system_mean(j))
                    .expect("finite means")
                {
                    Ordering::Greater => flags[i][j] = true,
                    Ordering::Less => flags[j][i] = true,
                    Ordering::Equal => {}
                }
            }
        }
    }
    Ok(SignificanceRelation {
        systems,
        alpha,
        flags,
    })
}

/// Fraction of ordered system pairs on which two significance relations
/// agree (XNOR over the directed flags).
pub fn concordance(a: &SignificanceRelation, b: &SignificanceRelation) -> Result<f64> {
    let set_a: BTreeSet<&str> = a.systems.iter().map(String::as_str).collect();
    let set_b: BTreeSet<&str> = b.systems.iter().map(String::as_str).collect();
    if set_a != set_b {
        return Err(Error::MismatchedSystems(
            "relations cover different systems".into(),
        ));
    }
    let n = set_a.len();
    if n < 2 {
        return Err(Error::TooFewSystems(n));
    }
    let ids: Vec<&str> = set_a.into_iter().collect();
    let mut agreements = 0u64;
    for &x in &ids {
        for &y in &ids {
            if x == y {
                continue;
            }
            if a.better(x, y) == b.better(x, y) {
                agreements += 1;
            }
        }
    }
    Ok(agreements as f64 / (n * (n - 1)) as f64)
}
