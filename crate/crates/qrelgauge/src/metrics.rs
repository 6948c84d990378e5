//! Per-query retrieval metrics (binary relevance) and their aggregation
//! into a per-(system, query) matrix.
//!
//! Conventions match trec_eval: average precision at a cutoff divides by
//! the total number of relevant documents, and gains are binary.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Qrels, QueryId, Run, RunSet, Strictness, SystemId, SystemRanking};

/// Which metric to compute, with a rank cutoff where applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    Recall { k: usize },
    Ndcg { k: usize },
    Map { k: usize },
    RPrecision,
}

impl MetricSpec {
    fn validate(self) -> Result<Self> {
        match self {
            MetricSpec::Recall { k } | MetricSpec::Ndcg { k } | MetricSpec::Map { k } if k == 0 => {
                Err(Error::Config("metric cutoff k must be >= 1".into()))
            }
            other => Ok(other),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Recall { k } => write!(f, "recall@{k}"),
            MetricSpec::Ndcg { k } => write!(f, "ndcg@{k}"),
            MetricSpec::Map { k } => write!(f, "map@{k}"),
            MetricSpec::RPrecision => write!(f, "r_precision"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "r_precision" {
            return Ok(MetricSpec::RPrecision);
        }
        let (name, k) = s
            .split_once('@')
            .ok_or_else(|| Error::Config(format!("invalid metric `{s}`")))?;
        let k: usize = k
            .parse()
            .map_err(|_| Error::Config(format!("invalid metric cutoff in `{s}`")))?;
        let spec = match name {
            "recall" => MetricSpec::Recall { k },
            "ndcg" => MetricSpec::Ndcg { k },
            "map" => MetricSpec::Map { k },
            _ => return Err(Error::Config(format!("unknown metric `{name}`"))),
        };
        spec.validate()
    }
}

fn relevant_count_checked(qrels: &Qrels, query: &str) -> Result<usize> {
    if !qrels.contains_query(query) {
        return Err(Error::MissingQuery(query.to_string()));
    }
    let n = qrels.relevant_count(query);
    if n == 0 {
        return Err(Error::NoRelevant(query.to_string()));
    }
    Ok(n)
}

/// Fraction of the query's relevant documents found in the top `k`.
pub fn recall_at_k(run: &Run, qrels: &Qrels, query: &str, k: usize) -> Result<f64> {
    let total = relevant_count_checked(qrels, query)?;
    let hits = run.relevant_in_top_k(qrels, query, k)?.len();
    Ok(hits as f64 / total as f64)
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// Normalized discounted cumulative gain at `k` with binary gains.
pub fn ndcg_at_k(run: &Run, qrels: &Qrels, query: &str, k: usize) -> Result<f64> {
    let total = relevant_count_checked(qrels, query)?;
    let list = run
        .ranking(query)
        .ok_or_else(|| Error::MissingQuery(query.to_string()))?;
    let dcg: f64 = list
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, (doc, _))| qrels.is_relevant(query, doc))
        .map(|(i, _)| 1.0 / discount(i + 1))
        .sum();
    let ideal: f64 = (1..=total.min(k)).map(|i| 1.0 / discount(i)).sum();
    Ok(dcg / ideal)
}

/// Average precision at `k`, normalized by the total number of relevant
/// documents (trec_eval's `map_cut` convention).
pub fn average_precision_at_k(run: &Run, qrels: &Qrels, query: &str, k: usize) -> Result<f64> {
    let total = relevant_count_checked(qrels, query)?;
    let list = run
        .ranking(query)
        .ok_or_else(|| Error::MissingQuery(query.to_string()))?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, (doc, _)) in list.iter().take(k).enumerate() {
        if qrels.is_relevant(query, doc) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

/// Precision at rank R, where R is the query's relevant-document count.
/// A ranked list shorter than R simply contributes no further hits.
pub fn r_precision(run: &Run, qrels: &Qrels, query: &str) -> Result<f64> {
    let total = relevant_count_checked(qrels, query)?;
    let hits = run.relevant_in_top_k(qrels, query, total)?.len();
    Ok(hits as f64 / total as f64)
}

/// Computes one metric value for one (run, query) pair.
pub fn score(run: &Run, qrels: &Qrels, query: &str, spec: MetricSpec) -> Result<f64> {
    match spec {
        MetricSpec::Recall { k } => recall_at_k(run, qrels, query, k),
        MetricSpec::Ndcg { k } => ndcg_at_k(run, qrels, query, k),
        MetricSpec::Map { k } => average_precision_at_k(run, qrels, query, k),
        MetricSpec::RPrecision => r_precision(run, qrels, query),
    }
}

/// Fully-populated per-(system, query) metric values.
///
/// Rows follow the run-set order; queries are sorted. Means accumulate in
/// query order, so results do not depend on worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMatrix {
    systems: Vec<SystemId>,
    queries: Vec<QueryId>,
    values: Vec<Vec<f64>>,
    spec: MetricSpec,
    skipped: Vec<QueryId>,
}

impl MetricMatrix {
    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    pub fn queries(&self) -> &[QueryId] {
        &self.queries
    }

    pub fn spec(&self) -> MetricSpec {
        self.spec
    }

    /// Queries dropped in lenient mode for having no relevant documents.
    pub fn skipped_queries(&self) -> &[QueryId] {
        &self.skipped
    }

    pub fn row(&self, system: usize) -> &[f64] {
        &self.values[system]
    }

    pub fn row_for(&self, system_id: &str) -> Option<&[f64]> {
        self.systems
            .iter()
            .position(|s| s == system_id)
            .map(|i| self.row(i))
    }

    pub fn value(&self, system: usize, query: usize) -> f64 {
        self.values[system][query]
    }

    pub fn system_mean(&self, system: usize) -> f64 {
        let row = &self.values[system];
        row.iter().sum::<f64>() / row.len() as f64
    }

    pub fn means(&self) -> Vec<(SystemId, f64)> {
        self.systems
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), self.system_mean(i)))
            .collect()
    }

    /// Systems ordered by mean score.
    pub fn ranking(&self) -> Result<SystemRanking> {
        SystemRanking::new(self.means())
    }
}

/// Evaluates every system of the run set over the shared query set.
///
/// Strict mode requires the run universe and the judged queries to line
/// up exactly and every query to have at least one relevant document.
/// Lenient mode evaluates the intersection and skips zero-relevant
/// queries, recording them in the matrix.
pub fn evaluate(
    runset: &RunSet,
    qrels: &Qrels,
    spec: MetricSpec,
    mode: Strictness,
) -> Result<MetricMatrix> {
    spec.validate()?;
    let universe = runset.query_universe();
    let judged: BTreeSet<&str> = qrels.queries().collect();
    let mut queries: Vec<QueryId> = Vec::new();
    let mut skipped: Vec<QueryId> = Vec::new();
    match mode {
        Strictness::Strict => {
            let universe_set: BTreeSet<&str> = universe.iter().map(String::as_str).collect();
            if universe_set != judged {
                let diff: Vec<&&str> = universe_set.symmetric_difference(&judged).take(3).collect();
                return Err(Error::MismatchedQueries(format!(
                    "runs and qrels disagree (e.g. {diff:?})"
                )));
            }
            for q in universe {
                if qrels.relevant_count(q) == 0 {
                    return Err(Error::NoRelevant(q.clone()));
                }
                queries.push(q.clone());
            }
        }
        Strictness::Lenient => {
            for q in universe {
                if !judged.contains(q.as_str()) {
                    continue;
                }
                if qrels.relevant_count(q) == 0 {
                    skipped.push(q.clone());
                } else {
                    queries.push(q.clone());
                }
            }
        }
    }
    if queries.is_empty() {
        return Err(Error::NoCommonQueries);
    }
    evaluate_on_queries(runset, qrels, spec, queries, skipped)
}

pub(crate) fn evaluate_on_queries(
    runset: &RunSet,
    qrels: &Qrels,
    spec: MetricSpec,
    queries: Vec<QueryId>,
    skipped: Vec<QueryId>,
) -> Result<MetricMatrix> {
    let values: Vec<Vec<f64>> = runset
        .runs()
        .par_iter()
        .map(|run| {
            queries
                .iter()
                .map(|q| score(run, qrels, q, spec))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricMatrix {
        systems: runset.runs().iter().map(|r| r.system_id().to_string()).collect(),
        queries,
        values,
        spec,
        skipped,
    })
}
