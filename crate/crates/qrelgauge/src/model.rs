//! In-memory data model: relevance judgments, ranked runs, run sets,
//! document metadata, and system rankings.
//!
//! All types are immutable once constructed and safe to share across
//! threads. Ranked lists are kept in canonical order (score descending,
//! doc id descending on ties) so every downstream computation sees the
//! same ordering regardless of input order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type QueryId = String;
pub type DocId = String;
pub type SystemId = String;

/// Strict mode turns data mismatches into errors; lenient mode restricts
/// analyses to what lines up and records warnings instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

/// Relevance judgments: per query, a map from doc id to an integer grade.
/// A document counts as relevant iff its grade is strictly positive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    entries: BTreeMap<QueryId, BTreeMap<DocId, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment. Returns `Ok(false)` when an identical judgment
    /// was already present (callers may record a dedup warning) and fails
    /// when the same (query, doc) pair carries a different grade.
    pub fn insert(&mut self, query: impl Into<QueryId>, doc: impl Into<DocId>, grade: u32) -> Result<bool> {
        let query = query.into();
        let doc = doc.into();
        let docs = self.entries.entry(query.clone()).or_default();
        match docs.get(&doc) {
            Some(&existing) if existing == grade => Ok(false),
            Some(&existing) => Err(Error::ConflictingGrade {
                query,
                doc,
                existing,
                new: grade,
            }),
            None => {
                docs.insert(doc, grade);
                Ok(true)
            }
        }
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn query_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_query(&self, query: &str) -> bool {
        self.entries.contains_key(query)
    }

    pub fn grade(&self, query: &str, doc: &str) -> Option<u32> {
        self.entries.get(query).and_then(|d| d.get(doc)).copied()
    }

    pub fn is_relevant(&self, query: &str, doc: &str) -> bool {
        self.grade(query, doc).is_some_and(|g| g > 0)
    }

    /// All judged documents of a query with their grades.
    pub fn judgments(&self, query: &str) -> Option<&BTreeMap<DocId, u32>> {
        self.entries.get(query)
    }

    /// The set of relevant (grade > 0) documents of a query.
    pub fn relevant_set(&self, query: &str) -> BTreeSet<&str> {
        self.entries
            .get(query)
            .map(|docs| {
                docs.iter()
                    .filter(|(_, &g)| g > 0)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn relevant_count(&self, query: &str) -> usize {
        self.entries
            .get(query)
            .map(|docs| docs.values().filter(|&&g| g > 0).count())
            .unwrap_or(0)
    }

    pub fn total_relevant(&self) -> usize {
        self.entries
            .values()
            .map(|docs| docs.values().filter(|&&g| g > 0).count())
            .sum()
    }

    /// Iterates `(query, doc, grade)` in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.entries.iter().flat_map(|(q, docs)| {
            docs.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g))
        })
    }
}

/// Sorts a ranked list into canonical order: score descending, ties broken
/// by doc id descending. Idempotent, and a permutation of its input.
pub fn canonical_order(list: &mut [(DocId, f64)]) {
    list.sort_by(|(doc_a, score_a), (doc_b, score_b)| {
        score_b
            .partial_cmp(score_a)
            .expect("scores are finite")
            .then_with(|| doc_b.cmp(doc_a))
    });
}

/// One retrieval system's ranked output over a set of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    system_id: SystemId,
    rankings: BTreeMap<QueryId, Vec<(DocId, f64)>>,
}

impl Run {
    /// Builds a run, canonicalizing every per-query list. Fails on
    /// duplicate doc ids within a query or non-finite scores.
    pub fn new(
        system_id: impl Into<SystemId>,
        rankings: BTreeMap<QueryId, Vec<(DocId, f64)>>,
    ) -> Result<Self> {
        let system_id = system_id.into();
        let mut canonical = BTreeMap::new();
        for (query, mut list) in rankings {
            let mut seen = BTreeSet::new();
            for (doc, score) in &list {
                if !score.is_finite() {
                    return Err(Error::Range(format!(
                        "non-finite score for query `{query}`, doc `{doc}`"
                    )));
                }
                if !seen.insert(doc.clone()) {
                    return Err(Error::DuplicateDoc {
                        query,
                        doc: doc.clone(),
                    });
                }
            }
            canonical_order(&mut list);
            canonical.insert(query, list);
        }
        Ok(Self {
            system_id,
            rankings: canonical,
        })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn query_set(&self) -> BTreeSet<&str> {
        self.rankings.keys().map(String::as_str).collect()
    }

    pub fn contains_query(&self, query: &str) -> bool {
        self.rankings.contains_key(query)
    }

    /// The canonical ranked list for a query.
    pub fn ranking(&self, query: &str) -> Option<&[(DocId, f64)]> {
        self.rankings.get(query).map(Vec::as_slice)
    }

    /// Relevant documents among the first `min(k, len)` entries of the
    /// canonical list.
    pub fn relevant_in_top_k<'a>(
        &'a self,
        qrels: &Qrels,
        query: &str,
        k: usize,
    ) -> Result<BTreeSet<&'a str>> {
        let list = self
            .rankings
            .get(query)
            .ok_or_else(|| Error::MissingQuery(query.to_string()))?;
        if !qrels.contains_query(query) {
            return Err(Error::MissingQuery(query.to_string()));
        }
        Ok(list
            .iter()
            .take(k)
            .filter(|(doc, _)| qrels.is_relevant(query, doc))
            .map(|(doc, _)| doc.as_str())
            .collect())
    }

    /// Rank (1-based) of the first relevant document, if any.
    pub fn first_relevant(&self, qrels: &Qrels, query: &str) -> Option<(usize, &str)> {
        self.rankings.get(query).and_then(|list| {
            list.iter()
                .enumerate()
                .find(|(_, (doc, _))| qrels.is_relevant(query, doc))
                .map(|(i, (doc, _))| (i + 1, doc.as_str()))
        })
    }
}

/// A collection of runs from distinct systems over a shared query universe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSet {
    runs: Vec<Run>,
    universe: BTreeSet<QueryId>,
}

impl RunSet {
    /// Builds a run set. In strict mode every run must cover exactly the
    /// same queries; in lenient mode the universe is the intersection.
    pub fn new(runs: Vec<Run>, mode: Strictness) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Config("run set is empty".into()));
        }
        let mut ids = BTreeSet::new();
        for run in &runs {
            if !ids.insert(run.system_id().to_string()) {
                return Err(Error::Config(format!(
                    "duplicate system id `{}`",
                    run.system_id()
                )));
            }
        }
        let first: BTreeSet<QueryId> = runs[0].queries().map(str::to_string).collect();
        let universe = match mode {
            Strictness::Strict => {
                for run in &runs[1..] {
                    let qs: BTreeSet<QueryId> = run.queries().map(str::to_string).collect();
                    if qs != first {
                        let missing: Vec<_> = first.symmetric_difference(&qs).take(3).cloned().collect();
                        return Err(Error::MismatchedQueries(format!(
                            "run `{}` differs from `{}` (e.g. {:?})",
                            run.system_id(),
                            runs[0].system_id(),
                            missing
                        )));
                    }
                }
                first
            }
            Strictness::Lenient => runs[1..].iter().fold(first, |acc, run| {
                acc.intersection(&run.query_set().iter().map(|s| s.to_string()).collect())
                    .cloned()
                    .collect()
            }),
        };
        Ok(Self { runs, universe })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn get(&self, system_id: &str) -> Option<&Run> {
        self.runs.iter().find(|r| r.system_id() == system_id)
    }

    pub fn system_ids(&self) -> Vec<&str> {
        self.runs.iter().map(Run::system_id).collect()
    }

    pub fn query_universe(&self) -> &BTreeSet<QueryId> {
        &self.universe
    }

    /// A run set over a subset of systems, preserving run order.
    pub fn subset(&self, keep: &BTreeSet<&str>) -> Result<RunSet> {
        let runs: Vec<Run> = self
            .runs
            .iter()
            .filter(|r| keep.contains(r.system_id()))
            .cloned()
            .collect();
        if runs.len() != keep.len() {
            return Err(Error::MismatchedSystems(format!(
                "requested {} systems, found {}",
                keep.len(),
                runs.len()
            )));
        }
        RunSet::new(runs, Strictness::Strict)
    }
}

/// Per-document metadata: reference count (popularity) and word count
/// (length). Feeds the biased single-relevant selection policies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    entries: BTreeMap<DocId, (u64, u64)>,
}

impl DocMeta {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `Ok(false)` on an identical duplicate, fails when the same
    /// doc id reappears with different values.
    pub fn insert(&mut self, doc: impl Into<DocId>, popularity: u64, length: u64) -> Result<bool> {
        let doc = doc.into();
        match self.entries.get(&doc) {
            Some(&existing) if existing == (popularity, length) => Ok(false),
            Some(_) => Err(Error::ConflictingMeta(doc)),
            None => {
                self.entries.insert(doc, (popularity, length));
                Ok(true)
            }
        }
    }

    pub fn popularity(&self, doc: &str) -> Option<u64> {
        self.entries.get(doc).map(|&(p, _)| p)
    }

    pub fn length(&self, doc: &str) -> Option<u64> {
        self.entries.get(doc).map(|&(_, l)| l)
    }

    pub fn contains(&self, doc: &str) -> bool {
        self.entries.contains_key(doc)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.entries.iter().map(|(d, &(p, l))| (d.as_str(), p, l))
    }
}

/// Systems ordered by mean metric score, descending. Ties keep the same
/// convention as ranked lists: higher system id first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRanking {
    entries: Vec<(SystemId, f64)>,
}

impl SystemRanking {
    pub fn new(mut scores: Vec<(SystemId, f64)>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for (id, score) in &scores {
            if !score.is_finite() {
                return Err(Error::Range(format!("non-finite score for system `{id}`")));
            }
            if !ids.insert(id.clone()) {
                return Err(Error::Config(format!("duplicate system id `{id}`")));
            }
        }
        scores.sort_by(|(id_a, score_a), (id_b, score_b)| {
            score_b
                .partial_cmp(score_a)
                .expect("scores are finite")
                .then_with(|| id_b.cmp(id_a))
        });
        Ok(Self { entries: scores })
    }

    pub fn entries(&self) -> &[(SystemId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score(&self, system_id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(id, _)| id == system_id)
            .map(|&(_, s)| s)
    }

    pub fn system_set(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|(id, _)| id.as_str()).collect()
    }

    /// The same ranking with one system removed.
    pub fn without(&self, system_id: &str) -> SystemRanking {
        SystemRanking {
            entries: self
                .entries
                .iter()
                .filter(|(id, _)| id != system_id)
                .cloned()
                .collect(),
        }
    }
}
