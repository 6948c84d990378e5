//! Adapter for the D-MERIT JSONL release: one object per line with
//! `query_id`, `query`, and an `evidence` array of passage ids. Unknown
//! fields are ignored; evidence passages are loaded as grade-1 judgments.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::ParseDiagnostics;
use crate::model::{Qrels, QueryId};

/// The dataset promises at least this many evidence passages per query;
/// smaller lists are accepted with a warning.
pub const MIN_EXPECTED_EVIDENCE: usize = 5;

#[derive(Debug, Deserialize)]
struct RawRecord {
    query_id: String,
    query: String,
    evidence: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DmeritData {
    pub qrels: Qrels,
    pub query_texts: BTreeMap<QueryId, String>,
    pub diagnostics: ParseDiagnostics,
}

/// Summary statistics over per-query evidence counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceStats {
    pub queries: usize,
    pub total: usize,
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

impl DmeritData {
    pub fn evidence_stats(&self) -> EvidenceStats {
        let mut counts: Vec<usize> = self
            .qrels
            .queries()
            .map(|q| self.qrels.relevant_count(q))
            .collect();
        counts.sort_unstable();
        let n = counts.len();
        let median = if n == 0 {
            0.0
        } else if n % 2 == 1 {
            counts[n / 2] as f64
        } else {
            (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
        };
        EvidenceStats {
            queries: n,
            total: counts.iter().sum(),
            min: counts.first().copied().unwrap_or(0),
            median,
            max: counts.last().copied().unwrap_or(0),
        }
    }
}

/// Loads the JSONL stream. Missing required fields are a schema error
/// carrying the offending line number.
pub fn ingest_dmerit<R: BufRead>(reader: R) -> Result<DmeritData> {
    let mut diagnostics = ParseDiagnostics::default();
    let mut qrels = Qrels::new();
    let mut query_texts = BTreeMap::new();
    let mut line_no = 0u64;

    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            diagnostics.skip();
            continue;
        }
        let record: RawRecord = serde_json::from_str(trimmed).map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if query_texts.contains_key(&record.query_id) {
            return Err(Error::Schema {
                line: line_no,
                message: format!("duplicate query_id `{}`", record.query_id),
            });
        }
        if record.evidence.is_empty() {
            return Err(Error::Schema {
                line: line_no,
                message: format!("query `{}` has an empty evidence list", record.query_id),
            });
        }
        if record.evidence.len() < MIN_EXPECTED_EVIDENCE {
            diagnostics.warn(
                line_no,
                format!(
                    "query `{}` has only {} evidence passages",
                    record.query_id,
                    record.evidence.len()
                ),
            );
        }
        for passage in &record.evidence {
            if !qrels.insert(record.query_id.clone(), passage.clone(), 1)? {
                diagnostics.warn(
                    line_no,
                    format!("duplicate evidence `{passage}` for query `{}`", record.query_id),
                );
            }
        }
        query_texts.insert(record.query_id, record.query);
        diagnostics.accept();
    }

    Ok(DmeritData {
        qrels,
        query_texts,
        diagnostics,
    })
}
