//! Parsing and emission of every external format: TREC run files, qrels,
//! document-metadata TSV, the D-MERIT JSONL adapter, and analysis reports.
//!
//! Parsers are streaming and single-threaded per file. All of them accept
//! `\r\n` line endings, trailing whitespace, and blank lines.

mod dmerit;
mod report;
mod trec;

pub use dmerit::{ingest_dmerit, DmeritData, EvidenceStats};
pub use report::{
    emit_csv, emit_json, parse_json, round_sig, FloatPrecision, Report, Table, Value,
};
pub use trec::{
    emit_doc_meta, emit_qrels, emit_run, parse_doc_meta, parse_qrels, parse_run,
};

/// Per-file bookkeeping: warnings plus line counters. The counters always
/// satisfy `accepted + skipped = read`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub warnings: Vec<(u64, String)>,
    pub lines_read: u64,
    pub lines_skipped: u64,
    pub lines_accepted: u64,
}

impl ParseDiagnostics {
    pub fn warn(&mut self, line: u64, message: impl Into<String>) {
        self.warnings.push((line, message.into()));
    }

    pub(crate) fn accept(&mut self) {
        self.lines_read += 1;
        self.lines_accepted += 1;
    }

    pub(crate) fn skip(&mut self) {
        self.lines_read += 1;
        self.lines_skipped += 1;
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty() && self.lines_skipped == 0
    }
}
