//! qrelgauge evaluates passage-retrieval systems from standard run/qrels
//! files and quantifies how system *rankings* destabilize when relevance
//! annotations are incomplete.
//!
//! The pieces:
//!
//! * [`model`] — qrels, runs, run sets, document metadata, system rankings.
//! * [`io`] — run/qrels/metadata/JSONL parsing and report emission.
//! * [`metrics`] — recall / NDCG / MAP / R-precision and the
//!   per-(system, query) matrix.
//! * [`rankstats`] — Kendall tau, error rate, paired t-tests, p-value
//!   buckets, partial tau, concordance.
//! * [`selection`] — single-relevant selection policies, stability
//!   studies, and a synthetic data generator.
//! * [`pooling`] — pool coverage, expected coverage over system subsets,
//!   log-curve fitting and extrapolation.
//! * [`rng`] — the seeded substream scheme every stochastic operation
//!   draws from.

pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pooling;
pub mod rankstats;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
pub use metrics::{MetricMatrix, MetricSpec};
pub use model::{DocId, DocMeta, Qrels, QueryId, Run, RunSet, Strictness, SystemId, SystemRanking};
pub use rankstats::{PairBucket, PairClassification, SignificanceRelation, TTest};
