//! Input loading shared by the subcommands.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use qrelgauge::io::{ingest_dmerit, parse_doc_meta, parse_qrels, parse_run, ParseDiagnostics};
use qrelgauge::model::{DocMeta, Qrels, Run, RunSet, Strictness};

use crate::CliError;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))
}

fn report_warnings(path: &Path, diagnostics: &ParseDiagnostics) {
    for (line, message) in diagnostics.warnings.iter().take(10) {
        eprintln!("warning: {}:{line}: {message}", path.display());
    }
    if diagnostics.warnings.len() > 10 {
        eprintln!(
            "warning: {}: {} further warnings suppressed",
            path.display(),
            diagnostics.warnings.len() - 10
        );
    }
}

/// Collects run files from explicit paths plus every regular file in a
/// directory (sorted by name, for reproducible system order).
pub fn load_runs(
    run_paths: &[PathBuf],
    runs_dir: Option<&Path>,
    mode: Strictness,
) -> Result<RunSet, CliError> {
    let mut paths: Vec<PathBuf> = run_paths.to_vec();
    if let Some(dir) = runs_dir {
        let mut from_dir: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        from_dir.sort();
        paths.extend(from_dir);
    }
    if paths.is_empty() {
        return Err(CliError::input(
            "no run files given (use --run or --runs-dir)".into(),
        ));
    }
    let mut runs: Vec<Run> = Vec::with_capacity(paths.len());
    for path in &paths {
        let (run, diagnostics) = parse_run(open(path)?, mode)?;
        report_warnings(path, &diagnostics);
        runs.push(run);
    }
    Ok(RunSet::new(runs, mode)?)
}

/// Loads judgments from a qrels file or the JSONL dataset adapter.
pub fn load_relevance(
    qrels: Option<&Path>,
    dmerit: Option<&Path>,
    mode: Strictness,
) -> Result<Qrels, CliError> {
    match (qrels, dmerit) {
        (Some(path), None) => {
            let (qrels, diagnostics) = parse_qrels(open(path)?, mode)?;
            report_warnings(path, &diagnostics);
            Ok(qrels)
        }
        (None, Some(path)) => {
            let data = ingest_dmerit(open(path)?)?;
            report_warnings(path, &data.diagnostics);
            let stats = data.evidence_stats();
            eprintln!(
                "loaded {} queries, {} evidence (min {}, median {}, max {})",
                stats.queries, stats.total, stats.min, stats.median, stats.max
            );
            Ok(data.qrels)
        }
        (Some(_), Some(_)) => Err(CliError::input(
            "give either --qrels or --dmerit, not both".into(),
        )),
        (None, None) => Err(CliError::input("missing --qrels (or --dmerit)".into())),
    }
}

pub fn load_qrels_file(path: &Path, mode: Strictness) -> Result<Qrels, CliError> {
    let (qrels, diagnostics) = parse_qrels(open(path)?, mode)?;
    report_warnings(path, &diagnostics);
    Ok(qrels)
}

pub fn load_meta(path: &Path, mode: Strictness) -> Result<DocMeta, CliError> {
    let (meta, diagnostics) = parse_doc_meta(open(path)?, mode)?;
    report_warnings(path, &diagnostics);
    Ok(meta)
}
