//! Subcommand implementations. Each builds a [`Report`] (plus raw dataset
//! files for `synth`) entirely in memory; writing happens in `main` only
//! after the whole command has succeeded.

use std::path::PathBuf;

use qrelgauge::io::{emit_doc_meta, emit_qrels, emit_run, Report, Table, Value};
use qrelgauge::metrics::{evaluate, MetricMatrix, MetricSpec};
use qrelgauge::model::{DocMeta, Qrels, RunSet, Strictness};
use qrelgauge::pooling::{
    coverage, depth_analysis, expected_coverage, extrapolate_systems, CoverageCurve, CoverageMode,
};
use qrelgauge::rankstats::{classify_pairs, error_rate, kendall_tau_detail, PairBucket};
use qrelgauge::selection::{
    incremental_study, single_relevant_study, synth_generate, SelectionPolicy, StudyOptions,
    SynthConfig,
};

use crate::CliError;

pub struct CommandOutput {
    pub report: Report,
    /// Extra files (path relative to the output dir, contents).
    pub raw_files: Vec<(PathBuf, String)>,
    pub summary: Vec<String>,
}

impl CommandOutput {
    fn new(report: Report) -> Self {
        Self {
            report,
            raw_files: Vec::new(),
            summary: Vec::new(),
        }
    }
}

fn meta_common(report: &mut Report, command: &str, mode: Strictness) {
    report.set_meta("command", command);
    report.set_meta(
        "strictness",
        match mode {
            Strictness::Strict => "strict",
            Strictness::Lenient => "lenient",
        },
    );
}

fn bucket_meta(report: &mut Report, buckets: &[PairBucket]) {
    let labels: Vec<String> = buckets.iter().map(PairBucket::label).collect();
    report.set_meta("buckets", labels.join(" "));
}

pub fn evaluate_cmd(
    runset: &RunSet,
    qrels: &Qrels,
    specs: &[MetricSpec],
    mode: Strictness,
) -> Result<CommandOutput, CliError> {
    let matrices: Vec<MetricMatrix> = specs
        .iter()
        .map(|spec| evaluate(runset, qrels, *spec, mode))
        .collect::<Result<_, _>>()?;

    let mut columns: Vec<String> = vec!["system".into()];
    columns.extend(specs.iter().map(MetricSpec::to_string));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("metrics", &column_refs);

    // Rows ordered by the first metric, best system first.
    let order = matrices[0].ranking()?;
    for (system, _) in order.entries() {
        let mut row: Vec<Value> = vec![system.as_str().into()];
        for matrix in &matrices {
            let idx = matrix
                .systems()
                .iter()
                .position(|s| s == system)
                .expect("same runset everywhere");
            row.push(matrix.system_mean(idx).into());
        }
        table.push_row(row);
    }

    let mut report = Report::new("metric evaluation");
    meta_common(&mut report, "evaluate", mode);
    report.set_meta(
        "metrics",
        specs.iter().map(MetricSpec::to_string).collect::<Vec<_>>().join(","),
    );
    report.set_meta("queries", matrices[0].queries().len());
    if !matrices[0].skipped_queries().is_empty() {
        report.set_meta("skipped_queries", matrices[0].skipped_queries().join(","));
    }
    report.push_table(table);

    let mut output = CommandOutput::new(report);
    output.summary.push(format!(
        "evaluated {} systems on {} queries ({} metrics)",
        runset.len(),
        matrices[0].queries().len(),
        specs.len()
    ));
    Ok(output)
}

pub fn rank_compare_cmd(
    runset: &RunSet,
    reference_qrels: &Qrels,
    candidate_qrels: &Qrels,
    spec: MetricSpec,
    buckets: &[PairBucket],
    mode: Strictness,
) -> Result<CommandOutput, CliError> {
    let reference_matrix = evaluate(runset, reference_qrels, spec, mode)?;
    let candidate_matrix = evaluate(runset, candidate_qrels, spec, mode)?;
    let reference = reference_matrix.ranking()?;
    let candidate = candidate_matrix.ranking()?;
    let detail = kendall_tau_detail(&candidate, &reference)?;

    let mut report = Report::new("ranking comparison");
    meta_common(&mut report, "rank-compare", mode);
    report.set_meta("metric", spec);
    bucket_meta(&mut report, buckets);

    let mut summary = Table::new(
        "summary",
        &["systems", "tau", "error_rate_pct", "concordant", "discordant", "tied"],
    );
    summary.push_row(vec![
        runset.len().into(),
        detail.tau().into(),
        error_rate(detail.tau())?.into(),
        (detail.concordant as i64).into(),
        (detail.discordant as i64).into(),
        (detail.tied as i64).into(),
    ]);
    report.push_table(summary);

    let mut rankings = Table::new(
        "rankings",
        &["system", "reference_rank", "reference_score", "candidate_rank", "candidate_score"],
    );
    for (i, (system, score)) in reference.entries().iter().enumerate() {
        let cand_rank = candidate
            .entries()
            .iter()
            .position(|(s, _)| s == system)
            .expect("same systems");
        rankings.push_row(vec![
            system.as_str().into(),
            (i + 1).into(),
            (*score).into(),
            (cand_rank + 1).into(),
            candidate.entries()[cand_rank].1.into(),
        ]);
    }
    report.push_table(rankings);

    if !buckets.is_empty() {
        let classification = classify_pairs(&reference_matrix, buckets)?;
        let mut bucket_table = Table::new(
            "buckets",
            &["p_min", "p_max", "n_pairs", "partial_tau", "error_rate_pct"],
        );
        for (b, bucket) in buckets.iter().enumerate() {
            let pairs = classification.pairs_in_bucket(b);
            let (tau, err): (Value, Value) = if pairs.is_empty() {
                (Value::Empty, Value::Empty)
            } else {
                let tau =
                    qrelgauge::rankstats::partial_kendall_tau(&candidate, &reference, &pairs)?;
                (tau.into(), (100.0 * (1.0 - tau) / 2.0).into())
            };
            bucket_table.push_row(vec![
                bucket.p_min().into(),
                bucket.p_max().into(),
                pairs.len().into(),
                tau,
                err,
            ]);
        }
        report.push_table(bucket_table);
    }

    // Discordant pairs, for auditing which rankings flipped.
    let mut discordant = Table::new(
        "discordant_pairs",
        &["system_a", "system_b", "reference_better", "candidate_better"],
    );
    let ids: Vec<&str> = reference.system_set().into_iter().collect();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let (a, b) = (ids[i], ids[j]);
            let ref_cmp = reference.score(a).unwrap().partial_cmp(&reference.score(b).unwrap());
            let cand_cmp = candidate.score(a).unwrap().partial_cmp(&candidate.score(b).unwrap());
            use std::cmp::Ordering::*;
            if let (Some(rc), Some(cc)) = (ref_cmp, cand_cmp) {
                if (rc == Greater && cc == Less) || (rc == Less && cc == Greater) {
                    discordant.push_row(vec![
                        a.into(),
                        b.into(),
                        (if rc == Greater { a } else { b }).into(),
                        (if cc == Greater { a } else { b }).into(),
                    ]);
                }
            }
        }
    }
    report.push_table(discordant);

    let mut output = CommandOutput::new(report);
    output.summary.push(format!(
        "tau = {:.4}, error rate = {:.2}%",
        detail.tau(),
        error_rate(detail.tau())?
    ));
    Ok(output)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_selection_cmd(
    runset: &RunSet,
    qrels: &Qrels,
    meta: Option<&DocMeta>,
    policies: &[SelectionPolicy],
    spec: MetricSpec,
    buckets: &[PairBucket],
    opts: &StudyOptions,
    seed: u64,
    trials: u32,
) -> Result<CommandOutput, CliError> {
    let study = single_relevant_study(runset, qrels, policies, spec, buckets, meta, opts)?;

    let mut report = Report::new("single-relevant selection study");
    meta_common(&mut report, "simulate-selection", opts.strictness);
    report.set_meta("metric", spec);
    report.set_meta("seed", seed);
    report.set_meta("trials", trials);
    bucket_meta(&mut report, buckets);

    let mut tau_table = Table::new("tau", &["selection", "tau", "error_rate_pct"]);
    for row in &study.rows {
        tau_table.push_row(vec![
            row.label.as_str().into(),
            row.tau.into(),
            row.error_rate_pct.into(),
        ]);
    }
    report.push_table(tau_table);

    if let Some(random) = study.rows.iter().find(|r| r.label == "random") {
        let mut detail = Table::new(
            "random_detail",
            &["trials", "mean_tau", "std_tau", "error_rate_pct", "all_ties"],
        );
        detail.push_row(vec![
            random.trials.map(|t| t as i64).into(),
            random.tau.into(),
            random.tau_std.into(),
            random.error_rate_pct.into(),
            i64::from(random.all_ties).into(),
        ]);
        report.push_table(detail);
    }

    if !study.selector_rows.is_empty() {
        let mut detail = Table::new(
            "system_based_detail",
            &["selector", "tau", "error_rate_pct", "all_ties", "fallback_queries", "skipped_queries"],
        );
        for row in &study.selector_rows {
            detail.push_row(vec![
                row.selector.as_str().into(),
                row.tau.into(),
                row.error_rate_pct.into(),
                i64::from(row.all_ties).into(),
                row.fallback_count.into(),
                row.skipped_count.into(),
            ]);
        }
        report.push_table(detail);

        let mut swaps = Table::new("swap_scores", &["selector", "system", "score"]);
        for s in &study.swap_scores {
            swaps.push_row(vec![
                s.selector.as_str().into(),
                s.system.as_str().into(),
                s.score.into(),
            ]);
        }
        report.push_table(swaps);
    }

    if !study.bucket_rows.is_empty() {
        let mut bucket_table = Table::new(
            "bucket_partial_tau",
            &["selection", "p_min", "p_max", "n_pairs", "partial_tau", "error_rate_pct"],
        );
        for row in &study.bucket_rows {
            bucket_table.push_row(vec![
                row.policy.as_str().into(),
                row.bucket.p_min().into(),
                row.bucket.p_max().into(),
                row.pairs.into(),
                row.mean_partial_tau.into(),
                row.mean_error_rate_pct.into(),
            ]);
        }
        report.push_table(bucket_table);
    }

    let mut output = CommandOutput::new(report);
    for row in &study.rows {
        output.summary.push(format!(
            "{:<16} tau {:>7.4}  error rate {:>6.2}%{}",
            row.label,
            row.tau,
            row.error_rate_pct,
            if row.all_ties { "  (all ties)" } else { "" }
        ));
    }
    Ok(output)
}

pub fn simulate_incremental_cmd(
    runset: &RunSet,
    qrels: &Qrels,
    fractions: &[f64],
    buckets: &[PairBucket],
    spec: MetricSpec,
    seed: u64,
    opts: &StudyOptions,
) -> Result<CommandOutput, CliError> {
    let curve = incremental_study(runset, qrels, fractions, buckets, spec, seed, opts)?;

    let mut report = Report::new("incremental annotation stability");
    meta_common(&mut report, "simulate-incremental", opts.strictness);
    report.set_meta("metric", spec);
    report.set_meta("seed", seed);
    bucket_meta(&mut report, buckets);
    report.set_meta(
        "fractions",
        fractions.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );

    let mut stability = Table::new(
        "stability",
        &["p_min", "p_max", "n_pairs", "fraction", "mean_partial_tau", "mean_error_rate_pct", "selectors"],
    );
    for (bi, bucket) in curve.buckets.iter().enumerate() {
        for (fi, fraction) in curve.fractions.iter().enumerate() {
            let cell = &curve.cells[fi][bi];
            stability.push_row(vec![
                bucket.p_min().into(),
                bucket.p_max().into(),
                curve.bucket_pair_counts[bi].into(),
                (*fraction).into(),
                cell.map(|c| c.mean_partial_tau).into(),
                cell.map(|c| c.mean_error_rate_pct).into(),
                cell.map(|c| c.selectors).into(),
            ]);
        }
    }
    report.push_table(stability);

    // Plot-ready pivot: one row per fraction, one tau column per bucket.
    let mut columns: Vec<String> = vec!["fraction".into()];
    columns.extend(curve.buckets.iter().map(|b| format!("tau_{}", b.label())));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut plot = Table::new("stability_plot", &column_refs);
    for (fi, fraction) in curve.fractions.iter().enumerate() {
        let mut row: Vec<Value> = vec![(*fraction).into()];
        for bi in 0..curve.buckets.len() {
            row.push(curve.cells[fi][bi].map(|c| c.mean_partial_tau).into());
        }
        plot.push_row(row);
    }
    report.push_table(plot);

    let mut output = CommandOutput::new(report);
    output.summary.push(format!(
        "stability curve over {} fractions, {} buckets, {} selectors",
        curve.fractions.len(),
        curve.buckets.len(),
        curve.selectors.len()
    ));
    Ok(output)
}

fn curve_table(name: &str, curve: &CoverageCurve) -> Table {
    let mut table = Table::new(name, &["x", "y", "fitted", "residual"]);
    for &(x, y) in &curve.points {
        if x >= 1 {
            let fitted = curve.fit.predict(x as f64);
            table.push_row(vec![
                (x as i64).into(),
                y.into(),
                fitted.into(),
                (y - fitted).into(),
            ]);
        } else {
            table.push_row(vec![(x as i64).into(), y.into(), Value::Empty, Value::Empty]);
        }
    }
    for &(x, y_hat) in &curve.extrapolated {
        table.push_row(vec![(x as i64).into(), Value::Empty, y_hat.into(), Value::Empty]);
    }
    table
}

fn fit_row(table: &mut Table, label: &str, curve: &CoverageCurve) {
    table.push_row(vec![
        label.into(),
        curve.fit.a.into(),
        curve.fit.b.into(),
        curve.fit.rmse.into(),
        curve.fit.max_error.into(),
    ]);
}

pub struct PoolingArgs {
    pub k: usize,
    pub extrapolate_to: usize,
    pub mc_t: Option<usize>,
    pub mc_samples: u64,
    pub seed: u64,
    pub depth_qrels: Option<Qrels>,
    pub depths: Vec<usize>,
    pub extrapolate_depth_to: usize,
}

pub fn pooling_cmd(
    runset: &RunSet,
    qrels: &Qrels,
    args: &PoolingArgs,
    mode: Strictness,
) -> Result<CommandOutput, CliError> {
    let full_coverage = coverage(runset, qrels, args.k, mode)?;
    let curve = extrapolate_systems(runset, qrels, args.k, args.extrapolate_to, mode)?;

    let mut report = Report::new("pool coverage analysis");
    meta_common(&mut report, "pooling", mode);
    report.set_meta("k", args.k);
    report.set_meta("systems", runset.len());
    report.set_meta("coverage", format!("{full_coverage:.6}"));

    report.push_table(curve_table("coverage_by_systems", &curve));
    let mut fits = Table::new("fits", &["curve", "a", "b", "rmse", "max_error"]);
    fit_row(&mut fits, "coverage_by_systems", &curve);

    if let Some(t) = args.mc_t {
        let exact = expected_coverage(runset, qrels, args.k, t, CoverageMode::Exact, mode).ok();
        let mc = expected_coverage(
            runset,
            qrels,
            args.k,
            t,
            CoverageMode::MonteCarlo {
                samples: args.mc_samples,
                seed: args.seed,
            },
            mode,
        )?;
        let mut table = Table::new(
            "monte_carlo",
            &["t", "samples", "estimate", "std_error", "exact"],
        );
        table.push_row(vec![
            t.into(),
            (args.mc_samples as i64).into(),
            mc.value.into(),
            mc.std_error.into(),
            exact.map(|e| e.value).into(),
        ]);
        report.push_table(table);
    }

    if let Some(pool_qrels) = &args.depth_qrels {
        let analysis = depth_analysis(
            runset,
            qrels,
            pool_qrels,
            &args.depths,
            args.extrapolate_depth_to,
        )?;
        report.push_table(curve_table("identified_by_depth", &analysis.identified));
        report.push_table(curve_table("new_by_depth", &analysis.new_docs));
        fit_row(&mut fits, "identified_by_depth", &analysis.identified);
        fit_row(&mut fits, "new_by_depth", &analysis.new_docs);
    }
    report.push_table(fits);

    let mut output = CommandOutput::new(report);
    output.summary.push(format!(
        "coverage at k={} with {} systems: {:.4}; extrapolated to {} systems: {:.4} (fit rmse {:.5})",
        args.k,
        runset.len(),
        full_coverage,
        args.extrapolate_to,
        curve.extrapolated.last().map(|&(_, y)| y).unwrap_or(full_coverage),
        curve.fit.rmse
    ));
    Ok(output)
}

pub fn synth_cmd(config: &SynthConfig) -> Result<CommandOutput, CliError> {
    let data = synth_generate(config)?;

    let mut report = Report::new("synthetic dataset");
    report.set_meta("command", "synth");
    report.set_meta("seed", config.seed);
    report.set_meta("systems", config.n_systems);
    report.set_meta("queries", config.n_queries);
    report.set_meta("corpus_size", config.corpus_size);
    report.set_meta("noise", config.noise);

    let mut truth = Table::new("ground_truth", &["rank", "system", "quality"]);
    let mut by_quality = data.qualities.clone();
    by_quality.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| b.0.cmp(&a.0)));
    for (i, (system, quality)) in by_quality.iter().enumerate() {
        truth.push_row(vec![(i + 1).into(), system.as_str().into(), (*quality).into()]);
    }
    report.push_table(truth);

    let mut output = CommandOutput::new(report);
    output
        .raw_files
        .push((PathBuf::from("qrels.txt"), emit_qrels(&data.qrels)));
    output
        .raw_files
        .push((PathBuf::from("meta.tsv"), emit_doc_meta(&data.meta)));
    for run in data.runset.runs() {
        output.raw_files.push((
            PathBuf::from("runs").join(format!("{}.run", run.system_id())),
            emit_run(run),
        ));
    }
    output.summary.push("ground-truth quality ordering (best first):".into());
    for (i, (system, quality)) in by_quality.iter().enumerate() {
        output.summary.push(format!("  {:>2}. {system}  quality={quality:.4}", i + 1));
    }
    Ok(output)
}
