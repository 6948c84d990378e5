//! Property tests over the crate's cross-cutting invariants.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use qrelgauge::io::{
    emit_json, emit_qrels, emit_run, parse_json, parse_qrels, parse_run, FloatPrecision, Report,
    Table, Value,
};
use qrelgauge::metrics::{average_precision_at_k, ndcg_at_k, recall_at_k};
use qrelgauge::model::{canonical_order, Qrels, Run, Strictness, SystemRanking};
use qrelgauge::rankstats::{
    concordance, error_rate, kendall_tau, kendall_tau_detail, paired_t_test, partial_kendall_tau,
    SignificanceRelation,
};

fn doc_id(i: usize) -> String {
    format!("d{i:03}")
}

/// A run over one query plus a relevance marking for each doc.
fn arb_judged_list() -> impl Strategy<Value = (Vec<(String, f64)>, Vec<bool>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(-1000i64..1000, n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(scores, rel)| {
                let list: Vec<(String, f64)> = scores
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| (doc_id(i), s as f64 / 8.0))
                    .collect();
                (list, rel)
            })
    })
}

fn run_and_qrels(list: &[(String, f64)], rel: &[bool]) -> (Run, Qrels) {
    let mut rankings = BTreeMap::new();
    rankings.insert("q".to_string(), list.to_vec());
    let run = Run::new("sys", rankings).unwrap();
    let mut qrels = Qrels::new();
    for ((doc, _), &r) in list.iter().zip(rel) {
        qrels.insert("q", doc.clone(), if r { 1 } else { 0 }).unwrap();
    }
    (run, qrels)
}

/// Rankings as permutations with distinct scores (tie-free).
fn arb_ranking_pair() -> impl Strategy<Value = (SystemRanking, SystemRanking)> {
    (2usize..10).prop_flat_map(|n| {
        (Just(n), proptest::collection::vec(any::<u64>(), n * 2)).prop_map(|(n, noise)| {
            let make = |offset: usize| {
                let mut order: Vec<usize> = (0..n).collect();
                // Fisher-Yates driven by the noise words.
                for i in (1..n).rev() {
                    let j = (noise[offset + i] % (i as u64 + 1)) as usize;
                    order.swap(i, j);
                }
                SystemRanking::new(
                    order
                        .iter()
                        .enumerate()
                        .map(|(pos, &sys)| (format!("s{sys:02}"), (n - pos) as f64))
                        .collect(),
                )
                .unwrap()
            };
            (make(0), make(n))
        })
    })
}

/// Independent oracle: counts concordant/discordant pairs from rank
/// positions.
fn tau_oracle(a: &SystemRanking, b: &SystemRanking) -> (f64, u64) {
    let pos = |r: &SystemRanking| -> BTreeMap<String, usize> {
        r.entries()
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.clone(), i))
            .collect()
    };
    let pa = pos(a);
    let pb = pos(b);
    let ids: Vec<&String> = pa.keys().collect();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let da = pa[ids[i]] as i64 - pa[ids[j]] as i64;
            let db = pb[ids[i]] as i64 - pb[ids[j]] as i64;
            if da * db > 0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let total = (ids.len() * (ids.len() - 1) / 2) as f64;
    (
        (concordant - discordant) as f64 / total,
        discordant as u64,
    )
}

proptest! {
    #[test]
    fn canonical_order_idempotent_permutation((list, _) in arb_judged_list()) {
        let mut once = list.clone();
        canonical_order(&mut once);
        let mut twice = once.clone();
        canonical_order(&mut twice);
        prop_assert_eq!(&once, &twice);
        let as_set = |v: &[(String, f64)]| -> BTreeSet<String> {
            v.iter().map(|(d, _)| d.clone()).collect()
        };
        prop_assert_eq!(as_set(&once), as_set(&list));
    }

    #[test]
    fn top_k_monotone_in_depth((list, rel) in arb_judged_list()) {
        let (run, qrels) = run_and_qrels(&list, &rel);
        let mut prev = BTreeSet::new();
        for k in 0..list.len() + 2 {
            let cur = run.relevant_in_top_k(&qrels, "q", k).unwrap();
            prop_assert!(prev.is_subset(&cur));
            prev = cur;
        }
    }

    #[test]
    fn metric_values_in_unit_interval_and_monotone((list, mut rel) in arb_judged_list()) {
        rel[0] = true; // at least one relevant
        let (run, qrels) = run_and_qrels(&list, &rel);
        let mut prev_recall = 0.0;
        let mut prev_ap = 0.0;
        for k in 1..list.len() + 3 {
            let r = recall_at_k(&run, &qrels, "q", k).unwrap();
            let n = ndcg_at_k(&run, &qrels, "q", k).unwrap();
            let a = average_precision_at_k(&run, &qrels, "q", k).unwrap();
            for v in [r, n, a] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
            prop_assert!(r + 1e-12 >= prev_recall);
            prop_assert!(a + 1e-12 >= prev_ap);
            prev_recall = r;
            prev_ap = a;
        }
    }

    #[test]
    fn ndcg_is_one_iff_top_slots_all_relevant((list, mut rel) in arb_judged_list(), k in 1usize..12) {
        rel[0] = true;
        let (run, qrels) = run_and_qrels(&list, &rel);
        let total = qrels.relevant_count("q");
        let value = ndcg_at_k(&run, &qrels, "q", k).unwrap();
        let top = run.ranking("q").unwrap();
        let slots = total.min(k).min(top.len());
        let top_all_relevant = top[..slots].iter().all(|(d, _)| qrels.is_relevant("q", d))
            && slots == total.min(k);
        prop_assert_eq!((value - 1.0).abs() < 1e-12, top_all_relevant);
    }

    #[test]
    fn tau_matches_rank_position_oracle((a, b) in arb_ranking_pair()) {
        let tau = kendall_tau(&a, &b).unwrap();
        let (oracle, discordant) = tau_oracle(&a, &b);
        prop_assert!((tau - oracle).abs() < 1e-12);
        // Symmetry.
        prop_assert_eq!(tau, kendall_tau(&b, &a).unwrap());
        // Error-rate identity for tie-free rankings.
        let n = a.len() as f64;
        let expected = 100.0 * discordant as f64 / (n * (n - 1.0) / 2.0);
        prop_assert!((error_rate(tau).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn partial_tau_over_full_pair_set_equals_tau((a, b) in arb_ranking_pair()) {
        let ids: Vec<String> = a.system_set().into_iter().map(str::to_string).collect();
        let mut pairs = BTreeSet::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                pairs.insert((ids[i].clone(), ids[j].clone()));
            }
        }
        let partial = partial_kendall_tau(&a, &b, &pairs).unwrap();
        prop_assert!((partial - kendall_tau(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identical_tie_free_rankings_have_tau_one((a, _) in arb_ranking_pair()) {
        let detail = kendall_tau_detail(&a, &a).unwrap();
        prop_assert_eq!(detail.tau(), 1.0);
        prop_assert_eq!(detail.tied, 0);
    }

    #[test]
    fn t_test_p_scale_invariant(
        diffs in proptest::collection::vec(-100i64..100, 3..40),
        scale in 1u32..1000,
    ) {
        let diffs: Vec<f64> = diffs.into_iter().map(|d| d as f64 / 4.0).collect();
        let scaled: Vec<f64> = diffs.iter().map(|d| d * scale as f64).collect();
        let p1 = paired_t_test(&diffs).unwrap().p;
        let p2 = paired_t_test(&scaled).unwrap().p;
        prop_assert!((p1 - p2).abs() < 1e-9, "p1={p1} p2={p2}");
    }

    #[test]
    fn concordance_self_is_one_and_symmetric(
        n in 2usize..6,
        picks in proptest::collection::vec((0usize..20, 0usize..20, any::<bool>()), 0..8),
    ) {
        let systems: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let build = |marks: &[(usize, usize, bool)]| {
            let mut pairs: Vec<(String, String)> = Vec::new();
            let mut seen = BTreeSet::new();
            for &(i, j, flip) in marks {
                let (a, b) = (i % n, j % n);
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                if !seen.insert(key) {
                    continue;
                }
                let (x, y) = if flip { (b, a) } else { (a, b) };
                pairs.push((systems[x].clone(), systems[y].clone()));
            }
            let refs: Vec<(&str, &str)> =
                pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            SignificanceRelation::from_pairs(systems.clone(), &refs, 0.05).unwrap()
        };
        let rel1 = build(&picks);
        let rel2 = build(&picks.iter().rev().cloned().collect::<Vec<_>>());
        prop_assert_eq!(concordance(&rel1, &rel1).unwrap(), 1.0);
        prop_assert_eq!(
            concordance(&rel1, &rel2).unwrap(),
            concordance(&rel2, &rel1).unwrap()
        );
    }

    #[test]
    fn run_file_roundtrip_fixpoint((list, _) in arb_judged_list()) {
        let mut rankings = BTreeMap::new();
        rankings.insert("q1".to_string(), list);
        let run = Run::new("tag", rankings).unwrap();
        let emitted = emit_run(&run);
        let (parsed, diag) = parse_run(emitted.as_bytes(), Strictness::Strict).unwrap();
        prop_assert!(diag.is_clean());
        prop_assert_eq!(&parsed, &run);
        prop_assert_eq!(emit_run(&parsed), emitted);
    }

    #[test]
    fn qrels_roundtrip_fixpoint(grades in proptest::collection::vec(0u32..4, 1..50)) {
        let mut qrels = Qrels::new();
        for (i, g) in grades.iter().enumerate() {
            qrels.insert(format!("q{}", i % 7), doc_id(i), *g).unwrap();
        }
        let emitted = emit_qrels(&qrels);
        let (parsed, _) = parse_qrels(emitted.as_bytes(), Strictness::Strict).unwrap();
        prop_assert_eq!(&parsed, &qrels);
        prop_assert_eq!(emit_qrels(&parsed), emitted);
    }

    #[test]
    fn report_json_roundtrip(cells in proptest::collection::vec(-1e6f64..1e6, 1..30)) {
        let mut report = Report::new("prop");
        report.set_meta("cells", cells.len());
        let mut table = Table::new("t", &["i", "x", "label", "gap"]);
        for (i, x) in cells.iter().enumerate() {
            table.push_row(vec![
                Value::Int(i as i64),
                Value::Float(*x),
                Value::Str(format!("row{i}")),
                Value::Empty,
            ]);
        }
        report.push_table(table);
        // Full precision: exact identity.
        let full = emit_json(&report, FloatPrecision::Full).unwrap();
        prop_assert_eq!(&parse_json(&full).unwrap(), &report);
        // Six significant digits: emission is a fixpoint.
        let once = emit_json(&report, FloatPrecision::Significant6).unwrap();
        let twice = emit_json(&parse_json(&once).unwrap(), FloatPrecision::Significant6).unwrap();
        prop_assert_eq!(once, twice);
    }
}
