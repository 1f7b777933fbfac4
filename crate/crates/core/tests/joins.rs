use std::collections::HashSet;

use simjoin_core::harness::{read_json_report, write_report, ReportFormat};
use simjoin_core::synthetic::{generate, SyntheticConfig};
use simjoin_core::{
    derive_repetitions, exact_join, run_until_recall, Algorithm, CpsJoinConfig, Dataset, GroundTruth,
    LshParams, Pair, RecallTarget,
};

fn planted(records: usize, pairs: usize, seed: u64) -> Dataset {
    generate(&SyntheticConfig::planted_uniform(records, pairs, 0.5, seed)).unwrap()
}

fn is_subset(found: &[Pair], truth: &[Pair]) -> bool {
    let truth: HashSet<&Pair> = truth.iter().collect();
    found.iter().all(|p| truth.contains(p))
}

#[test]
fn randomized_joins_never_report_false_pairs() {
    let ds = planted(3000, 150, 11);
    for lambda in [0.5, 0.6, 0.7] {
        let exact = exact_join(&ds, lambda).unwrap().pairs;
        for seed in 0..3 {
            for heuristics in [true, false] {
                let mut config = CpsJoinConfig::with_lambda(lambda);
                config.params.use_heuristics = heuristics;
                assert!(is_subset(&config.run(&ds, seed).unwrap().pairs, &exact));
            }
            let lsh = LshParams { lambda, repetitions: 0, ..Default::default() };
            assert!(is_subset(&lsh.run(&ds, seed).unwrap().0.pairs, &exact));
        }
    }
}

#[test]
fn both_engines_find_most_planted_pairs_across_repetitions() {
    let ds = planted(3000, 150, 12);
    let truth = GroundTruth::compute(&ds, 0.5).unwrap();
    for heuristics in [true, false] {
        let mut config = CpsJoinConfig::with_lambda(0.5);
        config.params.use_heuristics = heuristics;
        let target = RecallTarget { phi: 0.9, max_repetitions: 32 };
        let report = run_until_recall(&Algorithm::CpsJoin(config), &ds, Some(&truth), target, 5, 1).unwrap();
        assert!(report.reached_target, "heuristics={heuristics}: {:?}", report.final_recall);
    }
}

#[test]
fn lsh_with_derived_repetitions_reaches_target_recall() {
    let ds = planted(2000, 200, 13);
    let truth = exact_join(&ds, 0.5).unwrap().pairs;
    let (k, phi) = (3, 0.9);
    let params = LshParams {
        k,
        repetitions: 0,
        phi_target: phi,
        lambda: 0.5,
        use_sketch_filter: false,
        ..Default::default()
    };
    let (outcome, resolved) = params.run(&ds, 21).unwrap();
    assert_eq!(resolved.repetitions, derive_repetitions(0.5, k, phi).unwrap());
    let found: HashSet<Pair> = outcome.pairs.into_iter().collect();
    let hits = truth.iter().filter(|p| found.contains(p)).count() as f64;
    let n = truth.len() as f64;
    let se = (phi * (1.0 - phi) / n).sqrt();
    assert!(hits / n >= phi - 3.0 * se, "recall {}", hits / n);
}

#[test]
fn reports_round_trip_through_json() {
    let ds = planted(1000, 50, 14);
    let truth = GroundTruth::compute(&ds, 0.5).unwrap();
    let target = RecallTarget { phi: 0.95, max_repetitions: 8 };
    let alg = Algorithm::CpsJoin(CpsJoinConfig::with_lambda(0.5));
    let report = run_until_recall(&alg, &ds, Some(&truth), target, 3, 1).unwrap();
    let bytes = write_report(&report, ReportFormat::Json).unwrap();
    assert_eq!(read_json_report(&bytes).unwrap(), report);
    let csv = write_report(&report, ReportFormat::Csv).unwrap();
    let lines = String::from_utf8(csv).unwrap().lines().count();
    assert_eq!(lines, 1 + report.repetitions_used as usize);
}

#[test]
fn cumulative_columns_never_decrease() {
    let ds = planted(2000, 100, 15);
    let truth = GroundTruth::compute(&ds, 0.5).unwrap();
    let target = RecallTarget { phi: 1.0, max_repetitions: 6 };
    let alg = Algorithm::MinHash(LshParams::default());
    let report = run_until_recall(&alg, &ds, Some(&truth), target, 9, 1).unwrap();
    for w in report.repetitions.windows(2) {
        assert!(w[0].cum_results <= w[1].cum_results);
        assert!(w[0].cum_recall <= w[1].cum_recall);
    }
}
