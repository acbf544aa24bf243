//! Initial-sample-size calibration sweep.
//!
//! The published result tables fix the outcome distributions and the
//! horizon grid but not the balanced initial sample size M ("determined on
//! the basis of the underlying parameters"). This tool sweeps M for each
//! preset family, replicates one anchor row per table (10,000
//! replications), and scores each M by the *maximum* tolerance-normalized
//! error against the published row — PCS error over 0.02, count error over
//! the table's relative band. A score at or below 1 means the candidate
//! lands inside the acceptance box; the minimizer is the best match either
//! way. The winners are frozen into `scenario::calibrated`.
//!
//! Two-arm and multi-arm families sweep 2..=30. The identically
//! distributed null case is count-anchored only and needs a far larger
//! initial phase, so its domain extends to 70.
//!
//! Run with: cargo run --release -p seqalloc --example calibrate

use seqalloc::montecarlo::run_replications;
use seqalloc::scenario::{preset, MetricKind};

struct Case {
    preset: &'static str,
    n: u64,
    sweep: (u64, u64),
    target_pcs: Option<f64>,
    target_count: f64,
    count_rel_tol: f64,
    count_metric: MetricKind,
}

const CASES: &[Case] = &[
    Case {
        preset: "table1_col2",
        n: 200,
        sweep: (2, 30),
        target_pcs: Some(0.9718),
        target_count: 15.7146,
        count_rel_tol: 0.15,
        count_metric: MetricKind::N1,
    },
    Case {
        preset: "table2_col1",
        n: 200,
        sweep: (2, 30),
        target_pcs: Some(0.9714),
        target_count: 15.7156,
        count_rel_tol: 0.15,
        count_metric: MetricKind::N1,
    },
    Case {
        preset: "table3_normal",
        n: 1000,
        sweep: (2, 70),
        target_pcs: None, // 0.5 by symmetry regardless of M
        target_count: 79.7329,
        count_rel_tol: 0.15,
        count_metric: MetricKind::N1,
    },
    Case {
        preset: "table4_col1",
        n: 200,
        sweep: (2, 30),
        target_pcs: Some(0.9475),
        target_count: 9.3374,
        count_rel_tol: 0.20,
        count_metric: MetricKind::SecondMax,
    },
    Case {
        preset: "table5_col1",
        n: 200,
        sweep: (2, 30),
        target_pcs: Some(0.9436),
        target_count: 24.6724,
        count_rel_tol: 0.30,
        count_metric: MetricKind::Inferior,
    },
    Case {
        preset: "table6_col1",
        n: 200,
        sweep: (2, 30),
        target_pcs: Some(0.9707),
        target_count: 20.0885,
        count_rel_tol: 0.30,
        count_metric: MetricKind::Inferior,
    },
    Case {
        preset: "pregabalin",
        n: 200,
        sweep: (2, 30),
        target_pcs: Some(0.9381),
        target_count: 7.4673,
        count_rel_tol: 0.20,
        count_metric: MetricKind::N1,
    },
    Case {
        preset: "fluoxetine",
        n: 2000,
        sweep: (2, 30),
        target_pcs: Some(0.9407),
        target_count: 23.5513,
        count_rel_tol: 0.20,
        count_metric: MetricKind::N1,
    },
];

const REPS: u64 = 10_000;
const SEED: u64 = 0x5EED_CA11;

fn main() {
    for case in CASES {
        let spec = preset(case.preset).expect("preset exists");
        println!(
            "== {} at N = {} (targets: pcs {:?}, count {})",
            case.preset, case.n, case.target_pcs, case.target_count
        );
        let mut best: Option<(u64, f64)> = None;
        for m in case.sweep.0..=case.sweep.1 {
            let mut cfg = spec.config_for(case.n).expect("valid horizon");
            cfg.initial_m = m;
            if cfg.validate().is_err() {
                continue;
            }
            let summary = run_replications(&cfg, REPS, SEED).expect("valid config");
            let count = match case.count_metric {
                MetricKind::N1 | MetricKind::SecondMax => summary.mean_n1,
                MetricKind::Inferior => summary.mean_inferior.expect("unique worst arm"),
                other => unreachable!("unused metric {other:?}"),
            };
            let mut score =
                (count - case.target_count).abs() / (case.count_rel_tol * case.target_count);
            if let Some(t) = case.target_pcs {
                score = score.max((summary.pcs - t).abs() / 0.02);
            }
            println!(
                "  M = {m:>2}: pcs {:.4}  count {:>8.4}  score {score:.3}",
                summary.pcs, count
            );
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((m, score));
            }
        }
        let (m, score) = best.expect("at least one admissible M");
        let verdict = if score <= 1.0 {
            "inside the tolerance box"
        } else {
            "best available; outside the box"
        };
        println!("  -> best M = {m} (score {score:.3}; {verdict})\n");
    }
}
