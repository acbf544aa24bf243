//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line plus per-clause detail (visible with `--nocapture`, and echoed
//! automatically when a criterion fails).
//!
//! The targets come from the published result tables; every tolerance is
//! pinned here as a constant. Criteria 1 and 3-6 reproduce table rows after
//! the documented initial-sample-size calibration (see
//! `examples/calibrate.rs`): the sweep picks the M minimizing the maximum
//! tolerance-normalized error at the anchor row. Criteria 2, 7 and 8 are
//! calibration-free property checks.

use seqalloc::bounds::{
    chernoff_rho_normal, chernoff_rho_numeric, empirical_survival, moment_stability,
    n1_domination_check, stopping_time_batch, ShiftedModel, TailBound,
};
use seqalloc::montecarlo::{
    derive_seed, log_slope, run_replications, ReplicationSummary, FLAT_SLOPE_THRESHOLD,
};
use seqalloc::response::ResponseModel;
use seqalloc::scenario::preset;
use seqalloc::trial::TrialConfig;
use std::sync::LazyLock;

const REPS: u64 = 10_000;

const PCS_TOL: f64 = 0.02;

// Criterion 1: two-arm Normal reproduction, means (0.8, 0.2), variances (1, 0.7).
const C1_PCS_TARGET: f64 = 0.9718;
const C1_N1_TARGET: f64 = 15.7146;
const C1_N1_RTOL: f64 = 0.15;
const C1_HORIZONS: [u64; 3] = [200, 1000, 3500];
const C1_SWEEP: (u64, u64) = (2, 30);

// Criterion 2: boundedness of the minimum count vs growth of the
// inferior-arm count for means (0.5, 0).
const C2_FACTOR_RANGE: (f64, f64) = (6.0, 12.0);

// Criterion 3: Bernoulli (0.5, 0.2) at N = 200.
const C3_PCS_TARGET: f64 = 0.9714;
const C3_N1_TARGET: f64 = 15.7156;
const C3_N1_RTOL: f64 = 0.15;

// Criterion 4: identical Normal(1,1) arms at N = 1000.
const C4_PCS_RANGE: (f64, f64) = (0.485, 0.515);
const C4_RATIO_RANGE: (f64, f64) = (0.49, 0.501);
const C4_N1_TARGET: f64 = 79.7329;
const C4_N1_RTOL: f64 = 0.15;

// Criterion 5: three arms, means (0.9, 0.2, 0), variances (1, 0.7, 0.5).
const C5_PCS_TARGET: f64 = 0.947;
const C5_SECOND_MAX_TARGETS: [(u64, f64); 2] = [(200, 9.3374), (2000, 12.3375)];
const C5_RTOL: f64 = 0.20;

// Criterion 6: case-study presets.
const C6_PREGABALIN: (u64, f64, f64) = (200, 0.9381, 7.4673);
const C6_FLUOXETINE: (u64, f64, f64) = (2000, 0.9407, 23.5513);
const C6_RTOL: f64 = 0.20;

// Criterion 7: theory oracles at drift u = 0.5.
const C7_RHO_AGREEMENT: f64 = 1e-8;
const C7_U_GRID: [f64; 9] = [0.01, 0.02, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 3.0];
const C7_TAIL_K0: u64 = 20;
const C7_TAIL_MASS_TOL: f64 = 1e-6;
const C7_SLOPE_SLACK: f64 = 0.02;
const C7_MIN_TAIL_HITS: u64 = 200;
const C7_ORACLE_RUNS: u64 = 100_000;
const C7_MOMENT_HORIZONS: (u64, u64) = (200, 400);

// Criterion 8: harness integrity.
const C8_META_RUNS: u64 = 50;
const C8_PCS_SD_BOUND: f64 = 0.005;

fn seed_for(criterion: u64) -> u64 {
    derive_seed(0x2026_0810, criterion)
}

fn two_arm_normal_cfg(theta: (f64, f64), n: u64, m: u64) -> TrialConfig {
    TrialConfig::new(
        vec![
            ResponseModel::normal(theta.0, 1.0).unwrap(),
            ResponseModel::normal(theta.1, 0.7f64.sqrt()).unwrap(),
        ],
        n,
        m,
        0,
    )
    .unwrap()
}

struct Calibration {
    chosen_m: u64,
    anchor: ReplicationSummary,
    /// Summaries over the full published horizon grid at the chosen M.
    grid: Vec<(u64, ReplicationSummary)>,
}

/// Criterion-1 sweep, shared with criterion 2: best match at N = 200 under
/// the maximum tolerance-normalized error, then the full grid at that M.
static CALIBRATION: LazyLock<Calibration> = LazyLock::new(|| {
    let seed = seed_for(1);
    let mut best: Option<(u64, f64, ReplicationSummary)> = None;
    for m in C1_SWEEP.0..=C1_SWEEP.1 {
        let cfg = two_arm_normal_cfg((0.8, 0.2), 200, m);
        let summary = run_replications(&cfg, REPS, derive_seed(seed, m)).unwrap();
        let score = ((summary.pcs - C1_PCS_TARGET).abs() / PCS_TOL).max(
            (summary.mean_n1 - C1_N1_TARGET).abs() / (C1_N1_RTOL * C1_N1_TARGET),
        );
        if best.as_ref().is_none_or(|(_, s, _)| score < *s) {
            best = Some((m, score, summary));
        }
    }
    let (chosen_m, _, anchor) = best.expect("non-empty sweep");
    let grid = preset("table1_col2")
        .unwrap()
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = two_arm_normal_cfg((0.8, 0.2), n, chosen_m);
            (
                n,
                run_replications(&cfg, REPS, derive_seed(seed ^ 0xF00D, i as u64)).unwrap(),
            )
        })
        .collect();
    Calibration {
        chosen_m,
        anchor,
        grid,
    }
});

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn check_abs(label: &str, value: f64, target: f64, tol: f64) -> (String, bool) {
    let ok = (value - target).abs() <= tol;
    (
        format!("{label} = {value:.4} vs {target} +/- {tol:.4}"),
        ok,
    )
}

fn check_range(label: &str, value: f64, lo: f64, hi: f64) -> (String, bool) {
    let ok = in_range(value, lo, hi);
    (format!("{label} = {value:.4} vs [{lo}, {hi}]"), ok)
}

fn report(id: u32, title: &str, checks: &[(String, bool)]) {
    let pass = checks.iter().all(|(_, ok)| *ok);
    println!(
        "acceptance criterion {id} ({title}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    for (line, ok) in checks {
        println!("    [{}] {line}", if *ok { "ok" } else { "VIOLATION" });
    }
    assert!(pass, "criterion {id} ({title}) failed; see printed checks");
}

#[test]
fn criterion_1_two_arm_normal_reproduction() {
    let cal = &*CALIBRATION;
    println!(
        "criterion 1 chose M = {} (anchor pcs {:.4}, n1 {:.4})",
        cal.chosen_m, cal.anchor.pcs, cal.anchor.mean_n1
    );
    let mut checks = Vec::new();
    for &n in &C1_HORIZONS {
        let summary = &cal
            .grid
            .iter()
            .find(|(gn, _)| *gn == n)
            .expect("horizon in grid")
            .1;
        checks.push(check_abs(
            &format!("pcs at N = {n}"),
            summary.pcs,
            C1_PCS_TARGET,
            PCS_TOL,
        ));
        checks.push(check_abs(
            &format!("mean n1 at N = {n}"),
            summary.mean_n1,
            C1_N1_TARGET,
            C1_N1_RTOL * C1_N1_TARGET,
        ));
    }
    report(1, "two-arm Normal table reproduction", &checks);
}

#[test]
fn criterion_2_bounded_min_count_vs_growing_inferior_count() {
    let cal = &*CALIBRATION;
    let points: Vec<(f64, f64)> = cal
        .grid
        .iter()
        .map(|(n, s)| (*n as f64, s.mean_n1))
        .collect();
    let slope = log_slope(&points).unwrap();

    // Inferior-arm count for means (0.5, 0) under the inferior-table
    // calibration; the growth factor across the horizon range.
    let spec = preset("table5_col1").unwrap();
    let seed = seed_for(2);
    let at = |n: u64, idx: u64| {
        let cfg = spec.config_for(n).unwrap();
        run_replications(&cfg, REPS, derive_seed(seed, idx))
            .unwrap()
            .mean_inferior
            .unwrap()
    };
    let inferior_200 = at(200, 0);
    let inferior_3500 = at(3500, 1);
    let factor = inferior_3500 / inferior_200;

    let checks = vec![
        (
            format!(
                "n1 growth slope {slope:.4} per log-unit (threshold {FLAT_SLOPE_THRESHOLD})"
            ),
            slope < FLAT_SLOPE_THRESHOLD,
        ),
        (
            format!(
                "inferior count {inferior_200:.4} -> {inferior_3500:.4}, factor {factor:.3} vs [{}, {}]",
                C2_FACTOR_RANGE.0, C2_FACTOR_RANGE.1
            ),
            in_range(factor, C2_FACTOR_RANGE.0, C2_FACTOR_RANGE.1),
        ),
    ];
    report(2, "bounded n1 vs log-growing inferior count", &checks);
}

#[test]
fn criterion_3_bernoulli_reproduction() {
    let spec = preset("table2_col1").unwrap();
    let summary =
        run_replications(&spec.config_for(200).unwrap(), REPS, seed_for(3)).unwrap();
    let checks = vec![
        check_abs("pcs at N = 200", summary.pcs, C3_PCS_TARGET, PCS_TOL),
        check_abs(
            "mean n1 at N = 200",
            summary.mean_n1,
            C3_N1_TARGET,
            C3_N1_RTOL * C3_N1_TARGET,
        ),
    ];
    report(3, "two-arm Bernoulli table reproduction", &checks);
}

#[test]
fn criterion_4_identical_arms_null_case() {
    let spec = preset("table3_normal").unwrap();
    let summary =
        run_replications(&spec.config_for(1000).unwrap(), REPS, seed_for(4)).unwrap();
    let checks = vec![
        check_range("pcs", summary.pcs, C4_PCS_RANGE.0, C4_PCS_RANGE.1),
        check_range(
            "min expected count ratio",
            summary.min_expected_count_ratio,
            C4_RATIO_RANGE.0,
            C4_RATIO_RANGE.1,
        ),
        check_abs(
            "mean n1",
            summary.mean_n1,
            C4_N1_TARGET,
            C4_N1_RTOL * C4_N1_TARGET,
        ),
    ];
    report(4, "identical-arms null case", &checks);
}

#[test]
fn criterion_5_multi_treatment() {
    let spec = preset("table4_col1").unwrap();
    let seed = seed_for(5);
    let mut checks = Vec::new();
    for (i, (n, target)) in C5_SECOND_MAX_TARGETS.into_iter().enumerate() {
        let summary =
            run_replications(&spec.config_for(n).unwrap(), REPS, derive_seed(seed, i as u64))
                .unwrap();
        checks.push(check_abs(
            &format!("pcs at N = {n}"),
            summary.pcs,
            C5_PCS_TARGET,
            PCS_TOL,
        ));
        checks.push(check_abs(
            &format!("second-max count at N = {n}"),
            summary.mean_n1,
            target,
            C5_RTOL * target,
        ));
    }
    report(5, "multi-treatment table reproduction", &checks);
}

#[test]
fn criterion_6_real_data_scenarios() {
    let seed = seed_for(6);
    let mut checks = Vec::new();
    for (i, (name, (n, pcs_target, n1_target))) in
        [("pregabalin", C6_PREGABALIN), ("fluoxetine", C6_FLUOXETINE)]
            .into_iter()
            .enumerate()
    {
        let spec = preset(name).unwrap();
        let summary =
            run_replications(&spec.config_for(n).unwrap(), REPS, derive_seed(seed, i as u64))
                .unwrap();
        checks.push(check_abs(
            &format!("{name} pcs at N = {n}"),
            summary.pcs,
            pcs_target,
            PCS_TOL,
        ));
        checks.push(check_abs(
            &format!("{name} mean n1 at N = {n}"),
            summary.mean_n1,
            n1_target,
            C6_RTOL * n1_target,
        ));
    }
    report(6, "case-study scenario reproduction", &checks);
}

#[test]
fn criterion_7_theory_oracles() {
    let seed = seed_for(7);
    let mut checks = Vec::new();

    // (a) Closed-form vs numeric geometric rate.
    let mut worst_gap = 0.0f64;
    for u in C7_U_GRID {
        let model =
            ShiftedModel::new(ResponseModel::normal(0.0, 1.0).unwrap(), u).unwrap();
        let gap = (chernoff_rho_numeric(&model).unwrap() - chernoff_rho_normal(u).unwrap()).abs();
        worst_gap = worst_gap.max(gap);
    }
    checks.push((
        format!("closed vs numeric rate, worst |gap| {worst_gap:.2e} (tol {C7_RHO_AGREEMENT:.0e})"),
        worst_gap <= C7_RHO_AGREEMENT,
    ));

    // (b) Fitted geometric envelope and tail slope of the lock-in time.
    let u = 0.5;
    let model = ShiftedModel::new(ResponseModel::normal(0.0, 1.0).unwrap(), u).unwrap();
    let rho = chernoff_rho_normal(u).unwrap();
    let pilot_h = TailBound::horizon_for(rho, 1.0, C7_TAIL_MASS_TOL).unwrap();
    let pilot: Vec<u64> = stopping_time_batch(&model, pilot_h, C7_ORACLE_RUNS, seed)
        .unwrap()
        .iter()
        .map(|s| s.value)
        .collect();
    let c_pilot = TailBound::fit_constant(&pilot, rho, C7_TAIL_K0).unwrap();
    let horizon = TailBound::horizon_for(rho, c_pilot.max(1.0), C7_TAIL_MASS_TOL).unwrap();
    let batch = stopping_time_batch(&model, horizon, C7_ORACLE_RUNS, derive_seed(seed, 1)).unwrap();
    let censored = batch.iter().filter(|s| s.censored).count();
    checks.push((
        format!("oracle horizon {horizon} leaves {censored} censored runs"),
        censored == 0,
    ));
    let values: Vec<u64> = batch.iter().map(|s| s.value).collect();
    let c = TailBound::fit_constant(&values, rho, C7_TAIL_K0).unwrap();
    let bound = TailBound::new(rho, c, horizon).unwrap();
    let survival = empirical_survival(&values);
    let enveloped = survival
        .iter()
        .enumerate()
        .skip(C7_TAIL_K0 as usize)
        .all(|(k, s)| *s <= bound.survival_bound(k as u64) + 1e-12);
    checks.push((
        format!("survival under fitted envelope (c = {c:.4}) for all k >= {C7_TAIL_K0}"),
        enveloped,
    ));

    // Tail slope of ln P(M* > k) against k, fitted where at least
    // C7_MIN_TAIL_HITS runs survive.
    let min_frac = C7_MIN_TAIL_HITS as f64 / C7_ORACLE_RUNS as f64;
    let pts: Vec<(f64, f64)> = survival
        .iter()
        .enumerate()
        .skip(C7_TAIL_K0 as usize)
        .take_while(|(_, s)| **s >= min_frac)
        .map(|(k, s)| (k as f64, s.ln()))
        .collect();
    let (slope, points_used) = {
        let n = pts.len() as f64;
        let xb = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let yb = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0 - xb) * (p.1 - yb)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - xb) * (p.0 - xb)).sum();
        (num / den, pts.len())
    };
    checks.push((
        format!(
            "tail slope {slope:.4} over {points_used} points vs ln rho + slack = {:.4}",
            rho.ln() + C7_SLOPE_SLACK
        ),
        points_used >= 5 && slope <= rho.ln() + C7_SLOPE_SLACK,
    ));

    // (c) Moment stability under horizon doubling.
    let stability = moment_stability(
        &model,
        &[1, 2, 3],
        C7_MOMENT_HORIZONS,
        C7_ORACLE_RUNS,
        derive_seed(seed, 2),
    )
    .unwrap();
    let worst_change = stability
        .estimates
        .iter()
        .map(|e| e.relative_change)
        .fold(0.0, f64::max);
    checks.push((
        format!(
            "moments q = 1..3 stable under {:?} (worst change {worst_change:.2e})",
            C7_MOMENT_HORIZONS
        ),
        stability.stable,
    ));

    // (d) Paired domination of the minimum count by summed lock-in times
    // at u = (theta0 - theta1) / 3.
    let dom = n1_domination_check(1.5, 0.0, 400, 1, 4000, derive_seed(seed, 3)).unwrap();
    checks.push((
        format!(
            "mean n1 {:.4} <= mean lock-in sum {:.4} + 3 se ({:.4})",
            dom.mean_n1,
            dom.mean_stop_sum,
            3.0 * dom.diff_se
        ),
        dom.holds && dom.censored == 0,
    ));

    report(7, "tail-bound theory oracles", &checks);
}

#[test]
fn criterion_8_harness_integrity() {
    let seed = seed_for(8);
    let cfg = two_arm_normal_cfg((0.8, 0.2), 200, 13);

    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replications(&cfg, REPS, seed).unwrap())
    };
    let single = run_with(1);
    let quad = run_with(4);
    let eight = run_with(8);
    let identical = single == quad && quad == eight;

    // Meta-simulation of the distribution-free PCS standard-error bound.
    let pcs: Vec<f64> = (0..C8_META_RUNS)
        .map(|k| {
            run_replications(&cfg, REPS, derive_seed(seed ^ 0xBEEF, k))
                .unwrap()
                .pcs
        })
        .collect();
    let mean = pcs.iter().sum::<f64>() / pcs.len() as f64;
    let sd = (pcs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
        / (pcs.len() - 1) as f64)
        .sqrt();

    let checks = vec![
        (
            "summaries bit-identical across 1, 4 and 8 workers".to_string(),
            identical,
        ),
        (
            format!(
                "empirical sd of pcs over {C8_META_RUNS} harness runs = {sd:.5} <= {C8_PCS_SD_BOUND}"
            ),
            sd <= C8_PCS_SD_BOUND,
        ),
        (
            format!("reported bound {:.4} matches sqrt(1/(4R))", single.pcs_se_bound),
            single.pcs_se_bound == 0.005,
        ),
    ];
    report(8, "harness integrity", &checks);
}
