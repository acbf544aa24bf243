//! Replication harness: runs a trial configuration many times under
//! deterministic per-replication seeds and aggregates the summary
//! statistics.
//!
//! # Seed discipline
//!
//! Reproducibility is independent of the worker count. The derivation is
//! fixed, bit for bit:
//!
//! - replication `i` (0-based) of a harness run with master seed `s` draws
//!   every random quantity from `ChaCha8Rng::seed_from_u64(s)` switched to
//!   stream index `i` (see [`replication_rng`]);
//! - nested harnesses (e.g. one seed per table row) derive child master
//!   seeds with [`derive_seed`], the SplitMix64 sequence
//!   `mix64(s + (i + 1) * 0x9E3779B97F4A7C15)`.
//!
//! Replications run in parallel under rayon (`RAYON_NUM_THREADS` caps the
//! pool) and are reduced in fixed replication order with pairwise
//! summation, so a summary is bit-identical for any thread count.

use crate::metrics::TrialMetrics;
use crate::trial::{run_trial, ConfigError, TrialConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticError {
    #[error("boundedness diagnostic needs at least 3 horizons, got {0}")]
    TooFewPoints(usize),
    #[error("horizons must be strictly ascending")]
    NotAscending,
}

/// Aggregate over one batch of replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub reps: u64,
    /// Trial horizon the batch was run at.
    pub total_n: u64,
    /// Fraction of replications whose decision named the true-best arm.
    pub pcs: f64,
    /// Mean of the minimum / second-largest count.
    pub mean_n1: f64,
    /// Mean count of the truly worst arm; `None` when the true means tie at
    /// the minimum.
    pub mean_inferior: Option<f64>,
    /// `mean_inferior / ln(total_n)` (natural log).
    pub inferior_over_logn: Option<f64>,
    /// Smallest across-replication mean count over the arms.
    pub min_expected_count: f64,
    /// `min_expected_count / total_n`.
    pub min_expected_count_ratio: f64,
    /// Distribution-free bound on the PCS standard error, `sqrt(1/(4R))`.
    pub pcs_se_bound: f64,
    /// Across-replication mean count per arm.
    pub per_arm_mean_counts: Vec<f64>,
}

/// SplitMix64 sequence element `index` for state `master`; the documented
/// derivation for child master seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for replication `index` under `master_seed`: ChaCha8 keyed by the
/// master seed, switched to stream `index`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Distribution-free PCS standard-error bound `sqrt(1/(4R))`.
pub fn pcs_se_bound(reps: u64) -> f64 {
    (1.0 / (4.0 * reps as f64)).sqrt()
}

/// Fixed-order pairwise summation; deterministic and accurate enough that
/// accumulation error stays far below reporting precision for R up to 1e6.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

struct RepRecord {
    correct: bool,
    n1: u64,
    inferior: Option<u64>,
    counts: Vec<u64>,
}

/// Runs `reps` independent replications of `cfg` and aggregates them.
///
/// `cfg.seed` is ignored here: replication `i` uses
/// [`replication_rng`]`(master_seed, i)`. The aggregation is a pure
/// fixed-order fold over the per-replication records, so the summary does
/// not depend on scheduling.
pub fn run_replications(
    cfg: &TrialConfig,
    reps: u64,
    master_seed: u64,
) -> Result<ReplicationSummary, ConfigError> {
    cfg.validate()?;
    assert!(reps >= 1, "need at least one replication");
    let true_means = cfg.true_means();

    let records: Vec<RepRecord> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(master_seed, i);
            let outcome = run_trial(cfg, &mut rng).expect("config validated above");
            let metrics = TrialMetrics::from_outcome(&outcome, &true_means);
            RepRecord {
                correct: metrics.correct,
                n1: metrics.n1,
                inferior: metrics.inferior_count,
                counts: outcome.counts,
            }
        })
        .collect();

    let column = |f: &dyn Fn(&RepRecord) -> f64| -> f64 {
        let xs: Vec<f64> = records.iter().map(f).collect();
        pairwise_mean(&xs)
    };

    let pcs = column(&|r| if r.correct { 1.0 } else { 0.0 });
    let mean_n1 = column(&|r| r.n1 as f64);
    let mean_inferior = records[0]
        .inferior
        .is_some()
        .then(|| column(&|r| r.inferior.expect("uniqueness fixed per config") as f64));

    let arms = cfg.arms.len();
    let per_arm_mean_counts: Vec<f64> = (0..arms)
        .map(|j| column(&|r| r.counts[j] as f64))
        .collect();
    let min_expected_count = per_arm_mean_counts
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    Ok(ReplicationSummary {
        reps,
        total_n: cfg.total_n,
        pcs,
        mean_n1,
        mean_inferior,
        inferior_over_logn: mean_inferior.map(|m| m / (cfg.total_n as f64).ln()),
        min_expected_count,
        min_expected_count_ratio: min_expected_count / cfg.total_n as f64,
        pcs_se_bound: pcs_se_bound(reps),
        per_arm_mean_counts,
    })
}

/// Least-squares slope of `y` against `ln n` for `(n, y)` points.
pub fn log_slope(points: &[(f64, f64)]) -> Result<f64, DiagnosticError> {
    if points.len() < 3 {
        return Err(DiagnosticError::TooFewPoints(points.len()));
    }
    if !points.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(DiagnosticError::NotAscending);
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let xbar = pairwise_mean(&xs);
    let ybar = pairwise_mean(&ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - xbar) * (y - ybar);
        den += (x - xbar) * (x - xbar);
    }
    Ok(num / den)
}

/// A growth-rate slope below one count per log-unit is reported as flat.
pub const FLAT_SLOPE_THRESHOLD: f64 = 1.0;

/// Growth-rate verdicts for the two allocation statistics across horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    /// Slope of `mean_n1` against `ln N`.
    pub n1_slope: f64,
    /// Whether `n1_slope` is below [`FLAT_SLOPE_THRESHOLD`].
    pub n1_flat: bool,
    /// Slope of `mean_inferior` against `ln N`; expected to grow, so no
    /// verdict is attached. `None` when the batches carried no inferior
    /// statistic.
    pub inferior_slope: Option<f64>,
}

/// Regresses the summary statistics of several batches (ascending horizons)
/// against `ln N`.
pub fn boundedness_diagnostic(
    summaries: &[(u64, ReplicationSummary)],
) -> Result<BoundednessReport, DiagnosticError> {
    let n1_points: Vec<(f64, f64)> = summaries
        .iter()
        .map(|(n, s)| (*n as f64, s.mean_n1))
        .collect();
    let n1_slope = log_slope(&n1_points)?;

    let inferior_points: Option<Vec<(f64, f64)>> = summaries
        .iter()
        .map(|(n, s)| s.mean_inferior.map(|m| (*n as f64, m)))
        .collect();
    let inferior_slope = match inferior_points {
        Some(points) => Some(log_slope(&points)?),
        None => None,
    };

    Ok(BoundednessReport {
        n1_slope,
        n1_flat: n1_slope < FLAT_SLOPE_THRESHOLD,
        inferior_slope,
    })
}
