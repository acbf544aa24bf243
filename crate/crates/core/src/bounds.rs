//! Tail machinery for the allocation rule's finiteness guarantees.
//!
//! Everything here revolves around one object: a centered increment stream
//! `Z` pushed below zero by a positive drift `u` (`X = Z - u`). Minimizing
//! the moment generating function of `X` over `t >= 0` yields the geometric
//! rate `rho < 1` that controls `P(running mean of Z stays above u)`, which
//! in turn bounds the lock-in time
//!
//! ```text
//! M*_u = inf { k : running mean of Z_1..Z_n <= u for all n >= k }
//! ```
//!
//! The lock-in time cannot be computed exactly (its definition quantifies
//! over an infinite future), so [`stopping_time_oracle`] simulates it on a
//! truncated horizon chosen such that the geometric tail beyond the horizon
//! is quantifiably negligible ([`TailBound::horizon_for`]); truncated runs
//! are flagged as censored, never silently dropped.

use crate::montecarlo::{pairwise_sum, replication_rng};
use crate::response::ResponseModel;
use crate::trial::{run_trial_with_sampler, ConfigError, TrialConfig};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("shift u must be finite and > 0 (E(Z - u) = -u must be negative), got {0}")]
    NonPositiveShift(f64),
    #[error("normal base must be the standard normal, got mean {mean}, sd {sd}")]
    NonStandardNormalBase { mean: f64, sd: f64 },
    #[error("invalid base model: {0}")]
    InvalidBase(#[from] crate::response::ModelError),
    #[error("P(Z - u > 0) = 0: {0}")]
    ZeroUpcrossProbability(String),
    #[error("rate must satisfy 0 < rho < 1, got {0}")]
    RhoOutOfRange(f64),
    #[error("constant must be finite and > 0, got {0}")]
    NonPositiveConstant(f64),
    #[error("horizon must be at least 1")]
    HorizonTooSmall,
    #[error("horizons must be ascending and distinct, got ({0}, {1})")]
    HorizonsNotAscending(u64, u64),
    #[error("{censored} of {runs} runs censored at horizon {horizon}; raise the horizon")]
    ExcessiveCensoring {
        censored: u64,
        runs: u64,
        horizon: u64,
    },
    #[error("gap between the leading and trailing mean must be > 0, got {0}")]
    NonPositiveGap(f64),
    #[error("epsilon must be finite and >= 0, got {0}")]
    NegativeEpsilon(f64),
    #[error("initial sample size must be at least 1")]
    ZeroInitialSample,
    #[error("trial configuration: {0}")]
    Config(#[from] ConfigError),
}

/// Centered increment stream minus a positive drift.
///
/// The base model fixes the law of `Z`: a Normal base must be the standard
/// normal (`Z` is the variable itself), a Bernoulli base is centered at its
/// mean (`Z = B - p`). The shifted increment is `X = Z - u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedModel {
    base: ResponseModel,
    shift: f64,
}

impl ShiftedModel {
    pub fn new(base: ResponseModel, shift: f64) -> Result<Self, BoundsError> {
        base.validate()?;
        if !(shift.is_finite() && shift > 0.0) {
            return Err(BoundsError::NonPositiveShift(shift));
        }
        if let ResponseModel::Normal { mean, sd } = base {
            if mean != 0.0 || sd != 1.0 {
                return Err(BoundsError::NonStandardNormalBase { mean, sd });
            }
        }
        Ok(ShiftedModel { base, shift })
    }

    pub fn base(&self) -> ResponseModel {
        self.base
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Moment generating function of `X = Z - u` at `t`.
    pub fn mgf(&self, t: f64) -> f64 {
        let u = self.shift;
        match self.base {
            ResponseModel::Normal { .. } => (-u * t + 0.5 * t * t).exp(),
            ResponseModel::Bernoulli { p } => {
                (-t * (p + u)).exp() * (1.0 - p + p * t.exp())
            }
        }
    }

    /// Derivative of the mgf at `t`; used only to bracket the minimizer.
    fn mgf_deriv(&self, t: f64) -> f64 {
        let u = self.shift;
        match self.base {
            ResponseModel::Normal { .. } => (t - u) * self.mgf(t),
            ResponseModel::Bernoulli { p } => {
                let w = p * t.exp() / (1.0 - p + p * t.exp());
                self.mgf(t) * (w - (p + u))
            }
        }
    }

    /// One draw of the centered increment `Z`.
    fn centered_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.base {
            ResponseModel::Normal { .. } => self.base.draw(rng),
            ResponseModel::Bernoulli { p } => self.base.draw(rng) - p,
        }
    }

    /// Checks `P(X > 0) > 0`, the second hypothesis of the geometric-rate
    /// result.
    fn check_upcross(&self) -> Result<(), BoundsError> {
        match self.base {
            ResponseModel::Normal { .. } => Ok(()),
            ResponseModel::Bernoulli { p } => {
                if p <= 0.0 {
                    return Err(BoundsError::ZeroUpcrossProbability(format!(
                        "bernoulli p = {p} never succeeds"
                    )));
                }
                if p + self.shift >= 1.0 {
                    return Err(BoundsError::ZeroUpcrossProbability(format!(
                        "success value 1 - p - u = {} is not positive",
                        1.0 - p - self.shift
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Geometric rate for a standard normal stream: the mgf
/// `exp(-u t + t^2 / 2)` is minimized at `t = u`, giving `exp(-u^2 / 2)`.
pub fn chernoff_rho_normal(u: f64) -> Result<f64, BoundsError> {
    if !(u.is_finite() && u > 0.0) {
        return Err(BoundsError::NonPositiveShift(u));
    }
    Ok((-0.5 * u * u).exp())
}

const GOLDEN_RATIO_CONJUGATE: f64 = 0.618_033_988_749_894_8;

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut c = hi - GOLDEN_RATIO_CONJUGATE * (hi - lo);
    let mut d = lo + GOLDEN_RATIO_CONJUGATE * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if hi - lo <= 1e-9 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN_RATIO_CONJUGATE * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN_RATIO_CONJUGATE * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Geometric rate for an arbitrary shifted stream, by numeric minimization
/// of the mgf over `t >= 0`.
///
/// The mgf is convex with `M(0) = 1` and `M'(0) = -u < 0`, so the minimizer
/// is interior once `P(X > 0) > 0` forces the mgf back up; the bracket is
/// grown geometrically until the derivative turns positive and the minimum
/// located by golden-section search (rate accurate to well under 1e-10).
pub fn chernoff_rho_numeric(model: &ShiftedModel) -> Result<f64, BoundsError> {
    model.check_upcross()?;
    let mut hi = 1.0;
    while model.mgf_deriv(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(BoundsError::ZeroUpcrossProbability(
                "mgf keeps decreasing; no interior minimum".into(),
            ));
        }
    }
    let t_star = golden_section_min(|t| model.mgf(t), 0.0, hi);
    let rho = model.mgf(t_star);
    if !(rho > 0.0 && rho < 1.0) {
        return Err(BoundsError::RhoOutOfRange(rho));
    }
    Ok(rho)
}

/// Geometric survival envelope `min(1, c * rho^k / (1 - rho))` together
/// with the truncation horizon it justifies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// Geometric rate, in (0, 1).
    pub rho: f64,
    /// Multiplicative constant, > 0.
    pub c: f64,
    /// Truncation horizon for the lock-in oracle.
    pub horizon: u64,
}

impl TailBound {
    pub fn new(rho: f64, c: f64, horizon: u64) -> Result<Self, BoundsError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(BoundsError::RhoOutOfRange(rho));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(BoundsError::NonPositiveConstant(c));
        }
        if horizon == 0 {
            return Err(BoundsError::HorizonTooSmall);
        }
        Ok(TailBound { rho, c, horizon })
    }

    /// `min(1, c * rho^k / (1 - rho))`.
    pub fn survival_bound(&self, k: u64) -> f64 {
        let raw = self.c * self.rho.powi(k as i32) / (1.0 - self.rho);
        raw.min(1.0)
    }

    /// Smallest horizon whose truncated tail mass `c * rho^h / (1 - rho)`
    /// falls below `tol`.
    pub fn horizon_for(rho: f64, c: f64, tol: f64) -> Result<u64, BoundsError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(BoundsError::RhoOutOfRange(rho));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(BoundsError::NonPositiveConstant(c));
        }
        let target = tol * (1.0 - rho) / c;
        if target >= 1.0 {
            return Ok(1);
        }
        Ok((target.ln() / rho.ln()).ceil().max(1.0) as u64)
    }

    /// Smallest constant whose envelope dominates the empirical survival of
    /// `values` from `k0` onward. `None` when no value exceeds `k0`.
    pub fn fit_constant(values: &[u64], rho: f64, k0: u64) -> Option<f64> {
        let survival = empirical_survival(values);
        let mut c: Option<f64> = None;
        for (k, frac) in survival.iter().enumerate().skip(k0 as usize) {
            if *frac <= 0.0 {
                break;
            }
            let needed = frac * (1.0 - rho) / rho.powi(k as i32);
            c = Some(c.map_or(needed, |v: f64| v.max(needed)));
        }
        c
    }
}

/// Empirical survival curve: entry `k` is the fraction of values strictly
/// greater than `k`, for `k` in `0..=max(values)`.
pub fn empirical_survival(values: &[u64]) -> Vec<f64> {
    let max = values.iter().copied().max().unwrap_or(0) as usize;
    let mut above = vec![0u64; max + 1];
    for &v in values {
        // v exceeds every k < v
        if v > 0 {
            above[v as usize - 1] += 1;
        }
    }
    // suffix-sum: above[k] = #{v : v > k}
    for k in (0..max).rev() {
        above[k] += above[k + 1];
    }
    let n = values.len() as f64;
    above.into_iter().map(|cnt| cnt as f64 / n).collect()
}

/// Truncated lock-in time of a running mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoppingTime {
    /// Smallest `k` such that the running mean stays `<= u` on
    /// `[k, horizon]`; `horizon + 1` when even the last mean exceeds `u`.
    pub value: u64,
    /// True when the stream was still violating at the horizon, i.e. the
    /// reported value is a truncation artifact.
    pub censored: bool,
}

/// Lock-in time of the running means of an explicit stream, truncated at
/// `horizon`.
pub fn stopping_time_from_stream<I>(zs: I, u: f64, horizon: u64) -> Result<StoppingTime, BoundsError>
where
    I: IntoIterator<Item = f64>,
{
    if horizon == 0 {
        return Err(BoundsError::HorizonTooSmall);
    }
    let mut sum = 0.0;
    let mut last_violation = 0u64;
    for (idx, z) in zs.into_iter().take(horizon as usize).enumerate() {
        let n = idx as u64 + 1;
        sum += z;
        if sum / n as f64 > u {
            last_violation = n;
        }
    }
    Ok(StoppingTime {
        value: last_violation + 1,
        censored: last_violation == horizon,
    })
}

/// Simulates one truncated lock-in time by drawing the centered stream of
/// `model` from `rng`.
pub fn stopping_time_oracle<R: Rng + ?Sized>(
    model: &ShiftedModel,
    horizon: u64,
    rng: &mut R,
) -> Result<StoppingTime, BoundsError> {
    if horizon == 0 {
        return Err(BoundsError::HorizonTooSmall);
    }
    let u = model.shift;
    stopping_time_from_stream((0..horizon).map(|_| model.centered_draw(rng)), u, horizon)
}

/// Simulates `runs` independent truncated lock-in times under the standard
/// seed discipline (run `i` uses [`replication_rng`]`(master_seed, i)`).
pub fn stopping_time_batch(
    model: &ShiftedModel,
    horizon: u64,
    runs: u64,
    master_seed: u64,
) -> Result<Vec<StoppingTime>, BoundsError> {
    if horizon == 0 {
        return Err(BoundsError::HorizonTooSmall);
    }
    Ok((0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(master_seed, i);
            stopping_time_oracle(model, horizon, &mut rng).expect("horizon checked above")
        })
        .collect())
}

/// Relative change below which a moment estimate counts as stable under
/// horizon doubling.
pub const MOMENT_STABILITY_TOLERANCE: f64 = 0.02;

/// Censored fraction above which moment estimation refuses to run.
pub const MAX_CENSORED_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub order: u32,
    pub at_first_horizon: f64,
    pub at_second_horizon: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentStabilityReport {
    pub runs: u64,
    pub horizons: (u64, u64),
    pub censored: (u64, u64),
    pub estimates: Vec<MomentEstimate>,
    /// All requested orders moved by less than
    /// [`MOMENT_STABILITY_TOLERANCE`] between the horizons.
    pub stable: bool,
}

/// Estimates `E[(M*_u)^q]` for each requested order at two horizons and
/// reports the relative change.
///
/// The two horizons share random numbers: each run draws one stream of
/// length `h2` and reads the lock-in time off both prefixes, so the
/// comparison isolates the truncation effect.
pub fn moment_stability(
    model: &ShiftedModel,
    orders: &[u32],
    horizons: (u64, u64),
    runs: u64,
    master_seed: u64,
) -> Result<MomentStabilityReport, BoundsError> {
    let (h1, h2) = horizons;
    if h1 == 0 {
        return Err(BoundsError::HorizonTooSmall);
    }
    if h2 <= h1 {
        return Err(BoundsError::HorizonsNotAscending(h1, h2));
    }

    let u = model.shift;
    let per_run: Vec<(u64, u64)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(master_seed, i);
            let mut sum = 0.0;
            let mut last_v1 = 0u64;
            let mut last_v2 = 0u64;
            for n in 1..=h2 {
                sum += model.centered_draw(&mut rng);
                if sum / n as f64 > u {
                    if n <= h1 {
                        last_v1 = n;
                    }
                    last_v2 = n;
                }
            }
            (last_v1 + 1, last_v2 + 1)
        })
        .collect();

    let censored1 = per_run.iter().filter(|(v1, _)| *v1 == h1 + 1).count() as u64;
    let censored2 = per_run.iter().filter(|(_, v2)| *v2 == h2 + 1).count() as u64;
    for (censored, horizon) in [(censored1, h1), (censored2, h2)] {
        if censored as f64 / runs as f64 > MAX_CENSORED_FRACTION {
            return Err(BoundsError::ExcessiveCensoring {
                censored,
                runs,
                horizon,
            });
        }
    }

    let estimates: Vec<MomentEstimate> = orders
        .iter()
        .map(|&q| {
            let m1: Vec<f64> = per_run.iter().map(|(v1, _)| (*v1 as f64).powi(q as i32)).collect();
            let m2: Vec<f64> = per_run.iter().map(|(_, v2)| (*v2 as f64).powi(q as i32)).collect();
            let a = pairwise_sum(&m1) / runs as f64;
            let b = pairwise_sum(&m2) / runs as f64;
            MomentEstimate {
                order: q,
                at_first_horizon: a,
                at_second_horizon: b,
                relative_change: (b - a).abs() / a,
            }
        })
        .collect();

    let stable = estimates
        .iter()
        .all(|e| e.relative_change < MOMENT_STABILITY_TOLERANCE);

    Ok(MomentStabilityReport {
        runs,
        horizons,
        censored: (censored1, censored2),
        estimates,
        stable,
    })
}

/// Standard normal CDF via the complementary error function
/// (`0.5 * erfc(-x / sqrt(2))`, erfc from libm); absolute error is below
/// 1e-12 across the line, pinned against reference values in the tests.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper bound on the probability that the terminal inference picks the
/// wrong arm: `Phi(-(delta + eps) * sqrt(m_init))`, where `delta` is the
/// true gap between the leading means and `m_init` the balanced initial
/// sample size per arm.
pub fn incorrect_inference_bound(delta: f64, eps: f64, m_init: u64) -> Result<f64, BoundsError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(BoundsError::NonPositiveGap(delta));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(BoundsError::NegativeEpsilon(eps));
    }
    if m_init == 0 {
        return Err(BoundsError::ZeroInitialSample);
    }
    Ok(standard_normal_cdf(-(delta + eps) * (m_init as f64).sqrt()))
}

/// Paired comparison of the two-arm minimum count against the summed
/// lock-in times of the arms' centered streams.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationCheck {
    pub reps: u64,
    pub mean_n1: f64,
    pub mean_stop_sum: f64,
    /// Mean of the per-replication difference `(M*_0 + M*_1) - N1`.
    pub diff_mean: f64,
    /// Standard error of that paired difference.
    pub diff_se: f64,
    /// Lock-in times that were still censored at the trial horizon.
    pub censored: u64,
    /// `mean_n1 <= mean_stop_sum + 3 * diff_se`.
    pub holds: bool,
}

/// Runs paired replications of a two-arm unit-variance Normal trial and of
/// the lock-in times of its per-arm centered streams, sharing the response
/// randomness, with drift `u = (theta0 - theta1) / 3`.
///
/// Streams per replication `i`: arm 0 responses from stream `3i`, arm 1
/// responses from stream `3i + 1`, tie-breaks and the terminal coin from
/// stream `3i + 2`, all under `master_seed`.
pub fn n1_domination_check(
    theta0: f64,
    theta1: f64,
    total_n: u64,
    initial_m: u64,
    reps: u64,
    master_seed: u64,
) -> Result<DominationCheck, BoundsError> {
    let gap = theta0 - theta1;
    if gap.is_nan() || gap <= 0.0 {
        return Err(BoundsError::NonPositiveGap(gap));
    }
    let u = gap / 3.0;
    let cfg = TrialConfig::new(
        vec![
            ResponseModel::normal(theta0, 1.0).expect("finite mean, unit sd"),
            ResponseModel::normal(theta1, 1.0).expect("finite mean, unit sd"),
        ],
        total_n,
        initial_m,
        0,
    )?;
    let std_normal = ResponseModel::normal(0.0, 1.0).expect("standard normal");
    let theta = [theta0, theta1];

    struct Paired {
        n1: u64,
        stop_sum: u64,
        censored: u64,
    }

    let rows: Vec<Paired> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let z: [Vec<f64>; 2] = std::array::from_fn(|arm| {
                let mut rng = replication_rng(master_seed, 3 * i + arm as u64);
                (0..total_n).map(|_| std_normal.draw(&mut rng)).collect()
            });
            let mut trial_rng = replication_rng(master_seed, 3 * i + 2);
            let mut pos = [0usize; 2];
            let outcome = run_trial_with_sampler(&cfg, &mut trial_rng, false, |arm, _| {
                let x = theta[arm] + z[arm][pos[arm]];
                pos[arm] += 1;
                x
            })
            .expect("config validated above");
            let n1 = outcome.counts[0].min(outcome.counts[1]);

            let mut stop_sum = 0u64;
            let mut censored = 0u64;
            for stream in &z {
                let st = stopping_time_from_stream(stream.iter().copied(), u, total_n)
                    .expect("total_n >= 1");
                stop_sum += st.value;
                censored += u64::from(st.censored);
            }
            Paired {
                n1,
                stop_sum,
                censored,
            }
        })
        .collect();

    let n1s: Vec<f64> = rows.iter().map(|r| r.n1 as f64).collect();
    let sums: Vec<f64> = rows.iter().map(|r| r.stop_sum as f64).collect();
    let diffs: Vec<f64> = rows
        .iter()
        .map(|r| r.stop_sum as f64 - r.n1 as f64)
        .collect();
    let mean_n1 = pairwise_sum(&n1s) / reps as f64;
    let mean_stop_sum = pairwise_sum(&sums) / reps as f64;
    let diff_mean = pairwise_sum(&diffs) / reps as f64;
    let sq: Vec<f64> = diffs.iter().map(|d| (d - diff_mean) * (d - diff_mean)).collect();
    let diff_se = (pairwise_sum(&sq) / (reps.saturating_sub(1).max(1)) as f64 / reps as f64).sqrt();

    Ok(DominationCheck {
        reps,
        mean_n1,
        mean_stop_sum,
        diff_mean,
        diff_se,
        censored: rows.iter().map(|r| r.censored).sum(),
        holds: mean_n1 <= mean_stop_sum + 3.0 * diff_se,
    })
}
