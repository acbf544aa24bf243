//! Single-trial engine: balanced initial phase, follow-the-leader
//! allocation, terminal decision.

use crate::response::{ArmState, ModelError, ResponseModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("need at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("initial sample size must be at least 1")]
    ZeroInitialSample,
    #[error(
        "total sample size {total_n} cannot cover {arms} arms with {initial_m} initial draws each"
    )]
    BudgetTooSmall {
        total_n: u64,
        arms: usize,
        initial_m: u64,
    },
    #[error("arm {index}: {source}")]
    InvalidArm { index: usize, source: ModelError },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialError {
    #[error("arm {0} has no observations yet; its mean is undefined")]
    UninitializedArm(usize),
}

/// Allocation procedure tag. A single sequential rule is defined; the
/// reported statistic (minimum count vs. inferior-arm count) is chosen at
/// the metrics layer, not here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Procedure {
    #[default]
    Adaptive,
}

/// Everything needed to run one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    /// Outcome distribution per arm, in arm order.
    pub arms: Vec<ResponseModel>,
    /// Total number of subjects, initial phase included.
    pub total_n: u64,
    /// Balanced draws per arm before adaptive allocation starts.
    pub initial_m: u64,
    /// Root seed for [`run_trial_seeded`].
    pub seed: u64,
    pub procedure: Procedure,
}

impl TrialConfig {
    pub fn new(
        arms: Vec<ResponseModel>,
        total_n: u64,
        initial_m: u64,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        let cfg = TrialConfig {
            arms,
            total_n,
            initial_m,
            seed,
            procedure: Procedure::Adaptive,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.arms.len() < 2 {
            return Err(ConfigError::TooFewArms(self.arms.len()));
        }
        if self.initial_m == 0 {
            return Err(ConfigError::ZeroInitialSample);
        }
        for (index, arm) in self.arms.iter().enumerate() {
            arm.validate()
                .map_err(|source| ConfigError::InvalidArm { index, source })?;
        }
        if self.total_n < self.arms.len() as u64 * self.initial_m {
            return Err(ConfigError::BudgetTooSmall {
                total_n: self.total_n,
                arms: self.arms.len(),
                initial_m: self.initial_m,
            });
        }
        Ok(())
    }

    pub fn true_means(&self) -> Vec<f64> {
        self.arms.iter().map(ResponseModel::true_mean).collect()
    }
}

/// Result of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Final allocation count per arm; sums to `total_n`.
    pub counts: Vec<u64>,
    /// Final sample mean per arm.
    pub final_means: Vec<f64>,
    /// Arm accepted as best.
    pub decision: usize,
    /// Whether the decision named the true-best arm (lowest index wins when
    /// several arms tie for the true maximum).
    pub correct: bool,
    /// Chosen arm per adaptive stage, recorded by [`run_trial_traced`].
    pub allocation_trace: Option<Vec<u32>>,
}

/// Picks the arm with the largest running mean.
///
/// Exact ties on the stored means are resolved uniformly at random; the
/// stream is consumed only when a tie actually exists.
pub fn allocate_next<R: Rng + ?Sized>(
    states: &[ArmState],
    rng: &mut R,
) -> Result<usize, TrialError> {
    let mut best = f64::NEG_INFINITY;
    let mut leader = 0usize;
    let mut tied = 0usize;
    for (i, state) in states.iter().enumerate() {
        let mean = state.mean().ok_or(TrialError::UninitializedArm(i))?;
        if mean > best {
            best = mean;
            leader = i;
            tied = 1;
        } else if mean == best {
            tied += 1;
        }
    }
    if tied == 1 {
        return Ok(leader);
    }
    let pick = rng.random_range(0..tied);
    let mut seen = 0usize;
    for (i, state) in states.iter().enumerate() {
        if state.mean() == Some(best) {
            if seen == pick {
                return Ok(i);
            }
            seen += 1;
        }
    }
    unreachable!("tie census counted {tied} arms");
}

/// Lowest-indexed arm with the largest true mean.
pub(crate) fn best_true_arm(models: &[ResponseModel]) -> usize {
    let mut best = 0usize;
    for (i, model) in models.iter().enumerate().skip(1) {
        if model.true_mean() > models[best].true_mean() {
            best = i;
        }
    }
    best
}

/// Core loop shared by the public entry points and the coupled-stream
/// harness in [`crate::bounds`]. `sample` produces the response for the
/// given arm; the production sampler draws from `cfg.arms`.
///
/// Stream order per trial: the initial phase draws `initial_m` responses
/// from each arm in arm order 0..m; each adaptive stage then consumes a
/// tie-break draw (only when tied) followed by the chosen arm's response;
/// the terminal decision consumes one further draw only on a final tie.
pub(crate) fn run_trial_with_sampler<R, F>(
    cfg: &TrialConfig,
    rng: &mut R,
    record_trace: bool,
    mut sample: F,
) -> Result<TrialOutcome, ConfigError>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> f64,
{
    cfg.validate()?;
    let arms = cfg.arms.len();
    let mut states = vec![ArmState::new(); arms];

    for (arm, state) in states.iter_mut().enumerate() {
        for _ in 0..cfg.initial_m {
            let x = sample(arm, rng);
            state.update(x);
        }
    }

    let mut drawn = arms as u64 * cfg.initial_m;
    let mut trace =
        record_trace.then(|| Vec::with_capacity((cfg.total_n - drawn) as usize));
    while drawn < cfg.total_n {
        let arm = allocate_next(&states, rng).expect("initial phase seeds every arm");
        let x = sample(arm, rng);
        states[arm].update(x);
        drawn += 1;
        if let Some(t) = trace.as_mut() {
            t.push(arm as u32);
        }
    }

    // Terminal acceptance follows the same argmax-with-uniform-tie-break rule
    // applied to the final means.
    let decision = allocate_next(&states, rng).expect("initial phase seeds every arm");
    let correct = decision == best_true_arm(&cfg.arms);

    Ok(TrialOutcome {
        counts: states.iter().map(ArmState::count).collect(),
        final_means: states
            .iter()
            .map(|s| s.mean().expect("every arm observed"))
            .collect(),
        decision,
        correct,
        allocation_trace: trace,
    })
}

/// Runs one trial to its horizon on the supplied stream.
pub fn run_trial<R: Rng + ?Sized>(
    cfg: &TrialConfig,
    rng: &mut R,
) -> Result<TrialOutcome, ConfigError> {
    run_trial_with_sampler(cfg, rng, false, |arm, rng| cfg.arms[arm].draw(rng))
}

/// Same as [`run_trial`] but records the chosen arm at every adaptive stage.
pub fn run_trial_traced<R: Rng + ?Sized>(
    cfg: &TrialConfig,
    rng: &mut R,
) -> Result<TrialOutcome, ConfigError> {
    run_trial_with_sampler(cfg, rng, true, |arm, rng| cfg.arms[arm].draw(rng))
}

/// Runs one trial on a fresh ChaCha8 stream seeded from `cfg.seed`
/// (stream index 0).
pub fn run_trial_seeded(cfg: &TrialConfig) -> Result<TrialOutcome, ConfigError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_trial(cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state_with(values: &[f64]) -> ArmState {
        let mut s = ArmState::new();
        for &v in values {
            s.update(v);
        }
        s
    }

    #[test]
    fn config_validation() {
        let normal = ResponseModel::normal(0.0, 1.0).unwrap();
        assert!(matches!(
            TrialConfig::new(vec![normal], 10, 1, 0),
            Err(ConfigError::TooFewArms(1))
        ));
        assert!(matches!(
            TrialConfig::new(vec![normal, normal], 3, 2, 0),
            Err(ConfigError::BudgetTooSmall { .. })
        ));
        assert!(matches!(
            TrialConfig::new(vec![normal, normal], 10, 0, 0),
            Err(ConfigError::ZeroInitialSample)
        ));
        let bad = ResponseModel::Normal { mean: 0.0, sd: -1.0 };
        assert!(matches!(
            TrialConfig::new(vec![normal, bad], 10, 1, 0),
            Err(ConfigError::InvalidArm { index: 1, .. })
        ));
        assert!(TrialConfig::new(vec![normal, normal], 4, 2, 0).is_ok());
    }

    #[test]
    fn strict_maximum_wins_without_consuming_stream() {
        let states = [state_with(&[0.6]), state_with(&[0.3])];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let before = rng.clone();
        assert_eq!(allocate_next(&states, &mut rng).unwrap(), 0);
        // No tie, so the stream must be untouched.
        assert_eq!(rng, before);
    }

    #[test]
    fn uninitialized_arm_is_an_error() {
        let states = [state_with(&[0.6]), ArmState::new()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            allocate_next(&states, &mut rng),
            Err(TrialError::UninitializedArm(1))
        );
    }

    #[test]
    fn two_way_tie_splits_evenly() {
        let states = [state_with(&[0.4]), state_with(&[0.4])];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 100_000;
        let mut zero = 0u32;
        for _ in 0..reps {
            if allocate_next(&states, &mut rng).unwrap() == 0 {
                zero += 1;
            }
        }
        let freq = f64::from(zero) / reps as f64;
        assert!((freq - 0.5).abs() < 0.01, "arm 0 frequency {freq}");
    }

    #[test]
    fn three_arm_tie_excludes_trailing_arm() {
        let states = [
            state_with(&[1.0]),
            state_with(&[1.0]),
            state_with(&[0.2]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let reps = 100_000;
        let mut hits = [0u32; 3];
        for _ in 0..reps {
            hits[allocate_next(&states, &mut rng).unwrap()] += 1;
        }
        assert_eq!(hits[2], 0, "trailing arm must never be chosen");
        for (arm, &h) in hits.iter().take(2).enumerate() {
            let freq = f64::from(h) / reps as f64;
            assert!((freq - 0.5).abs() < 0.01, "arm {arm} frequency {freq}");
        }
    }

    #[test]
    fn deterministic_arms_force_the_leader() {
        let cfg = TrialConfig::new(
            vec![
                ResponseModel::bernoulli(1.0).unwrap(),
                ResponseModel::bernoulli(0.0).unwrap(),
            ],
            10,
            1,
            5,
        )
        .unwrap();
        let outcome = run_trial_seeded(&cfg).unwrap();
        assert_eq!(outcome.counts, vec![9, 1]);
        assert_eq!(outcome.decision, 0);
        assert!(outcome.correct);
        assert_eq!(outcome.final_means, vec![1.0, 0.0]);
    }

    #[test]
    fn counts_always_sum_to_total() {
        let cfg = TrialConfig::new(
            vec![
                ResponseModel::normal(0.8, 1.0).unwrap(),
                ResponseModel::normal(0.2, 0.7f64.sqrt()).unwrap(),
            ],
            157,
            4,
            77,
        )
        .unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outcome = run_trial(&cfg, &mut rng).unwrap();
            assert_eq!(outcome.counts.iter().sum::<u64>(), 157);
        }
    }

    #[test]
    fn identical_seed_reproduces_outcome_and_trace() {
        let cfg = TrialConfig::new(
            vec![
                ResponseModel::normal(0.5, 1.0).unwrap(),
                ResponseModel::bernoulli(0.4).unwrap(),
                ResponseModel::normal(0.1, 2.0).unwrap(),
            ],
            90,
            3,
            123,
        )
        .unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut b = ChaCha8Rng::seed_from_u64(cfg.seed);
        let first = run_trial_traced(&cfg, &mut a).unwrap();
        let second = run_trial_traced(&cfg, &mut b).unwrap();
        assert_eq!(first, second);
        assert_eq!(
            first.allocation_trace.as_ref().unwrap().len() as u64,
            cfg.total_n - 3 * cfg.initial_m
        );
    }

    #[test]
    fn zero_adaptive_stages_still_decides() {
        let cfg = TrialConfig::new(
            vec![
                ResponseModel::normal(1.0, 1.0).unwrap(),
                ResponseModel::normal(0.0, 1.0).unwrap(),
            ],
            6,
            3,
            9,
        )
        .unwrap();
        let outcome = run_trial_seeded(&cfg).unwrap();
        assert_eq!(outcome.counts, vec![3, 3]);
        assert!(outcome.decision < 2);
    }

    #[test]
    fn true_tie_scores_against_lowest_index() {
        // Identical arms: correctness is scored against arm 0, so the
        // correct flag must simply mirror decision == 0.
        let cfg = TrialConfig::new(
            vec![
                ResponseModel::normal(1.0, 1.0).unwrap(),
                ResponseModel::normal(1.0, 1.0).unwrap(),
            ],
            40,
            2,
            0,
        )
        .unwrap();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outcome = run_trial(&cfg, &mut rng).unwrap();
            assert_eq!(outcome.correct, outcome.decision == 0);
        }
    }
}
