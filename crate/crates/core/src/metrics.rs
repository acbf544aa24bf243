//! Per-trial allocation statistics.
//!
//! Two views of "how many subjects the procedure wasted":
//!
//! - the *minimum / second-largest count* (`n1_two_arm`, `n1_multi`), which
//!   stays bounded as the horizon grows because the leader eventually locks
//!   in, and
//! - the *inferior-arm count* (`inferior_count`), the allocations to the arm
//!   with the smallest true mean, which keeps growing whenever the terminal
//!   inference goes wrong.

use crate::trial::TrialOutcome;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("true means tie at the minimum; use the count-based statistics instead")]
    TiedTrueMinimum,
    #[error("counts ({counts}) and true means ({means}) must have equal length")]
    LengthMismatch { counts: usize, means: usize },
}

/// Statistics extracted from one finished trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    /// Two arms: the smaller count. More arms: the largest count outside the
    /// most-sampled arm.
    pub n1: u64,
    /// Count of the arm with the smallest true mean; `None` when several
    /// arms tie for the true minimum.
    pub inferior_count: Option<u64>,
    pub correct: bool,
    pub decision: usize,
}

impl TrialMetrics {
    pub fn from_outcome(outcome: &TrialOutcome, true_means: &[f64]) -> TrialMetrics {
        TrialMetrics {
            n1: n1_multi(&outcome.counts),
            inferior_count: match inferior_count(&outcome.counts, true_means) {
                Ok(v) => Some(v),
                Err(MetricsError::TiedTrueMinimum) => None,
                Err(e) => panic!("outcome/means mismatch: {e}"),
            },
            correct: outcome.correct,
            decision: outcome.decision,
        }
    }
}

/// Smaller of the two arm counts.
pub fn n1_two_arm(counts: [u64; 2]) -> u64 {
    counts[0].min(counts[1])
}

/// Largest count among arms other than the most-sampled one, i.e. the
/// second-largest value with argmax ties resolved toward the lowest index.
///
/// Panics if fewer than two counts are supplied.
pub fn n1_multi(counts: &[u64]) -> u64 {
    assert!(counts.len() >= 2, "need at least two arms");
    let mut top = 0usize;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[top] {
            top = i;
        }
    }
    counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &c)| c)
        .max()
        .expect("at least one non-leader arm")
}

/// Count of the unique arm with the smallest true mean.
pub fn inferior_count(counts: &[u64], true_means: &[f64]) -> Result<u64, MetricsError> {
    if counts.len() != true_means.len() {
        return Err(MetricsError::LengthMismatch {
            counts: counts.len(),
            means: true_means.len(),
        });
    }
    let mut worst = 0usize;
    let mut ties = 1usize;
    for (i, &m) in true_means.iter().enumerate().skip(1) {
        if m < true_means[worst] {
            worst = i;
            ties = 1;
        } else if m == true_means[worst] {
            ties += 1;
        }
    }
    if ties > 1 {
        return Err(MetricsError::TiedTrueMinimum);
    }
    Ok(counts[worst])
}
