//! Anytime within-subpopulation bandit subroutines.
//!
//! Each subpopulation runs an independent copy of one of these; the harness
//! feeds it rewards whenever the subpopulation is sampled and asks for a final
//! recommendation at the end of the horizon. Both kinds are deterministic:
//! uniform exploration is derandomized to round-robin, UCB breaks ties by
//! lowest index, and recommendations take the best empirical mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubroutineKind {
    /// Round-robin over the arms.
    #[serde(rename = "uniform")]
    UniformExplore,
    /// UCB1 index rule with bonus `sqrt(2 ln(t + 1) / n_i)`.
    Ucb,
}

/// Per-arm pull count and reward sum; rewards lie in `[0, 1]`.
#[derive(Debug, Clone, Default)]
pub struct ArmStats {
    pub pull_count: u64,
    pub reward_sum: f64,
}

impl ArmStats {
    /// `None` until the arm has been pulled.
    pub fn empirical_mean(&self) -> Option<f64> {
        (self.pull_count > 0).then(|| self.reward_sum / self.pull_count as f64)
    }
}

/// State of one subroutine instance over `n` arms.
#[derive(Debug, Clone)]
pub struct SubroutineState {
    kind: SubroutineKind,
    arms: Vec<ArmStats>,
    total_pulls: u64,
}

impl SubroutineState {
    pub fn new(kind: SubroutineKind, arms: usize) -> Self {
        assert!(arms >= 1, "subroutine needs at least one arm");
        Self {
            kind,
            arms: vec![ArmStats::default(); arms],
            total_pulls: 0,
        }
    }

    pub fn kind(&self) -> SubroutineKind {
        self.kind
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    pub fn total_pulls(&self) -> u64 {
        self.total_pulls
    }

    /// Next arm to pull. Well-defined at every `total_pulls`, with no
    /// knowledge of the final horizon.
    pub fn next_arm(&self) -> usize {
        let n = self.arms.len();
        match self.kind {
            SubroutineKind::UniformExplore => (self.total_pulls % n as u64) as usize,
            SubroutineKind::Ucb => {
                // One initialization pass before the index is defined.
                if let Some(idx) = self.arms.iter().position(|a| a.pull_count == 0) {
                    return idx;
                }
                let log_term = 2.0 * ((self.total_pulls + 1) as f64).ln();
                let mut best = 0usize;
                let mut best_index = f64::NEG_INFINITY;
                for (i, arm) in self.arms.iter().enumerate() {
                    let mean = arm.reward_sum / arm.pull_count as f64;
                    let index = mean + (log_term / arm.pull_count as f64).sqrt();
                    if index > best_index {
                        best_index = index;
                        best = i;
                    }
                }
                best
            }
        }
    }

    /// Records one observed reward in `[0, 1]` for `arm`.
    pub fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.arms.len() {
            return Err(Error::ArmOutOfRange {
                index: arm,
                arms: self.arms.len(),
            });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange { value: reward });
        }
        self.arms[arm].pull_count += 1;
        self.arms[arm].reward_sum += reward;
        self.total_pulls += 1;
        Ok(())
    }

    /// Best empirical mean among pulled arms, ties to the lowest index;
    /// arm 0 when nothing was ever pulled.
    pub fn recommend(&self) -> usize {
        let mut best = 0usize;
        let mut best_mean = f64::NEG_INFINITY;
        for (i, arm) in self.arms.iter().enumerate() {
            if let Some(mean) = arm.empirical_mean() {
                if mean > best_mean {
                    best_mean = mean;
                    best = i;
                }
            }
        }
        if best_mean.is_finite() {
            best
        } else {
            0
        }
    }
}
