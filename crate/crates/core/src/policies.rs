//! Subpopulation-selection policies.
//!
//! A policy decides, each round, whether the context is drawn passively from
//! the population distribution or chosen actively, and from which sampling
//! distribution. Treatment selection inside each subpopulation is always
//! delegated to a per-subpopulation bandit subroutine.
//!
//! Five policies are provided:
//!
//! - `Passive`: the environment draws every context.
//! - `KnownPActive`: samples contexts from the optimal active allocation
//!   `q_j ∝ p_j^(2/3)` every round.
//! - `BudgetedActive`: passive for the first `floor((1 - alpha) T)` rounds,
//!   then active from the residual distribution `r` of the budget solution.
//! - `UniformActiveAgnostic`: active uniform over subpopulations, knowing
//!   nothing about `p`.
//! - `Eetc`: explore-explore-then-commit; passive until the stopping time
//!   `tau_2`, estimating `p`, then committed active sampling from the frozen
//!   budgeted solution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    alpha_min, budgeted_allocation, optimal_active_allocation, Allocation, BudgetSolution,
    PopulationDistribution,
};
use crate::error::{Error, Result};
use crate::rng::sample_categorical;
use crate::subroutines::{SubroutineKind, SubroutineState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Passive,
    #[serde(rename = "active-known-p")]
    KnownPActive,
    #[serde(rename = "budgeted")]
    BudgetedActive,
    #[serde(rename = "uniform-active")]
    UniformActiveAgnostic,
    Eetc,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Passive => "passive",
            PolicyKind::KnownPActive => "active-known-p",
            PolicyKind::BudgetedActive => "budgeted",
            PolicyKind::UniformActiveAgnostic => "uniform-active",
            PolicyKind::Eetc => "eetc",
        }
    }
}

/// Fully resolved policy configuration.
#[derive(Debug, Clone)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Required for `KnownPActive` and `BudgetedActive`.
    pub known_p: Option<PopulationDistribution>,
    /// Required for `BudgetedActive`.
    pub budget_alpha: Option<f64>,
    pub subroutine: SubroutineKind,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind, subroutine: SubroutineKind) -> Self {
        Self {
            kind,
            known_p: None,
            budget_alpha: None,
            subroutine,
        }
    }

    pub fn with_known_p(mut self, p: PopulationDistribution) -> Self {
        self.known_p = Some(p);
        self
    }

    pub fn with_budget_alpha(mut self, alpha: f64) -> Self {
        self.budget_alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PolicyKind::KnownPActive => {
                if self.known_p.is_none() {
                    return Err(Error::Config(
                        "active-known-p requires the population distribution".into(),
                    ));
                }
            }
            PolicyKind::BudgetedActive => {
                if self.known_p.is_none() {
                    return Err(Error::Config(
                        "budgeted requires the population distribution".into(),
                    ));
                }
                match self.budget_alpha {
                    None => {
                        return Err(Error::Config("budgeted requires --alpha".into()));
                    }
                    Some(a) if !(0.0..=1.0).contains(&a) => {
                        return Err(Error::BudgetOutOfRange { alpha: a });
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Whether the round's context is drawn by the environment or chosen by the
/// policy; an active choice carries the target subpopulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextDecision {
    PassiveDraw,
    ActiveChoice(usize),
}

/// EETC bookkeeping: passive counts, the two stopping times, and the frozen
/// allocation computed when `tau_2` fires.
#[derive(Debug, Clone)]
pub struct EetcState {
    counts: Vec<u64>,
    t: u64,
    horizon: u64,
    tau1: Option<u64>,
    tau2: Option<u64>,
    frozen_estimate: Option<PopulationDistribution>,
    frozen_solution: Option<BudgetSolution>,
    active_sampler: Option<Allocation>,
}

impl EetcState {
    /// EETC needs the horizon up front: both stopping rules compare against it.
    pub fn new(k: usize, horizon: u64) -> Self {
        Self {
            counts: vec![0; k],
            t: 0,
            horizon,
            tau1: None,
            tau2: None,
            frozen_estimate: None,
            frozen_solution: None,
            active_sampler: None,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn tau1(&self) -> Option<u64> {
        self.tau1
    }

    pub fn tau2(&self) -> Option<u64> {
        self.tau2
    }

    pub fn frozen_estimate(&self) -> Option<&PopulationDistribution> {
        self.frozen_estimate.as_ref()
    }

    pub fn frozen_solution(&self) -> Option<&BudgetSolution> {
        self.frozen_solution.as_ref()
    }

    pub fn active_sampler(&self) -> Option<&Allocation> {
        self.active_sampler.as_ref()
    }

    /// Records one passively observed context and advances the stopping logic.
    ///
    /// `tau_1` is the first round at which every count reaches `ln(k T^2)`.
    /// From `tau_1 + 1` on, the commit trigger `t / T > 1 - alpha_min(p_hat)`
    /// is evaluated on the running estimate; when it fires, the estimate from
    /// the previous round is frozen and the committed allocation `q` and
    /// active sampler `r` are computed from the budgeted program with passive
    /// fraction `tau_2 / T`.
    pub fn on_passive_observation(&mut self, subpopulation: usize) -> Result<()> {
        let k = self.counts.len();
        if subpopulation >= k {
            return Err(Error::SubpopulationOutOfRange {
                index: subpopulation,
                subpopulations: k,
            });
        }
        if self.tau2.is_some() {
            return Err(Error::Config(
                "EETC passive observation after the commit point".into(),
            ));
        }
        self.counts[subpopulation] += 1;
        self.t += 1;
        let t = self.t;

        if self.tau1.is_none() {
            let threshold = (k as f64 * (self.horizon as f64).powi(2)).ln();
            let min_count = *self.counts.iter().min().expect("k >= 1") as f64;
            if min_count >= threshold {
                self.tau1 = Some(t);
            }
            // The commit trigger is only defined from tau_1 + 1 on.
            return Ok(());
        }

        if t <= self.tau1.unwrap() {
            return Ok(());
        }

        // All counts are at least 1 here (they reached ln(kT^2) > 0 at tau_1).
        let estimate = PopulationDistribution::normalized(
            self.counts.iter().map(|&c| c as f64).collect(),
        )?;
        let passive_fraction = t as f64 / self.horizon as f64;
        if passive_fraction > 1.0 - alpha_min(&estimate) {
            self.tau2 = Some(t);
            let mut frozen_counts = self.counts.clone();
            frozen_counts[subpopulation] -= 1;
            let frozen = PopulationDistribution::normalized(
                frozen_counts.iter().map(|&c| c as f64).collect(),
            )?;
            if t < self.horizon {
                let s = t as f64 / self.horizon as f64;
                let solution = budgeted_allocation(&frozen, 1.0 - s)?;
                let r = residual_sampler(
                    solution.allocation.proportions(),
                    frozen.weights(),
                    s,
                    1.0 - s,
                )?;
                self.active_sampler = Some(r);
                self.frozen_solution = Some(solution);
            }
            self.frozen_estimate = Some(frozen);
        }
        Ok(())
    }
}

/// Distribution the active rounds sample from: `r_j = (q_j - passive_share *
/// p_j) / active_share`, clamped and renormalized. The renormalization
/// absorbs the cancellation noise that `q_j - passive_share * p_j` leaves
/// when the active share is small.
fn residual_sampler(
    q: &[f64],
    p: &[f64],
    passive_share: f64,
    active_share: f64,
) -> Result<Allocation> {
    let mut r: Vec<f64> = q
        .iter()
        .zip(p)
        .map(|(&qj, &pj)| ((qj - passive_share * pj) / active_share).max(0.0))
        .collect();
    let sum: f64 = r.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidAllocation(
            "active residual has no mass".into(),
        ));
    }
    for x in &mut r {
        *x /= sum;
    }
    Allocation::new(r)
}

/// Mutable per-episode policy state: the context decider plus one subroutine
/// per subpopulation. Single-owner; independent episodes can run on separate
/// threads.
#[derive(Debug)]
pub struct PolicyState {
    kind: PolicyKind,
    subpopulations: usize,
    subroutines: Vec<SubroutineState>,
    /// Sampling weights for active choices (`q*` or `r`), when precomputed.
    active_weights: Option<Vec<f64>>,
    /// Rounds 1..=passive_rounds draw passively (BudgetedActive only).
    passive_rounds: u64,
    budget_solution: Option<BudgetSolution>,
    eetc: Option<EetcState>,
}

impl PolicyState {
    /// Builds the state for one episode over an instance with `treatments`
    /// arms and `subpopulations` contexts, to run for `horizon` rounds.
    pub fn new(
        config: &PolicyConfig,
        treatments: usize,
        subpopulations: usize,
        horizon: u64,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(p) = &config.known_p {
            if p.len() != subpopulations {
                return Err(Error::DimensionMismatch {
                    context: "policy known_p",
                    expected: subpopulations,
                    actual: p.len(),
                });
            }
        }
        let subroutines = (0..subpopulations)
            .map(|_| SubroutineState::new(config.subroutine, treatments))
            .collect();

        let mut state = Self {
            kind: config.kind,
            subpopulations,
            subroutines,
            active_weights: None,
            passive_rounds: 0,
            budget_solution: None,
            eetc: None,
        };
        match config.kind {
            PolicyKind::Passive => {
                state.passive_rounds = horizon;
            }
            PolicyKind::KnownPActive => {
                let p = config.known_p.as_ref().unwrap();
                state.active_weights =
                    Some(optimal_active_allocation(p).proportions().to_vec());
            }
            PolicyKind::BudgetedActive => {
                let p = config.known_p.as_ref().unwrap();
                let alpha = config.budget_alpha.unwrap();
                let solution = budgeted_allocation(p, alpha)?;
                // Fuzz guard: (1 - alpha) * T is an exact integer for grid
                // alphas and must floor to itself.
                state.passive_rounds =
                    (((1.0 - alpha) * horizon as f64) + 1e-9).floor() as u64;
                if alpha > 0.0 {
                    let r = residual_sampler(
                        solution.allocation.proportions(),
                        p.weights(),
                        1.0 - alpha,
                        alpha,
                    )?;
                    state.active_weights = Some(r.proportions().to_vec());
                }
                state.budget_solution = Some(solution);
            }
            PolicyKind::UniformActiveAgnostic => {
                state.active_weights =
                    Some(vec![1.0 / subpopulations as f64; subpopulations]);
            }
            PolicyKind::Eetc => {
                state.eetc = Some(EetcState::new(subpopulations, horizon));
            }
        }
        Ok(state)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn budget_solution(&self) -> Option<&BudgetSolution> {
        self.budget_solution.as_ref()
    }

    pub fn eetc(&self) -> Option<&EetcState> {
        self.eetc.as_ref()
    }

    pub fn subroutine(&self, subpopulation: usize) -> &SubroutineState {
        &self.subroutines[subpopulation]
    }

    pub fn subroutine_mut(&mut self, subpopulation: usize) -> &mut SubroutineState {
        &mut self.subroutines[subpopulation]
    }

    /// Decides how the context of round `t` (1-based) is obtained.
    ///
    /// The decision never depends on observed rewards except through the EETC
    /// stopping logic, which itself only reads context counts.
    pub fn decide_context<R: Rng>(&mut self, t: u64, rng: &mut R) -> ContextDecision {
        match self.kind {
            PolicyKind::Passive => ContextDecision::PassiveDraw,
            PolicyKind::KnownPActive | PolicyKind::UniformActiveAgnostic => {
                let w = self.active_weights.as_ref().expect("precomputed weights");
                ContextDecision::ActiveChoice(sample_categorical(rng, w))
            }
            PolicyKind::BudgetedActive => {
                if t <= self.passive_rounds {
                    ContextDecision::PassiveDraw
                } else {
                    let w = self
                        .active_weights
                        .as_ref()
                        .expect("active rounds exist only when alpha > 0");
                    ContextDecision::ActiveChoice(sample_categorical(rng, w))
                }
            }
            PolicyKind::Eetc => {
                let eetc = self.eetc.as_ref().expect("EETC state");
                match (eetc.tau2(), eetc.active_sampler()) {
                    (Some(tau2), Some(r)) if t > tau2 => {
                        ContextDecision::ActiveChoice(sample_categorical(rng, r.proportions()))
                    }
                    _ => ContextDecision::PassiveDraw,
                }
            }
        }
    }

    /// Feeds a passively observed context to the EETC stopping logic; no-op
    /// for the other policies.
    pub fn on_passive_context(&mut self, subpopulation: usize) -> Result<()> {
        if subpopulation >= self.subpopulations {
            return Err(Error::SubpopulationOutOfRange {
                index: subpopulation,
                subpopulations: self.subpopulations,
            });
        }
        if let Some(eetc) = self.eetc.as_mut() {
            eetc.on_passive_observation(subpopulation)?;
        }
        Ok(())
    }

    /// Final recommendation per subpopulation, delegated to the subroutines.
    pub fn finalize(&self) -> Vec<usize> {
        self.subroutines.iter().map(|s| s.recommend()).collect()
    }
}
