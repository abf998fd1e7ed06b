//! Simple-regret bandits over finite subpopulations.
//!
//! The problem: `k` subpopulations, each an independent `n`-armed bandit with
//! rewards in `[0, 1]`, weighted by a population distribution `p`. After `T`
//! rounds the learner recommends one treatment per subpopulation and pays the
//! `p`-weighted gap between the best and the recommended means. Contexts
//! arrive passively (drawn from `p`) unless the policy is allowed to choose
//! them actively; how to split and direct that sampling effort is the whole
//! game.
//!
//! The crate provides:
//!
//! - [`allocation`]: the sampling-allocation mathematics: the objective
//!   `S_p(q)`, its closed-form active optimizer `q_j ∝ p_j^(2/3)`, the
//!   budget-constrained threshold solver, and a brute-force grid oracle.
//!   Generic over the scalar type ([`scalar::Real`], `f64` by default).
//! - [`subroutines`]: anytime within-subpopulation bandits (round-robin
//!   uniform exploration and UCB).
//! - [`policies`]: the five context-selection policies, including the
//!   explore-explore-then-commit (EETC) policy for unknown `p`.
//! - [`environments`]: Bernoulli instances, worst-case generators, and a
//!   CSV-backed replay environment.
//! - [`harness`]: the episode driver and seeded Monte-Carlo experiment
//!   runner with JSON/CSV reports.
//! - [`plot`]: deterministic SVG line charts.
//!
//! All randomness is ChaCha8 keyed by `(seed, purpose)` ([`rng`]), so every
//! trace is bit-reproducible across platforms.

pub mod allocation;
pub mod environments;
pub mod error;
pub mod harness;
pub mod plot;
pub mod policies;
pub mod rng;
pub mod scalar;
pub mod subroutines;

pub use allocation::{
    active_passive_gap, alpha_min, budgeted_allocation, grid_oracle_allocation, lp_quasi_norm,
    optimal_active_allocation, s_value, threshold_mass, Allocation, BudgetSolution,
    PopulationDistribution,
};
pub use environments::{
    make_hard_family_member, make_skewed_p, make_synthetic_worstcase, parse_replay_csv, Instance,
    ReplayRecord, RewardModel,
};
pub use error::{Error, Result};
pub use harness::{
    run_episode, run_experiment, simple_regret, sweep_budget, EpisodeResult, ExperimentConfig,
    InstanceSource, NamedPopulation, PolicySpec, PopulationSpec, RegretReport, RunRecord,
};
pub use policies::{ContextDecision, EetcState, PolicyConfig, PolicyKind, PolicyState};
pub use scalar::Real;
pub use subroutines::{ArmStats, SubroutineKind, SubroutineState};
