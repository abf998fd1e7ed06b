//! Episode driver and Monte-Carlo experiment runner.
//!
//! An episode plays one policy against one instance for `T` rounds under a
//! single seed; an experiment repeats that over seeds `base_seed + 1 ..=
//! base_seed + R` and aggregates the simple regret with a 95% normal
//! confidence half-width. Compared configurations run under the same base
//! seed, so episode `r` shares its reward streams across policies wherever
//! their sampling paths coincide (paired runs).
//!
//! Everything is deterministic given the resolved configuration; reports
//! carry no timestamps and echo the configuration they were produced from.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::PopulationDistribution;
use crate::environments::{make_synthetic_worstcase, parse_replay_csv, Instance};
use crate::error::{Error, Result};
use crate::policies::{ContextDecision, PolicyConfig, PolicyKind, PolicyState};
use crate::rng;
use crate::subroutines::SubroutineKind;

/// Outcome of a single episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeResult {
    /// Recommended arm per subpopulation (0-based).
    pub recommendations: Vec<usize>,
    /// Times each subpopulation was observed; sums to the horizon.
    pub context_counts: Vec<u64>,
    pub active_round_count: u64,
    pub eetc_tau1: Option<u64>,
    pub eetc_tau2: Option<u64>,
    pub seed: u64,
}

/// Plays one episode: each round the policy decides how the context is
/// obtained, the subpopulation's subroutine picks a treatment, and the
/// observed reward is fed back. Fully deterministic given
/// `(instance, policy, horizon, seed)`.
pub fn run_episode(
    instance: &Instance,
    policy: &PolicyConfig,
    horizon: u64,
    seed: u64,
) -> Result<EpisodeResult> {
    let n = instance.treatments();
    let k = instance.subpopulations();
    let mut state = PolicyState::new(policy, n, k, horizon)?;

    let mut context_rng = rng::context_stream(seed);
    let mut policy_rng = rng::policy_stream(seed);
    // One reward stream per cell; overlapping sampling paths then see
    // identical noise across paired policies.
    let mut reward_rngs: Vec<ChaCha8Rng> = (0..n)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| rng::reward_stream(seed, i, j))
        .collect();

    let mut context_counts = vec![0u64; k];
    let mut active_round_count = 0u64;
    for t in 1..=horizon {
        let subpopulation = match state.decide_context(t, &mut policy_rng) {
            ContextDecision::PassiveDraw => {
                let j = instance.sample_context(&mut context_rng);
                state.on_passive_context(j)?;
                j
            }
            ContextDecision::ActiveChoice(j) => {
                active_round_count += 1;
                j
            }
        };
        context_counts[subpopulation] += 1;
        let arm = state.subroutine(subpopulation).next_arm();
        let reward =
            instance.sample_reward(arm, subpopulation, &mut reward_rngs[arm * k + subpopulation]);
        state.subroutine_mut(subpopulation).observe(arm, reward)?;
    }

    Ok(EpisodeResult {
        recommendations: state.finalize(),
        context_counts,
        active_round_count,
        eetc_tau1: state.eetc().and_then(|e| e.tau1()),
        eetc_tau2: state.eetc().and_then(|e| e.tau2()),
        seed,
    })
}

/// Subpopulation-weighted gap between the best and the recommended means:
/// `sum_j p_j (max_i mu_{i,j} - mu_{rec_j, j})`. Zero iff every
/// recommendation attains the maximum in its subpopulation.
pub fn simple_regret(instance: &Instance, recommendations: &[usize]) -> Result<f64> {
    let k = instance.subpopulations();
    if recommendations.len() != k {
        return Err(Error::DimensionMismatch {
            context: "recommendations",
            expected: k,
            actual: recommendations.len(),
        });
    }
    let mut regret = 0.0;
    for (j, (&rec, &pj)) in recommendations
        .iter()
        .zip(instance.population().weights())
        .enumerate()
    {
        if rec >= instance.treatments() {
            return Err(Error::ArmOutOfRange {
                index: rec,
                arms: instance.treatments(),
            });
        }
        regret += pj * (instance.best_mean(j) - instance.mean(rec, j));
    }
    Ok(regret)
}

/// Population selector for synthetic instances.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PopulationSpec {
    Named(NamedPopulation),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NamedPopulation {
    Uniform,
    /// `(1 - eps, eps/(k-1), ...)` with `eps = 1/sqrt(k-1)`; requires `k >= 3`.
    Skewed,
}

impl PopulationSpec {
    pub fn realize(&self, k: usize) -> Result<PopulationDistribution> {
        match self {
            PopulationSpec::Named(NamedPopulation::Uniform) => PopulationDistribution::uniform(k),
            PopulationSpec::Named(NamedPopulation::Skewed) => crate::environments::make_skewed_p(k),
            PopulationSpec::Explicit(w) => {
                if w.len() != k {
                    return Err(Error::DimensionMismatch {
                        context: "explicit population",
                        expected: k,
                        actual: w.len(),
                    });
                }
                PopulationDistribution::new(w.clone())
            }
        }
    }
}

/// Where the instance comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    /// Worst-case Bernoulli instance generated for the experiment horizon.
    Synthetic {
        n: usize,
        k: usize,
        population: PopulationSpec,
        #[serde(default)]
        gen_seed: u64,
    },
    /// Bernoulli instance stored as JSON.
    JsonFile { path: String },
    /// Historical records replayed from CSV.
    ReplayCsv {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reward_min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reward_max: Option<f64>,
    },
}

impl InstanceSource {
    pub fn realize(&self, horizon: u64) -> Result<Instance> {
        match self {
            InstanceSource::Synthetic {
                n,
                k,
                population,
                gen_seed,
            } => {
                let p = population.realize(*k)?;
                let mut gen_rng = rng::generator_stream(*gen_seed);
                make_synthetic_worstcase(*n, *k, p, horizon, &mut gen_rng)
            }
            InstanceSource::JsonFile { path } => Instance::from_json(&fs::read_to_string(path)?),
            InstanceSource::ReplayCsv {
                path,
                reward_min,
                reward_max,
            } => {
                let reader = BufReader::new(fs::File::open(Path::new(path))?);
                let records = parse_replay_csv(reader, *reward_min, *reward_max)?;
                Instance::replay(&records)
            }
        }
    }
}

/// Policy selection as it appears in config files; the population
/// distribution for the knowing policies is injected from the instance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_subroutine")]
    pub subroutine: SubroutineKind,
}

fn default_subroutine() -> SubroutineKind {
    SubroutineKind::Ucb
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            alpha: None,
            subroutine: SubroutineKind::Ucb,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_subroutine(mut self, subroutine: SubroutineKind) -> Self {
        self.subroutine = subroutine;
        self
    }

    /// Resolves against an instance, handing the true population to the
    /// policies that are defined to know it.
    pub fn resolve(&self, instance: &Instance) -> Result<PolicyConfig> {
        let mut config = PolicyConfig::new(self.kind, self.subroutine);
        match self.kind {
            PolicyKind::KnownPActive | PolicyKind::BudgetedActive => {
                config.known_p = Some(instance.population().clone());
            }
            _ => {}
        }
        config.budget_alpha = self.alpha;
        config.validate()?;
        Ok(config)
    }
}

/// Fully resolved experiment description; echoed into every report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub policy: PolicySpec,
    pub horizon: u64,
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of an experiment: the per-run trace.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub regret: f64,
    pub active_rounds: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau1: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau2: Option<u64>,
}

/// Monte-Carlo summary over `runs` episodes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegretReport {
    pub mean_regret: f64,
    /// 95% normal-approximation half-width `1.96 * sd / sqrt(runs)`;
    /// zero for a single run.
    pub ci_halfwidth: f64,
    pub runs: usize,
    pub per_run_regrets: Vec<f64>,
    pub per_run: Vec<RunRecord>,
    pub rng_family: String,
    pub config_echo: ExperimentConfig,
}

impl RegretReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV of the per-run traces: `run,seed,regret,active_rounds,tau1,tau2`.
    pub fn per_run_csv(&self) -> String {
        let mut out = String::from("run,seed,regret,active_rounds,tau1,tau2\n");
        for (idx, record) in self.per_run.iter().enumerate() {
            let tau1 = record.tau1.map(|t| t.to_string()).unwrap_or_default();
            let tau2 = record.tau2.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                idx + 1,
                record.seed,
                record.regret,
                record.active_rounds,
                tau1,
                tau2
            ));
        }
        out
    }
}

/// Runs `R` paired-seed episodes and aggregates the simple regret.
///
/// Episodes execute on the rayon pool; results are collected in run order so
/// the report is independent of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretReport> {
    config.validate()?;
    let instance = config.instance.realize(config.horizon)?;
    if config.horizon < instance.subpopulations() as u64 {
        return Err(Error::Config(format!(
            "horizon {} is below the number of subpopulations {}",
            config.horizon,
            instance.subpopulations()
        )));
    }
    let policy = config.policy.resolve(&instance)?;

    let per_run: Vec<RunRecord> = (1..=config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = config.seed + run as u64;
            let episode = run_episode(&instance, &policy, config.horizon, seed)
                .map_err(|e| Error::Run {
                    run,
                    source: Box::new(e),
                })?;
            let regret = simple_regret(&instance, &episode.recommendations)
                .map_err(|e| Error::Run {
                    run,
                    source: Box::new(e),
                })?;
            Ok(RunRecord {
                seed,
                regret,
                active_rounds: episode.active_round_count,
                tau1: episode.eetc_tau1,
                tau2: episode.eetc_tau2,
            })
        })
        .collect::<Result<_>>()?;

    let per_run_regrets: Vec<f64> = per_run.iter().map(|r| r.regret).collect();
    let runs = per_run_regrets.len();
    let mean_regret = per_run_regrets.iter().sum::<f64>() / runs as f64;
    let ci_halfwidth = if runs > 1 {
        let var = per_run_regrets
            .iter()
            .map(|x| (x - mean_regret).powi(2))
            .sum::<f64>()
            / (runs - 1) as f64;
        1.96 * var.sqrt() / (runs as f64).sqrt()
    } else {
        0.0
    };

    Ok(RegretReport {
        mean_regret,
        ci_halfwidth,
        runs,
        per_run_regrets,
        per_run,
        rng_family: rng::RNG_FAMILY.to_string(),
        config_echo: config.clone(),
    })
}

/// Reruns the experiment at each budget, sharing the base seed so runs are
/// paired across budgets. Requires a budgeted policy.
pub fn sweep_budget(
    config: &ExperimentConfig,
    alphas: &[f64],
) -> Result<Vec<(f64, RegretReport)>> {
    if config.policy.kind != PolicyKind::BudgetedActive {
        return Err(Error::Config(
            "sweep-budget requires the budgeted policy".into(),
        ));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let mut cfg = config.clone();
            cfg.policy.alpha = Some(alpha);
            Ok((alpha, run_experiment(&cfg)?))
        })
        .collect()
}
