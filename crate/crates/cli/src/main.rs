//! Command-line simulator for simple-regret bandits over subpopulations.
//!
//! Subcommands:
//! - `alloc`: allocation quantities for a population vector.
//! - `run`: Monte-Carlo experiment from a JSON config (flags override).
//! - `sweep-budget`: regret across a grid of intervention budgets.
//! - `replay`: experiment against a historical-ratings CSV.
//! - `gen`: instance generators.
//!
//! Exit codes: 0 success, 2 config/input error, 3 runtime error. All
//! randomness is controlled by the seeds in the config/flags; reruns with
//! identical arguments produce byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use subpop_bandits::plot::{line_chart, ErrorBarPoint};
use subpop_bandits::{
    active_passive_gap, alpha_min, budgeted_allocation, lp_quasi_norm, make_hard_family_member,
    make_skewed_p, make_synthetic_worstcase, optimal_active_allocation, rng, s_value, Error,
    ExperimentConfig, InstanceSource, PolicyKind, PolicySpec, PopulationDistribution,
    RegretReport, SubroutineKind,
};

#[derive(Parser)]
#[command(name = "subpop-bandits", version, about = "Simple-regret bandit simulator with active context sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print allocation quantities (q*, norms, gap ratio, alpha_min) for a population
    Alloc(AllocArgs),
    /// Run a Monte-Carlo experiment from a JSON config
    Run(RunArgs),
    /// Run the budgeted policy across a grid of budgets
    SweepBudget(SweepArgs),
    /// Run an experiment against a historical-ratings CSV
    Replay(ReplayArgs),
    /// Generate an instance or population vector as JSON
    Gen(GenArgs),
}

#[derive(Args)]
struct AllocArgs {
    /// Population weights, e.g. 0.8,0.2
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    /// Also solve the budgeted program at this budget
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Override the configured policy (passive | active-known-p | budgeted | uniform-active | eetc)
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    /// Override the budget for the budgeted policy
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the subroutine (uniform | ucb)
    #[arg(long, value_parser = parse_subroutine)]
    subroutine: Option<SubroutineKind>,
    /// Override the horizon T
    #[arg(long)]
    horizon: Option<u64>,
    /// Override the number of runs R
    #[arg(long)]
    runs: Option<usize>,
    /// Override the base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write <out>.json and <out>.csv next to printing the report
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON experiment config (policy must be budgeted)
    #[arg(long)]
    config: PathBuf,
    /// Budget grid, e.g. 0,0.1,0.2,...,1
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    /// Override the horizon T
    #[arg(long)]
    horizon: Option<u64>,
    /// Override the number of runs R
    #[arg(long)]
    runs: Option<usize>,
    /// Override the base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write <out>.csv and <out>.svg next to printing the table
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// CSV of historical records: treatment,subpopulation,reward
    #[arg(long)]
    data: PathBuf,
    /// Policy name (passive | active-known-p | budgeted | uniform-active | eetc)
    #[arg(long, value_parser = parse_policy)]
    policy: PolicyKind,
    /// Budget for the budgeted policy
    #[arg(long)]
    alpha: Option<f64>,
    /// Subroutine (uniform | ucb)
    #[arg(long, value_parser = parse_subroutine, default_value = "ucb")]
    subroutine: SubroutineKind,
    #[arg(long)]
    horizon: u64,
    #[arg(long)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Raw rating minimum (overrides any file directive)
    #[arg(long)]
    reward_min: Option<f64>,
    /// Raw rating maximum (overrides any file directive)
    #[arg(long)]
    reward_max: Option<f64>,
    /// Write <out>.json and <out>.csv next to printing the report
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Number of treatments
    #[arg(long)]
    n: Option<usize>,
    /// Number of subpopulations
    #[arg(long)]
    k: usize,
    /// Population: uniform | skewed | explicit weights w1,w2,...
    #[arg(long, default_value = "uniform")]
    p: String,
    /// Horizon the synthetic gaps are calibrated to
    #[arg(long)]
    horizon: Option<u64>,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-subpopulation gaps for the hard family, e.g. 0.1,0.1
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,
    /// Alternative arm per subpopulation (1-based, never 1)
    #[arg(long, value_delimiter = ',')]
    alt_arms: Vec<usize>,
    /// Hypercube bits selecting the optimal arm per subpopulation (0/1)
    #[arg(long, value_delimiter = ',')]
    omega: Vec<u8>,
    /// Write to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Synthetic,
    HardFamily,
    SkewedP,
}

fn parse_policy(name: &str) -> Result<PolicyKind, String> {
    match name {
        "passive" => Ok(PolicyKind::Passive),
        "active-known-p" => Ok(PolicyKind::KnownPActive),
        "budgeted" => Ok(PolicyKind::BudgetedActive),
        "uniform-active" => Ok(PolicyKind::UniformActiveAgnostic),
        "eetc" => Ok(PolicyKind::Eetc),
        other => Err(format!(
            "unknown policy '{other}' (expected passive | active-known-p | budgeted | uniform-active | eetc)"
        )),
    }
}

fn parse_subroutine(name: &str) -> Result<SubroutineKind, String> {
    match name {
        "uniform" => Ok(SubroutineKind::UniformExplore),
        "ucb" => Ok(SubroutineKind::Ucb),
        other => Err(format!("unknown subroutine '{other}' (expected uniform | ucb)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<Error>() {
        if core.is_input_error() {
            2
        } else {
            3
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        3
    } else {
        2
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Alloc(args) => cmd_alloc(args),
        Command::Run(args) => cmd_run(args),
        Command::SweepBudget(args) => cmd_sweep(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

#[derive(Serialize)]
struct BudgetJson {
    alpha: f64,
    allocation: Vec<f64>,
    threshold: f64,
    objective_value: f64,
    /// 1-based indices where the passive floor binds.
    binding_set: Vec<usize>,
}

#[derive(Serialize)]
struct AllocJson {
    p: Vec<f64>,
    q_star: Vec<f64>,
    s_value_q_star: f64,
    norm_two_thirds: f64,
    norm_half_sqrt: f64,
    gap_ratio: f64,
    alpha_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<BudgetJson>,
}

fn cmd_alloc(args: AllocArgs) -> anyhow::Result<()> {
    let p = PopulationDistribution::new(args.p)?;
    let q_star = optimal_active_allocation(&p);
    let budget = match args.alpha {
        Some(alpha) => {
            let sol = budgeted_allocation(&p, alpha)?;
            Some(BudgetJson {
                alpha,
                allocation: sol.allocation.proportions().to_vec(),
                threshold: sol.threshold,
                objective_value: sol.objective_value,
                binding_set: sol.binding_set.iter().map(|j| j + 1).collect(),
            })
        }
        None => None,
    };
    let out = AllocJson {
        s_value_q_star: s_value(&p, &q_star)?,
        norm_two_thirds: lp_quasi_norm(p.weights(), 2.0 / 3.0)?,
        norm_half_sqrt: lp_quasi_norm(p.weights(), 0.5)?.sqrt(),
        gap_ratio: active_passive_gap(&p),
        alpha_min: alpha_min(&p),
        q_star: q_star.proportions().to_vec(),
        p: p.weights().to_vec(),
        budget,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn apply_run_overrides(config: &mut ExperimentConfig, args: &RunArgs) {
    if let Some(kind) = args.policy {
        config.policy.kind = kind;
    }
    if let Some(alpha) = args.alpha {
        config.policy.alpha = Some(alpha);
    }
    if let Some(subroutine) = args.subroutine {
        config.policy.subroutine = subroutine;
    }
    if let Some(horizon) = args.horizon {
        config.horizon = horizon;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
}

/// Derives `<base>.json` / `<base>.csv` / `<base>.svg` paths, treating an
/// explicit extension on `out` as the base name.
fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

fn write_output(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit_report(report: &RegretReport, out: Option<&Path>) -> anyhow::Result<()> {
    let json = report.to_json()?;
    println!("{json}");
    if let Some(out) = out {
        write_output(&sibling(out, "json"), &json)?;
        write_output(&sibling(out, "csv"), &report.per_run_csv())?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = load_config(&args.config)?;
    apply_run_overrides(&mut config, &args);
    let report = subpop_bandits::run_experiment(&config)?;
    emit_report(&report, args.out.as_deref())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(horizon) = args.horizon {
        config.horizon = horizon;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let table = subpop_bandits::sweep_budget(&config, &args.alphas)?;

    let mut csv = String::from("alpha,mean_regret,ci_halfwidth\n");
    for (alpha, report) in &table {
        csv.push_str(&format!(
            "{},{},{}\n",
            alpha, report.mean_regret, report.ci_halfwidth
        ));
    }
    print!("{csv}");
    if let Some(out) = &args.out {
        write_output(&sibling(out, "csv"), &csv)?;
        let points: Vec<ErrorBarPoint> = table
            .iter()
            .map(|(alpha, report)| ErrorBarPoint {
                x: *alpha,
                y: report.mean_regret,
                halfwidth: report.ci_halfwidth,
            })
            .collect();
        let svg = line_chart(
            "Simple regret vs intervention budget",
            "alpha",
            "mean simple regret",
            &points,
        );
        write_output(&sibling(out, "svg"), &svg)?;
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> anyhow::Result<()> {
    let config = ExperimentConfig {
        instance: InstanceSource::ReplayCsv {
            path: args.data.display().to_string(),
            reward_min: args.reward_min,
            reward_max: args.reward_max,
        },
        policy: PolicySpec {
            kind: args.policy,
            alpha: args.alpha,
            subroutine: args.subroutine,
        },
        horizon: args.horizon,
        runs: args.runs,
        seed: args.seed,
    };
    let report = subpop_bandits::run_experiment(&config)?;
    emit_report(&report, args.out.as_deref())
}

fn parse_population(spec: &str, k: usize) -> anyhow::Result<PopulationDistribution> {
    match spec {
        "uniform" => Ok(PopulationDistribution::uniform(k)?),
        "skewed" => Ok(make_skewed_p(k)?),
        explicit => {
            let weights: Vec<f64> = explicit
                .split(',')
                .map(|w| w.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad population weights: {e}")))?;
            if weights.len() != k {
                return Err(Error::Config(format!(
                    "population has {} weights but k = {k}",
                    weights.len()
                ))
                .into());
            }
            Ok(PopulationDistribution::new(weights)?)
        }
    }
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let text = match args.kind {
        GenKind::SkewedP => {
            let p = make_skewed_p(args.k)?;
            serde_json::to_string_pretty(p.weights())?
        }
        GenKind::Synthetic => {
            let n = args
                .n
                .ok_or_else(|| Error::Config("--n is required for synthetic".into()))?;
            let horizon = args
                .horizon
                .ok_or_else(|| Error::Config("--horizon is required for synthetic".into()))?;
            let p = parse_population(&args.p, args.k)?;
            let mut gen_rng = rng::generator_stream(args.seed);
            let instance = make_synthetic_worstcase(n, args.k, p, horizon, &mut gen_rng)?;
            instance.to_json()?
        }
        GenKind::HardFamily => {
            let n = args
                .n
                .ok_or_else(|| Error::Config("--n is required for hard-family".into()))?;
            let p = parse_population(&args.p, args.k)?;
            let alt_arms: Vec<usize> = args
                .alt_arms
                .iter()
                .map(|&b| {
                    if b == 0 {
                        Err(Error::Config("alt arms are 1-based".into()))
                    } else {
                        Ok(b - 1)
                    }
                })
                .collect::<Result<_, _>>()?;
            let omega: Vec<bool> = args.omega.iter().map(|&w| w != 0).collect();
            let instance =
                make_hard_family_member(n, args.k, p, &args.deltas, &alt_arms, &omega)?;
            instance.to_json()?
        }
    };
    match &args.out {
        Some(path) => write_output(path, &format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}
