//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid population distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("exponent {r} outside supported range (0, 1]")]
    ExponentOutOfRange { r: f64 },

    #[error("entry {value} at index {index} must be nonnegative and finite")]
    NonNegativeRequired { index: usize, value: f64 },

    #[error("infinite objective: zero mass allocated to subpopulation {index} with positive weight")]
    InfiniteObjective { index: usize },

    #[error("budget alpha {alpha} outside [0, 1]")]
    BudgetOutOfRange { alpha: f64 },

    #[error("oracle scale exceeded: k = {k} subpopulations, the grid oracle supports k <= 4")]
    OracleScaleExceeded { k: usize },

    #[error("grid resolution {resolution} outside [1e-4, 1e-1]")]
    ResolutionOutOfRange { resolution: f64 },

    #[error("empty feasible grid: floor constraints exclude every grid point")]
    EmptyFeasibleGrid,

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("reward {value} outside [0, 1]")]
    RewardOutOfRange { value: f64 },

    #[error("arm index {index} out of range for {arms} arms")]
    ArmOutOfRange { index: usize, arms: usize },

    #[error("subpopulation index {index} out of range for {subpopulations} subpopulations")]
    SubpopulationOutOfRange { index: usize, subpopulations: usize },

    #[error("gap delta {value} for subpopulation {index} outside (0, 1/4]")]
    GapOutOfRange { index: usize, value: f64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// Cells are reported 1-based, matching the external file convention.
    #[error("replay data incomplete, missing (treatment, subpopulation) cells: {}", format_cells(.0))]
    MissingReplayCells(Vec<(usize, usize)>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("run {run} failed: {source}")]
    Run { run: usize, source: Box<Error> },

    // Payloads are folded into Display rather than exposed as sources, so
    // error chains do not print them twice.
    #[error("i/o error: {inner}")]
    Io { inner: std::io::Error },

    #[error("json error: {inner}")]
    Json { inner: serde_json::Error },
}

impl From<std::io::Error> for Error {
    fn from(inner: std::io::Error) -> Self {
        Error::Io { inner }
    }
}

impl From<serde_json::Error> for Error {
    fn from(inner: serde_json::Error) -> Self {
        Error::Json { inner }
    }
}

impl Error {
    /// Distinguishes bad inputs/configuration from failures at run time,
    /// mirroring the CLI exit-code split (2 vs 3). Reading inputs counts as
    /// input; only failures inside an experiment run count as runtime.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Run { .. })
    }
}

fn format_cells(cells: &[(usize, usize)]) -> String {
    let mut out = String::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("({}, {})", cell.0, cell.1));
    }
    out
}
