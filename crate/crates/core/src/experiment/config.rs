use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::engine::{RunConfig, DEFAULT_ALPHA, DEFAULT_BATCH_C, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::problems::{Problem, ProblemId, ProblemOverrides};
use crate::schedules::{BatchSchedule, StepSchedule};

pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    Rate,
    Coverage,
    Diagnose,
    ListProblems,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Rate => "rate",
            Command::Coverage => "coverage",
            Command::Diagnose => "diagnose",
            Command::ListProblems => "list-problems",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Command::Run,
            Command::Rate,
            Command::Coverage,
            Command::Diagnose,
            Command::ListProblems,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| {
            Error::Validation(format!(
                "unknown command {s:?}; expected one of run, rate, coverage, diagnose, list-problems"
            ))
        })
    }
}

/// Which linear functional `v^T x` the intervals target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `U e_j` from the ground-truth tangent basis.
    Tangent(usize),
    /// The raw coordinate `e_i`.
    Coordinate(usize),
}

impl Direction {
    pub fn resolve(&self, problem: &Problem) -> Result<DenseVector> {
        let truth = problem.ground_truth();
        match *self {
            Direction::Tangent(j) if j < truth.tangent_dim() => Ok(truth.tangent_direction(j)),
            Direction::Coordinate(i) if i < problem.dim() => Ok(DenseVector::basis(problem.dim(), i)),
            _ => Err(Error::Validation(format!(
                "direction {self} is out of range (dimension {}, tangent dimension {})",
                problem.dim(),
                truth.tangent_dim()
            ))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Tangent(j) => write!(f, "tangent:{j}"),
            Direction::Coordinate(i) => write!(f, "coordinate:{i}"),
        }
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("direction {s:?} must look like \"tangent:J\" or \"coordinate:I\""));
        let (kind, index) = s.split_once(':').ok_or_else(bad)?;
        let index: usize = index.parse().map_err(|_| bad())?;
        match kind {
            "tangent" => Ok(Direction::Tangent(index)),
            "coordinate" => Ok(Direction::Coordinate(index)),
            _ => Err(bad()),
        }
    }
}

/// Keys accepted in a configuration file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<Command>,
    problem: Option<String>,
    #[serde(alias = "overrides")]
    problem_overrides: Option<ProblemOverrides>,
    n: Option<u64>,
    n_grid: Option<Vec<u64>>,
    reps: Option<u64>,
    seed: Option<u64>,
    alpha: Option<f64>,
    eta: Option<f64>,
    batch_c: Option<f64>,
    beta: Option<f64>,
    k_s: Option<u64>,
    delta: Option<f64>,
    level: Option<f64>,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
    diagnostics_stride: Option<u64>,
    burn_in: Option<u64>,
    direction: Option<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct CliOverrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub n: Option<u64>,
    pub reps: Option<u64>,
}

/// A validated experiment with every default filled in.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: Command,
    pub problem_id: ProblemId,
    pub problem_overrides: ProblemOverrides,
    pub n: Option<u64>,
    pub n_grid: Option<Vec<u64>>,
    pub reps: u64,
    pub seed: u64,
    pub alpha: f64,
    pub eta: f64,
    pub batch_c: f64,
    pub beta: f64,
    pub k_s: u64,
    pub delta: f64,
    pub level: f64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub diagnostics_stride: Option<u64>,
    pub burn_in: u64,
    pub direction: Direction,
    problem: Problem,
}

/// The `rate` grid used when none is given: `2^10, ..., 2^16`.
pub fn default_n_grid() -> Vec<u64> {
    (10..=16).map(|p| 1u64 << p).collect()
}

fn default_reps(command: Command) -> u64 {
    match command {
        Command::Run | Command::ListProblems => 1,
        Command::Rate => 20,
        Command::Coverage => 100,
        Command::Diagnose => 200,
    }
}

fn parse_error(source_name: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads a JSON configuration file and merges the command-line values over it.
pub fn load_config(path: &Path, cli: &CliOverrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read config file {}: {e}", path.display())))?;
    load_config_str(&text, &path.display().to_string(), cli)
}

/// As [`load_config`], from an in-memory JSON document.
pub fn load_config_str(text: &str, source_name: &str, cli: &CliOverrides) -> Result<ExperimentConfig> {
    let file: FileConfig = serde_json::from_str(text).map_err(|e| parse_error(source_name, e))?;
    resolve(file, cli)
}

/// Configuration from command-line values alone.
pub fn config_from_flags(problem: ProblemId, cli: &CliOverrides) -> Result<ExperimentConfig> {
    let file = FileConfig {
        problem: Some(problem.as_str().to_string()),
        ..Default::default()
    };
    resolve(file, cli)
}

fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn resolve(file: FileConfig, cli: &CliOverrides) -> Result<ExperimentConfig> {
    let command = cli
        .command
        .or(file.command)
        .ok_or_else(|| validation("no command given"))?;
    let problem_name = file.problem.ok_or_else(|| validation("missing required key \"problem\""))?;
    let problem_id: ProblemId = problem_name.parse()?;
    let problem_overrides = file.problem_overrides.unwrap_or_default();
    let problem = Problem::with_overrides(problem_id, &problem_overrides).map_err(|e| match e {
        Error::Validation(_) => e,
        other => validation(format!("problem {problem_id}: {other}")),
    })?;

    let n = cli.n.or(file.n);
    let n_grid = match (command, file.n_grid) {
        (Command::Rate, None) => Some(default_n_grid()),
        (_, grid) => grid,
    };
    let reps = cli.reps.or(file.reps).unwrap_or_else(|| default_reps(command));
    let alpha = file.alpha.unwrap_or(DEFAULT_ALPHA);
    let eta = file.eta.unwrap_or_else(|| problem.default_eta());
    let batch_c = file.batch_c.unwrap_or(DEFAULT_BATCH_C);
    let beta = file.beta.unwrap_or(2.0 / (1.0 - alpha));
    let config = ExperimentConfig {
        command,
        problem_id,
        problem_overrides,
        n,
        n_grid,
        reps,
        seed: cli.seed.or(file.seed).unwrap_or(0),
        alpha,
        eta,
        batch_c,
        beta,
        k_s: file.k_s.unwrap_or(0),
        delta: file.delta.unwrap_or(DEFAULT_DELTA),
        level: file.level.unwrap_or(DEFAULT_LEVEL),
        out_dir: cli
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        threads: cli.threads.or(file.threads).unwrap_or(1),
        diagnostics_stride: file.diagnostics_stride,
        burn_in: file.burn_in.unwrap_or(0),
        direction: file.direction.as_deref().unwrap_or("tangent:0").parse()?,
        problem,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        let step = StepSchedule::new(self.eta, self.alpha).map_err(|e| validation(e.to_string()))?;
        BatchSchedule::new(self.batch_c, self.beta)
            .map_err(|e| validation(e.to_string()))?
            .validate_against(&step)?;
        if !(self.delta > 0.0) {
            return Err(validation(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(validation(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.threads == 0 {
            return Err(validation("threads must be at least 1"));
        }
        if self.reps == 0 {
            return Err(validation("reps must be at least 1"));
        }
        if self.diagnostics_stride == Some(0) {
            return Err(validation("diagnostics_stride must be at least 1"));
        }
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() || grid[0] == 0 {
                return Err(validation("n_grid must be nonempty with positive entries"));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(validation("n_grid must be strictly increasing"));
            }
        }
        match self.command {
            Command::Run | Command::Diagnose if self.n.is_none() => {
                return Err(validation(format!("command {} requires \"n\"", self.command)));
            }
            Command::Coverage if self.n.is_none() && self.n_grid.is_none() => {
                return Err(validation("command coverage requires \"n\" or \"n_grid\""));
            }
            Command::Rate if self.n_grid.as_ref().map_or(0, Vec::len) < 2 => {
                return Err(validation("command rate needs an n_grid with at least two entries"));
            }
            Command::Diagnose if self.reps < 2 => {
                return Err(validation("command diagnose needs reps >= 2 for its Monte Carlo reference"));
            }
            _ => {}
        }
        for n in self.horizons() {
            if self.k_s > n {
                return Err(validation(format!("k_s = {} exceeds n = {n}", self.k_s)));
            }
        }
        if matches!(self.command, Command::Run | Command::Coverage | Command::Diagnose) {
            self.direction.resolve(&self.problem)?;
        }
        Ok(())
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// The horizons this command runs at.
    pub fn horizons(&self) -> Vec<u64> {
        match (self.command, self.n, &self.n_grid) {
            (Command::Rate, _, Some(grid)) => grid.clone(),
            (Command::Coverage, None, Some(grid)) => grid.clone(),
            (_, Some(n), _) => vec![n],
            _ => Vec::new(),
        }
    }

    pub fn run_config(&self, n: u64) -> Result<RunConfig> {
        let step = StepSchedule::new(self.eta, self.alpha)?;
        let mut cfg = RunConfig::for_problem(&self.problem, n, self.seed)?;
        cfg.step = step;
        cfg.batch = BatchSchedule::new(self.batch_c, self.beta)?;
        cfg.k_s = self.k_s;
        cfg.delta = self.delta;
        cfg.burn_in = self.burn_in;
        if let Some(stride) = self.diagnostics_stride {
            cfg.diagnostics_stride = stride;
        }
        Ok(cfg)
    }

    /// Every parameter that influences the results. The output directory and
    /// worker count are left out so that summaries do not depend on them.
    pub fn echo(&self) -> Value {
        json!({
            "command": self.command.as_str(),
            "problem": self.problem_id.as_str(),
            "method": self.problem.method().to_string(),
            "problem_params": serde_json::to_value(self.problem.params()).unwrap_or(Value::Null),
            "state_scale": self.problem.noise_model().state_scale,
            "x0": self.problem.x0().as_slice(),
            "n": self.n,
            "n_grid": self.n_grid,
            "reps": self.reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "eta": self.eta,
            "batch_c": self.batch_c,
            "beta": self.beta,
            "k_s": self.k_s,
            "delta": self.delta,
            "level": self.level,
            "diagnostics_stride": self.diagnostics_stride,
            "burn_in": self.burn_in,
            "direction": self.direction.to_string(),
        })
    }
}
