//! Command-line driver for `cpt-sense`.
//!
//! Exit codes: 0 success, 2 invalid scenario input, 3 solver failure,
//! 64 usage error, 1 anything else (I/O).

pub mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use cpt_sense::{Params, Policy, ScenarioRanges, Scenario, SweepSpec, TaylorConfig};

pub use args::{Cli, Command, Format, ParamChoice, ScenarioSource};
pub use cpt_sense::Param;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_SCENARIO: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cpt_sense::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(cpt_sense::Error::InvalidScenario { .. }) => EXIT_INVALID_SCENARIO,
            CliError::Core(cpt_sense::Error::Csv(_) | cpt_sense::Error::Json(_)) => EXIT_INVALID_SCENARIO,
            CliError::Core(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

/// Everything a command needs, resolved from the command line.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ScenarioSource,
    pub params: Params,
    pub policy: Policy,
    pub sweep_params: Vec<Param>,
    pub rel_range: f64,
    pub steps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub taylor: TaylorConfig,
    pub ranges: ScenarioRanges,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: ScenarioSource::Fixtures,
            params: Params::nominal(),
            policy: Policy::BestCase,
            sweep_params: Param::ALL.to_vec(),
            rel_range: 0.2,
            steps: 41,
            seed: 0,
            out: None,
            format: Format::Csv,
            taylor: TaylorConfig::default(),
            ranges: ScenarioRanges::default(),
        }
    }
}

impl RunConfig {
    pub fn from_args(a: &args::CommonArgs) -> Result<Self, CliError> {
        let params = Params::new(a.alpha, a.beta, a.lambda, a.p).map_err(|e| CliError::Usage(e.to_string()))?;
        let config = RunConfig {
            source: a.scenarios.clone(),
            params,
            policy: a.reference,
            sweep_params: a.param.params(),
            rel_range: a.range,
            steps: a.steps,
            seed: a.seed,
            out: a.out.clone(),
            format: a.format,
            taylor: TaylorConfig { half_factor: a.taylor2_half },
            ranges: ScenarioRanges::default(),
        };
        for &param in &config.sweep_params {
            config.sweep_spec(param).validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(config)
    }

    pub fn sweep_spec(&self, param: Param) -> SweepSpec {
        SweepSpec { param, rel_range: self.rel_range, steps: self.steps }
    }

    /// Scenarios with a display name for diagnostics (`row N` for files).
    pub fn load_scenarios(&self) -> Result<Vec<(String, Scenario)>, CliError> {
        let list = match &self.source {
            ScenarioSource::Fixtures => cpt_sense::fixtures(),
            ScenarioSource::Random(n) => cpt_sense::generate_random(&self.ranges, *n, self.seed)?,
            ScenarioSource::Path(p) => cpt_sense::io::load_scenarios(p)?,
        };
        let from_file = matches!(self.source, ScenarioSource::Path(_));
        Ok(list
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let name = if from_file { format!("row {} (`{}`)", i + 1, s.label) } else { format!("`{}`", s.label) };
                (name, s)
            })
            .collect())
    }
}

/// Parse `argv` and run. Tables go to `stdout` unless an output directory is
/// given; diagnostics go to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = RunConfig::from_args(&cli.common).and_then(|config| commands::dispatch(&cli.command, &config, stdout, stderr));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
