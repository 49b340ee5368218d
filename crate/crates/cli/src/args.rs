use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpt_sense::{Param, Policy};

#[derive(Debug, Parser)]
#[command(name = "cpt-sense", version, about = "Prospect-theory tariff optimization and sensitivity analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal tariff and multipliers per scenario.
    Solve,
    /// Re-optimization sweeps per scenario and parameter, plus a summary.
    Sweep,
    /// Differentials and local validity domains per scenario and parameter.
    Domain,
    /// Revenue lost by pricing with assumed parameters.
    Mismatch {
        /// Assumed parameter value, `name=value`; repeatable.
        #[arg(long = "assume", value_name = "NAME=VALUE", value_parser = parse_assumption)]
        assume: Vec<(Param, f64)>,
    },
    /// Draw random valid scenarios.
    GenScenarios {
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Check scenarios without solving.
    Validate,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `fixtures`, `random:N`, or a CSV/JSON path.
    #[arg(long, global = true, default_value = "fixtures")]
    pub scenarios: ScenarioSource,
    #[arg(long, global = true, default_value_t = 0.82)]
    pub alpha: f64,
    #[arg(long, global = true, default_value_t = 0.8)]
    pub beta: f64,
    #[arg(long, global = true, default_value_t = 2.25)]
    pub lambda: f64,
    /// Probability of the worse travel outcome.
    #[arg(long, global = true, default_value_t = 0.75)]
    pub p: f64,
    /// `static`, `expected`, `best`, `worst` or `fixed:VALUE`.
    #[arg(long, global = true, default_value = "best", value_parser = parse_reference)]
    pub reference: Policy,
    /// Parameter to sweep or analyse, or `all`.
    #[arg(long, global = true, default_value = "all")]
    pub param: ParamChoice,
    /// Sweep half-width as a fraction of the nominal value.
    #[arg(long, global = true, default_value_t = 0.2)]
    pub range: f64,
    #[arg(long, global = true, default_value_t = 41)]
    pub steps: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; tables go to stdout when omitted (except `sweep`,
    /// which writes to the current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Put 1/2 on the second-order revenue term.
    #[arg(long, global = true)]
    pub taylor2_half: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioSource {
    Fixtures,
    Random(usize),
    Path(PathBuf),
}

impl FromStr for ScenarioSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "fixtures" {
            return Ok(ScenarioSource::Fixtures);
        }
        if let Some(n) = s.strip_prefix("random:") {
            return n.parse().map(ScenarioSource::Random).map_err(|_| format!("bad scenario count in `{s}`"));
        }
        Ok(ScenarioSource::Path(PathBuf::from(s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamChoice {
    One(Param),
    All,
}

impl ParamChoice {
    pub fn params(self) -> Vec<Param> {
        match self {
            ParamChoice::One(p) => vec![p],
            ParamChoice::All => Param::ALL.to_vec(),
        }
    }
}

impl FromStr for ParamChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            Ok(ParamChoice::All)
        } else {
            s.parse().map(ParamChoice::One).map_err(|e: cpt_sense::Error| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn parse_reference(s: &str) -> Result<Policy, String> {
    match s {
        "static" => Ok(Policy::StaticAlternative),
        "expected" => Ok(Policy::ExpectedUtility),
        "best" => Ok(Policy::BestCase),
        "worst" => Ok(Policy::WorstCase),
        _ => match s.strip_prefix("fixed:").map(str::parse::<f64>) {
            Some(Ok(v)) if v.is_finite() => Ok(Policy::FixedValue(v)),
            _ => Err(format!("unknown reference `{s}`; expected static|expected|best|worst|fixed:VALUE")),
        },
    }
}

fn parse_assumption(s: &str) -> Result<(Param, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let param: Param = name.trim().parse().map_err(|e: cpt_sense::Error| e.to_string())?;
    let value: f64 = value.trim().parse().map_err(|_| format!("bad value in `{s}`"))?;
    Ok((param, value))
}
