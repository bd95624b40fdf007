//! Command-line flags and the flat `key = value` config file.
//!
//! Config keys are long flag names without the leading dashes (`time-limit`
//! or `time_limit`). File values are inserted ahead of the command line, so
//! flags given explicitly always win.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use sparsevary::benchmark::{Mode, SynthParams};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sparsevary", version, about = "Sparse, slowly varying regression over a similarity graph")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit observation CSV data with the stepwise warm start and the exact solver.
    Fit(FitArgs),
    /// Generate a synthetic dataset and benchmark static, stepwise and exact fits.
    Synth(SynthArgs),
    /// Score every regularization pair on a holdout split, then refit the best.
    Gridsearch(GridsearchArgs),
    /// Run randomized consistency checks of the oracle, solver and heuristic.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Training observations (`vertex,y,x0,...`).
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// Edge list of the similarity graph.
    #[arg(long, value_name = "FILE")]
    pub graph: PathBuf,
    /// Held-out observations for the out-of-sample R².
    #[arg(long, value_name = "CSV")]
    pub test_data: Option<PathBuf>,
    /// True coefficient grid, for support recovery and coefficient error.
    #[arg(long, value_name = "CSV", requires = "test_data", conflicts_with = "standardize")]
    pub truth: Option<PathBuf>,
    /// Standardize features and response with training statistics.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct BudgetArgs {
    /// Local budget: features per vertex.
    #[arg(long)]
    pub kl: usize,
    /// Global budget: features used anywhere.
    #[arg(long)]
    pub kg: usize,
    /// Change budget: support differences summed over edges.
    #[arg(long)]
    pub kc: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Wall-clock limit of the final exact solve, in seconds.
    #[arg(long, default_value_t = 300.0, value_name = "SECONDS")]
    pub time_limit: f64,
    /// Wall-clock limit of each exact solve that only scores a grid point.
    #[arg(long, default_value_t = 2.0, value_name = "SECONDS")]
    pub validation_time_limit: f64,
    /// Relative optimality gap at which the exact solver stops.
    #[arg(long, default_value_t = 1e-6)]
    pub gap_tol: f64,
    /// Node limit of the exact solver.
    #[arg(long)]
    pub max_nodes: Option<usize>,
    /// Seed of the stepwise heuristic's random swaps.
    #[arg(long, default_value_t = 0)]
    pub stepwise_seed: u64,
    /// Fraction of each vertex's rows used for training during grid search.
    #[arg(long, default_value_t = 0.7)]
    pub holdout_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Report every timing as zero so that reruns are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    /// Flat `key = value` file with defaults for any flag of this command.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub budget: BudgetArgs,
    /// Ridge weight on the coefficients.
    #[arg(long, required_unless_present = "grid", conflicts_with = "grid")]
    pub lambda_beta: Option<f64>,
    /// Weight of the penalty on differences across graph edges.
    #[arg(long, conflicts_with = "grid")]
    pub lambda_delta: Option<f64>,
    /// Choose both weights by holdout validation over the standard grid.
    #[arg(long)]
    pub grid: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthFlags {
    #[arg(long, default_value = "temporal", value_parser = parse_mode)]
    pub mode: Mode,
    /// Samples per vertex, for training and for testing.
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// Vertex count.
    #[arg(long, default_value_t = 10)]
    pub t: usize,
    /// Feature count.
    #[arg(long, default_value_t = 30)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub kl: usize,
    /// Global support size; spatial mode only.
    #[arg(long, default_value_t = 4)]
    pub kg: usize,
    #[arg(long, default_value_t = 1)]
    pub kc: usize,
    /// Half-width of the uniform coefficient drift.
    #[arg(long, default_value_t = 0.25)]
    pub sigma_v: f64,
    /// Signal-to-noise ratio.
    #[arg(long, default_value_t = 2.0)]
    pub xi: f64,
    /// Autocorrelation of the design across vertices.
    #[arg(long, default_value_t = 0.6)]
    pub rho_t: f64,
    /// Autocorrelation of the design across features.
    #[arg(long, default_value_t = 0.6)]
    pub rho_d: f64,
    /// Edge count of the random graph; spatial mode only.
    #[arg(long, default_value_t = 0)]
    pub edges: usize,
    /// Seed of the data generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthFlags {
    pub fn params(&self) -> SynthParams {
        SynthParams {
            mode: self.mode,
            n: self.n,
            t: self.t,
            d: self.d,
            k_local: self.kl,
            k_global: self.kg,
            k_change: self.kc,
            sigma_v: self.sigma_v,
            xi: self.xi,
            rho_t: self.rho_t,
            rho_d: self.rho_d,
            edges: self.edges,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub synth: SynthFlags,
    /// Also write the generated dataset into this directory.
    #[arg(long, value_name = "DIR")]
    pub dump_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridsearchArgs {
    /// Dataset directory written by `synth --dump-dir`; when absent the data
    /// is generated from the synthetic flags.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub synth: SynthFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: sparsevary::Error| e.to_string())
}

/// Parses `argv`, merging in the config file named by `--config`.
pub fn parse<I, T>(argv: I) -> Result<Cli, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let strict = |argv: Vec<OsString>| {
        let matches = Cli::command().try_get_matches_from(argv).map_err(CliError::Clap)?;
        Cli::from_arg_matches(&matches).map_err(CliError::Clap)
    };
    // Lenient first pass: finds `--config` even when required flags live in the file.
    let cmd = Cli::command();
    let Ok(loose) = cmd.clone().ignore_errors(true).try_get_matches_from(&argv) else {
        return strict(argv);
    };
    let Some((name, sub_matches)) = loose.subcommand() else {
        return strict(argv);
    };
    let Some(path) = sub_matches.try_get_one::<PathBuf>("config").ok().flatten().cloned() else {
        return strict(argv);
    };
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");

    let file = File::open(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let entries = sparsevary::io::read_key_values(BufReader::new(file)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;

    let explicit: Vec<&clap::Arg> = sub
        .get_arguments()
        .filter(|a| sub_matches.value_source(a.get_id().as_str()) == Some(ValueSource::CommandLine))
        .collect();
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in &entries {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()) && long != "config")
            .ok_or_else(|| CliError::Usage(format!("unknown config key `{key}` for `{name}`")))?;
        if explicit.iter().any(|e| sub.get_arg_conflicts_with(e).iter().any(|c| c.get_id() == arg.get_id())) {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(format!("--{long}").into());
            injected.push(value.into());
        } else {
            match value.as_str() {
                "true" => injected.push(format!("--{long}").into()),
                "false" => {}
                other => return Err(CliError::Usage(format!("config key `{key}` expects true or false, got `{other}`"))),
            }
        }
    }
    let position = argv.iter().position(|a| a == name).expect("subcommand token present");
    let merged: Vec<OsString> = argv[..=position].iter().cloned().chain(injected).chain(argv[position + 1..].iter().cloned()).collect();
    strict(merged)
}
