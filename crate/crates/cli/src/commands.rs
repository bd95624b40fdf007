use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use sparsevary::benchmark::{
    compute_metrics, fit_cutplane, generate, grid_search, load_dataset, pooled_r2, run_experiment, save_dataset, score_estimate,
    ExperimentConfig, ExperimentReport, FitStage, Grid, GridScore, GridSearchResult, MetricsReport, SolveSummary, SynthDataset,
};
use sparsevary::io::{read_blocks, read_coefficients, read_graph};
use sparsevary::master::{SolveLimits, SolveResult, SolveStatus};
use sparsevary::{ProblemInstance, SparsityBudget, VertexBlock};

use crate::args::{FitArgs, GridsearchArgs, OutputArgs, SelftestArgs, SolverArgs, SynthArgs};
use crate::error::CliError;
use crate::standardize::Standardization;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

impl SolverArgs {
    fn limits(&self) -> Result<SolveLimits, CliError> {
        let seconds = |s: f64, flag: &str| {
            Duration::try_from_secs_f64(s).map_err(|_| CliError::Usage(format!("--{flag} must be a nonnegative number of seconds")))
        };
        let mut limits = SolveLimits::default().with_time_limit(seconds(self.time_limit, "time-limit")?).with_gap_tol(self.gap_tol);
        if let Some(nodes) = self.max_nodes {
            limits = limits.with_max_nodes(nodes);
        }
        Ok(limits)
    }

    fn experiment(&self, deterministic: bool) -> Result<ExperimentConfig, CliError> {
        let limits = self.limits()?;
        let validation = Duration::try_from_secs_f64(self.validation_time_limit)
            .map_err(|_| CliError::Usage("--validation-time-limit must be a nonnegative number of seconds".into()))?;
        Ok(ExperimentConfig {
            validation_limits: limits.clone().with_time_limit(validation),
            limits,
            holdout_fraction: self.holdout_fraction,
            stepwise_seed: self.stepwise_seed,
            deterministic,
        })
    }
}

/// The exact fit chosen by a grid search.
#[derive(Debug, Serialize)]
pub struct CutplaneFit {
    pub lambda_beta: f64,
    pub lambda_delta: f64,
    pub holdout_r2: Option<f64>,
    pub solve: SolveSummary,
    /// Selected feature indices, one list per vertex.
    pub support: Vec<Vec<usize>>,
    /// Coefficients, one row per vertex.
    pub coefficients: Vec<Vec<f64>>,
}

impl CutplaneFit {
    fn of(search: &GridSearchResult<SolveResult<f64>>, dim: usize, deterministic: bool) -> Self {
        let result = &search.refit;
        let mut solve = SolveSummary::of(result);
        if deterministic {
            solve.wall_time_s = 0.0;
        }
        let z = &result.incumbent_z;
        Self {
            lambda_beta: search.best.lambda_beta,
            lambda_delta: search.best.lambda_delta,
            holdout_r2: Some(search.best.holdout_r2).filter(|r| !r.is_nan()),
            solve,
            support: (0..z.vertices()).map(|t| z.vertex_features(t).collect()).collect(),
            coefficients: result.incumbent_beta.chunks(dim.max(1)).map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
struct FitMetrics {
    oos_r2: Option<f64>,
    mae_coefficients: Option<f64>,
    support_recovered_pct: Option<f64>,
    false_positive_pct: Option<f64>,
    fit_time_s: f64,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a FitArgs,
    vertices: usize,
    features: usize,
    training_samples: usize,
    budget: SparsityBudget,
    standardization: Option<Standardization>,
    fit: CutplaneFit,
    metrics: FitMetrics,
}

#[derive(Debug, Serialize)]
struct SynthReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a SynthArgs,
    result: ExperimentReport,
}

#[derive(Debug, Serialize)]
struct GridsearchReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a GridsearchArgs,
    budget: SparsityBudget,
    scores: Vec<GridScore>,
    fit: CutplaneFit,
    metrics: MetricsReport,
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_blocks(path: &Path, vertices: Option<usize>) -> Result<Vec<VertexBlock<f64>>, CliError> {
    read_blocks(open(path)?, vertices).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(report: &T, output: &OutputArgs) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    match &output.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => Ok(std::io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn check_budget(budget: &SparsityBudget, instance: &ProblemInstance<f64>) -> Result<(), CliError> {
    budget.validate(instance.dim(), instance.vertex_count()).map_err(|e| CliError::Usage(e.to_string()))
}

/// Grid search around stepwise-then-exact fits.
fn search_cutplane(
    instance: &ProblemInstance<f64>,
    budget: &SparsityBudget,
    grid: &Grid,
    config: &ExperimentConfig,
) -> Result<GridSearchResult<SolveResult<f64>>, CliError> {
    let search = grid_search(instance, grid, config.holdout_fraction, |inst, stage| {
        let limits = match stage {
            FitStage::Validation => &config.validation_limits,
            FitStage::Refit => &config.limits,
        };
        fit_cutplane(inst, budget, config.stepwise_seed, limits)
    })?;
    if search.refit.status == SolveStatus::Infeasible {
        return Err(CliError::Infeasible("no support satisfies the sparsity budget".into()));
    }
    Ok(search)
}

/// Samples per vertex used to scale the regularization grid.
fn samples_per_vertex(instance: &ProblemInstance<f64>) -> usize {
    instance.total_samples() / instance.vertex_count().max(1)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let mut train = load_blocks(&args.data.data, None)?;
    let vertices = train.len();
    let graph = read_graph(BufReader::new(open(&args.data.graph)?), vertices)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.data.graph.display())))?;
    let mut test = args.data.test_data.as_deref().map(|p| load_blocks(p, Some(vertices))).transpose()?;
    let standardization = args.data.standardize.then(|| Standardization::fit(&train));
    if let Some(s) = &standardization {
        s.apply(&mut train);
        if let Some(test) = test.as_mut() {
            s.apply(test);
        }
    }
    let instance = ProblemInstance::new(graph, train, 1.0, 0.0)?;
    let budget = SparsityBudget::new(args.budget.kl, args.budget.kg, args.budget.kc);
    check_budget(&budget, &instance)?;
    let config = args.solver.experiment(args.output.deterministic)?;

    let grid = match args.lambda_beta {
        Some(lb) => Grid::single(lb, args.lambda_delta.unwrap_or(0.0)),
        None => Grid::standard(samples_per_vertex(&instance)),
    };
    let search = search_cutplane(&instance, &budget, &grid, &config)?;
    let beta = &search.refit.incumbent_beta;
    let mut metrics = FitMetrics {
        oos_r2: None,
        mae_coefficients: None,
        support_recovered_pct: None,
        false_positive_pct: None,
        fit_time_s: if args.output.deterministic { 0.0 } else { search.refit_time_s },
    };
    if let Some(test) = &test {
        metrics.oos_r2 = Some(pooled_r2(test, beta)?);
    }
    if let (Some(path), Some(test)) = (&args.data.truth, &test) {
        let (dim, truth) = read_coefficients(open(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if dim != instance.dim() || truth.len() != beta.len() {
            return Err(CliError::Io(format!("{}: coefficient grid does not match the data", path.display())));
        }
        let scored = score_estimate(beta, &search.refit.incumbent_z, &truth, test)?;
        metrics.mae_coefficients = Some(scored.mae_coefficients);
        metrics.support_recovered_pct = Some(scored.support_recovered_pct);
        metrics.false_positive_pct = Some(scored.false_positive_pct);
    }
    let report = FitReport {
        version: VERSION,
        command: "fit",
        config: args,
        vertices: instance.vertex_count(),
        features: instance.dim(),
        training_samples: instance.total_samples(),
        budget,
        standardization,
        fit: CutplaneFit::of(&search, instance.dim(), args.output.deterministic),
        metrics,
    };
    emit(&report, &args.output)
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let dataset = generate(&args.synth.params())?;
    if let Some(dir) = &args.dump_dir {
        save_dataset(&dataset, dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let result = run_experiment(&dataset, &args.solver.experiment(args.output.deterministic)?)?;
    emit(&SynthReport { version: VERSION, command: "synth", config: args, result }, &args.output)
}

pub fn gridsearch(args: &GridsearchArgs) -> Result<(), CliError> {
    let dataset: SynthDataset = match &args.dataset {
        Some(dir) => load_dataset(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?,
        None => generate(&args.synth.params())?,
    };
    let config = args.solver.experiment(args.output.deterministic)?;
    let instance = &dataset.instance;
    let start = Instant::now();
    let search = search_cutplane(instance, &dataset.budget, &Grid::standard(dataset.params.n), &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut metrics = compute_metrics(&search.refit.incumbent_beta, &search.refit.incumbent_z, &dataset)?;
    metrics.fit_time_s = if args.output.deterministic { 0.0 } else { elapsed };
    let report = GridsearchReport {
        version: VERSION,
        command: "gridsearch",
        config: args,
        budget: dataset.budget,
        scores: search.scores.clone(),
        fit: CutplaneFit::of(&search, instance.dim(), args.output.deterministic),
        metrics,
    };
    emit(&report, &args.output)
}

pub fn selftest(args: &SelftestArgs) -> Result<(), CliError> {
    let outcomes = sparsevary::selftest::run(args.seed);
    let mut out = std::io::stdout().lock();
    for o in &outcomes {
        writeln!(out, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail)?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Internal(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}
