use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::master::{solve, SolveLimits, SolveResult};
use crate::problem::{build_quadform, ProblemInstance, SparsityBudget, Support};
use crate::stepwise::stepwise_fit;

use super::fit::{fit_static, grid_search, FitStage, Grid, GridSearchResult};
use super::metrics::{compute_metrics, MetricsReport};
use super::{SynthDataset, SynthParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Limits for the final cutting-plane solve.
    pub limits: SolveLimits,
    /// Limits for cutting-plane solves that only score a grid configuration.
    pub validation_limits: SolveLimits,
    /// Fraction of each vertex's rows used for training during grid search.
    pub holdout_fraction: f64,
    pub stepwise_seed: u64,
    /// Replaces every wall-clock measurement in the report with zero.
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            limits: SolveLimits::default(),
            validation_limits: SolveLimits::default().with_time_limit(Duration::from_secs(2)),
            holdout_fraction: 0.7,
            stepwise_seed: 0,
            deterministic: false,
        }
    }
}

/// Summary of a cutting-plane solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: String,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub relative_gap: f64,
    pub node_count: usize,
    pub cut_count: usize,
    pub incumbent_updates: usize,
    pub lp_rebuilds: usize,
    pub wall_time_s: f64,
}

impl SolveSummary {
    pub fn of<T>(result: &SolveResult<T>) -> Self {
        Self {
            status: result.status.as_str().to_owned(),
            lower_bound: result.lower_bound,
            upper_bound: result.upper_bound,
            relative_gap: result.relative_gap,
            node_count: result.node_count,
            cut_count: result.cut_count,
            incumbent_updates: result.incumbent_updates,
            lp_rebuilds: result.lp_rebuilds,
            wall_time_s: result.wall_time.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub lambda_beta: f64,
    pub lambda_delta: f64,
    /// `None` when the grid had a single configuration.
    pub holdout_r2: Option<f64>,
    pub support_size: usize,
    pub metrics: MetricsReport,
    pub solve: Option<SolveSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: SynthParams,
    /// Budgets handed to the sparse solvers.
    pub budget: SparsityBudget,
    pub replacements: usize,
    #[serde(rename = "static")]
    pub static_fit: MethodReport,
    pub stepwise: MethodReport,
    pub cutplane: MethodReport,
}

fn report<R>(
    search: &GridSearchResult<R>,
    beta: &[f64],
    z: &Support,
    dataset: &SynthDataset,
    solve: Option<SolveSummary>,
) -> Result<MethodReport> {
    let mut metrics = compute_metrics(beta, z, dataset)?;
    metrics.fit_time_s = search.refit_time_s;
    Ok(MethodReport {
        lambda_beta: search.best.lambda_beta,
        lambda_delta: search.best.lambda_delta,
        holdout_r2: Some(search.best.holdout_r2).filter(|r| !r.is_nan()),
        support_size: z.count(),
        metrics,
        solve,
    })
}

/// Stepwise warm start followed by the cutting-plane solver.
pub fn fit_cutplane(
    instance: &ProblemInstance<f64>,
    budget: &SparsityBudget,
    stepwise_seed: u64,
    limits: &SolveLimits,
) -> Result<SolveResult<f64>> {
    let qf = build_quadform(instance)?;
    let warm = stepwise_fit(&qf, budget, stepwise_seed)?;
    solve(&qf, budget, Some(&warm.support), limits)
}

/// Runs the static baseline, the stepwise heuristic, and the cutting-plane
/// solver on `dataset`, each with its own grid search.
pub fn run_experiment(dataset: &SynthDataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let params = &dataset.params;
    let instance = &dataset.instance;
    let budget = dataset.budget;
    let (n, t, d) = (params.n, params.t, params.d);

    let static_grid = Grid::beta_only(n * t, 0.0);
    let search = grid_search(instance, &static_grid, config.holdout_fraction, |inst, _| fit_static(inst, budget.global, inst.lambda_beta()))?;
    let z = Support::of_coefficients(t, d, &search.refit)?;
    let static_fit = report(&search, &search.refit, &z, dataset, None)?;

    let grid = Grid::standard(n);
    let search = grid_search(instance, &grid, config.holdout_fraction, |inst, _| {
        stepwise_fit(&build_quadform(inst)?, &budget, config.stepwise_seed)
    })?;
    let stepwise = report(&search, &search.refit.beta, &search.refit.support, dataset, None)?;

    let search = grid_search(instance, &grid, config.holdout_fraction, |inst, stage| {
        let limits = match stage {
            FitStage::Validation => &config.validation_limits,
            FitStage::Refit => &config.limits,
        };
        fit_cutplane(inst, &budget, config.stepwise_seed, limits)
    })?;
    let solved = &search.refit;
    let cutplane = report(&search, &solved.incumbent_beta, &solved.incumbent_z, dataset, Some(SolveSummary::of(solved)))?;

    let mut out = ExperimentReport { params: params.clone(), budget, replacements: dataset.replacements, static_fit, stepwise, cutplane };
    if config.deterministic {
        for m in [&mut out.static_fit, &mut out.stepwise, &mut out.cutplane] {
            m.metrics.fit_time_s = 0.0;
            if let Some(s) = m.solve.as_mut() {
                s.wall_time_s = 0.0;
            }
        }
    }
    Ok(out)
}
