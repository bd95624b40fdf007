//! Synthetic benchmark: data generation, baselines, metrics, and grid search.
//!
//! Everything here works in `f64`.

mod dataset;
mod experiment;
mod fit;
mod generate;
mod metrics;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ProblemInstance, SparsityBudget, Support, VertexBlock};

pub use dataset::{load_dataset, save_dataset};
pub use experiment::{fit_cutplane, run_experiment, ExperimentConfig, ExperimentReport, MethodReport, SolveSummary};
pub use fit::{fit_static, grid_search, holdout_split, Coefficients, FitStage, Grid, GridScore, GridSearchResult};
pub use generate::{
    add_noise, gen_beta_spatial, gen_beta_temporal, gen_design_components, gen_x, random_graph, signal, TrueCoefficients,
};
pub use metrics::{compute_metrics, pooled_r2, score_estimate, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Temporal,
    Spatial,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Temporal => "temporal",
            Mode::Spatial => "spatial",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(Mode::Temporal),
            "spatial" => Ok(Mode::Spatial),
            other => Err(Error::Parameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Generator settings. Temporal mode ignores `k_global` and `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub mode: Mode,
    /// Samples per vertex, for both training and test data.
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub k_local: usize,
    pub k_global: usize,
    pub k_change: usize,
    pub sigma_v: f64,
    pub xi: f64,
    pub rho_t: f64,
    pub rho_d: f64,
    pub edges: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            mode: Mode::Temporal,
            n: 300,
            t: 10,
            d: 30,
            k_local: 3,
            k_global: 4,
            k_change: 1,
            sigma_v: 0.25,
            xi: 2.0,
            rho_t: 0.6,
            rho_d: 0.6,
            edges: 0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 || self.d == 0 {
            return Err(Error::Parameter("N, T and D must be positive".into()));
        }
        if !(self.sigma_v >= 0.0) || !self.sigma_v.is_finite() {
            return Err(Error::Parameter("sigma_v must be a finite nonnegative number".into()));
        }
        if !(self.xi > 0.0) {
            return Err(Error::Parameter("xi must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rho_t) || !(0.0..1.0).contains(&self.rho_d) {
            return Err(Error::Parameter("rho_t and rho_d must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Generated training instance, held-out test data, and ground truth.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub params: SynthParams,
    /// Training data; the regularization weights are placeholders until a
    /// grid search picks them.
    pub instance: ProblemInstance<f64>,
    pub test_blocks: Vec<VertexBlock<f64>>,
    pub beta_true: Vec<f64>,
    pub z_true: Support,
    /// Budgets the ground truth realizes; these are what solvers receive.
    pub budget: SparsityBudget,
    pub replacements: usize,
}

fn realized_budget(params: &SynthParams, truth: &TrueCoefficients) -> SparsityBudget {
    let local = (0..params.t).map(|t| truth.support.vertex_count(t)).max().unwrap_or(0);
    let global = match params.mode {
        Mode::Temporal => truth.support.global_features().len(),
        Mode::Spatial => params.k_global,
    };
    SparsityBudget::new(local, global, truth.support.change_count(&truth.graph))
}

/// Generates a full dataset from `params.seed`.
///
/// Draw order: coefficients (and graph), training design, test design,
/// training noise, test noise.
pub fn generate(params: &SynthParams) -> Result<SynthDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let truth = match params.mode {
        Mode::Temporal => gen_beta_temporal(params, &mut rng)?,
        Mode::Spatial => gen_beta_spatial(params, &mut rng)?,
    };
    let x_train = gen_x(params.n, params.t, params.d, params.rho_t, params.rho_d, &mut rng)?;
    let x_test = gen_x(params.n, params.t, params.d, params.rho_t, params.rho_d, &mut rng)?;
    let y_train = add_noise(&signal(&x_train, &truth.beta), params.xi, &mut rng)?;
    let y_test = add_noise(&signal(&x_test, &truth.beta), params.xi, &mut rng)?;
    let blocks = |xs: Vec<_>, ys: Vec<Vec<f64>>| -> Result<Vec<VertexBlock<f64>>> {
        xs.into_iter().zip(ys).map(|(x, y)| VertexBlock::new(x, y)).collect()
    };
    let n = params.n as f64;
    let instance = ProblemInstance::new(truth.graph.clone(), blocks(x_train, y_train)?, n, n)?;
    let budget = realized_budget(params, &truth);
    Ok(SynthDataset {
        params: params.clone(),
        instance,
        test_blocks: blocks(x_test, y_test)?,
        z_true: truth.support.clone(),
        budget,
        replacements: truth.replacements,
        beta_true: truth.beta,
    })
}
