use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::master::SolveResult;
use crate::problem::{ProblemInstance, VertexBlock};
use crate::stepwise::{greedy_from_gram, StepwiseOutcome};

use super::metrics::pooled_r2;

/// Coefficient vector of a fitted model.
pub trait Coefficients {
    fn coefficients(&self) -> &[f64];
}

impl Coefficients for Vec<f64> {
    fn coefficients(&self) -> &[f64] {
        self
    }
}

impl Coefficients for StepwiseOutcome<f64> {
    fn coefficients(&self) -> &[f64] {
        &self.beta
    }
}

impl Coefficients for SolveResult<f64> {
    fn coefficients(&self) -> &[f64] {
        &self.incumbent_beta
    }
}

impl<A: Coefficients, B> Coefficients for (A, B) {
    fn coefficients(&self) -> &[f64] {
        self.0.coefficients()
    }
}

/// One shared `K`-sparse ridge model fitted on all vertices pooled together,
/// copied to every vertex.
pub fn fit_static(instance: &ProblemInstance<f64>, k: usize, lambda_beta: f64) -> Result<Vec<f64>> {
    let dim = instance.dim();
    if k > dim {
        return Err(Error::Parameter(format!("sparsity {k} exceeds dimension {dim}")));
    }
    let mut gram = Matrix::zeros(dim, dim);
    let mut xty = vec![0.0; dim];
    for block in instance.blocks() {
        gram = gram.add(&block.x.gram());
        for (acc, v) in xty.iter_mut().zip(block.x.tr_matvec(&block.y)) {
            *acc += v;
        }
    }
    let all: Vec<usize> = (0..dim).collect();
    let fit = greedy_from_gram(&gram, &xty, k, lambda_beta, &all)?;
    Ok(fit.beta.repeat(instance.vertex_count()))
}

/// Regularization grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lambda_beta: Vec<f64>,
    pub lambda_delta: Vec<f64>,
}

impl Grid {
    /// `λ_β ∈ {n·3⁻ᵏ : k = 0..6}`, `λ_δ ∈ {n, n/3, n/9}`.
    pub fn standard(n: usize) -> Self {
        let n = n as f64;
        Self { lambda_beta: (0..7).map(|k| n / 3f64.powi(k)).collect(), lambda_delta: (0..3).map(|k| n / 3f64.powi(k)).collect() }
    }

    /// Standard `λ_β` values with a single `λ_δ`, for models without coupling.
    pub fn beta_only(n: usize, lambda_delta: f64) -> Self {
        Self { lambda_delta: vec![lambda_delta], ..Self::standard(n) }
    }

    pub fn single(lambda_beta: f64, lambda_delta: f64) -> Self {
        Self { lambda_beta: vec![lambda_beta], lambda_delta: vec![lambda_delta] }
    }

    pub fn len(&self) -> usize {
        self.lambda_beta.len() * self.lambda_delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configurations in `λ_β`-major order.
    pub fn configs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambda_beta.iter().flat_map(move |&b| self.lambda_delta.iter().map(move |&d| (b, d)))
    }
}

/// Whether a grid-search fit scores a configuration or produces the final model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStage {
    Validation,
    Refit,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridScore {
    pub lambda_beta: f64,
    pub lambda_delta: f64,
    pub holdout_r2: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult<R> {
    pub best: GridScore,
    /// Every configuration in grid order.
    pub scores: Vec<GridScore>,
    /// Best configuration refitted on all training data.
    pub refit: R,
    pub refit_time_s: f64,
}

/// Splits every vertex's rows into a leading training part holding
/// `ceil(fraction·N)` rows and a trailing validation part.
pub fn holdout_split(
    instance: &ProblemInstance<f64>,
    fraction: f64,
) -> Result<(ProblemInstance<f64>, Vec<VertexBlock<f64>>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!("holdout fraction {fraction} must lie in (0, 1)")));
    }
    let mut train = Vec::with_capacity(instance.vertex_count());
    let mut valid = Vec::with_capacity(instance.vertex_count());
    for (t, block) in instance.blocks().iter().enumerate() {
        let n = block.samples();
        let cut = (fraction * n as f64).ceil() as usize;
        if cut == 0 || cut >= n {
            return Err(Error::Parameter(format!("vertex {t} has too few rows ({n}) for a holdout split")));
        }
        let cols: Vec<usize> = (0..block.x.ncols()).collect();
        let (head, tail): (Vec<usize>, Vec<usize>) = ((0..cut).collect(), (cut..n).collect());
        train.push(VertexBlock::new(block.x.select(&head, &cols), block.y[..cut].to_vec())?);
        valid.push(VertexBlock::new(block.x.select(&tail, &cols), block.y[cut..].to_vec())?);
    }
    let train = ProblemInstance::new(instance.graph().clone(), train, instance.lambda_beta(), instance.lambda_delta())?;
    Ok((train, valid))
}

/// Picks the configuration with the best holdout R² (first one on ties) and
/// refits it on the full training data.
pub fn grid_search<R, F>(instance: &ProblemInstance<f64>, grid: &Grid, fraction: f64, mut fit: F) -> Result<GridSearchResult<R>>
where
    R: Coefficients,
    F: FnMut(&ProblemInstance<f64>, FitStage) -> Result<R>,
{
    if grid.is_empty() {
        return Err(Error::Parameter("empty regularization grid".into()));
    }
    let (train, valid) = if grid.len() > 1 { Some(holdout_split(instance, fraction)?) } else { None }.unzip();
    let mut scores = Vec::with_capacity(grid.len());
    for (lb, ld) in grid.configs() {
        let holdout_r2 = match (&train, &valid) {
            (Some(train), Some(valid)) => {
                let model = fit(&train.with_lambdas(lb, ld)?, FitStage::Validation)?;
                pooled_r2(valid, model.coefficients())?
            }
            _ => f64::NAN,
        };
        scores.push(GridScore { lambda_beta: lb, lambda_delta: ld, holdout_r2 });
    }
    let best = *scores
        .iter()
        .reduce(|a, b| if b.holdout_r2 > a.holdout_r2 || a.holdout_r2.is_nan() && !b.holdout_r2.is_nan() { b } else { a })
        .expect("grid is nonempty");
    let start = std::time::Instant::now();
    let refit = fit(&instance.with_lambdas(best.lambda_beta, best.lambda_delta)?, FitStage::Refit)?;
    Ok(GridSearchResult { best, scores, refit, refit_time_s: start.elapsed().as_secs_f64() })
}
