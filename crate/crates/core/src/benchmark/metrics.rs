use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Support, VertexBlock};

use super::SynthDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae_coefficients: f64,
    pub oos_r2: f64,
    pub support_recovered_pct: f64,
    pub false_positive_pct: f64,
    pub fit_time_s: f64,
}

/// `1 − SSE/SST` pooled over all vertices, with the pooled mean of `y`.
pub fn pooled_r2(blocks: &[VertexBlock<f64>], beta: &[f64]) -> Result<f64> {
    let dim = blocks.first().map_or(0, |b| b.x.ncols());
    if beta.len() != blocks.len() * dim {
        return Err(Error::Dimension(format!("{} coefficients for {} blocks of width {dim}", beta.len(), blocks.len())));
    }
    let count: usize = blocks.iter().map(VertexBlock::samples).sum();
    let mean = blocks.iter().flat_map(|b| &b.y).sum::<f64>() / count.max(1) as f64;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for (t, b) in blocks.iter().enumerate() {
        let fitted = b.x.matvec(&beta[t * dim..(t + 1) * dim]);
        for (y, f) in b.y.iter().zip(fitted) {
            sse += (y - f) * (y - f);
            sst += (y - mean) * (y - mean);
        }
    }
    Ok(1.0 - sse / sst)
}

/// Coefficient MAE, pooled test R², support recovery and false positives.
/// `fit_time_s` is left at zero for the caller to fill in.
pub fn compute_metrics(beta_hat: &[f64], z_hat: &Support, dataset: &SynthDataset) -> Result<MetricsReport> {
    score_estimate(beta_hat, z_hat, &dataset.beta_true, &dataset.test_blocks)
}

/// [`compute_metrics`] against an explicit truth and test set. The true
/// support is the set of nonzero entries of `beta_true`.
pub fn score_estimate(beta_hat: &[f64], z_hat: &Support, beta_true: &[f64], test_blocks: &[VertexBlock<f64>]) -> Result<MetricsReport> {
    if beta_hat.len() != beta_true.len() || z_hat.len() != beta_true.len() {
        return Err(Error::Dimension("estimate and ground truth differ in shape".into()));
    }
    let truth = Support::of_coefficients(z_hat.vertices(), z_hat.dim(), beta_true)?;
    let mae = beta_hat.iter().zip(beta_true).map(|(a, b)| (a - b).abs()).sum::<f64>() / beta_hat.len() as f64;
    let (mut hits, mut false_pos) = (0usize, 0usize);
    for (&h, &t) in z_hat.bits().iter().zip(truth.bits()) {
        match (h, t) {
            (true, true) => hits += 1,
            (true, false) => false_pos += 1,
            _ => {}
        }
    }
    let recovered = if truth.count() == 0 { 100.0 } else { 100.0 * hits as f64 / truth.count() as f64 };
    Ok(MetricsReport {
        mae_coefficients: mae,
        oos_r2: pooled_r2(test_blocks, beta_hat)?,
        support_recovered_pct: recovered,
        false_positive_pct: 100.0 * false_pos as f64 / z_hat.count().max(1) as f64,
        fit_time_s: 0.0,
    })
}
