//! Synthetic coefficient, design, and noise generators.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problem::{SimilarityGraph, Support};

use super::SynthParams;

/// Ground-truth coefficients with their support and graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueCoefficients {
    pub beta: Vec<f64>,
    pub support: Support,
    pub graph: SimilarityGraph,
    /// Number of support replacements performed.
    pub replacements: usize,
}

fn signs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn drift(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        rng.random_range(-sigma..=sigma)
    } else {
        0.0
    }
}

fn sorted_sample(rng: &mut impl Rng, pool: usize, amount: usize) -> Vec<usize> {
    let mut v = sample(rng, pool, amount).into_vec();
    v.sort_unstable();
    v
}

/// Temporal ground truth on a chain.
///
/// Vertex 0 gets `K_L` random features with ±1 values. Each later vertex
/// copies its predecessor and perturbs the supported entries by
/// `Uniform[−σ_v, σ_v]`. At `K_C` distinct vertices in `1..T` one supported
/// feature is replaced by a never-used feature with a fresh ±1 value, which
/// persists to later vertices.
pub fn gen_beta_temporal(params: &SynthParams, rng: &mut impl Rng) -> Result<TrueCoefficients> {
    let (t_count, dim, kl, kc) = (params.t, params.d, params.k_local, params.k_change);
    if kl == 0 || kl > dim {
        return Err(Error::Generation(format!("local sparsity {kl} must lie in 1..={dim}")));
    }
    if kc > 0 && kl + kc > dim {
        return Err(Error::Generation(format!("{kc} replacements need {} features but only {dim} exist", kl + kc)));
    }
    if kc > t_count.saturating_sub(1) {
        return Err(Error::Generation(format!("{kc} replacements need distinct vertices in 1..{t_count}")));
    }
    let graph = SimilarityGraph::chain(t_count)?;
    let first = sorted_sample(rng, dim, kl);
    let mut current = vec![0.0; dim];
    for (&d, s) in first.iter().zip(signs(rng, kl)) {
        current[d] = s;
    }
    let mut used: BTreeSet<usize> = first.into_iter().collect();
    let change_at: BTreeSet<usize> = sample(rng, t_count - 1, kc).into_iter().map(|v| v + 1).collect();
    let mut beta = Vec::with_capacity(t_count * dim);
    for t in 0..t_count {
        if t > 0 {
            for v in current.iter_mut().filter(|v| **v != 0.0) {
                *v += drift(rng, params.sigma_v);
            }
        }
        if change_at.contains(&t) {
            let supported: Vec<usize> = (0..dim).filter(|&d| current[d] != 0.0).collect();
            let fresh: Vec<usize> = (0..dim).filter(|d| !used.contains(d)).collect();
            let out = supported[rng.random_range(0..supported.len())];
            let inn = fresh[rng.random_range(0..fresh.len())];
            current[out] = 0.0;
            current[inn] = signs(rng, 1)[0];
            used.insert(inn);
        }
        beta.extend_from_slice(&current);
    }
    let support = Support::of_coefficients(t_count, dim, &beta)?;
    Ok(TrueCoefficients { beta, support, graph, replacements: change_at.len() })
}

/// Uniform random simple graph with exactly `edges` edges.
pub fn random_graph(vertex_count: usize, edges: usize, rng: &mut impl Rng) -> Result<SimilarityGraph> {
    let max = vertex_count * vertex_count.saturating_sub(1) / 2;
    if edges > max {
        return Err(Error::Generation(format!("{edges} edges exceed the maximum {max} for {vertex_count} vertices")));
    }
    let pairs: Vec<(usize, usize)> = (0..vertex_count).flat_map(|s| (s + 1..vertex_count).map(move |t| (s, t))).collect();
    SimilarityGraph::new(vertex_count, sorted_sample(rng, max, edges).into_iter().map(|i| pairs[i]))
}

/// Spatial ground truth on a random graph.
///
/// A global support `S` of size `K_G` is drawn; every connected component
/// gets a base `K_L`-sparse ±1 vector on features from `S`; each vertex
/// perturbs its component's base by `Uniform[−σ_v, σ_v]`. At `K_C` distinct
/// random vertices one supported feature is replaced by an unused feature of
/// `S` with a fresh ±1 value.
pub fn gen_beta_spatial(params: &SynthParams, rng: &mut impl Rng) -> Result<TrueCoefficients> {
    let (t_count, dim, kl, kg, kc) = (params.t, params.d, params.k_local, params.k_global, params.k_change);
    if kl == 0 || kl > kg || kg > dim {
        return Err(Error::Generation(format!("need 1 <= K_L ({kl}) <= K_G ({kg}) <= D ({dim})")));
    }
    if kc > t_count {
        return Err(Error::Generation(format!("{kc} replacements need distinct vertices among {t_count}")));
    }
    if kc > 0 && kl == kg {
        return Err(Error::Generation("replacements need K_G > K_L".into()));
    }
    let graph = random_graph(t_count, params.edges, rng)?;
    let global = sorted_sample(rng, dim, kg);
    let mut beta = vec![0.0; t_count * dim];
    for component in graph.components() {
        let base_feats: Vec<usize> = sorted_sample(rng, kg, kl).into_iter().map(|i| global[i]).collect();
        let base_vals = signs(rng, kl);
        for &t in &component {
            for (&d, &v) in base_feats.iter().zip(&base_vals) {
                beta[t * dim + d] = v + drift(rng, params.sigma_v);
            }
        }
    }
    let change_at = sorted_sample(rng, t_count, kc);
    for &t in &change_at {
        let row = &mut beta[t * dim..(t + 1) * dim];
        let supported: Vec<usize> = global.iter().copied().filter(|&d| row[d] != 0.0).collect();
        let free: Vec<usize> = global.iter().copied().filter(|&d| row[d] == 0.0).collect();
        let out = supported[rng.random_range(0..supported.len())];
        let inn = free[rng.random_range(0..free.len())];
        row[out] = 0.0;
        row[inn] = signs(rng, 1)[0];
    }
    let support = Support::of_coefficients(t_count, dim, &beta)?;
    Ok(TrueCoefficients { beta, support, graph, replacements: change_at.len() })
}

/// The two correlated Gaussian components of the design tensor, each as
/// `T` matrices of shape `N x D`.
pub fn gen_design_components(
    samples: usize,
    vertices: usize,
    dim: usize,
    rho_t: f64,
    rho_d: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<Matrix<f64>>, Vec<Matrix<f64>>)> {
    if !(0.0..1.0).contains(&rho_t) || !(0.0..1.0).contains(&rho_d) {
        return Err(Error::Generation("correlations must lie in [0, 1)".into()));
    }
    let draw = |rng: &mut dyn rand::RngCore| -> Vec<Matrix<f64>> {
        (0..vertices).map(|_| Matrix::from_fn(samples, dim, |_, _| rng.sample(StandardNormal))).collect()
    };
    let mut xa = draw(rng);
    let mut xb = draw(rng);
    for t in 1..vertices {
        let (prev, cur) = xa.split_at_mut(t);
        let (prev, cur) = (&prev[t - 1], &mut cur[0]);
        for n in 0..samples {
            for d in 0..dim {
                cur[(n, d)] += rho_t * prev[(n, d)];
            }
        }
    }
    for block in &mut xb {
        for n in 0..samples {
            for d in 1..dim {
                let prev = block[(n, d - 1)];
                block[(n, d)] += rho_d * prev;
            }
        }
    }
    Ok((xa, xb))
}

/// Design tensor `X = Xᵃ + Xᵇ` as `T` blocks of shape `N x D`.
pub fn gen_x(samples: usize, vertices: usize, dim: usize, rho_t: f64, rho_d: f64, rng: &mut impl Rng) -> Result<Vec<Matrix<f64>>> {
    let (xa, xb) = gen_design_components(samples, vertices, dim, rho_t, rho_d, rng)?;
    Ok(xa.iter().zip(&xb).map(|(a, b)| a.add(b)).collect())
}

/// Adds i.i.d. `N(0, σ²)` noise scaled so that `‖noise‖² ≈ ‖signal‖² / ξ²`,
/// i.e. `σ²` is the mean squared signal entry over `ξ²`.
pub fn add_noise(clean: &[Vec<f64>], xi: f64, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    if !(xi > 0.0) {
        return Err(Error::Generation("signal-to-noise ratio must be positive".into()));
    }
    let count = clean.iter().map(Vec::len).sum::<usize>().max(1);
    let power: f64 = clean.iter().flatten().map(|v| v * v).sum::<f64>() / count as f64;
    let sigma = (power / (xi * xi)).sqrt();
    if sigma == 0.0 {
        return Ok(clean.to_vec());
    }
    Ok(clean
        .iter()
        .map(|ys| ys.iter().map(|&y| y + sigma * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect())
}

/// `Xᵗ βᵗ` for every vertex.
pub fn signal(design: &[Matrix<f64>], beta: &[f64]) -> Vec<Vec<f64>> {
    let dim = design.first().map_or(0, Matrix::ncols);
    design.iter().enumerate().map(|(t, x)| x.matvec(&beta[t * dim..(t + 1) * dim])).collect()
}
