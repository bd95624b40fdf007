//! Stepwise backward-elimination heuristic producing a feasible support.
//!
//! Each vertex first gets an independent greedy sparse ridge fit. While the
//! union of supports is too large or supports change too much along edges,
//! the feature whose removal hurts the full objective least is dropped, and
//! every vertex that used it borrows a replacement from a random neighbor.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::oracle::beta_star;
use crate::problem::{QuadForm, SparsityBudget, Support};
use crate::scalar::Real;

/// Coefficients over all `D` features and the selected features in order of selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit<T> {
    pub beta: Vec<T>,
    pub support: Vec<usize>,
}

/// Ridge fit `(G_SS + λI)⁻¹ c_S` from a Gram matrix `G = XᵀX` and `c = Xᵀy`,
/// returned dense over all features.
pub fn ridge_on_support<T: Real>(gram: &Matrix<T>, xty: &[T], lambda: T, support: &[usize]) -> Result<Vec<T>> {
    let mut a = gram.select(support, support);
    a.add_diagonal(lambda);
    let rhs: Vec<T> = support.iter().map(|&j| xty[j]).collect();
    let sol = Cholesky::factor(&a)?.solve(&rhs);
    let mut beta = vec![T::zero(); gram.nrows()];
    for (&j, v) in support.iter().zip(sol) {
        beta[j] = v;
    }
    Ok(beta)
}

/// Greedy forward selection working on `G = XᵀX` and `c = Xᵀy`.
///
/// Each step scores every allowed, unselected feature by
/// `(x_jᵀr)² / ‖x_j‖²` against the current ridge residual `r` and adds the
/// best one (lowest index on ties), then refits ridge on the selection.
/// Stops early when no feature has a positive score.
pub fn greedy_from_gram<T: Real>(gram: &Matrix<T>, xty: &[T], k: usize, lambda: T, allowed: &[usize]) -> Result<SparseFit<T>> {
    let dim = gram.nrows();
    if xty.len() != dim || !gram.is_square() {
        return Err(Error::Dimension("Gram matrix and Xᵀy disagree".into()));
    }
    if let Some(&j) = allowed.iter().find(|&&j| j >= dim) {
        return Err(Error::Dimension(format!("allowed feature {j} outside 0..{dim}")));
    }
    let mut candidates: Vec<usize> = allowed.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut support = Vec::new();
    let mut beta = vec![T::zero(); dim];
    while support.len() < k {
        let mut best: Option<(usize, T)> = None;
        for &j in &candidates {
            let norm = gram[(j, j)];
            if support.contains(&j) || !(norm > T::zero()) {
                continue;
            }
            let corr = xty[j] - dot(gram.row(j), &beta);
            let score = corr * corr / norm;
            if score > T::zero() && best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        beta = ridge_on_support(gram, xty, lambda, &support)?;
    }
    Ok(SparseFit { beta, support })
}

/// Greedy sparse ridge on raw data.
pub fn sparse_ridge_greedy<T: Real>(x: &Matrix<T>, y: &[T], k: usize, lambda: T, allowed: &[usize]) -> Result<SparseFit<T>> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension("design and response lengths differ".into()));
    }
    greedy_from_gram(&x.gram(), &x.tr_matvec(y), k, lambda, allowed)
}

#[derive(Debug, Clone)]
pub struct StepwiseOutcome<T> {
    pub support: Support,
    /// `β*(support)`.
    pub beta: Vec<T>,
    pub removal_iterations: usize,
    /// Replacement features borrowed from neighbors.
    pub swaps: usize,
    /// Vertices that lost a feature without a replacement.
    pub skipped_swaps: usize,
}

/// `max{m − K_G, m − (K_L + K_C/2), m − K_C}` with `m = min(T·K_L, D)`.
pub fn removal_iteration_bound(vertices: usize, dim: usize, budget: &SparsityBudget) -> f64 {
    let m = (vertices * budget.local).min(dim) as f64;
    let kl = budget.local as f64;
    let kg = budget.global as f64;
    let kc = budget.change as f64;
    (m - kg).max(m - (kl + kc / 2.0)).max(m - kc)
}

fn change_count(supports: &[BTreeSet<usize>], edges: &[(usize, usize)]) -> usize {
    edges.iter().map(|&(s, t)| supports[s].symmetric_difference(&supports[t]).count()).sum()
}

/// Runs the stepwise heuristic; the result always satisfies `budget`.
pub fn stepwise_fit<T: Real>(qf: &QuadForm<T>, budget: &SparsityBudget, seed: u64) -> Result<StepwiseOutcome<T>> {
    let (vertices, dim) = (qf.vertex_count(), qf.dim());
    let graph = qf.graph();
    let lambda = qf.lambda_beta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu_block = |t: usize| &qf.mu()[t * dim..(t + 1) * dim];
    let all: Vec<usize> = (0..dim).collect();

    let mut beta = Vec::with_capacity(vertices * dim);
    let mut supports: Vec<BTreeSet<usize>> = Vec::with_capacity(vertices);
    for t in 0..vertices {
        let fit = greedy_from_gram(qf.gram(t), mu_block(t), budget.local, lambda, &all)?;
        beta.extend(fit.beta);
        supports.push(fit.support.into_iter().collect());
    }
    let mut global: BTreeSet<usize> = supports.iter().flatten().copied().collect();

    let mut removal_iterations = 0;
    let mut swaps = 0;
    let mut skipped_swaps = 0;
    while global.len() > budget.global || change_count(&supports, graph.edges()) > budget.change {
        let mut best: Option<(usize, T)> = None;
        let mut trial = beta.clone();
        for &j in &global {
            for t in 0..vertices {
                trial[t * dim + j] = T::zero();
            }
            let loss = qf.quadratic_value(&trial);
            for t in 0..vertices {
                trial[t * dim + j] = beta[t * dim + j];
            }
            if best.is_none_or(|(_, l)| loss < l) {
                best = Some((j, loss));
            }
        }
        let (removed, _) = best.expect("a violated budget implies a nonempty global support");
        global.remove(&removed);
        removal_iterations += 1;

        for t in 0..vertices {
            if !supports[t].contains(&removed) {
                continue;
            }
            let mut next = supports[t].clone();
            next.remove(&removed);
            let neighbors = graph.neighbors(t);
            if neighbors.is_empty() {
                skipped_swaps += 1;
            } else {
                let s = neighbors[rng.random_range(0..neighbors.len())];
                let pool: Vec<usize> =
                    supports[s].iter().copied().filter(|j| *j != removed && !supports[t].contains(j)).collect();
                if pool.is_empty() {
                    skipped_swaps += 1;
                } else {
                    next.insert(pool[rng.random_range(0..pool.len())]);
                    swaps += 1;
                }
            }
            let feats: Vec<usize> = next.iter().copied().collect();
            let refit = ridge_on_support(qf.gram(t), mu_block(t), lambda, &feats)?;
            beta[t * dim..(t + 1) * dim].copy_from_slice(&refit);
            supports[t] = next;
        }
    }

    let support = Support::from_vertex_sets(dim, supports.iter().map(|s| s.iter().copied()))?;
    let beta = beta_star(qf, &support)?;
    Ok(StepwiseOutcome { support, beta, removal_iterations, swaps, skipped_swaps })
}
