#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsevary::{Matrix, ProblemInstance, SimilarityGraph, SparsityBudget, Support, VertexBlock};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Random instance with standard normal designs and responses.
pub fn random_instance(
    rng: &mut impl Rng,
    graph: SimilarityGraph,
    dim: usize,
    samples: usize,
    lambda_beta: f64,
    lambda_delta: f64,
) -> ProblemInstance<f64> {
    let blocks = (0..graph.vertex_count())
        .map(|_| {
            let x = gaussian_matrix(rng, samples, dim);
            let y = (0..samples).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            VertexBlock::new(x, y).unwrap()
        })
        .collect();
    ProblemInstance::new(graph, blocks, lambda_beta, lambda_delta).unwrap()
}

/// Every binary support of the given shape.
pub fn all_supports(vertices: usize, dim: usize) -> Vec<Support> {
    let n = vertices * dim;
    assert!(n <= 20, "enumeration too large");
    (0u32..(1 << n))
        .map(|mask| Support::from_bits(vertices, dim, (0..n).map(|i| mask >> i & 1 == 1).collect()).unwrap())
        .collect()
}

/// Literal set arithmetic for the three budgets.
pub fn feasible_by_sets(z: &Support, budget: &SparsityBudget, graph: &SimilarityGraph) -> bool {
    use std::collections::BTreeSet;
    let sets: Vec<BTreeSet<usize>> =
        (0..z.vertices()).map(|t| (0..z.dim()).filter(|&d| z.bits()[t * z.dim() + d]).collect()).collect();
    let local = sets.iter().all(|s| s.len() <= budget.local);
    let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
    let change: usize = graph.edges().iter().map(|&(s, t)| sets[s].symmetric_difference(&sets[t]).count()).sum();
    local && union.len() <= budget.global && change <= budget.change
}

pub fn random_support(rng: &mut impl Rng, vertices: usize, dim: usize, p: f64) -> Support {
    Support::from_bits(vertices, dim, (0..vertices * dim).map(|_| rng.random_bool(p)).collect()).unwrap()
}

/// Random PSD matrix `BᵀB` with `B` of rank up to `rank`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize) -> Matrix<f64> {
    gaussian_matrix(rng, rank, n).gram()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
