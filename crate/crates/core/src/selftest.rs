//! Quick randomized consistency checks of the oracle, solver and heuristic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::master::{solve, SolveLimits};
use crate::oracle::identities::check_exact_relaxation;
use crate::oracle::{beta_star, eval_cost, eval_cost_fractional, evaluate, evaluate_with, FactorStrategy};
use crate::problem::{build_quadform, check_feasible, true_objective, ProblemInstance, SimilarityGraph, SparsityBudget, Support, VertexBlock};
use crate::stepwise::{removal_iteration_bound, stepwise_fit};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error or the reason for failure.
    pub detail: String,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn instance(rng: &mut ChaCha8Rng, graph: SimilarityGraph, dim: usize, samples: usize) -> Result<ProblemInstance<f64>> {
    let blocks = (0..graph.vertex_count())
        .map(|_| {
            let x = gaussian(rng, samples, dim);
            let y = (0..samples).map(|_| rng.sample(StandardNormal)).collect();
            VertexBlock::new(x, y)
        })
        .collect::<Result<_>>()?;
    let lb = rng.random_range(0.1..5.0);
    let ld = rng.random_range(0.0..5.0);
    ProblemInstance::new(graph, blocks, lb, ld)
}

fn random_support(rng: &mut ChaCha8Rng, vertices: usize, dim: usize) -> Result<Support> {
    Support::from_bits(vertices, dim, (0..vertices * dim).map(|_| rng.random_bool(0.4)).collect())
}

fn all_supports(vertices: usize, dim: usize) -> impl Iterator<Item = Support> {
    let n = vertices * dim;
    (0u32..1 << n).map(move |mask| Support::from_bits(vertices, dim, (0..n).map(|i| mask >> i & 1 == 1).collect()).expect("shape"))
}

fn verdict(name: &'static str, worst: f64, tol: f64) -> CheckOutcome {
    CheckOutcome { name, passed: worst <= tol, detail: format!("max error {worst:.3e} (tolerance {tol:.0e})") }
}

fn exactness(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let budget = SparsityBudget::new(2, 3, 2);
    let limits = SolveLimits::default().with_gap_tol(0.0).with_cut_tol(0.0);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let inst = instance(rng, SimilarityGraph::chain(2)?, 3, 6)?;
        let qf = build_quadform(&inst)?;
        let mut best = f64::INFINITY;
        for z in all_supports(2, 3).filter(|z| check_feasible(z, &budget, qf.graph())) {
            best = best.min(eval_cost(&qf, &z)?);
        }
        let res = solve(&qf, &budget, None, &limits)?;
        worst = worst.max((res.upper_bound - best).abs());
    }
    Ok(verdict("solver matches enumeration", worst, 1e-9))
}

fn relaxation_identity(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut penrose = true;
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let rank = rng.random_range(1..=n);
        let m = gaussian(rng, rank, n).gram();
        let z: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let mu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let check = check_exact_relaxation(&m, &z, rng.random_range(0.01..10.0), &mu)?;
        penrose &= check.penrose_ok;
        worst = worst.max(check.max_abs_diff());
    }
    let mut out = verdict("pseudoinverse relaxation identity", worst, 1e-8);
    if !penrose {
        out.passed = false;
        out.detail = "Penrose conditions failed".into();
    }
    Ok(out)
}

fn gradient(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let inst = instance(rng, SimilarityGraph::chain(3)?, 4, 8)?;
        let qf = build_quadform(&inst)?;
        let z = random_support(rng, 3, 4)?;
        let grad = evaluate(&qf, &z)?.with_gradient(&qf)?.gradient.unwrap_or_default();
        let base = z.as_f64();
        for (i, &g) in grad.iter().enumerate() {
            let (mut lo, mut hi) = (base.clone(), base.clone());
            // Stay inside [0, 1] with a one-sided step at the boundary.
            let fd = if base[i] == 0.0 {
                hi[i] = eps;
                (eval_cost_fractional(&qf, &hi)? - eval_cost_fractional(&qf, &base)?) / eps
            } else {
                lo[i] = 1.0 - eps;
                (eval_cost_fractional(&qf, &base)? - eval_cost_fractional(&qf, &lo)?) / eps
            };
            worst = worst.max((fd - g).abs() / g.abs().max(1.0));
        }
    }
    Ok(verdict("gradient matches finite differences", worst, 1e-4))
}

fn convexity(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let inst = instance(rng, SimilarityGraph::chain(3)?, 3, 6)?;
    let qf = build_quadform(&inst)?;
    let n = qf.size();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let gap = eval_cost_fractional(&qf, &mid)? - 0.5 * (eval_cost_fractional(&qf, &a)? + eval_cost_fractional(&qf, &b)?);
        worst = worst.max(gap);
    }
    Ok(verdict("relaxation is midpoint convex", worst, 1e-10))
}

fn objective_mapping(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let inst = instance(rng, SimilarityGraph::chain(2)?, 3, 5)?;
        let qf = build_quadform(&inst)?;
        for z in all_supports(2, 3) {
            let lhs = qf.const_term() + 2.0 * eval_cost(&qf, &z)?;
            let rhs = true_objective(&inst, &beta_star(&qf, &z)?);
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    Ok(verdict("cost maps to the original objective", worst, 1e-8))
}

fn chain_fast_path(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let inst = instance(rng, SimilarityGraph::chain(4)?, 5, 7)?;
        let qf = build_quadform(&inst)?;
        let z = random_support(rng, 4, 5)?;
        let a = evaluate_with(&qf, &z, FactorStrategy::Dense)?.cost;
        let b = evaluate_with(&qf, &z, FactorStrategy::BlockTridiagonal)?.cost;
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    Ok(verdict("chain factorization agrees with dense", worst, 1e-10))
}

fn stepwise(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let budget = SparsityBudget::new(2, 3, 1);
    for seed in 0..10 {
        let inst = instance(rng, SimilarityGraph::chain(5)?, 8, 12)?;
        let qf = build_quadform(&inst)?;
        let out = stepwise_fit(&qf, &budget, seed)?;
        if !check_feasible(&out.support, &budget, qf.graph()) {
            return Ok(CheckOutcome { name: "stepwise is feasible", passed: false, detail: format!("seed {seed} infeasible") });
        }
        if out.removal_iterations as f64 > removal_iteration_bound(5, 8, &budget) {
            return Ok(CheckOutcome { name: "stepwise is feasible", passed: false, detail: format!("seed {seed} exceeded the bound") });
        }
    }
    Ok(CheckOutcome { name: "stepwise is feasible", passed: true, detail: "10 runs feasible within the iteration bound".into() })
}

/// Runs every check. Errors inside a check count as failures.
pub fn run(seed: u64) -> Vec<CheckOutcome> {
    type Check = fn(&mut ChaCha8Rng) -> Result<CheckOutcome>;
    let checks: [(&'static str, Check); 7] = [
        ("solver matches enumeration", exactness),
        ("pseudoinverse relaxation identity", relaxation_identity),
        ("gradient matches finite differences", gradient),
        ("relaxation is midpoint convex", convexity),
        ("cost maps to the original objective", objective_mapping),
        ("chain factorization agrees with dense", chain_fast_path),
        ("stepwise is feasible", stepwise),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    checks
        .iter()
        .map(|(name, check)| {
            check(&mut rng).unwrap_or_else(|e| CheckOutcome { name, passed: false, detail: format!("error: {e}") })
        })
        .collect()
}
