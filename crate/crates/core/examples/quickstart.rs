//! Fits a three-vertex chain with a warm-started exact solve.

use std::time::Duration;

use sparsevary::master::{solve, SolveLimits};
use sparsevary::stepwise::stepwise_fit;
use sparsevary::{build_quadform, Matrix, ProblemInstance, SimilarityGraph, SparsityBudget, VertexBlock};

fn main() -> sparsevary::Result<()> {
    // Three vertices, four features; the response uses feature 0 everywhere
    // and switches its second feature from 1 to 2 at the last vertex.
    let blocks = (0..3)
        .map(|t| {
            let x = Matrix::from_fn(20, 4, |i, j| ((i * 7 + j * 3 + t) % 11) as f64 - 5.0);
            let second = if t < 2 { 1 } else { 2 };
            let y = (0..20).map(|i| 2.0 * x.row(i)[0] - x.row(i)[second]).collect();
            VertexBlock::new(x, y)
        })
        .collect::<sparsevary::Result<Vec<_>>>()?;
    let instance = ProblemInstance::new(SimilarityGraph::chain(3)?, blocks, 1.0, 1.0)?;
    let budget = SparsityBudget::new(2, 3, 2);

    let qf = build_quadform(&instance)?;
    let warm = stepwise_fit(&qf, &budget, 0)?;
    let result = solve(&qf, &budget, Some(&warm.support), &SolveLimits::default().with_time_limit(Duration::from_secs(10)))?;

    println!("status {}, gap {:.2e}", result.status.as_str(), result.relative_gap);
    for t in 0..3 {
        let features: Vec<usize> = result.incumbent_z.vertex_features(t).collect();
        println!("vertex {t}: features {features:?}, beta {:.3?}", &result.incumbent_beta[t * 4..(t + 1) * 4]);
    }
    Ok(())
}
