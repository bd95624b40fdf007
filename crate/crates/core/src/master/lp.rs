//! Master polytope and its linear relaxation.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::problem::{SimilarityGraph, SparsityBudget};

use super::cuts::Cut;

/// Sparse row `Σ coeffs · x ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Bounded LP `min cᵀx  s.t.  rows,  lower ≤ x ≤ upper`. Upper bounds may be
/// infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; `+∞` when infeasible, `−∞` when unbounded.
    pub value: f64,
    /// Optimal point; empty unless optimal.
    pub point: Vec<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - r.rhs)
            .fold(0.0f64, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi))
            .fold(0.0f64, f64::max);
        rows.max(bounds)
    }
}

/// Solves a snapshot LP from scratch.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();
    if lp.lower.len() != n || lp.upper.len() != n {
        return Err(Error::Dimension("bound vectors do not match the objective".into()));
    }
    if lp.lower.iter().zip(&lp.upper).any(|(lo, hi)| lo > hi) {
        return Err(Error::Contract("variable bounds are inconsistent".into()));
    }
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..n).map(|j| problem.add_var(lp.objective[j], (lp.lower[j], lp.upper[j]))).collect();
    for row in &lp.rows {
        let expr: Vec<_> = row.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect();
        problem.add_constraint(expr, ComparisonOp::Le, row.rhs);
    }
    match problem.solve() {
        Ok(outcome) => {
            let sol = outcome.into_solution().map_err(|_| Error::Lp("LP solve was interrupted".into()))?;
            Ok(LpSolution { status: LpStatus::Optimal, value: sol.objective(), point: vars.iter().map(|&v| sol.var_value(v)).collect() })
        }
        Err(microlp::Error::Infeasible) => Ok(LpSolution { status: LpStatus::Infeasible, value: f64::INFINITY, point: Vec::new() }),
        Err(microlp::Error::Unbounded) => {
            Ok(LpSolution { status: LpStatus::Unbounded, value: f64::NEG_INFINITY, point: Vec::new() })
        }
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

/// Variable layout: `η`, then `z` (`T·D`), `s` (`D`), `w` (`|E|·D`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarLayout {
    pub vertices: usize,
    pub dim: usize,
    pub edges: usize,
}

impl VarLayout {
    pub const ETA: usize = 0;

    pub fn z(&self, flat: usize) -> usize {
        1 + flat
    }

    pub fn s(&self, d: usize) -> usize {
        1 + self.vertices * self.dim + d
    }

    pub fn w(&self, edge: usize, d: usize) -> usize {
        1 + self.vertices * self.dim + self.dim + edge * self.dim + d
    }

    pub fn z_count(&self) -> usize {
        self.vertices * self.dim
    }

    pub fn total(&self) -> usize {
        1 + self.vertices * self.dim + self.dim + self.edges * self.dim
    }
}

/// Budget constraints on `(z, s, w)` plus the lower bound on `η`.
#[derive(Debug, Clone)]
pub struct MasterPolytope {
    pub layout: VarLayout,
    pub eta_lower: f64,
    pub rows: Vec<LpRow>,
}

impl MasterPolytope {
    pub fn new(graph: &SimilarityGraph, dim: usize, budget: &SparsityBudget, eta_lower: f64) -> Self {
        let layout = VarLayout { vertices: graph.vertex_count(), dim, edges: graph.edge_count() };
        let mut rows = Vec::new();
        for t in 0..layout.vertices {
            rows.push(LpRow { coeffs: (0..dim).map(|d| (layout.z(t * dim + d), 1.0)).collect(), rhs: budget.local as f64 });
        }
        for t in 0..layout.vertices {
            for d in 0..dim {
                rows.push(LpRow { coeffs: vec![(layout.z(t * dim + d), 1.0), (layout.s(d), -1.0)], rhs: 0.0 });
            }
        }
        rows.push(LpRow { coeffs: (0..dim).map(|d| (layout.s(d), 1.0)).collect(), rhs: budget.global as f64 });
        for (e, &(s, t)) in graph.edges().iter().enumerate() {
            for d in 0..dim {
                let (zs, zt, w) = (layout.z(s * dim + d), layout.z(t * dim + d), layout.w(e, d));
                rows.push(LpRow { coeffs: vec![(zt, 1.0), (zs, -1.0), (w, -1.0)], rhs: 0.0 });
                rows.push(LpRow { coeffs: vec![(zs, 1.0), (zt, -1.0), (w, -1.0)], rhs: 0.0 });
            }
        }
        if layout.edges > 0 {
            rows.push(LpRow {
                coeffs: (0..layout.edges).flat_map(|e| (0..dim).map(move |d| (e, d))).map(|(e, d)| (layout.w(e, d), 1.0)).collect(),
                rhs: budget.change as f64,
            });
        }
        Self { layout, eta_lower, rows }
    }

    /// Snapshot LP with the given cuts and `z` fixings.
    pub fn snapshot(&self, cuts: &[Cut], fixings: &[(usize, bool)]) -> LinearProgram {
        let n = self.layout.total();
        let mut objective = vec![0.0; n];
        objective[VarLayout::ETA] = 1.0;
        let mut lower = vec![0.0; n];
        let mut upper = vec![1.0; n];
        lower[VarLayout::ETA] = self.eta_lower;
        upper[VarLayout::ETA] = f64::INFINITY;
        for &(flat, value) in fixings {
            let v = if value { 1.0 } else { 0.0 };
            lower[self.layout.z(flat)] = v;
            upper[self.layout.z(flat)] = v;
        }
        let mut rows = self.rows.clone();
        rows.extend(cuts.iter().map(|c| c.row(&self.layout)));
        LinearProgram { objective, lower, upper, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_only_lp_sits_at_eta_bound() {
        let g = SimilarityGraph::chain(2).unwrap();
        let poly = MasterPolytope::new(&g, 2, &SparsityBudget::new(1, 2, 1), -3.5);
        let sol = solve_lp(&poly.snapshot(&[], &[])).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value + 3.5).abs() < 1e-12);
    }

    #[test]
    fn layout_is_contiguous() {
        let l = VarLayout { vertices: 3, dim: 2, edges: 2 };
        assert_eq!(l.z(0), 1);
        assert_eq!(l.s(0), 7);
        assert_eq!(l.w(0, 0), 9);
        assert_eq!(l.w(1, 1), l.total() - 1);
    }

    #[test]
    fn reports_infeasible() {
        let lp = LinearProgram {
            objective: vec![1.0],
            lower: vec![0.0],
            upper: vec![1.0],
            rows: vec![LpRow { coeffs: vec![(0, -1.0)], rhs: -2.0 }],
        };
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }
}
