//! Outer-approximation cuts `η ≥ c(a) + ∇c(a)ᵀ(z − a)`.

use std::collections::HashMap;

use crate::error::Result;
use crate::oracle::evaluate;
use crate::problem::{QuadForm, Support};
use crate::scalar::Real;

use super::lp::{LpRow, VarLayout};

/// Linear under-estimator of the support cost anchored at a binary point.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub anchor: Support,
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl Cut {
    /// Evaluates the cost and gradient at `anchor`.
    pub fn at<T: Real>(qf: &QuadForm<T>, anchor: &Support) -> Result<Self> {
        let eval = evaluate(qf, anchor)?.with_gradient(qf)?;
        let gradient = eval.gradient.as_deref().unwrap_or_default().iter().map(|g| g.as_f64()).collect();
        Ok(Self { anchor: anchor.clone(), value: eval.cost.as_f64(), gradient })
    }

    /// `value + gradientᵀ(z − anchor)`.
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        self.value
            + self
                .gradient
                .iter()
                .zip(z.iter().zip(self.anchor.bits()))
                .map(|(&g, (&zi, &a))| g * (zi - if a { 1.0 } else { 0.0 }))
                .sum::<f64>()
    }

    /// `gᵀz − η ≤ gᵀa − value`, divided by `max(1, ‖g‖∞)` for conditioning.
    pub fn row(&self, layout: &VarLayout) -> LpRow {
        let scale = self.gradient.iter().fold(1.0f64, |m, g| m.max(g.abs()));
        let mut coeffs: Vec<(usize, f64)> =
            self.gradient.iter().enumerate().filter(|(_, &g)| g != 0.0).map(|(i, &g)| (layout.z(i), g / scale)).collect();
        coeffs.push((VarLayout::ETA, -1.0 / scale));
        let at_anchor: f64 =
            self.gradient.iter().zip(self.anchor.bits()).filter(|(_, &a)| a).map(|(&g, _)| g).sum();
        LpRow { coeffs, rhs: (at_anchor - self.value) / scale }
    }
}

/// Cuts deduplicated by anchor.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    anchors: HashMap<Support, usize>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `cut` unless its anchor is already present.
    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.anchors.contains_key(&cut.anchor) {
            return false;
        }
        self.anchors.insert(cut.anchor.clone(), self.cuts.len());
        self.cuts.push(cut);
        true
    }

    pub fn contains(&self, anchor: &Support) -> bool {
        self.anchors.contains_key(anchor)
    }

    /// The cut anchored at `anchor`, if any.
    pub fn get(&self, anchor: &Support) -> Option<&Cut> {
        self.anchors.get(anchor).map(|&i| &self.cuts[i])
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// Largest cut value at `z` (the pool's outer approximation).
    pub fn lower_envelope(&self, z: &[f64]) -> f64 {
        self.cuts.iter().map(|c| c.evaluate(z)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Seed cuts for the given warm starts, one per distinct anchor.
pub fn initial_cuts<T: Real>(qf: &QuadForm<T>, warm_starts: &[Support]) -> Result<Vec<Cut>> {
    let mut pool = CutPool::new();
    for ws in warm_starts {
        if !pool.contains(ws) {
            pool.insert(Cut::at(qf, ws)?);
        }
    }
    Ok(pool.cuts)
}

/// What the lazy-cut callback decided at an integral node.
#[derive(Debug, Clone, PartialEq)]
pub struct LazyOutcome {
    /// Cost at the integral point.
    pub cost: f64,
    /// New cut to add, when the surrogate underestimates the cost.
    pub cut: Option<Cut>,
}

/// Evaluates `c(z)` at an integral LP point and returns a cut when
/// `c(z) > η + tol` and `z` does not already anchor a cut.
pub fn lazy_cut<T: Real>(qf: &QuadForm<T>, pool: &CutPool, z: &Support, eta: f64, tol: f64) -> Result<LazyOutcome> {
    if let Some(known) = pool.get(z) {
        return Ok(LazyOutcome { cost: known.value, cut: None });
    }
    let cut = Cut::at(qf, z)?;
    let cost = cut.value;
    Ok(LazyOutcome { cost, cut: (cost > eta + tol).then_some(cut) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::SimilarityGraph;

    fn qf() -> QuadForm<f64> {
        QuadForm::from_parts(
            SimilarityGraph::chain(2).unwrap(),
            vec![Matrix::identity(2), Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()],
            vec![1.0, -2.0, 0.5, 3.0],
            20.0,
            0.7,
            0.4,
        )
        .unwrap()
    }

    #[test]
    fn empty_anchor_cut_has_closed_form_gradient() {
        let q = qf();
        let cuts = initial_cuts(&q, &[Support::empty(2, 2)]).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].value, 0.0);
        for (g, m) in cuts[0].gradient.iter().zip(q.mu()) {
            assert!((g + m * m / (2.0 * 0.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicate_warm_starts_collapse() {
        let z = Support::from_indices(2, 2, [0, 3]).unwrap();
        let cuts = initial_cuts(&qf(), &[z.clone(), z]).unwrap();
        assert_eq!(cuts.len(), 1);
    }

    #[test]
    fn cut_is_exact_at_anchor() {
        let z = Support::from_indices(2, 2, [1, 2]).unwrap();
        let cut = Cut::at(&qf(), &z).unwrap();
        assert_eq!(cut.evaluate(&z.as_f64()), cut.value);
    }

    #[test]
    fn lazy_cut_on_known_anchor_only_reports_cost() {
        let q = qf();
        let z = Support::from_indices(2, 2, [0]).unwrap();
        let mut pool = CutPool::new();
        pool.insert(Cut::at(&q, &z).unwrap());
        let out = lazy_cut(&q, &pool, &z, -1e9, 1e-6).unwrap();
        assert!(out.cut.is_none());
        assert_eq!(out.cost, pool.cuts()[0].value);
        let other = Support::from_indices(2, 2, [1]).unwrap();
        assert!(lazy_cut(&q, &pool, &other, -1e9, 1e-6).unwrap().cut.is_some());
        assert!(lazy_cut(&q, &pool, &other, 0.0, 1e-6).unwrap().cut.is_none());
    }
}
