//! Support cost oracle.
//!
//! For a binary support `z` the inner ridge problem has the closed form
//! `c(z) = −½ μ_zᵀ (λ_β I + M_zz)⁻¹ μ_z`, with minimizer
//! `β_z = (λ_β I + M_zz)⁻¹ μ_z` and zeros elsewhere. The original objective at
//! that minimizer is `const + 2 c(z)`.

use crate::error::{Error, Result};
use crate::linalg::{dot, BlockTridiagonalCholesky, Cholesky, Matrix};
use crate::problem::{QuadForm, Support};
use crate::scalar::Real;

/// How the restricted system is factored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorStrategy {
    /// Block tridiagonal when every edge joins consecutive vertices, dense otherwise.
    #[default]
    Auto,
    Dense,
    BlockTridiagonal,
}

#[derive(Debug, Clone)]
enum Factor<T> {
    Dense(Cholesky<T>),
    Blocks(BlockTridiagonalCholesky<T>),
}

impl<T: Real> Factor<T> {
    fn solve(&self, b: &[T]) -> Vec<T> {
        match self {
            Factor::Dense(c) => c.solve(b),
            Factor::Blocks(c) => c.solve(b),
        }
    }
}

/// Factorization of `λ_β I + M_zz` plus the restricted solution `v⁰`.
#[derive(Debug, Clone)]
pub struct FactorCache<T> {
    support: Support,
    indices: Vec<usize>,
    factor: Factor<T>,
    v0: Vec<T>,
}

impl<T: Real> FactorCache<T> {
    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Selected flat indices, sorted.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `(λ_β I + M_zz)⁻¹ μ_z`, ordered like [`Self::indices`].
    pub fn restricted_solution(&self) -> &[T] {
        &self.v0
    }

    /// Solves `(λ_β I + M_zz) x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.factor.solve(b)
    }
}

/// Cost at a support, the reusable factorization, and optionally the gradient.
#[derive(Debug, Clone)]
pub struct OracleEvaluation<T> {
    pub cost: T,
    pub gradient: Option<Vec<T>>,
    pub cache: FactorCache<T>,
}

impl<T: Real> OracleEvaluation<T> {
    pub fn support(&self) -> &Support {
        &self.cache.support
    }

    /// Fills in the gradient from the cached factorization.
    pub fn with_gradient(mut self, qf: &QuadForm<T>) -> Result<Self> {
        self.gradient = Some(eval_gradient(qf, &self.cache.support, &self.cache)?);
        Ok(self)
    }
}

fn check_shape<T: Real>(qf: &QuadForm<T>, z: &Support) -> Result<()> {
    if z.vertices() != qf.vertex_count() || z.dim() != qf.dim() {
        return Err(Error::Dimension(format!(
            "support is {}x{}, quadratic form is {}x{}",
            z.vertices(),
            z.dim(),
            qf.vertex_count(),
            qf.dim()
        )));
    }
    Ok(())
}

fn factor_dense<T: Real>(qf: &QuadForm<T>, indices: &[usize]) -> Result<Factor<T>> {
    Ok(Factor::Dense(Cholesky::factor(&qf.restricted_system(indices))?))
}

fn factor_blocks<T: Real>(qf: &QuadForm<T>, z: &Support) -> Result<Factor<T>> {
    if !qf.graph().is_chain() {
        return Err(Error::Contract("block tridiagonal factorization needs a chain graph".into()));
    }
    let vertices = qf.vertex_count();
    let feats: Vec<Vec<usize>> = (0..vertices).map(|t| z.vertex_features(t).collect()).collect();
    let lb = qf.lambda_beta();
    let ld = qf.lambda_delta();
    let diag: Vec<Matrix<T>> = feats
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let mut a = qf.gram(t).select(f, f);
            a.add_diagonal(lb + ld * T::lit(qf.graph().degree(t) as f64));
            a
        })
        .collect();
    let lower: Vec<Matrix<T>> = (0..vertices.saturating_sub(1))
        .map(|t| {
            let linked = ld != T::zero() && qf.graph().neighbors(t).binary_search(&(t + 1)).is_ok();
            Matrix::from_fn(feats[t + 1].len(), feats[t].len(), |i, j| {
                if linked && feats[t + 1][i] == feats[t][j] {
                    -ld
                } else {
                    T::zero()
                }
            })
        })
        .collect();
    Ok(Factor::Blocks(BlockTridiagonalCholesky::factor(diag, &lower)?))
}

/// Factors the restricted system at `z` and evaluates the cost.
pub fn evaluate_with<T: Real>(qf: &QuadForm<T>, z: &Support, strategy: FactorStrategy) -> Result<OracleEvaluation<T>> {
    check_shape(qf, z)?;
    let indices = z.indices();
    let use_blocks = match strategy {
        FactorStrategy::Auto => qf.graph().is_chain() && qf.vertex_count() > 1,
        FactorStrategy::Dense => false,
        FactorStrategy::BlockTridiagonal => true,
    };
    let factor = if use_blocks { factor_blocks(qf, z)? } else { factor_dense(qf, &indices)? };
    let mu_z: Vec<T> = indices.iter().map(|&i| qf.mu()[i]).collect();
    let v0 = factor.solve(&mu_z);
    let cost = -T::lit(0.5) * dot(&mu_z, &v0);
    Ok(OracleEvaluation { cost, gradient: None, cache: FactorCache { support: z.clone(), indices, factor, v0 } })
}

pub fn evaluate<T: Real>(qf: &QuadForm<T>, z: &Support) -> Result<OracleEvaluation<T>> {
    evaluate_with(qf, z, FactorStrategy::Auto)
}

/// `c(z)`.
pub fn eval_cost<T: Real>(qf: &QuadForm<T>, z: &Support) -> Result<T> {
    Ok(evaluate(qf, z)?.cost)
}

/// Gradient of the continuous extension of `c` at a binary `z`, reusing the
/// factorization in `cache`.
///
/// With `v⁰ = (λI + M_zz)⁻¹ μ_z` padded by zeros and `v² = M v⁰`:
/// `v¹ = v⁰` on `z`, `(μ − v²)/λ` off `z`; gradient `= ½ v¹ ⊙ (v² − μ)`.
pub fn eval_gradient<T: Real>(qf: &QuadForm<T>, z: &Support, cache: &FactorCache<T>) -> Result<Vec<T>> {
    check_shape(qf, z)?;
    if cache.support != *z {
        return Err(Error::CacheMismatch);
    }
    let n = qf.size();
    let mut v0 = vec![T::zero(); n];
    for (&i, &v) in cache.indices.iter().zip(&cache.v0) {
        v0[i] = v;
    }
    let v2 = qf.matvec(&v0);
    let mu = qf.mu();
    let inv_lambda = T::one() / qf.lambda_beta();
    let bits = z.bits();
    let half = T::lit(0.5);
    Ok((0..n)
        .map(|i| {
            let v1 = if bits[i] { v0[i] } else { (mu[i] - v2[i]) * inv_lambda };
            let v3 = v1 * v2[i];
            let v4 = v1 * mu[i];
            (v3 - v4) * half
        })
        .collect())
}

/// `β*(z)`: ridge solution restricted to `z`, exactly zero elsewhere.
pub fn beta_star<T: Real>(qf: &QuadForm<T>, z: &Support) -> Result<Vec<T>> {
    let eval = evaluate(qf, z)?;
    Ok(expand(qf.size(), &eval.cache.indices, &eval.cache.v0))
}

fn expand<T: Real>(n: usize, indices: &[usize], values: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (&i, &v) in indices.iter().zip(values) {
        out[i] = v;
    }
    out
}

/// Continuous extension `−½ μᵀ(λI + ZM)⁻¹ Z μ` at fractional `z ∈ [0,1]^{TD}`.
///
/// Evaluated as `−½ (Sμ)ᵀ(λI + SMS)⁻¹(Sμ)` with `S = diag(√z)` on the
/// positive entries, which is symmetric positive definite.
pub fn eval_cost_fractional<T: Real>(qf: &QuadForm<T>, z: &[T]) -> Result<T> {
    if z.len() != qf.size() {
        return Err(Error::Dimension(format!("z has length {}, expected {}", z.len(), qf.size())));
    }
    if z.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
        return Err(Error::Parameter("fractional support must lie in [0, 1]".into()));
    }
    let indices: Vec<usize> = (0..z.len()).filter(|&i| z[i] > T::zero()).collect();
    let roots: Vec<T> = indices.iter().map(|&i| z[i].sqrt()).collect();
    let mut a = Matrix::from_fn(indices.len(), indices.len(), |i, j| roots[i] * roots[j] * qf.entry(indices[i], indices[j]));
    a.add_diagonal(qf.lambda_beta());
    let rhs: Vec<T> = indices.iter().zip(&roots).map(|(&i, &r)| r * qf.mu()[i]).collect();
    let sol = Cholesky::factor(&a)?.solve(&rhs);
    Ok(-T::lit(0.5) * dot(&rhs, &sol))
}

/// `−½ μᵀ(λI + ZM)⁻¹ Z μ` for any real `z` where the system is nonsingular.
///
/// Agrees with [`eval_cost_fractional`] on `[0,1]^{TD}`; useful for central
/// differences at binary points. Dense, so meant for small instances.
pub fn eval_cost_extension<T: Real>(qf: &QuadForm<T>, z: &[T]) -> Result<T> {
    if z.len() != qf.size() {
        return Err(Error::Dimension(format!("z has length {}, expected {}", z.len(), qf.size())));
    }
    let mut k = Matrix::from_fn(z.len(), z.len(), |i, j| z[i] * qf.entry(i, j));
    k.add_diagonal(qf.lambda_beta());
    let zmu: Vec<T> = z.iter().zip(qf.mu()).map(|(&a, &b)| a * b).collect();
    let sol = crate::linalg::Lu::factor(&k)?.solve(&zmu);
    Ok(-T::lit(0.5) * dot(qf.mu(), &sol))
}

/// One-dimensional relaxation family `f_a(z) = −μ² zᵃ / (λ + m zᵃ)`.
pub fn relaxation_family_value<T: Real>(a: T, m: T, mu: T, lambda: T, z: T) -> T {
    let za = if z == T::zero() { T::zero() } else { z.powf(a) };
    -(mu * mu) * za / (lambda + m * za)
}

/// `−μ² z / (λ + m z²)`: the relaxation obtained by keeping `Z` on both sides
/// of the inverse. Not convex in general.
pub fn two_sided_relaxation_value<T: Real>(m: T, mu: T, lambda: T, z: T) -> T {
    -(mu * mu) * z / (lambda + m * z * z)
}

/// Pseudoinverse identities behind the exact relaxation.
pub mod identities {
    use super::*;
    use crate::linalg::Lu;

    /// Absolute entrywise tolerance of [`verify_penrose`].
    pub const PENROSE_TOL: f64 = 1e-8;

    /// True iff `B` is the Moore–Penrose pseudoinverse of `A`: `ABA = A`,
    /// `BAB = B`, and both `AB`, `BA` symmetric.
    pub fn verify_penrose<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> bool {
        if !a.is_square() || a.nrows() != b.nrows() || !b.is_square() {
            return false;
        }
        let tol = T::lit(PENROSE_TOL);
        let ab = a.matmul(b).expect("square shapes checked");
        let ba = b.matmul(a).expect("square shapes checked");
        let aba = ab.matmul(a).expect("square shapes checked");
        let bab = ba.matmul(b).expect("square shapes checked");
        aba.max_abs_diff(a) <= tol
            && bab.max_abs_diff(b) <= tol
            && ab.max_abs_diff(&ab.transpose()) <= tol
            && ba.max_abs_diff(&ba.transpose()) <= tol
    }

    /// `Z (M + λI) Z`.
    pub fn masked_system<T: Real>(m: &Matrix<T>, z: &[bool], lambda: T) -> Matrix<T> {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if z[i] && z[j] {
                m[(i, j)] + if i == j { lambda } else { T::zero() }
            } else {
                T::zero()
            }
        })
    }

    /// `(λI + ZMZ)⁻¹ − λ⁻¹(I − Z)`, the pseudoinverse of `Z(M + λI)Z`.
    pub fn pseudoinverse_candidate<T: Real>(m: &Matrix<T>, z: &[bool], lambda: T) -> Result<Matrix<T>> {
        let n = m.nrows();
        let mut k = Matrix::from_fn(n, n, |i, j| if z[i] && z[j] { m[(i, j)] } else { T::zero() });
        k.add_diagonal(lambda);
        let mut b = Cholesky::factor(&k)?.inverse();
        for i in 0..n {
            if !z[i] {
                b[(i, i)] -= T::one() / lambda;
            }
        }
        Ok(b)
    }

    /// `(λI + ZM)⁻¹ Z μ` via a general LU solve.
    pub fn one_sided_solution<T: Real>(m: &Matrix<T>, z: &[bool], lambda: T, mu: &[T]) -> Result<Vec<T>> {
        let n = m.nrows();
        let mut k = Matrix::from_fn(n, n, |i, j| if z[i] { m[(i, j)] } else { T::zero() });
        k.add_diagonal(lambda);
        let zmu: Vec<T> = mu.iter().zip(z).map(|(&v, &b)| if b { v } else { T::zero() }).collect();
        Ok(Lu::factor(&k)?.solve(&zmu))
    }

    /// `(λI + ZMZ)⁻¹ Z μ` via Cholesky.
    pub fn two_sided_solution<T: Real>(m: &Matrix<T>, z: &[bool], lambda: T, mu: &[T]) -> Result<Vec<T>> {
        let n = m.nrows();
        let mut k = Matrix::from_fn(n, n, |i, j| if z[i] && z[j] { m[(i, j)] } else { T::zero() });
        k.add_diagonal(lambda);
        let zmu: Vec<T> = mu.iter().zip(z).map(|(&v, &b)| if b { v } else { T::zero() }).collect();
        Ok(Cholesky::factor(&k)?.solve(&zmu))
    }

    /// Outcome of checking the exact relaxation on one instance.
    #[derive(Debug, Clone)]
    pub struct RelaxationCheck<T> {
        pub penrose_ok: bool,
        /// `(Z(M+λI)Z)† Z μ` using the certified candidate.
        pub via_pseudoinverse: Vec<T>,
        /// `(λI + ZM)⁻¹ Z μ`.
        pub via_inverse: Vec<T>,
    }

    impl<T: Real> RelaxationCheck<T> {
        pub fn max_abs_diff(&self) -> T {
            self.via_pseudoinverse
                .iter()
                .zip(&self.via_inverse)
                .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
        }
    }

    pub fn check_exact_relaxation<T: Real>(m: &Matrix<T>, z: &[bool], lambda: T, mu: &[T]) -> Result<RelaxationCheck<T>> {
        let a = masked_system(m, z, lambda);
        let b = pseudoinverse_candidate(m, z, lambda)?;
        let zmu: Vec<T> = mu.iter().zip(z).map(|(&v, &s)| if s { v } else { T::zero() }).collect();
        Ok(RelaxationCheck {
            penrose_ok: verify_penrose(&a, &b),
            via_pseudoinverse: b.matvec(&zmu),
            via_inverse: one_sided_solution(m, z, lambda, mu)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::identities::*;
    use super::*;
    use crate::problem::SimilarityGraph;

    fn scalar_qf(m: f64, mu: f64, lambda: f64) -> QuadForm<f64> {
        QuadForm::from_parts(
            SimilarityGraph::edgeless(1).unwrap(),
            vec![Matrix::from_rows(&[vec![m]]).unwrap()],
            vec![mu],
            0.0,
            lambda,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn empty_support_costs_nothing() {
        let qf = scalar_qf(19.0, 1.0, 1.0);
        assert_eq!(eval_cost(&qf, &Support::empty(1, 1)).unwrap(), 0.0);
        assert_eq!(beta_star(&qf, &Support::empty(1, 1)).unwrap(), vec![0.0]);
    }

    #[test]
    fn scalar_cost_and_gradient() {
        let qf = scalar_qf(19.0, 1.0, 1.0);
        let z = Support::full(1, 1);
        let eval = evaluate(&qf, &z).unwrap().with_gradient(&qf).unwrap();
        // -½ μ² / (λ + m)
        assert!((eval.cost + 0.025).abs() < 1e-15);
        // ½ d/dz [−μ² z / (λ + m z)] at z = 1 is −½ λ μ² / (λ + m)².
        assert!((eval.gradient.unwrap()[0] + 0.00125).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_empty_support() {
        let qf = QuadForm::from_parts(
            SimilarityGraph::chain(2).unwrap(),
            vec![Matrix::identity(2), Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap()],
            vec![1.0f64, -2.0, 0.5, 3.0],
            0.0,
            0.5,
            0.3,
        )
        .unwrap();
        let z = Support::empty(2, 2);
        let eval = evaluate(&qf, &z).unwrap();
        let g = eval_gradient(&qf, &z, &eval.cache).unwrap();
        for (gi, mi) in g.iter().zip(qf.mu()) {
            assert!((gi + mi * mi / (2.0 * 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_rejects_foreign_cache() {
        let qf = scalar_qf(19.0, 1.0, 1.0);
        let eval = evaluate(&qf, &Support::full(1, 1)).unwrap();
        assert!(matches!(eval_gradient(&qf, &Support::empty(1, 1), &eval.cache), Err(Error::CacheMismatch)));
    }

    #[test]
    fn ridge_on_identity_design() {
        let qf = QuadForm::from_parts(
            SimilarityGraph::edgeless(1).unwrap(),
            vec![Matrix::identity(2)],
            vec![1.0, 2.0],
            5.0,
            1.0,
            0.0,
        )
        .unwrap();
        let z = Support::from_indices(1, 2, [0]).unwrap();
        let beta: Vec<f64> = beta_star(&qf, &z).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-15);
        assert_eq!(beta[1], 0.0);
    }

    #[test]
    fn fractional_cost_matches_binary() {
        let qf = scalar_qf(19.0, 1.0, 1.0);
        assert!((eval_cost_fractional(&qf, &[1.0]).unwrap() + 0.025).abs() < 1e-15);
        assert_eq!(eval_cost_fractional(&qf, &[0.0]).unwrap(), 0.0);
        assert!(eval_cost_fractional(&qf, &[1.5]).is_err());
        // ½ f₂(z) for the scalar case.
        let half = eval_cost_fractional(&qf, &[0.5]).unwrap();
        assert!((half - 0.5 * relaxation_family_value(1.0, 19.0, 1.0, 1.0, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn relaxation_family_at_figure_parameters() {
        assert!((relaxation_family_value(1.0f64, 19.0, 1.0, 1.0, 1.0) + 0.05).abs() < 1e-15);
        assert_eq!(relaxation_family_value(0.3, 19.0, 1.0, 1.0, 0.0), 0.0);
        assert!((two_sided_relaxation_value(19.0f64, 1.0, 1.0, 1.0) + 0.05).abs() < 1e-15);
    }

    #[test]
    fn penrose_trivial_cases() {
        let i = Matrix::<f64>::identity(3);
        let o = Matrix::<f64>::zeros(3, 3);
        assert!(verify_penrose(&i, &i));
        assert!(verify_penrose(&o, &o));
        assert!(!verify_penrose(&i, &o));
    }

    #[test]
    fn candidate_at_empty_mask_is_zero() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let b = pseudoinverse_candidate(&m, &[false, false], 0.7).unwrap();
        assert!(b.max_abs() < 1e-15);
    }
}
