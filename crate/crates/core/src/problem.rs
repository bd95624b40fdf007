//! Problem data: the similarity graph, per-vertex regression blocks,
//! sparsity budgets, supports, and the block-structured quadratic form.
//!
//! Coefficients and supports are flattened vertex-major: entry `(t, d)` lives
//! at index `t * D + d`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, Matrix};
use crate::scalar::Real;

/// Undirected simple graph over `T` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityGraph {
    vertex_count: usize,
    /// Normalized so that `s < t`, sorted, without duplicates.
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

impl SimilarityGraph {
    /// Builds a graph from an edge list. Duplicate edges (in either
    /// orientation) are merged; self-loops and out-of-range endpoints are
    /// rejected.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::Graph("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (s, t) in edges {
            if s == t {
                return Err(Error::Graph(format!("self-loop at vertex {s}")));
            }
            if s >= vertex_count || t >= vertex_count {
                return Err(Error::Graph(format!(
                    "edge ({s}, {t}) references a vertex outside 0..{vertex_count}"
                )));
            }
            set.insert((s.min(t), s.max(t)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut degrees = vec![0; vertex_count];
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(s, t) in &edges {
            degrees[s] += 1;
            degrees[t] += 1;
            adjacency[s].push(t);
            adjacency[t].push(s);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { vertex_count, edges, degrees, adjacency })
    }

    /// Path `0 - 1 - ... - (T-1)`.
    pub fn chain(vertex_count: usize) -> Result<Self> {
        Self::new(vertex_count, (1..vertex_count).map(|t| (t - 1, t)))
    }

    pub fn edgeless(vertex_count: usize) -> Result<Self> {
        Self::new(vertex_count, std::iter::empty())
    }

    pub fn complete(vertex_count: usize) -> Result<Self> {
        Self::new(vertex_count, (0..vertex_count).flat_map(|s| (s + 1..vertex_count).map(move |t| (s, t))))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, t: usize) -> usize {
        self.degrees[t]
    }

    /// Sorted neighbors of `t`.
    pub fn neighbors(&self, t: usize) -> &[usize] {
        &self.adjacency[t]
    }

    /// True when every edge joins consecutive vertices, so any restricted
    /// system is block tridiagonal in vertex order.
    pub fn is_chain(&self) -> bool {
        self.edges.iter().all(|&(s, t)| t == s + 1)
    }

    /// Connected components as sorted vertex lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.vertex_count];
        let mut out = Vec::new();
        for root in 0..self.vertex_count {
            if label[root] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![root];
            label[root] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for &u in &self.adjacency[v] {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        members.push(u);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Design matrix and response of one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexBlock<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
}

impl<T: Real> VertexBlock<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn samples(&self) -> usize {
        self.y.len()
    }
}

/// Regression data over a similarity graph, with the two ridge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance<T> {
    graph: SimilarityGraph,
    dim: usize,
    blocks: Vec<VertexBlock<T>>,
    lambda_beta: T,
    lambda_delta: T,
}

impl<T: Real> ProblemInstance<T> {
    pub fn new(
        graph: SimilarityGraph,
        blocks: Vec<VertexBlock<T>>,
        lambda_beta: T,
        lambda_delta: T,
    ) -> Result<Self> {
        if blocks.len() != graph.vertex_count() {
            return Err(Error::Dimension(format!(
                "graph has {} vertices but {} data blocks were given",
                graph.vertex_count(),
                blocks.len()
            )));
        }
        let dim = blocks[0].x.ncols();
        if dim == 0 {
            return Err(Error::Dimension("feature count must be positive".into()));
        }
        for (t, b) in blocks.iter().enumerate() {
            if b.x.ncols() != dim {
                return Err(Error::Dimension(format!("vertex {t} has {} features, expected {dim}", b.x.ncols())));
            }
            if b.samples() == 0 {
                return Err(Error::Dimension(format!("vertex {t} has no observations")));
            }
            if b.x.nrows() != b.y.len() {
                return Err(Error::Dimension(format!("vertex {t}: design and response lengths differ")));
            }
        }
        if !(lambda_beta > T::zero()) || !lambda_beta.is_finite() {
            return Err(Error::Parameter(format!("lambda_beta must be positive, got {lambda_beta}")));
        }
        if !(lambda_delta >= T::zero()) || !lambda_delta.is_finite() {
            return Err(Error::Parameter(format!("lambda_delta must be nonnegative, got {lambda_delta}")));
        }
        Ok(Self { graph, dim, blocks, lambda_beta, lambda_delta })
    }

    pub fn graph(&self) -> &SimilarityGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[VertexBlock<T>] {
        &self.blocks
    }

    pub fn block(&self, t: usize) -> &VertexBlock<T> {
        &self.blocks[t]
    }

    pub fn lambda_beta(&self) -> T {
        self.lambda_beta
    }

    pub fn lambda_delta(&self) -> T {
        self.lambda_delta
    }

    pub fn total_samples(&self) -> usize {
        self.blocks.iter().map(VertexBlock::samples).sum()
    }

    /// Same data with different ridge weights.
    pub fn with_lambdas(&self, lambda_beta: T, lambda_delta: T) -> Result<Self> {
        Self::new(self.graph.clone(), self.blocks.clone(), lambda_beta, lambda_delta)
    }
}

/// Local (`K_L`), global (`K_G`) and change (`K_C`) sparsity budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SparsityBudget {
    pub local: usize,
    pub global: usize,
    pub change: usize,
}

impl SparsityBudget {
    pub fn new(local: usize, global: usize, change: usize) -> Self {
        Self { local, global, change }
    }

    /// Checks `1 <= K_L <= K_G <= D` and `K_C <= 2 K_L T`.
    pub fn validate(&self, dim: usize, vertex_count: usize) -> Result<()> {
        if self.local == 0 {
            return Err(Error::Parameter("local budget must be positive".into()));
        }
        if self.local > self.global {
            return Err(Error::Parameter(format!(
                "local budget {} exceeds global budget {}",
                self.local, self.global
            )));
        }
        if self.global > dim {
            return Err(Error::Parameter(format!("global budget {} exceeds feature count {dim}", self.global)));
        }
        if self.change > 2 * self.local * vertex_count {
            return Err(Error::Parameter(format!(
                "change budget {} exceeds 2 * K_L * T = {}",
                self.change,
                2 * self.local * vertex_count
            )));
        }
        Ok(())
    }
}

/// Binary selection over the `T x D` coefficient grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Support {
    vertices: usize,
    dim: usize,
    bits: Vec<bool>,
}

impl Support {
    pub fn empty(vertices: usize, dim: usize) -> Self {
        Self { vertices, dim, bits: vec![false; vertices * dim] }
    }

    pub fn full(vertices: usize, dim: usize) -> Self {
        Self { vertices, dim, bits: vec![true; vertices * dim] }
    }

    pub fn from_bits(vertices: usize, dim: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != vertices * dim {
            return Err(Error::Dimension(format!(
                "support of length {} does not match {vertices}x{dim}",
                bits.len()
            )));
        }
        Ok(Self { vertices, dim, bits })
    }

    /// Support from flat indices `t * D + d`.
    pub fn from_indices(vertices: usize, dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::empty(vertices, dim);
        for i in indices {
            if i >= s.bits.len() {
                return Err(Error::Dimension(format!("index {i} outside support of length {}", s.bits.len())));
            }
            s.bits[i] = true;
        }
        Ok(s)
    }

    /// Support from per-vertex feature lists.
    pub fn from_vertex_sets<I, J>(dim: usize, sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = usize>,
    {
        let sets: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let vertices = sets.len();
        let mut s = Self::empty(vertices, dim);
        for (t, feats) in sets.iter().enumerate() {
            for &d in feats {
                if d >= dim {
                    return Err(Error::Dimension(format!("feature {d} outside 0..{dim}")));
                }
                s.bits[t * dim + d] = true;
            }
        }
        Ok(s)
    }

    /// Support of a coefficient vector (exact nonzeros).
    pub fn of_coefficients<T: Real>(vertices: usize, dim: usize, beta: &[T]) -> Result<Self> {
        Self::from_bits(vertices, dim, beta.iter().map(|b| *b != T::zero()).collect())
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, t: usize, d: usize) -> bool {
        self.bits[t * self.dim + d]
    }

    pub fn set(&mut self, t: usize, d: usize, on: bool) {
        self.bits[t * self.dim + d] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Selected flat indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    pub fn vertex_features(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.bits[t * self.dim..(t + 1) * self.dim].iter().enumerate().filter_map(|(d, &b)| b.then_some(d))
    }

    pub fn vertex_count(&self, t: usize) -> usize {
        self.vertex_features(t).count()
    }

    /// Features selected at any vertex (column-wise OR).
    pub fn global_features(&self) -> Vec<usize> {
        (0..self.dim).filter(|&d| (0..self.vertices).any(|t| self.get(t, d))).collect()
    }

    /// Total support symmetric difference summed over graph edges.
    pub fn change_count(&self, graph: &SimilarityGraph) -> usize {
        graph
            .edges()
            .iter()
            .map(|&(s, t)| (0..self.dim).filter(|&d| self.get(s, d) != self.get(t, d)).count())
            .sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// True iff `z` satisfies the local, global and change budgets on `graph`.
pub fn check_feasible(z: &Support, budget: &SparsityBudget, graph: &SimilarityGraph) -> bool {
    if z.vertices() != graph.vertex_count() {
        return false;
    }
    (0..z.vertices()).all(|t| z.vertex_count(t) <= budget.local)
        && z.global_features().len() <= budget.global
        && z.change_count(graph) <= budget.change
}

/// Implicit `M = blockdiag(XᵗᵀXᵗ) + λ_δ (L ⊗ I_D)`, linear term `μ` and
/// constant `Σ‖yᵗ‖²`. The ridge weight `λ_β` is stored alongside but is not
/// part of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm<T> {
    graph: SimilarityGraph,
    dim: usize,
    gram: Vec<Matrix<T>>,
    mu: Vec<T>,
    const_term: T,
    lambda_beta: T,
    lambda_delta: T,
}

impl<T: Real> QuadForm<T> {
    /// Assembles a quadratic form from precomputed parts. Each Gram block
    /// must be symmetric `D x D`.
    pub fn from_parts(
        graph: SimilarityGraph,
        gram: Vec<Matrix<T>>,
        mu: Vec<T>,
        const_term: T,
        lambda_beta: T,
        lambda_delta: T,
    ) -> Result<Self> {
        let vertices = graph.vertex_count();
        if gram.len() != vertices {
            return Err(Error::Dimension(format!("{} Gram blocks for {vertices} vertices", gram.len())));
        }
        let dim = gram[0].nrows();
        if gram.iter().any(|g| g.nrows() != dim || g.ncols() != dim) {
            return Err(Error::Dimension("Gram blocks must all be D x D".into()));
        }
        if mu.len() != vertices * dim {
            return Err(Error::Dimension(format!("mu has length {}, expected {}", mu.len(), vertices * dim)));
        }
        if !(lambda_beta > T::zero()) {
            return Err(Error::Parameter("lambda_beta must be positive".into()));
        }
        if !(lambda_delta >= T::zero()) {
            return Err(Error::Parameter("lambda_delta must be nonnegative".into()));
        }
        Ok(Self { graph, dim, gram, mu, const_term, lambda_beta, lambda_delta })
    }

    pub fn graph(&self) -> &SimilarityGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `T * D`.
    pub fn size(&self) -> usize {
        self.gram.len() * self.dim
    }

    pub fn gram(&self, t: usize) -> &Matrix<T> {
        &self.gram[t]
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn const_term(&self) -> T {
        self.const_term
    }

    pub fn lambda_beta(&self) -> T {
        self.lambda_beta
    }

    pub fn lambda_delta(&self) -> T {
        self.lambda_delta
    }

    /// Entry `M[i, j]` for flat indices.
    pub fn entry(&self, i: usize, j: usize) -> T {
        let (t, d) = (i / self.dim, i % self.dim);
        let (s, e) = (j / self.dim, j % self.dim);
        if t == s {
            let mut v = self.gram[t][(d, e)];
            if d == e {
                v += self.lambda_delta * T::lit(self.graph.degree(t) as f64);
            }
            v
        } else if d == e && self.lambda_delta != T::zero() && self.graph.neighbors(t).binary_search(&s).is_ok() {
            -self.lambda_delta
        } else {
            T::zero()
        }
    }

    /// `M v` without materializing `M`.
    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.size(), "quadform matvec dimension mismatch");
        let dim = self.dim;
        let mut out = vec![T::zero(); v.len()];
        for (t, g) in self.gram.iter().enumerate() {
            let vt = &v[t * dim..(t + 1) * dim];
            if vt.iter().all(|x| *x == T::zero()) {
                continue;
            }
            let deg = self.lambda_delta * T::lit(self.graph.degree(t) as f64);
            for (d, o) in out[t * dim..(t + 1) * dim].iter_mut().enumerate() {
                *o += dot(g.row(d), vt) + deg * vt[d];
            }
        }
        if self.lambda_delta != T::zero() {
            for &(s, t) in self.graph.edges() {
                for d in 0..dim {
                    let (vs, vt) = (v[s * dim + d], v[t * dim + d]);
                    out[s * dim + d] -= self.lambda_delta * vt;
                    out[t * dim + d] -= self.lambda_delta * vs;
                }
            }
        }
        out
    }

    /// Dense `M` (tests and small diagnostics only).
    pub fn dense_m(&self) -> Matrix<T> {
        let n = self.size();
        Matrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// `λ_β I + M_{idx, idx}` for sorted flat indices.
    pub fn restricted_system(&self, indices: &[usize]) -> Matrix<T> {
        let mut a = Matrix::from_fn(indices.len(), indices.len(), |i, j| self.entry(indices[i], indices[j]));
        a.add_diagonal(self.lambda_beta);
        a
    }

    /// `const + βᵀ(M + λ_β I)β − 2μᵀβ`, equal to the original objective.
    pub fn quadratic_value(&self, beta: &[T]) -> T {
        let mb = self.matvec(beta);
        self.const_term + dot(beta, &mb) + self.lambda_beta * norm_sq(beta) - T::lit(2.0) * dot(&self.mu, beta)
    }
}

/// Builds the quadratic form of an instance.
pub fn build_quadform<T: Real>(instance: &ProblemInstance<T>) -> Result<QuadForm<T>> {
    let dim = instance.dim();
    let mut gram = Vec::with_capacity(instance.vertex_count());
    let mut mu = Vec::with_capacity(instance.vertex_count() * dim);
    let mut const_term = T::zero();
    for block in instance.blocks() {
        if block.x.ncols() != dim || block.x.nrows() != block.y.len() {
            return Err(Error::Dimension("inconsistent vertex block".into()));
        }
        gram.push(block.x.gram());
        mu.extend(block.x.tr_matvec(&block.y));
        const_term += norm_sq(&block.y);
    }
    QuadForm::from_parts(
        instance.graph().clone(),
        gram,
        mu,
        const_term,
        instance.lambda_beta(),
        instance.lambda_delta(),
    )
}

/// Original objective: squared loss plus ridge plus edge-difference penalty.
pub fn true_objective<T: Real>(instance: &ProblemInstance<T>, beta: &[T]) -> T {
    let dim = instance.dim();
    assert_eq!(beta.len(), instance.vertex_count() * dim, "beta has wrong length");
    let mut loss = T::zero();
    for (t, block) in instance.blocks().iter().enumerate() {
        let fitted = block.x.matvec(&beta[t * dim..(t + 1) * dim]);
        loss += block.y.iter().zip(&fitted).map(|(&y, &f)| (y - f) * (y - f)).sum::<T>();
    }
    let ridge = instance.lambda_beta() * norm_sq(beta);
    let fusion: T = instance
        .graph()
        .edges()
        .iter()
        .map(|&(s, t)| (0..dim).map(|d| (beta[t * dim + d] - beta[s * dim + d]).powi(2)).sum::<T>())
        .sum();
    loss + ridge + instance.lambda_delta() * fusion
}
