//! Outer-approximation branch-and-cut over the support polytope.
//!
//! The master problem minimizes `η` over binary `z` (with auxiliary `s`, `w`
//! encoding the global and change budgets) subject to cuts
//! `η ≥ c(a) + ∇c(a)ᵀ(z − a)`. A single search tree is used: whenever a node
//! LP lands on an integral `z` whose true cost exceeds `η`, a cut is added
//! and the node is re-solved. Because `s` and `w` are implied by an integral
//! `z`, only `z` is branched on.

mod cuts;
mod lp;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::time::{Duration, Instant};

use log::debug;
use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, SolveOutcome, Variable};

pub use cuts::{initial_cuts, lazy_cut, Cut, CutPool, LazyOutcome};
pub use lp::{solve_lp, LinearProgram, LpRow, LpSolution, LpStatus, MasterPolytope, VarLayout};

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::oracle::beta_star;
use crate::problem::{check_feasible, QuadForm, SparsityBudget, Support};
use crate::scalar::Real;

/// Distance from 0 or 1 below which an LP value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeSelection {
    #[default]
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveLimits {
    pub time_limit: Duration,
    pub gap_tol: f64,
    pub max_nodes: Option<usize>,
    /// Minimum excess of `c(z)` over `η` that triggers a lazy cut.
    pub cut_tol: f64,
    pub node_selection: NodeSelection,
    pub record_trace: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(300),
            gap_tol: 1e-6,
            max_nodes: None,
            cut_tol: 1e-6,
            node_selection: NodeSelection::BestBound,
            record_trace: false,
        }
    }
}

impl SolveLimits {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }

    pub fn with_max_nodes(mut self, nodes: usize) -> Self {
        self.max_nodes = Some(nodes);
        self
    }

    pub fn with_cut_tol(mut self, tol: f64) -> Self {
        self.cut_tol = tol;
        self
    }

    pub fn with_node_selection(mut self, selection: NodeSelection) -> Self {
        self.node_selection = selection;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

/// Bounds at one point of the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSample {
    pub elapsed_s: f64,
    pub nodes: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    pub incumbent_z: Support,
    pub incumbent_beta: Vec<T>,
    /// `c(incumbent_z)`; equals `upper_bound`.
    pub incumbent_cost: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub relative_gap: f64,
    pub node_count: usize,
    pub cut_count: usize,
    /// Incumbent improvements after the initial one.
    pub incumbent_updates: usize,
    /// Integral node points that already anchored a cut but still looked violated.
    pub anchor_revisits: usize,
    /// Node LPs re-solved from scratch after an incremental update failed.
    pub lp_rebuilds: usize,
    pub wall_time: Duration,
    pub trace: Vec<BoundSample>,
}

/// `(UB − LB) / max(1, |UB|)`.
pub fn relative_gap(lower: f64, upper: f64) -> f64 {
    ((upper - lower) / upper.abs().max(1.0)).max(0.0)
}

/// Most-fractional branching on `z` values; ties go to the lowest index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branching {
    pub index: usize,
    pub value: f64,
}

pub fn branch(z_values: &[f64]) -> Result<Branching> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in z_values.iter().enumerate() {
        if v.min(1.0 - v) <= INTEGRALITY_TOL {
            continue;
        }
        let dist = (v - 0.5).abs();
        if best.is_none_or(|(_, d)| dist < d - 1e-12) {
            best = Some((i, dist));
        }
    }
    best.map(|(index, _)| Branching { index, value: z_values[index] })
        .ok_or_else(|| Error::Contract("branch called on an integral point".into()))
}

/// `η ≥ −½‖μ‖²/λ_β`, valid because `(λI + M_zz)⁻¹ ⪯ λ⁻¹ I`.
pub fn eta_lower_bound<T: Real>(qf: &QuadForm<T>) -> f64 {
    -0.5 * norm_sq(qf.mu()).as_f64() / qf.lambda_beta().as_f64()
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    parent: u64,
    depth: usize,
    bound: f64,
    fixings: Vec<(usize, bool)>,
}

/// Heap key: lowest bound first, then deepest, then newest.
struct Ranked(Node);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(self.0.id.cmp(&other.0.id))
    }
}

enum OpenNodes {
    Heap(BinaryHeap<Ranked>),
    Stack(Vec<Node>),
}

impl OpenNodes {
    fn push(&mut self, node: Node) {
        match self {
            OpenNodes::Heap(h) => h.push(Ranked(node)),
            OpenNodes::Stack(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            OpenNodes::Heap(h) => h.pop().map(|r| r.0),
            OpenNodes::Stack(s) => s.pop(),
        }
    }

    fn min_bound(&self) -> Option<f64> {
        match self {
            OpenNodes::Heap(h) => h.peek().map(|r| r.0.bound),
            OpenNodes::Stack(s) => s.iter().map(|n| n.bound).min_by(f64::total_cmp),
        }
    }
}

const ROOT_PARENT: u64 = u64::MAX;
const CACHE_CAPACITY: usize = 32;

/// Incremental LP state shared by all nodes.
struct MasterLp {
    layout: VarLayout,
    eta_lower: f64,
    base: Vec<LpRow>,
    vars: Vec<Variable>,
    root: Solution,
    root_cuts: usize,
    /// Solutions of recently branched nodes with the number of pool cuts they contain.
    cache: HashMap<u64, (Solution, usize)>,
    order: VecDeque<u64>,
    /// Fresh re-solves after a failed incremental update.
    rebuilds: usize,
}

fn lp_result(outcome: std::result::Result<SolveOutcome, microlp::Error>) -> Result<Option<Solution>> {
    match outcome {
        Ok(o) => o.into_solution().map(Some).map_err(|_| Error::Lp("LP solve was interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

impl MasterLp {
    /// Solves the master from scratch with `fixings` imposed as bounds.
    fn solve_fresh(
        layout: &VarLayout,
        eta_lower: f64,
        base: &[LpRow],
        pool: &CutPool,
        fixings: &[(usize, bool)],
    ) -> Result<(Vec<Variable>, Option<Solution>)> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let mut vars = Vec::with_capacity(layout.total());
        vars.push(problem.add_var(1.0, (eta_lower, f64::INFINITY)));
        for _ in 1..layout.total() {
            vars.push(problem.add_var(0.0, (0.0, 1.0)));
        }
        let rows = base.iter().cloned().chain(pool.cuts().iter().map(|c| c.row(layout)));
        for row in rows {
            let expr: Vec<_> = row.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect();
            problem.add_constraint(expr, ComparisonOp::Le, row.rhs);
        }
        for &(flat, value) in fixings {
            let v = if value { 1.0 } else { 0.0 };
            problem.add_constraint([(vars[layout.z(flat)], 1.0)], ComparisonOp::Eq, v);
        }
        Ok((vars, lp_result(problem.solve())?))
    }

    fn build(poly: &MasterPolytope, pool: &CutPool) -> Result<Option<Self>> {
        let (vars, root) = Self::solve_fresh(&poly.layout, poly.eta_lower, &poly.rows, pool, &[])?;
        let Some(root) = root else {
            return Ok(None);
        };
        Ok(Some(Self {
            layout: poly.layout.clone(),
            eta_lower: poly.eta_lower,
            base: poly.rows.clone(),
            vars,
            root,
            root_cuts: pool.len(),
            cache: HashMap::new(),
            order: VecDeque::new(),
            rebuilds: 0,
        }))
    }

    /// Recovers from a numerical failure of an incremental update by
    /// re-solving the root and the node from scratch.
    fn rebuild(&mut self, fixings: &[(usize, bool)], pool: &CutPool, cause: &str) -> Result<Option<Solution>> {
        debug!("incremental LP update failed ({cause}); rebuilding");
        self.rebuilds += 1;
        let (_, root) = Self::solve_fresh(&self.layout, self.eta_lower, &self.base, pool, &[])?;
        self.root = root.ok_or_else(|| Error::Lp("master relaxation became infeasible".into()))?;
        self.root_cuts = pool.len();
        self.cache.clear();
        self.order.clear();
        Ok(Self::solve_fresh(&self.layout, self.eta_lower, &self.base, pool, fixings)?.1)
    }

    /// Adds the cuts `have..` to the LP of the node with `fixings`.
    fn extend(&mut self, sol: Solution, have: usize, pool: &CutPool, fixings: &[(usize, bool)]) -> Result<Solution> {
        match self.sync(sol, have, pool) {
            Err(Error::Lp(cause)) => self
                .rebuild(fixings, pool, &cause)?
                .ok_or_else(|| Error::Lp("adding a cut made the master infeasible".into())),
            other => other,
        }
    }

    fn sync(&self, mut sol: Solution, have: usize, pool: &CutPool) -> Result<Solution> {
        for cut in &pool.cuts()[have..] {
            let row = cut.row(&self.layout);
            let expr: Vec<_> = row.coeffs.iter().map(|&(j, a)| (self.vars[j], a)).collect();
            sol = lp_result(sol.add_constraint(expr, ComparisonOp::Le, row.rhs))?
                .ok_or_else(|| Error::Lp("adding a cut made the master infeasible".into()))?;
        }
        Ok(sol)
    }

    fn fix(&self, sol: Solution, (flat, value): (usize, bool)) -> Result<Option<Solution>> {
        lp_result(sol.fix_var(self.vars[self.layout.z(flat)], if value { 1.0 } else { 0.0 }))
    }

    /// LP of `node` with every pool cut, or `None` when infeasible.
    fn solve_node(&mut self, node: &Node, pool: &CutPool) -> Result<Option<Solution>> {
        match self.solve_node_incremental(node, pool) {
            Err(Error::Lp(cause)) => self.rebuild(&node.fixings, pool, &cause),
            other => other,
        }
    }

    fn solve_node_incremental(&mut self, node: &Node, pool: &CutPool) -> Result<Option<Solution>> {
        if let (Some(&last), Some((cached, have))) = (node.fixings.last(), self.cache.get(&node.parent)) {
            let sol = self.sync(cached.clone(), *have, pool)?;
            return self.fix(sol, last);
        }
        if self.root_cuts < pool.len() {
            self.root = self.sync(self.root.clone(), self.root_cuts, pool)?;
            self.root_cuts = pool.len();
        }
        let mut sol = self.root.clone();
        for &f in &node.fixings {
            match self.fix(sol, f)? {
                Some(s) => sol = s,
                None => return Ok(None),
            }
        }
        Ok(Some(sol))
    }

    fn remember(&mut self, id: u64, sol: Solution, cuts: usize) {
        if self.order.len() == CACHE_CAPACITY {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.order.push_back(id);
        self.cache.insert(id, (sol, cuts));
    }

    fn z_values(&self, sol: &Solution) -> Vec<f64> {
        (0..self.layout.z_count()).map(|i| sol.var_value(self.vars[self.layout.z(i)])).collect()
    }

    fn eta(&self, sol: &Solution) -> f64 {
        sol.var_value(self.vars[VarLayout::ETA])
    }
}

struct Incumbent {
    z: Support,
    cost: f64,
}

/// Solves `min c(z)` over supports satisfying `budget`.
///
/// The warm start, if any, must be feasible; it seeds the incumbent and one
/// cut. Without a warm start the empty support (cost 0) is used.
pub fn solve<T: Real>(
    qf: &QuadForm<T>,
    budget: &SparsityBudget,
    warm_start: Option<&Support>,
    limits: &SolveLimits,
) -> Result<SolveResult<T>> {
    let start = Instant::now();
    let graph = qf.graph();
    let (vertices, dim) = (qf.vertex_count(), qf.dim());
    let seed = match warm_start {
        Some(ws) => {
            if ws.vertices() != vertices || ws.dim() != dim {
                return Err(Error::Dimension("warm start has the wrong shape".into()));
            }
            if !check_feasible(ws, budget, graph) {
                return Err(Error::InfeasibleWarmStart);
            }
            ws.clone()
        }
        None => Support::empty(vertices, dim),
    };

    let mut pool = CutPool::new();
    for cut in initial_cuts(qf, std::slice::from_ref(&seed))? {
        pool.insert(cut);
    }
    let mut incumbent = Incumbent { cost: pool.cuts()[0].value, z: seed };
    let mut incumbent_updates = 0;
    let mut anchor_revisits = 0;
    let mut trace = Vec::new();

    let poly = MasterPolytope::new(graph, dim, budget, eta_lower_bound(qf));
    let finish = |status: SolveStatus,
                  incumbent: Incumbent,
                  lower: f64,
                  nodes: usize,
                  pool: &CutPool,
                  updates: usize,
                  (revisits, rebuilds): (usize, usize),
                  trace: Vec<BoundSample>|
     -> Result<SolveResult<T>> {
        let upper = incumbent.cost;
        let lower = lower.min(upper);
        Ok(SolveResult {
            status,
            incumbent_beta: beta_star(qf, &incumbent.z)?,
            incumbent_z: incumbent.z,
            incumbent_cost: upper,
            lower_bound: lower,
            upper_bound: upper,
            relative_gap: relative_gap(lower, upper),
            node_count: nodes,
            cut_count: pool.len(),
            incumbent_updates: updates,
            anchor_revisits: revisits,
            lp_rebuilds: rebuilds,
            wall_time: start.elapsed(),
            trace,
        })
    };

    let Some(mut master) = MasterLp::build(&poly, &pool)? else {
        return finish(SolveStatus::Infeasible, incumbent, f64::INFINITY, 0, &pool, 0, (0, 0), trace);
    };

    let mut open = match limits.node_selection {
        NodeSelection::BestBound => OpenNodes::Heap(BinaryHeap::new()),
        NodeSelection::DepthFirst => OpenNodes::Stack(Vec::new()),
    };
    open.push(Node { id: 0, parent: ROOT_PARENT, depth: 0, bound: poly.eta_lower, fixings: Vec::new() });
    let mut next_id = 1u64;
    let mut lower = poly.eta_lower;
    let mut nodes = 0usize;
    let prune_tol = |ub: f64| limits.gap_tol * ub.abs().max(1.0);
    let record = |trace: &mut Vec<BoundSample>, nodes: usize, lb: f64, ub: f64| {
        if limits.record_trace {
            let sample = BoundSample { elapsed_s: start.elapsed().as_secs_f64(), nodes, lower_bound: lb, upper_bound: ub };
            if trace.last().is_none_or(|l: &BoundSample| l.lower_bound != lb || l.upper_bound != ub) {
                trace.push(sample);
            }
        }
    };
    record(&mut trace, 0, lower, incumbent.cost);

    let mut status = SolveStatus::Optimal;
    let mut in_flight: Option<f64> = None;
    'search: while let Some(node) = open.pop() {
        if node.bound >= incumbent.cost - prune_tol(incumbent.cost) {
            if matches!(limits.node_selection, NodeSelection::BestBound) {
                // Every remaining node has a bound at least this large.
                in_flight = Some(node.bound);
                break;
            }
            continue;
        }
        if start.elapsed() >= limits.time_limit {
            status = SolveStatus::TimeLimit;
            in_flight = Some(node.bound);
            break;
        }
        if limits.max_nodes.is_some_and(|m| nodes >= m) {
            status = SolveStatus::NodeLimit;
            in_flight = Some(node.bound);
            break;
        }
        nodes += 1;
        let Some(mut sol) = master.solve_node(&node, &pool)? else {
            continue;
        };
        loop {
            let value = sol.objective();
            if value >= incumbent.cost - prune_tol(incumbent.cost) {
                break;
            }
            let zv = master.z_values(&sol);
            if let Ok(b) = branch(&zv) {
                let prefer_one = b.value >= 0.5;
                for v in [!prefer_one, prefer_one] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((b.index, v));
                    open.push(Node { id: next_id, parent: node.id, depth: node.depth + 1, bound: value, fixings });
                    next_id += 1;
                }
                master.remember(node.id, sol, pool.len());
                break;
            }
            let z = Support::from_bits(vertices, dim, zv.iter().map(|&v| v > 0.5).collect())?;
            let eta = master.eta(&sol);
            let known = pool.contains(&z);
            let outcome = lazy_cut(qf, &pool, &z, eta, limits.cut_tol)?;
            if outcome.cost < incumbent.cost - 1e-12 * incumbent.cost.abs().max(1.0) {
                if check_feasible(&z, budget, graph) {
                    debug!("incumbent {} -> {} at node {}", incumbent.cost, outcome.cost, nodes);
                    incumbent = Incumbent { z: z.clone(), cost: outcome.cost };
                    incumbent_updates += 1;
                    record(&mut trace, nodes, lower.max(open.min_bound().unwrap_or(value).min(value)), incumbent.cost);
                } else {
                    debug!("integral LP point violates the budgets after rounding; skipped");
                }
            }
            match outcome.cut {
                Some(cut) => {
                    pool.insert(cut);
                    let have = pool.len() - 1;
                    sol = master.extend(sol, have, &pool, &node.fixings)?;
                    if start.elapsed() >= limits.time_limit {
                        status = SolveStatus::TimeLimit;
                        in_flight = Some(value);
                        break 'search;
                    }
                }
                None => {
                    if known && outcome.cost > eta + limits.cut_tol {
                        anchor_revisits += 1;
                    }
                    break;
                }
            }
        }
        let frontier = open.min_bound().map_or(incumbent.cost, |b| b.min(incumbent.cost));
        if frontier > lower {
            lower = frontier;
            record(&mut trace, nodes, lower, incumbent.cost);
        }
        if relative_gap(lower, incumbent.cost) <= limits.gap_tol {
            break;
        }
    }

    let mut frontier = open.min_bound().unwrap_or(f64::INFINITY);
    if let Some(b) = in_flight {
        frontier = frontier.min(b);
    }
    lower = lower.max(frontier.min(incumbent.cost));
    if status != SolveStatus::Optimal && relative_gap(lower, incumbent.cost) <= limits.gap_tol {
        status = SolveStatus::Optimal;
    }
    record(&mut trace, nodes, lower.min(incumbent.cost), incumbent.cost);
    finish(status, incumbent, lower, nodes, &pool, incumbent_updates, (anchor_revisits, master.rebuilds), trace)
}
