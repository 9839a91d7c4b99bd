//! Branch-and-bound over binary variables with convex QP relaxations, plus an
//! exhaustive enumerator used as a reference on small instances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::active_set::{self, ActiveSetOptions};
use crate::presolve::{self, Propagator};
use crate::qp::{QpError, QpStatus, QuadraticProgram};
use crate::solver::{self, QpMethod, QpOptions, AUTO_IPM_THRESHOLD};

/// A convex QP where the listed variables must take values in {0, 1}.
#[derive(Debug, Clone)]
pub struct MiqpProblem {
    pub qp: QuadraticProgram,
    pub binaries: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MiqpOptions {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Threads used for node evaluation. Results do not depend on this.
    pub workers: usize,
    /// Nodes evaluated per round.
    pub batch: usize,
    /// Bound propagation, probing and big-M tightening before the search.
    pub presolve: bool,
    /// Known feasible point used as the starting incumbent.
    pub incumbent: Option<Vec<f64>>,
    /// Keep a record of every processed node in the result.
    pub record_nodes: bool,
}

impl Default for MiqpOptions {
    fn default() -> Self {
        MiqpOptions {
            gap_tol: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
            workers: 1,
            batch: 1,
            presolve: true,
            incumbent: None,
            record_nodes: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiqpStatus {
    Optimal,
    /// Stopped by the time limit with the gap above tolerance.
    GapLimit,
    NodeLimit,
    Infeasible,
}

impl MiqpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            MiqpStatus::Optimal => "optimal",
            MiqpStatus::GapLimit => "gap-limit",
            MiqpStatus::NodeLimit => "node-limit",
            MiqpStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Branched,
    Integral,
    /// Solved, with a bound no better than the incumbent.
    Fathomed,
    /// Discarded before solving.
    Pruned,
    Infeasible,
    Unsolved,
}

impl NodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeStatus::Branched => "branched",
            NodeStatus::Integral => "integral",
            NodeStatus::Fathomed => "fathomed",
            NodeStatus::Pruned => "pruned",
            NodeStatus::Infeasible => "infeasible",
            NodeStatus::Unsolved => "unsolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub depth: usize,
    /// Relaxation objective, or the inherited bound for nodes pruned unsolved.
    pub bound: f64,
    pub status: NodeStatus,
    /// Branching decisions leading to the node.
    pub fixings: Vec<(usize, f64)>,
    /// Incumbent objective after the node was processed.
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct MiqpResult {
    pub status: MiqpStatus,
    /// Empty when no feasible point was found.
    pub x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub root_bound: f64,
    pub presolve_fixed: usize,
    pub elapsed: Duration,
    pub node_log: Vec<NodeRecord>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MiqpError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("variable {0} is declared binary but its bounds exclude 0 or 1 entirely")]
    NotBinary(usize),
    #[error("enumeration supports at most {cap} binaries, got {count}")]
    TooManyBinaries { count: usize, cap: usize },
}

pub const ENUMERATION_CAP: usize = 20;

fn gap_of(inc: f64, bound: f64) -> f64 {
    if !inc.is_finite() {
        return f64::INFINITY;
    }
    ((inc - bound) / inc.abs().max(1.0)).max(0.0)
}

fn prepare(p: &MiqpProblem) -> Result<QuadraticProgram, MiqpError> {
    p.qp.validate()?;
    let mut qp = p.qp.clone();
    for &b in &p.binaries {
        if b >= qp.n() || qp.lb[b] > 1.0 || qp.ub[b] < 0.0 {
            return Err(MiqpError::NotBinary(b));
        }
        qp.lb[b] = if qp.lb[b] > 0.0 { 1.0 } else { 0.0 };
        qp.ub[b] = if qp.ub[b] < 1.0 { 0.0 } else { 1.0 };
    }
    Ok(qp)
}

fn relaxation_opts() -> QpOptions {
    QpOptions { tol: 1e-9, max_iter: 20_000, method: QpMethod::Auto, trust_convexity: true }
}

fn qp_size(qp: &QuadraticProgram) -> usize {
    qp.n() + qp.a_eq.n_rows() + qp.g_in.n_rows()
}

/// Relaxation solve: fast interior point on large programs, exact otherwise.
fn solve_relaxation(qp: &QuadraticProgram) -> (QpStatus, Vec<f64>, f64) {
    let sol = if qp_size(qp) > AUTO_IPM_THRESHOLD {
        let s = solver::solve_ipm(qp, 1e-9);
        if s.status == QpStatus::Optimal || s.status == QpStatus::Infeasible {
            s
        } else {
            active_set::solve(qp, &ActiveSetOptions { tol: 1e-8, max_iter: 20_000 }, None)
        }
    } else {
        active_set::solve(qp, &ActiveSetOptions { tol: 1e-9, max_iter: 20_000 }, None)
    };
    (sol.status, sol.x, sol.objective)
}

/// Exact solve with every binary fixed.
fn solve_leaf(qp: &QuadraticProgram) -> Option<(Vec<f64>, f64)> {
    let sol = solver::solve_unchecked(qp, &relaxation_opts(), None);
    let ok = sol.status == QpStatus::Optimal
        || (sol.status == QpStatus::MaxIter && qp.max_violation(&sol.x) <= 1e-7);
    ok.then(|| {
        let obj = qp.objective(&sol.x);
        (sol.x, obj)
    })
}

struct Ctx<'a> {
    work: &'a QuadraticProgram,
    prop: &'a Propagator<'a>,
    binaries: &'a [usize],
    root_lb: &'a [f64],
    root_ub: &'a [f64],
    /// rows (inequality index or equality index + offset flag) per binary
    bin_rows: Vec<Vec<(bool, usize, f64)>>,
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    fixings: Vec<(usize, f64)>,
}

struct HeapItem(Node);

impl PartialEq for HeapItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapItem {
    // max-heap: reverse so the smallest (bound, id) pops first
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.bound.total_cmp(&self.0.bound).then(o.0.id.cmp(&self.0.id))
    }
}

enum Outcome {
    Infeasible,
    Unsolved,
    Solved {
        obj: f64,
        branch: Option<(usize, f64)>,
        leaf: Option<(Vec<f64>, f64)>,
    },
}

impl<'a> Ctx<'a> {
    fn new(work: &'a QuadraticProgram, prop: &'a Propagator<'a>, binaries: &'a [usize], lb: &'a [f64], ub: &'a [f64]) -> Self {
        let mut bin_rows = vec![Vec::new(); binaries.len()];
        let mut pos = vec![usize::MAX; work.n()];
        for (k, &b) in binaries.iter().enumerate() {
            pos[b] = k;
        }
        for i in 0..work.g_in.n_rows() {
            let (c, v) = work.g_in.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if pos[j] != usize::MAX {
                    bin_rows[pos[j]].push((false, i, a));
                }
            }
        }
        for i in 0..work.a_eq.n_rows() {
            let (c, v) = work.a_eq.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if pos[j] != usize::MAX {
                    bin_rows[pos[j]].push((true, i, a));
                }
            }
        }
        Ctx { work, prop, binaries, root_lb: lb, root_ub: ub, bin_rows }
    }

    fn node_qp(&self, fixings: &[(usize, f64)]) -> Option<QuadraticProgram> {
        let mut lb = self.root_lb.to_vec();
        let mut ub = self.root_ub.to_vec();
        let mut vars = Vec::with_capacity(fixings.len());
        for &(b, v) in fixings {
            if v < lb[b] || v > ub[b] {
                return None;
            }
            lb[b] = v;
            ub[b] = v;
            vars.push(b);
        }
        if !vars.is_empty() {
            self.prop.propagate_from(&mut lb, &mut ub, Some(&vars)).ok()?;
        }
        let mut qp = self.work.clone();
        for &b in self.binaries {
            qp.lb[b] = lb[b];
            qp.ub[b] = ub[b];
        }
        Some(qp)
    }

    /// Interval of values the binary can take with every other variable held at x.
    fn binary_interval(&self, qp: &QuadraticProgram, k: usize, x: &[f64]) -> (f64, f64) {
        let b = self.binaries[k];
        let (mut lo, mut hi) = (qp.lb[b], qp.ub[b]);
        for &(eq, i, a) in &self.bin_rows[k] {
            let (rows, rhs) = if eq { (&qp.a_eq, qp.b_eq[i]) } else { (&qp.g_in, qp.h_in[i]) };
            let rest = rows.row_dot(i, x) - a * x[b];
            let lim = (rhs - rest) / a;
            let slack = 1e-9 * (1.0 + rhs.abs() + rest.abs()) / a.abs();
            if eq {
                lo = lo.max(lim - slack);
                hi = hi.min(lim + slack);
            } else if a > 0.0 {
                hi = hi.min(lim + slack);
            } else {
                lo = lo.max(lim - slack);
            }
        }
        (lo, hi)
    }

    fn evaluate(&self, node: &Node) -> Outcome {
        let Some(mut qp) = self.node_qp(&node.fixings) else {
            return Outcome::Infeasible;
        };
        let (status, x, obj) = solve_relaxation(&qp);
        match status {
            QpStatus::Infeasible => return Outcome::Infeasible,
            QpStatus::Optimal => {}
            _ => return Outcome::Unsolved,
        }
        // most fractional binary measured on its admissible interval
        let mut best: Option<(f64, usize, f64)> = None;
        let mut values = Vec::with_capacity(self.binaries.len());
        for (k, &b) in self.binaries.iter().enumerate() {
            if qp.lb[b] == qp.ub[b] {
                values.push(qp.lb[b]);
                continue;
            }
            let (lo, hi) = self.binary_interval(&qp, k, &x);
            let has0 = lo <= 1e-9;
            let has1 = hi >= 1.0 - 1e-9;
            if has0 || has1 {
                let v = if has0 && has1 { if x[b] >= 0.5 { 1.0 } else { 0.0 } } else if has0 { 0.0 } else { 1.0 };
                values.push(v);
                continue;
            }
            values.push(f64::NAN);
            let d0 = lo.max(0.0);
            let d1 = (1.0 - hi).max(0.0);
            let frac = d0.min(d1);
            let prefer = if d1 < d0 { 1.0 } else { 0.0 };
            if best.map_or(true, |(f, _, _)| frac > f) {
                best = Some((frac, b, prefer));
            }
        }
        if let Some((_, b, prefer)) = best {
            return Outcome::Solved { obj, branch: Some((b, prefer)), leaf: None };
        }
        let mut xr = x.clone();
        for (k, &b) in self.binaries.iter().enumerate() {
            xr[b] = values[k];
            qp.lb[b] = values[k];
            qp.ub[b] = values[k];
        }
        if qp.max_violation(&xr) > 1e-7 * (1.0 + crate::sparse::norm_inf(&xr)) {
            // rows couple several binaries: branch on the least integral value
            let b = self
                .binaries
                .iter()
                .copied()
                .filter(|&b| self.root_lb[b] != self.root_ub[b])
                .filter(|b| !node.fixings.iter().any(|f| f.0 == *b))
                .max_by(|&a, &c| {
                    let fa = x[a].min(1.0 - x[a]);
                    let fc = x[c].min(1.0 - x[c]);
                    fa.total_cmp(&fc).then(c.cmp(&a))
                });
            return match b {
                Some(b) => Outcome::Solved { obj, branch: Some((b, x[b].round())), leaf: None },
                None => Outcome::Solved { obj, branch: None, leaf: solve_leaf(&qp) },
            };
        }
        Outcome::Solved { obj, branch: None, leaf: solve_leaf(&qp) }
    }
}

/// Branch-and-bound without a search log.
pub fn solve_miqp(p: &MiqpProblem, opts: &MiqpOptions) -> Result<MiqpResult, MiqpError> {
    solve_miqp_logged(p, opts, None)
}

/// Branch-and-bound; writes one line per node to `log` when given.
pub fn solve_miqp_logged(p: &MiqpProblem, opts: &MiqpOptions, mut log: Option<&mut dyn Write>) -> Result<MiqpResult, MiqpError> {
    let start = Instant::now();
    let base = prepare(p)?;
    let mut work = base.clone();
    let infeasible = |elapsed| MiqpResult {
        status: MiqpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        gap: f64::INFINITY,
        nodes: 0,
        root_bound: f64::INFINITY,
        presolve_fixed: 0,
        elapsed,
        node_log: Vec::new(),
    };
    let (lb, ub, presolve_fixed) = if opts.presolve {
        match presolve::presolve(&work, &p.binaries, true) {
            Ok(r) => {
                presolve::tighten_big_m(&mut work, &p.binaries, &r.lb, &r.ub);
                (r.lb, r.ub, r.fixed.len())
            }
            Err(_) => return Ok(infeasible(start.elapsed())),
        }
    } else {
        let (mut l, mut u) = presolve::singleton_bounds(&work);
        let fx = presolve::pair_fixing(&work, &p.binaries, &mut l, &mut u);
        (l, u, fx.len())
    };
    for &b in &p.binaries {
        work.lb[b] = lb[b];
        work.ub[b] = ub[b];
    }
    let prop = Propagator::new(&work, &p.binaries);
    let ctx = Ctx::new(&work, &prop, &p.binaries, &lb, &ub);

    let mut inc_x: Vec<f64> = Vec::new();
    let mut inc = f64::INFINITY;
    if let Some(x0) = &opts.incumbent {
        if x0.len() == base.n() && p.binaries.iter().all(|&b| x0[b] == 0.0 || x0[b] == 1.0) && base.max_violation(x0) <= 1e-6 {
            let mut leaf = work.clone();
            for &b in &p.binaries {
                leaf.lb[b] = x0[b];
                leaf.ub[b] = x0[b];
            }
            let (x, obj) = solve_leaf(&leaf).unwrap_or_else(|| (x0.clone(), base.objective(x0)));
            inc = obj;
            inc_x = x;
        }
    }

    let pool = (opts.workers > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(opts.workers).build().ok())
        .flatten();
    let batch = opts.batch.max(1);
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
    let mut dive: Vec<Node> = Vec::new();
    let mut next_id = 1;
    dive.push(Node { id: 0, depth: 0, bound: f64::NEG_INFINITY, fixings: Vec::new() });
    let mut nodes = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    // smallest bound among nodes discarded within the gap tolerance
    let mut pruned_bound = f64::INFINITY;
    let mut node_log = Vec::new();
    let mut stop = None;

    let prune_level = |inc: f64| {
        if inc.is_finite() {
            inc - opts.gap_tol * inc.abs().max(1.0)
        } else {
            f64::INFINITY
        }
    };

    loop {
        if dive.is_empty() && heap.is_empty() {
            break;
        }
        if nodes >= opts.node_limit {
            stop = Some(MiqpStatus::NodeLimit);
            break;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            stop = Some(MiqpStatus::GapLimit);
            break;
        }
        let mut round: Vec<Node> = Vec::new();
        while round.len() < batch.min(opts.node_limit - nodes) {
            let nd = match dive.pop() {
                Some(nd) => nd,
                None => match heap.pop() {
                    Some(h) => h.0,
                    None => break,
                },
            };
            if nd.bound >= prune_level(inc) {
                pruned_bound = pruned_bound.min(nd.bound);
                if let Some(w) = log.as_deref_mut() {
                    let _ = writeln!(w, "node {} depth {} bound {:.10e} status pruned", nd.id, nd.depth, nd.bound);
                }
                if opts.record_nodes {
                    node_log.push(NodeRecord { id: nd.id, depth: nd.depth, bound: nd.bound, status: NodeStatus::Pruned, fixings: nd.fixings.clone(), incumbent: inc });
                }
                continue;
            }
            round.push(nd);
        }
        if round.is_empty() {
            continue;
        }
        let outcomes: Vec<Outcome> = match &pool {
            Some(pool) if round.len() > 1 => pool.install(|| round.par_iter().map(|nd| ctx.evaluate(nd)).collect()),
            _ => round.iter().map(|nd| ctx.evaluate(nd)).collect(),
        };
        for (nd, out) in round.into_iter().zip(outcomes) {
            nodes += 1;
            let (status, bound) = match out {
                Outcome::Infeasible => (NodeStatus::Infeasible, nd.bound),
                Outcome::Unsolved => {
                    // branch blindly on the first free binary
                    let free = p.binaries.iter().copied().find(|&b| lb[b] != ub[b] && !nd.fixings.iter().any(|f| f.0 == b));
                    match free {
                        Some(b) => {
                            for v in [1.0, 0.0] {
                                let mut f = nd.fixings.clone();
                                f.push((b, v));
                                heap.push(HeapItem(Node { id: next_id, depth: nd.depth + 1, bound: nd.bound, fixings: f }));
                                next_id += 1;
                            }
                        }
                        None => pruned_bound = pruned_bound.min(nd.bound),
                    }
                    (NodeStatus::Unsolved, nd.bound)
                }
                Outcome::Solved { obj, branch, leaf } => {
                    let obj = obj.max(nd.bound);
                    if nd.id == 0 {
                        root_bound = obj;
                    }
                    if let Some((x, val)) = leaf {
                        if val < inc {
                            inc = val;
                            inc_x = x;
                        }
                    }
                    match branch {
                        Some((b, prefer)) if obj < prune_level(inc) => {
                            let mut far = nd.fixings.clone();
                            far.push((b, 1.0 - prefer));
                            let mut near = nd.fixings.clone();
                            near.push((b, prefer));
                            heap.push(HeapItem(Node { id: next_id, depth: nd.depth + 1, bound: obj, fixings: far }));
                            dive.push(Node { id: next_id + 1, depth: nd.depth + 1, bound: obj, fixings: near });
                            next_id += 2;
                            (NodeStatus::Branched, obj)
                        }
                        Some(_) => {
                            pruned_bound = pruned_bound.min(obj);
                            (NodeStatus::Fathomed, obj)
                        }
                        None => {
                            if inc.is_finite() {
                                pruned_bound = pruned_bound.min(obj.min(inc));
                            }
                            (NodeStatus::Integral, obj)
                        }
                    }
                }
            };
            if let Some(w) = log.as_deref_mut() {
                let _ = writeln!(w, "node {} depth {} bound {:.10e} status {}", nd.id, nd.depth, bound, status.as_str());
            }
            if opts.record_nodes {
                node_log.push(NodeRecord { id: nd.id, depth: nd.depth, bound, status, fixings: nd.fixings, incumbent: inc });
            }
        }
        // a dive ends once its node can no longer improve the incumbent
        dive.retain(|nd| {
            if nd.bound >= prune_level(inc) {
                heap.push(HeapItem(nd.clone()));
                false
            } else {
                true
            }
        });
    }

    let open_bound = heap
        .iter()
        .map(|h| h.0.bound)
        .chain(dive.iter().map(|n| n.bound))
        .fold(f64::INFINITY, f64::min);
    let bound = open_bound.min(pruned_bound).min(inc);
    let elapsed = start.elapsed();
    if inc_x.is_empty() {
        let mut r = infeasible(elapsed);
        r.nodes = nodes;
        r.root_bound = root_bound;
        r.presolve_fixed = presolve_fixed;
        r.node_log = node_log;
        if let Some(s) = stop {
            r.status = s;
            r.bound = bound;
        }
        return Ok(r);
    }
    for &b in &p.binaries {
        inc_x[b] = inc_x[b].round();
    }
    let objective = base.objective(&inc_x);
    let gap = gap_of(objective, bound.min(objective));
    let status = match stop {
        None => MiqpStatus::Optimal,
        Some(_) if gap <= opts.gap_tol => MiqpStatus::Optimal,
        Some(s) => s,
    };
    Ok(MiqpResult {
        status,
        x: inc_x,
        objective,
        bound: bound.min(objective),
        gap,
        nodes,
        root_bound,
        presolve_fixed,
        elapsed,
        node_log,
    })
}

/// Solves the QP for every assignment of the binaries and keeps the best.
/// Assignments refuted by bound propagation are counted as infeasible solves.
pub fn enumerate_exhaustive(p: &MiqpProblem) -> Result<MiqpResult, MiqpError> {
    let start = Instant::now();
    let nb = p.binaries.len();
    if nb > ENUMERATION_CAP {
        return Err(MiqpError::TooManyBinaries { count: nb, cap: ENUMERATION_CAP });
    }
    let base = prepare(p)?;
    let prop = Propagator::new(&base, &p.binaries);
    let (lb0, ub0) = presolve::singleton_bounds(&base);
    let opts = QpOptions { method: QpMethod::ActiveSet, ..relaxation_opts() };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut solves = 0;
    for mask in 0u64..(1u64 << nb) {
        solves += 1;
        let mut lb = lb0.clone();
        let mut ub = ub0.clone();
        let mut qp = base.clone();
        let mut ok = true;
        for (k, &b) in p.binaries.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            if v < base.lb[b] || v > base.ub[b] {
                ok = false;
                break;
            }
            lb[b] = v;
            ub[b] = v;
            qp.lb[b] = v;
            qp.ub[b] = v;
        }
        if !ok || prop.propagate(&mut lb, &mut ub).is_err() {
            continue;
        }
        let sol = solver::solve_unchecked(&qp, &opts, None);
        if sol.status != QpStatus::Optimal {
            continue;
        }
        let obj = base.objective(&sol.x);
        if best.as_ref().map_or(true, |(_, o)| obj < *o) {
            best = Some((sol.x, obj));
        }
    }
    let elapsed = start.elapsed();
    Ok(match best {
        Some((x, objective)) => MiqpResult {
            status: MiqpStatus::Optimal,
            x,
            objective,
            bound: objective,
            gap: 0.0,
            nodes: solves,
            root_bound: objective,
            presolve_fixed: 0,
            elapsed,
            node_log: Vec::new(),
        },
        None => MiqpResult {
            status: MiqpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            gap: f64::INFINITY,
            nodes: solves,
            root_bound: f64::INFINITY,
            presolve_fixed: 0,
            elapsed,
            node_log: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseRows;

    fn single_binary() -> MiqpProblem {
        // (x − 0.6)² = x² − 1.2x + 0.36
        let mut qp = QuadraticProgram::new(1);
        qp.q = SparseRows::from_triplets(1, 1, &[(0, 0, 2.0)]);
        qp.c = vec![-1.2];
        qp.constant = 0.36;
        qp.lb = vec![0.0];
        qp.ub = vec![1.0];
        MiqpProblem { qp, binaries: vec![0] }
    }

    #[test]
    fn rounds_single_binary_up() {
        let r = solve_miqp(&single_binary(), &MiqpOptions::default()).unwrap();
        assert_eq!(r.status, MiqpStatus::Optimal);
        assert_eq!(r.x, vec![1.0]);
        assert!((r.objective - 0.16).abs() < 1e-12);
        let e = enumerate_exhaustive(&single_binary()).unwrap();
        assert!((e.objective - 0.16).abs() < 1e-12);
        assert_eq!(e.nodes, 2);
    }

    #[test]
    fn infeasible_for_every_assignment() {
        let mut p = single_binary();
        p.qp.g_in.push_row(&[(0, 1.0)]);
        p.qp.h_in.push(0.5);
        p.qp.g_in.push_row(&[(0, -1.0)]);
        p.qp.h_in.push(-0.4);
        assert_eq!(enumerate_exhaustive(&p).unwrap().status, MiqpStatus::Infeasible);
        assert_eq!(solve_miqp(&p, &MiqpOptions::default()).unwrap().status, MiqpStatus::Infeasible);
    }

    #[test]
    fn enumeration_cap() {
        let mut qp = QuadraticProgram::new(21);
        qp.lb = vec![0.0; 21];
        qp.ub = vec![1.0; 21];
        let p = MiqpProblem { qp, binaries: (0..21).collect() };
        assert_eq!(enumerate_exhaustive(&p).unwrap_err(), MiqpError::TooManyBinaries { count: 21, cap: 20 });
    }
}
