//! Primal active-set method for convex QP.
//!
//! Equality-constrained subproblems are solved through the KKT system of the
//! free variables and the working rows. Bounds are handled by fixing
//! variables. Inertia is controlled by temporarily fixing variables so that
//! every KKT matrix in the sequence is nonsingular; temporary fixes are
//! released like ordinary constraints once their multipliers are nonzero.

use crate::ldl::{KktFactor, LdlSymbolic, SymMatrix};
use crate::qp::{dual_objective, kkt_residuals, QpSolution, QpStatus, QuadraticProgram};
use crate::sparse::{dot, norm_inf, SparseRows};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveSetOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ActiveSetOptions {
    fn default() -> Self {
        ActiveSetOptions { tol: 1e-8, max_iter: 20_000 }
    }
}

/// Starting information: a point and inequality rows believed active.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub active_rows: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fix {
    Free,
    Lower,
    Upper,
    /// lb == ub, multiplier of either sign
    Equal,
    Temp,
}

struct Problem<'a> {
    qp: &'a QuadraticProgram,
    n: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// source row of an effective bound (singleton inequality rows become bounds)
    lb_src: Vec<Option<(usize, f64)>>,
    ub_src: Vec<Option<(usize, f64)>>,
    /// general inequality rows (indices into qp.g_in)
    rows: Vec<usize>,
    row_norm: Vec<f64>,
    dual_tol: f64,
}

impl<'a> Problem<'a> {
    fn new(qp: &'a QuadraticProgram, tol: f64) -> Result<Self, ()> {
        let n = qp.n();
        let mut lb = qp.lb.clone();
        let mut ub = qp.ub.clone();
        let mut lb_src = vec![None; n];
        let mut ub_src = vec![None; n];
        let mut rows = Vec::new();
        for i in 0..qp.g_in.n_rows() {
            let (c, v) = qp.g_in.row(i);
            if c.len() == 1 {
                let (j, a) = (c[0], v[0]);
                let bnd = qp.h_in[i] / a;
                if a > 0.0 {
                    if bnd < ub[j] {
                        ub[j] = bnd;
                        ub_src[j] = Some((i, a));
                    }
                } else if bnd > lb[j] {
                    lb[j] = bnd;
                    lb_src[j] = Some((i, a));
                }
            } else if c.is_empty() {
                if qp.h_in[i] < -tol {
                    return Err(());
                }
            } else {
                rows.push(i);
            }
        }
        for j in 0..n {
            if lb[j] > ub[j] {
                if lb[j] - ub[j] <= tol * (1.0 + lb[j].abs()) {
                    let m = 0.5 * (lb[j] + ub[j]);
                    lb[j] = m;
                    ub[j] = m;
                } else {
                    return Err(());
                }
            }
        }
        let row_norm = (0..qp.g_in.n_rows())
            .map(|i| norm_inf(qp.g_in.row(i).1).max(1e-300))
            .collect();
        let scale = norm_inf(&qp.c).max(norm_inf(&qp.q.vals)).max(1.0);
        Ok(Problem { qp, n, lb, ub, lb_src, ub_src, rows, row_norm, dual_tol: tol * scale })
    }
}

struct State {
    x: Vec<f64>,
    fix: Vec<Fix>,
    /// equality rows kept in the KKT system (dependent ones are dropped)
    eq_rows: Vec<usize>,
    in_w: Vec<bool>,
    w_rows: Vec<usize>,
}

struct Kkt {
    free: Vec<usize>,
    pos: Vec<Option<usize>>,
    mat: SymMatrix,
    factor: KktFactor,
    n_rows: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    MaxIter,
    Singular,
}

/// Solves a convex QP from scratch or from a warm start.
pub fn solve(qp: &QuadraticProgram, opts: &ActiveSetOptions, warm: Option<&WarmStart>) -> QpSolution {
    let prob = match Problem::new(qp, opts.tol) {
        Ok(p) => p,
        Err(()) => return QpSolution::failed(qp, QpStatus::Infeasible, vec![0.0; qp.n()], 0),
    };
    let x0 = match warm {
        Some(w) if w.x.len() == qp.n() => w.x.clone(),
        _ => (0..qp.n()).map(|j| clamp_start(prob.lb[j], prob.ub[j], 0.0)).collect(),
    };
    let warm_rows: Vec<usize> = warm.map(|w| w.active_rows.clone()).unwrap_or_default();
    let feas_tol = opts.tol * 1e-1;
    let mut iterations = 0;
    let (x_feas, hint_rows) = if violation(&prob, &x0) <= feas_tol {
        (x0, warm_rows)
    } else {
        match phase_one(&prob, &x0, opts, &mut iterations) {
            Some(v) => v,
            None => return QpSolution::failed(qp, QpStatus::Infeasible, x0, iterations),
        }
    };
    let mut st = init_state(&prob, x_feas, &hint_rows, opts.tol);
    let outcome = iterate(&prob, &mut st, opts, &mut iterations, true);
    finish(&prob, st, outcome, iterations)
}

fn clamp_start(lb: f64, ub: f64, v: f64) -> f64 {
    v.max(lb).min(ub)
}

fn violation(p: &Problem, x: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    let qp = p.qp;
    for i in 0..qp.a_eq.n_rows() {
        v = v.max((qp.a_eq.row_dot(i, x) - qp.b_eq[i]).abs() / (1.0 + qp.b_eq[i].abs()));
    }
    for &i in &p.rows {
        v = v.max((qp.g_in.row_dot(i, x) - qp.h_in[i]) / (1.0 + qp.h_in[i].abs()));
    }
    for j in 0..p.n {
        v = v.max(p.lb[j] - x[j]).max(x[j] - p.ub[j]);
    }
    v
}

/// Elastic feasibility LP started from `x0`. Returns a feasible point and the
/// rows that were active at the phase-one optimum.
fn phase_one(
    p: &Problem,
    x0: &[f64],
    opts: &ActiveSetOptions,
    iterations: &mut usize,
) -> Option<(Vec<f64>, Vec<usize>)> {
    let qp = p.qp;
    let n = p.n;
    let x: Vec<f64> = (0..n).map(|j| clamp_start(p.lb[j], p.ub[j], x0[j])).collect();
    let mut names = qp.names.clone();
    let mut eq_art: Vec<(usize, f64)> = Vec::new();
    for i in 0..qp.a_eq.n_rows() {
        let r = qp.b_eq[i] - qp.a_eq.row_dot(i, &x);
        if r != 0.0 {
            eq_art.push((i, r.signum()));
        }
    }
    let mut in_art: Vec<usize> = Vec::new();
    for &i in &p.rows {
        if qp.g_in.row_dot(i, &x) > qp.h_in[i] {
            in_art.push(i);
        }
    }
    let na = eq_art.len() + in_art.len();
    let nt = n + na;
    let mut a_eq = SparseRows::empty(nt);
    let mut art_of_eq = vec![None; qp.a_eq.n_rows()];
    for (k, &(i, s)) in eq_art.iter().enumerate() {
        art_of_eq[i] = Some((n + k, s));
    }
    for i in 0..qp.a_eq.n_rows() {
        let (c, v) = qp.a_eq.row(i);
        let mut e: Vec<(usize, f64)> = c.iter().copied().zip(v.iter().copied()).collect();
        if let Some((k, s)) = art_of_eq[i] {
            e.push((k, s));
        }
        a_eq.push_row(&e);
    }
    let mut g_in = SparseRows::empty(nt);
    let mut h_in = Vec::new();
    let mut art_of_in = vec![None; qp.g_in.n_rows()];
    for (k, &i) in in_art.iter().enumerate() {
        art_of_in[i] = Some(n + eq_art.len() + k);
    }
    for &i in &p.rows {
        let (c, v) = qp.g_in.row(i);
        let mut e: Vec<(usize, f64)> = c.iter().copied().zip(v.iter().copied()).collect();
        if let Some(k) = art_of_in[i] {
            e.push((k, -1.0));
        }
        g_in.push_row(&e);
        h_in.push(qp.h_in[i]);
    }
    let mut lb = p.lb.clone();
    let mut ub = p.ub.clone();
    let mut c = vec![0.0; nt];
    let mut xs = x.clone();
    for &(i, s) in &eq_art {
        let r = qp.b_eq[i] - qp.a_eq.row_dot(i, &x);
        xs.push(r * s);
        names.push(format!("art_eq{i}"));
    }
    for &i in &in_art {
        xs.push(qp.g_in.row_dot(i, &x) - qp.h_in[i]);
        names.push(format!("art_in{i}"));
    }
    for k in n..nt {
        lb.push(0.0);
        ub.push(f64::INFINITY);
        c[k] = 1.0;
    }
    let lp = QuadraticProgram {
        names,
        q: SparseRows::from_triplets(nt, nt, &[]),
        c,
        constant: 0.0,
        a_eq,
        b_eq: qp.b_eq.clone(),
        g_in,
        h_in,
        lb,
        ub,
    };
    let lp_prob = Problem::new(&lp, opts.tol).ok()?;
    let mut st = init_state(&lp_prob, xs, &[], opts.tol);
    let out = iterate(&lp_prob, &mut st, opts, iterations, true);
    if !matches!(out, Outcome::Optimal) {
        return None;
    }
    let infeas: f64 = st.x[n..].iter().sum();
    let scale = 1.0 + norm_inf(&qp.b_eq).max(norm_inf(&qp.h_in));
    if infeas > opts.tol * scale {
        return None;
    }
    let mut xf = st.x[..n].to_vec();
    for j in 0..n {
        xf[j] = xf[j].max(p.lb[j]).min(p.ub[j]);
    }
    let active: Vec<usize> = st.w_rows.iter().map(|&r| p.rows[r]).collect();
    Some((xf, active))
}

fn at_lower(p: &Problem, j: usize, v: f64) -> bool {
    p.lb[j].is_finite() && v - p.lb[j] <= 1e-10 * (1.0 + p.lb[j].abs())
}

fn at_upper(p: &Problem, j: usize, v: f64) -> bool {
    p.ub[j].is_finite() && p.ub[j] - v <= 1e-10 * (1.0 + p.ub[j].abs())
}

/// Builds the initial working set at a feasible point: equality rows plus
/// hinted active rows, keeping only rows independent on the free variables,
/// and bound-active variables fixed unless needed as basic columns.
fn init_state(p: &Problem, x: Vec<f64>, hint_rows: &[usize], tol: f64) -> State {
    let qp = p.qp;
    let n = p.n;
    let mut x = x;
    let mut rowpos_of_g = vec![usize::MAX; qp.g_in.n_rows()];
    for (k, &i) in p.rows.iter().enumerate() {
        rowpos_of_g[i] = k;
    }
    // candidate rows: (is_eq, index)
    let mut cand: Vec<(bool, usize)> = (0..qp.a_eq.n_rows()).map(|i| (true, i)).collect();
    let mut hints: Vec<usize> = hint_rows.iter().filter_map(|&i| {
        let k = *rowpos_of_g.get(i)?;
        if k == usize::MAX {
            return None;
        }
        let slack = qp.h_in[i] - qp.g_in.row_dot(i, &x);
        (slack.abs() <= 1e-9 * (1.0 + qp.h_in[i].abs())).then_some(k)
    }).collect();
    hints.sort_unstable();
    hints.dedup();
    cand.extend(hints.iter().map(|&k| (false, k)));
    // interior variables are preferred as pivots
    let class: Vec<u8> = (0..n)
        .map(|j| {
            if p.lb[j] == p.ub[j] {
                2
            } else if at_lower(p, j, x[j]) || at_upper(p, j, x[j]) {
                1
            } else {
                0
            }
        })
        .collect();
    let (kept, basic) = independent_rows(p, &cand, &class, tol);
    let mut fix = vec![Fix::Free; n];
    for j in 0..n {
        if basic[j] {
            continue;
        }
        if p.lb[j] == p.ub[j] {
            fix[j] = Fix::Equal;
            x[j] = p.lb[j];
        } else if at_lower(p, j, x[j]) {
            fix[j] = Fix::Lower;
            x[j] = p.lb[j];
        } else if at_upper(p, j, x[j]) {
            fix[j] = Fix::Upper;
            x[j] = p.ub[j];
        }
    }
    let mut st = State {
        x,
        fix,
        eq_rows: Vec::new(),
        in_w: vec![false; p.rows.len()],
        w_rows: Vec::new(),
    };
    for (is_eq, i) in kept {
        if is_eq {
            st.eq_rows.push(i);
        } else {
            st.in_w[i] = true;
            st.w_rows.push(i);
        }
    }
    // inertia: if the free-variable KKT matrix is singular, temporarily fix
    // every non-basic free variable
    let probe = build_kkt(p, &st);
    if !kkt_nonsingular(&probe) {
        for j in 0..n {
            if st.fix[j] == Fix::Free && !basic[j] && qp.q.get(j, j) == 0.0 {
                st.fix[j] = Fix::Temp;
            }
        }
        if !kkt_nonsingular(&build_kkt(p, &st)) {
            for j in 0..n {
                if st.fix[j] == Fix::Free && !basic[j] {
                    st.fix[j] = Fix::Temp;
                }
            }
        }
    }
    st
}

/// Rank-revealing elimination on candidate rows restricted to non-equal
/// variables. Returns kept rows and the basic (pivot) variable flags.
fn independent_rows(p: &Problem, cand: &[(bool, usize)], class: &[u8], tol: f64) -> (Vec<(bool, usize)>, Vec<bool>) {
    let qp = p.qp;
    let n = p.n;
    let m = cand.len();
    let mut basic = vec![false; n];
    if m == 0 {
        return (Vec::new(), basic);
    }
    // only columns that appear in candidate rows
    let mut col_id = vec![usize::MAX; n];
    let mut cols: Vec<usize> = Vec::new();
    for &(is_eq, i) in cand {
        let (c, _) = if is_eq { qp.a_eq.row(i) } else { qp.g_in.row(p.rows[i]) };
        for &j in c {
            if class[j] < 2 && col_id[j] == usize::MAX {
                col_id[j] = cols.len();
                cols.push(j);
            }
        }
    }
    let nc = cols.len();
    let mut a = vec![vec![0.0; nc]; m];
    let mut rhs_scale = vec![0.0f64; m];
    for (r, &(is_eq, i)) in cand.iter().enumerate() {
        let (c, v) = if is_eq { qp.a_eq.row(i) } else { qp.g_in.row(p.rows[i]) };
        for (&j, &val) in c.iter().zip(v) {
            if col_id[j] != usize::MAX {
                a[r][col_id[j]] = val;
            }
            rhs_scale[r] = rhs_scale[r].max(val.abs());
        }
    }
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; nc];
    let mut kept = Vec::new();
    let mut kept_rows = vec![false; m];
    // Rows are taken in order (equalities first) and pivot on the largest
    // entry, preferring interior columns.
    for r in 0..m {
        let scale = rhs_scale[r].max(1e-300);
        let mut best: Option<(u8, f64, usize)> = None;
        for cc in 0..nc {
            if col_done[cc] {
                continue;
            }
            let v = a[r][cc].abs();
            if v <= 1e-9 * scale.max(tol) {
                continue;
            }
            let cl = class[cols[cc]];
            let better = match best {
                None => true,
                Some((bc, bv, _)) => cl < bc || (cl == bc && v > bv * 1.0000001),
            };
            if better {
                best = Some((cl, v, cc));
            }
        }
        // accept interior pivot only if it is not tiny relative to the row
        let Some((_, _, pc)) = best else {
            row_done[r] = true;
            continue;
        };
        row_done[r] = true;
        col_done[pc] = true;
        kept_rows[r] = true;
        basic[cols[pc]] = true;
        let piv = a[r][pc];
        for r2 in (r + 1)..m {
            let f = a[r2][pc] / piv;
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(r2);
            let src = &top[r];
            for (dst, s) in bottom[0].iter_mut().zip(src) {
                *dst -= f * s;
            }
            bottom[0][pc] = 0.0;
        }
    }
    for (r, &c) in cand.iter().enumerate() {
        if kept_rows[r] {
            kept.push(c);
        }
    }
    (kept, basic)
}

fn build_kkt(p: &Problem, st: &State) -> Kkt {
    let qp = p.qp;
    let n = p.n;
    let mut pos = vec![None; n];
    let mut free = Vec::new();
    for j in 0..n {
        if st.fix[j] == Fix::Free {
            pos[j] = Some(free.len());
            free.push(j);
        }
    }
    let nf = free.len();
    let n_rows = st.eq_rows.len() + st.w_rows.len();
    let mut upper = Vec::new();
    let mut vals = Vec::new();
    for (a, &j) in free.iter().enumerate() {
        let (c, v) = qp.q.row(j);
        let mut has_diag = false;
        for (&k, &val) in c.iter().zip(v) {
            if let Some(b) = pos[k] {
                if b >= a {
                    upper.push((a, b));
                    vals.push(val);
                    has_diag |= b == a;
                }
            }
        }
        if !has_diag {
            upper.push((a, a));
            vals.push(0.0);
        }
    }
    let mut r = nf;
    for &i in &st.eq_rows {
        let (c, v) = qp.a_eq.row(i);
        push_row_entries(&pos, c, v, r, &mut upper, &mut vals);
        r += 1;
    }
    for &k in &st.w_rows {
        let (c, v) = qp.g_in.row(p.rows[k]);
        push_row_entries(&pos, c, v, r, &mut upper, &mut vals);
        r += 1;
    }
    let dim = nf + n_rows;
    let mat = SymMatrix { n: dim, upper, vals };
    let sign: Vec<f64> = (0..dim).map(|i| if i < nf { 1.0 } else { -1.0 }).collect();
    let sym = LdlSymbolic::analyze(dim, &mat.upper);
    let factor = KktFactor::new(sym, &mat, &sign, 1e-13 * kkt_scale(&mat));
    Kkt { free, pos, mat, factor, n_rows }
}

fn kkt_scale(m: &SymMatrix) -> f64 {
    norm_inf(&m.vals).max(1.0)
}

fn push_row_entries(
    pos: &[Option<usize>],
    c: &[usize],
    v: &[f64],
    r: usize,
    upper: &mut Vec<(usize, usize)>,
    vals: &mut Vec<f64>,
) {
    for (&j, &a) in c.iter().zip(v) {
        if let Some(b) = pos[j] {
            upper.push((b, r));
            vals.push(a);
        }
    }
    upper.push((r, r));
    vals.push(0.0);
}

/// Probe solve with a generic right-hand side.
fn kkt_nonsingular(k: &Kkt) -> bool {
    let dim = k.mat.n;
    if dim == 0 {
        return true;
    }
    let b: Vec<f64> = (0..dim).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let (x, r) = k.factor.solve_refined(&k.mat, &b, 8);
    solve_ok(&k.mat, &b, &x, r)
}

fn solve_ok(m: &SymMatrix, b: &[f64], x: &[f64], r: f64) -> bool {
    let xs = norm_inf(x);
    if !xs.is_finite() {
        return false;
    }
    r <= 1e-9 * (norm_inf(b) + kkt_scale(m) * 1e-3 * xs).max(1e-12) && xs < 1e12 * (1.0 + norm_inf(b))
}

/// Solves the KKT system; returns (free-part, row-multipliers) or None if singular.
fn kkt_solve(k: &Kkt, rhs: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (sol, r) = k.factor.solve_refined(&k.mat, rhs, 10);
    if !solve_ok(&k.mat, rhs, &sol, r) {
        return None;
    }
    let nf = k.free.len();
    Some((sol[..nf].to_vec(), sol[nf..].to_vec()))
}

/// Constraint identifiers for the ratio test and releases.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Con {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

fn ratio_test(p: &Problem, st: &State, v: &[f64], skip_row: Option<usize>) -> (f64, Option<Con>) {
    let qp = p.qp;
    let vn = norm_inf(v).max(1e-300);
    let mut best = f64::INFINITY;
    let mut best_con = None;
    let mut best_rate = 0.0;
    let mut consider = |alpha: f64, rate: f64, con: Con, best: &mut f64, best_con: &mut Option<Con>| {
        let tie = (alpha - *best).abs() <= 1e-12 * (1.0 + best.abs().min(1e300));
        if alpha < *best && !tie || (tie && rate > best_rate * (1.0 + 1e-9)) {
            *best = alpha;
            *best_con = Some(con);
            best_rate = rate;
        }
    };
    for (k, &i) in p.rows.iter().enumerate() {
        if st.in_w[k] || Some(k) == skip_row {
            continue;
        }
        let gv = qp.g_in.row_dot(i, v);
        let rate = gv / (p.row_norm[i] * vn);
        if rate <= 1e-11 {
            continue;
        }
        let slack = (qp.h_in[i] - qp.g_in.row_dot(i, &st.x)).max(0.0);
        consider(slack / gv, rate, Con::Row(k), &mut best, &mut best_con);
    }
    for j in 0..p.n {
        if st.fix[j] != Fix::Free {
            continue;
        }
        let rate = v[j].abs() / vn;
        if rate <= 1e-11 {
            continue;
        }
        if v[j] < 0.0 && p.lb[j].is_finite() {
            let s = (st.x[j] - p.lb[j]).max(0.0);
            consider(s / -v[j], rate, Con::Lower(j), &mut best, &mut best_con);
        } else if v[j] > 0.0 && p.ub[j].is_finite() {
            let s = (p.ub[j] - st.x[j]).max(0.0);
            consider(s / v[j], rate, Con::Upper(j), &mut best, &mut best_con);
        }
    }
    (best, best_con)
}

fn add_constraint(p: &Problem, st: &mut State, con: Con) {
    match con {
        Con::Row(k) => {
            st.in_w[k] = true;
            st.w_rows.push(k);
        }
        Con::Lower(j) => {
            st.fix[j] = Fix::Lower;
            st.x[j] = p.lb[j];
        }
        Con::Upper(j) => {
            st.fix[j] = Fix::Upper;
            st.x[j] = p.ub[j];
        }
    }
}

enum Release {
    Row(usize),
    Var(usize, f64),
}

fn iterate(p: &Problem, st: &mut State, opts: &ActiveSetOptions, iterations: &mut usize, allow_retry: bool) -> Outcome {
    let qp = p.qp;
    let n = p.n;
    let mut zero_steps = 0usize;
    let mut retried = !allow_retry;
    loop {
        if *iterations >= opts.max_iter {
            return Outcome::MaxIter;
        }
        *iterations += 1;
        let k = build_kkt(p, st);
        let g = qp.gradient(&st.x);
        let nf = k.free.len();
        let mut rhs = vec![0.0; nf + k.n_rows];
        for (a, &j) in k.free.iter().enumerate() {
            rhs[a] = -g[j];
        }
        let mut r = nf;
        for &i in &st.eq_rows {
            rhs[r] = qp.b_eq[i] - qp.a_eq.row_dot(i, &st.x);
            r += 1;
        }
        for &kk in &st.w_rows {
            let i = p.rows[kk];
            rhs[r] = qp.h_in[i] - qp.g_in.row_dot(i, &st.x);
            r += 1;
        }
        let Some((pf, ymul)) = kkt_solve(&k, &rhs) else {
            if retried {
                return Outcome::Singular;
            }
            // fall back to a vertex-like working set
            retried = true;
            let rows: Vec<usize> = st.w_rows.iter().map(|&kk| p.rows[kk]).collect();
            let x = st.x.clone();
            *st = init_state(p, x, &rows, opts.tol);
            for j in 0..n {
                if st.fix[j] == Fix::Free {
                    st.fix[j] = Fix::Temp;
                }
            }
            let cand: Vec<(bool, usize)> = (0..qp.a_eq.n_rows()).map(|i| (true, i)).chain(st.w_rows.iter().map(|&kk| (false, kk))).collect();
            let class: Vec<u8> = (0..n).map(|j| if st.fix[j] == Fix::Temp { 0 } else { 2 }).collect();
            let (kept, basic) = independent_rows(p, &cand, &class, opts.tol);
            for j in 0..n {
                if basic[j] {
                    st.fix[j] = Fix::Free;
                }
            }
            st.eq_rows.clear();
            st.w_rows.clear();
            st.in_w.iter_mut().for_each(|v| *v = false);
            for (is_eq, i) in kept {
                if is_eq {
                    st.eq_rows.push(i);
                } else {
                    st.in_w[i] = true;
                    st.w_rows.push(i);
                }
            }
            continue;
        };
        let mut step = vec![0.0; n];
        for (a, &j) in k.free.iter().enumerate() {
            step[j] = pf[a];
        }
        let xs = norm_inf(&st.x).max(1.0);
        if norm_inf(&step) > 1e-13 * xs {
            let (alpha, con) = ratio_test(p, st, &step, None);
            if alpha < 1.0 {
                for j in 0..n {
                    st.x[j] += alpha * step[j];
                }
                zero_steps = if alpha == 0.0 { zero_steps + 1 } else { 0 };
                add_constraint(p, st, con.expect("blocking constraint"));
                continue;
            }
            for j in 0..n {
                st.x[j] += step[j];
            }
        }
        // multipliers of fixed variables at x + step
        let mut total = qp.gradient(&st.x);
        let mut rmul = vec![0.0; qp.a_eq.n_rows()];
        for (r, &i) in st.eq_rows.iter().enumerate() {
            rmul[i] = ymul[r];
        }
        qp.a_eq.add_transpose_mul(&rmul, &mut total);
        let mut gmul = vec![0.0; qp.g_in.n_rows()];
        for (r, &kk) in st.w_rows.iter().enumerate() {
            gmul[p.rows[kk]] = ymul[st.eq_rows.len() + r];
        }
        qp.g_in.add_transpose_mul(&gmul, &mut total);
        // choose a release
        let tol = p.dual_tol;
        let bland = zero_steps > 20;
        let mut pick: Option<(f64, usize, Release)> = None;
        let offer = |score: f64, key: usize, rel: Release, pick: &mut Option<(f64, usize, Release)>| {
            let better = match pick {
                None => true,
                Some((s, kk, _)) => {
                    if bland {
                        key < *kk
                    } else {
                        score > *s * (1.0 + 1e-12) || (score >= *s * (1.0 - 1e-12) && key < *kk)
                    }
                }
            };
            if better {
                *pick = Some((score, key, rel));
            }
        };
        for j in 0..n {
            let z = -total[j];
            match st.fix[j] {
                Fix::Temp if z.abs() > tol => offer(z.abs(), j, Release::Var(j, z.signum()), &mut pick),
                Fix::Lower if z > tol => offer(z, j, Release::Var(j, 1.0), &mut pick),
                Fix::Upper if z < -tol => offer(-z, j, Release::Var(j, -1.0), &mut pick),
                _ => {}
            }
        }
        for (r, &kk) in st.w_rows.iter().enumerate() {
            let y = ymul[st.eq_rows.len() + r];
            if y < -tol {
                offer(-y, n + p.rows[kk], Release::Row(r), &mut pick);
            }
        }
        let Some((_, _, rel)) = pick else {
            return Outcome::Optimal;
        };
        // direction that releases the chosen constraint, others held
        let mut rhs = vec![0.0; nf + k.n_rows];
        let mut d = vec![0.0; n];
        let skip_row;
        match rel {
            Release::Row(r) => {
                rhs[nf + st.eq_rows.len() + r] = -1.0;
                skip_row = Some(st.w_rows[r]);
            }
            Release::Var(j, s) => {
                let (c, v) = qp.q.row(j);
                for (&i, &val) in c.iter().zip(v) {
                    if let Some(a) = k.pos[i] {
                        rhs[a] -= val * s;
                    }
                }
                let mut rr = nf;
                for &i in &st.eq_rows {
                    rhs[rr] = -qp.a_eq.get(i, j) * s;
                    rr += 1;
                }
                for &kk in &st.w_rows {
                    rhs[rr] = -qp.g_in.get(p.rows[kk], j) * s;
                    rr += 1;
                }
                d[j] = s;
                skip_row = None;
            }
        }
        let Some((df, _)) = kkt_solve(&k, &rhs) else {
            return Outcome::Singular;
        };
        for (a, &j) in k.free.iter().enumerate() {
            d[j] = df[a];
        }
        let qd = qp.q.mul_vec(&d);
        let curv = dot(&qd, &d);
        let gd = dot(&qp.gradient(&st.x), &d);
        let dn = norm_inf(&d).max(1e-300);
        let alpha_star = if curv > 1e-14 * dn * dn * kkt_scale(&k.mat) && gd < 0.0 {
            -gd / curv
        } else if gd >= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        // apply release
        match rel {
            Release::Row(r) => {
                let kk = st.w_rows.remove(r);
                st.in_w[kk] = false;
            }
            Release::Var(j, _) => st.fix[j] = Fix::Free,
        }
        let (alpha_b, con) = ratio_test(p, st, &d, skip_row);
        if alpha_b.is_infinite() && alpha_star.is_infinite() {
            return Outcome::Unbounded;
        }
        let alpha = alpha_star.min(alpha_b);
        for j in 0..n {
            st.x[j] += alpha * d[j];
        }
        zero_steps = if alpha == 0.0 { zero_steps + 1 } else { 0 };
        if alpha_b <= alpha_star {
            if let Some(c) = con {
                add_constraint(p, st, c);
            }
        }
    }
}

fn finish(p: &Problem, st: State, outcome: Outcome, iterations: usize) -> QpSolution {
    let qp = p.qp;
    let n = p.n;
    let status = match outcome {
        Outcome::Optimal => QpStatus::Optimal,
        Outcome::Unbounded => QpStatus::Unbounded,
        Outcome::MaxIter | Outcome::Singular => QpStatus::MaxIter,
    };
    let mut x = st.x.clone();
    for j in 0..n {
        x[j] = x[j].max(p.lb[j]).min(p.ub[j]);
    }
    if status != QpStatus::Optimal {
        return QpSolution::failed(qp, status, x, iterations);
    }
    let (y_eq, z_in, z_lb, z_ub) = recover_multipliers(p, &st, &x);
    let mut sol = QpSolution {
        status,
        objective: qp.objective(&x),
        x,
        y_eq,
        z_in,
        z_lb,
        z_ub,
        dual_objective: 0.0,
        residuals: Default::default(),
        iterations,
    };
    sol.dual_objective = dual_objective(qp, &sol);
    sol.residuals = kkt_residuals(qp, &sol);
    sol
}

/// Multipliers at the final working set via a least-squares-free KKT solve.
fn recover_multipliers(p: &Problem, st: &State, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let qp = p.qp;
    let n = p.n;
    let mut y_eq = vec![0.0; qp.a_eq.n_rows()];
    let mut z_in = vec![0.0; qp.g_in.n_rows()];
    let mut z_lb = vec![0.0; n];
    let mut z_ub = vec![0.0; n];
    let k = build_kkt(p, st);
    let g = qp.gradient(x);
    let nf = k.free.len();
    let mut rhs = vec![0.0; nf + k.n_rows];
    for (a, &j) in k.free.iter().enumerate() {
        rhs[a] = -g[j];
    }
    if let Some((_, ymul)) = kkt_solve(&k, &rhs) {
        for (r, &i) in st.eq_rows.iter().enumerate() {
            y_eq[i] = ymul[r];
        }
        for (r, &kk) in st.w_rows.iter().enumerate() {
            z_in[p.rows[kk]] = ymul[st.eq_rows.len() + r].max(0.0);
        }
    }
    let mut total = g;
    qp.a_eq.add_transpose_mul(&y_eq, &mut total);
    qp.g_in.add_transpose_mul(&z_in, &mut total);
    for j in 0..n {
        let z = -total[j];
        let (to_ub, to_lb) = match st.fix[j] {
            Fix::Lower => (0.0, (-z).max(0.0)),
            Fix::Upper => (z.max(0.0), 0.0),
            Fix::Equal => (z.max(0.0), (-z).max(0.0)),
            _ => (0.0, 0.0),
        };
        // map bounds that came from singleton rows back to those rows
        if to_ub > 0.0 {
            match p.ub_src[j] {
                Some((i, a)) => z_in[i] += to_ub / a,
                None => z_ub[j] = to_ub,
            }
        }
        if to_lb > 0.0 {
            match p.lb_src[j] {
                Some((i, a)) => z_in[i] += to_lb / -a,
                None => z_lb[j] = to_lb,
            }
        }
    }
    (y_eq, z_in, z_lb, z_ub)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp1() -> QuadraticProgram {
        // min x² s.t. x ≥ 1 as a row
        let mut qp = QuadraticProgram::new(1);
        qp.q = SparseRows::from_triplets(1, 1, &[(0, 0, 2.0)]);
        qp.g_in.push_row(&[(0, -1.0)]);
        qp.h_in.push(-1.0);
        qp
    }

    #[test]
    fn scalar_bound_example() {
        let s = solve(&qp1(), &ActiveSetOptions::default(), None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.z_in[0] - 2.0).abs() < 1e-12);
        assert!(s.residuals.max() < 1e-12);
    }

    #[test]
    fn lp_vertex_found() {
        // min -x - y s.t. x + 2y ≤ 4, 3x + y ≤ 6, x,y ≥ 0 → (1.6, 1.2)
        let mut qp = QuadraticProgram::new(2);
        qp.c = vec![-1.0, -1.0];
        qp.g_in.push_row(&[(0, 1.0), (1, 2.0)]);
        qp.g_in.push_row(&[(0, 3.0), (1, 1.0)]);
        qp.h_in = vec![4.0, 6.0];
        qp.lb = vec![0.0, 0.0];
        let s = solve(&qp, &ActiveSetOptions::default(), None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.6).abs() < 1e-10 && (s.x[1] - 1.2).abs() < 1e-10);
    }

    #[test]
    fn infeasible_detected() {
        let mut qp = QuadraticProgram::new(2);
        qp.a_eq.push_row(&[(0, 1.0), (1, 1.0)]);
        qp.b_eq.push(5.0);
        qp.ub = vec![1.0, 1.0];
        let s = solve(&qp, &ActiveSetOptions::default(), None);
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut qp = QuadraticProgram::new(1);
        qp.c = vec![-1.0];
        qp.lb = vec![0.0];
        let s = solve(&qp, &ActiveSetOptions::default(), None);
        assert_eq!(s.status, QpStatus::Unbounded);
    }
}
