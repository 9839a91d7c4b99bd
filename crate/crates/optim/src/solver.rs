//! Entry point choosing between the active-set method and an interior-point
//! solve followed by an active-set polish.

use crate::active_set::{self, ActiveSetOptions, WarmStart};
use crate::ipm::{self, IpmOptions};
use crate::ldl::{KktFactor, LdlSymbolic, SymMatrix};
use crate::qp::{FixedElimination, QpError, QpSolution, QpStatus, QuadraticProgram};
use crate::sparse::norm_inf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpMethod {
    /// Active set for small programs, interior point plus polish otherwise.
    Auto,
    ActiveSet,
    InteriorPoint,
    /// Interior point without the exact polish.
    InteriorPointRaw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: QpMethod,
    /// Skip the positive-semidefiniteness factorization check.
    pub trust_convexity: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions { tol: 1e-8, max_iter: 20_000, method: QpMethod::Auto, trust_convexity: false }
    }
}

/// Size above which `Auto` uses the interior-point path.
pub const AUTO_IPM_THRESHOLD: usize = 400;

/// Solves a convex QP. Errors only for malformed input; infeasibility and
/// unboundedness are reported through the solution status.
pub fn solve_convex_qp(qp: &QuadraticProgram, opts: &QpOptions) -> Result<QpSolution, QpError> {
    if opts.trust_convexity {
        qp.check_dimensions()?;
    } else {
        qp.validate()?;
    }
    Ok(solve_unchecked(qp, opts, None))
}

pub fn solve_unchecked(qp: &QuadraticProgram, opts: &QpOptions, warm: Option<&WarmStart>) -> QpSolution {
    let size = qp.n() + qp.a_eq.n_rows() + qp.g_in.n_rows();
    let method = match opts.method {
        QpMethod::Auto if size <= AUTO_IPM_THRESHOLD || warm.is_some() => QpMethod::ActiveSet,
        QpMethod::Auto => QpMethod::InteriorPoint,
        m => m,
    };
    let as_opts = ActiveSetOptions { tol: opts.tol, max_iter: opts.max_iter };
    match method {
        QpMethod::ActiveSet => active_set::solve(qp, &as_opts, warm),
        QpMethod::InteriorPoint | QpMethod::InteriorPointRaw => {
            let raw = solve_ipm(qp, opts.tol.min(1e-9));
            if method == QpMethod::InteriorPointRaw || raw.status != QpStatus::Optimal {
                if raw.status == QpStatus::Optimal || raw.status == QpStatus::Infeasible {
                    return raw;
                }
                // interior point stalled: the active-set method decides
                return active_set::solve(qp, &as_opts, None);
            }
            polish(qp, &raw, &as_opts)
        }
        QpMethod::Auto => unreachable!(),
    }
}

/// Interior-point solve with fixed variables eliminated.
pub fn solve_ipm(qp: &QuadraticProgram, tol: f64) -> QpSolution {
    let elim = FixedElimination::new(qp, 1e-9);
    if elim.infeasible {
        return QpSolution::failed(qp, QpStatus::Infeasible, elim.base.clone(), 0);
    }
    let r = ipm::solve(&elim.reduced, &IpmOptions { tol, max_iter: 200 });
    elim.expand(qp, &r)
}

/// Active-set crossover from an approximate optimum: guesses the active set
/// from complementarity, projects onto it, then runs the active-set method.
pub fn polish(qp: &QuadraticProgram, approx: &QpSolution, opts: &ActiveSetOptions) -> QpSolution {
    let n = qp.n();
    let x0 = &approx.x;
    let scale = 1.0 + norm_inf(x0);
    let act_tol = 1e-7 * scale;
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for j in 0..n {
        if qp.lb[j] == qp.ub[j] {
            fixed[j] = Some(qp.lb[j]);
            continue;
        }
        let sl = x0[j] - qp.lb[j];
        let su = qp.ub[j] - x0[j];
        if qp.lb[j].is_finite() && (sl <= act_tol || approx.z_lb[j] > sl) && sl <= su {
            fixed[j] = Some(qp.lb[j]);
        } else if qp.ub[j].is_finite() && (su <= act_tol || approx.z_ub[j] > su) {
            fixed[j] = Some(qp.ub[j]);
        }
    }
    let mut active: Vec<usize> = Vec::new();
    for i in 0..qp.g_in.n_rows() {
        let slack = qp.h_in[i] - qp.g_in.row_dot(i, x0);
        let nrm = norm_inf(qp.g_in.row(i).1).max(1e-300);
        if slack / nrm <= act_tol || approx.z_in[i] * nrm > slack / nrm {
            active.push(i);
        }
    }
    let mut x = x0.clone();
    for _round in 0..4 {
        let Some(xp) = project(qp, x0, &fixed, &active) else { break };
        x = xp;
        // add violated rows and retry
        let mut added = false;
        for i in 0..qp.g_in.n_rows() {
            if qp.g_in.row_dot(i, &x) - qp.h_in[i] > 1e-10 * (1.0 + qp.h_in[i].abs()) && !active.contains(&i) {
                active.push(i);
                added = true;
            }
        }
        for j in 0..n {
            if fixed[j].is_none() {
                if x[j] < qp.lb[j] {
                    fixed[j] = Some(qp.lb[j]);
                    added = true;
                } else if x[j] > qp.ub[j] {
                    fixed[j] = Some(qp.ub[j]);
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
        active.sort_unstable();
    }
    let warm = WarmStart { x, active_rows: active };
    let sol = active_set::solve(qp, opts, Some(&warm));
    if sol.status == QpStatus::Optimal {
        sol
    } else {
        let mut fallback = approx.clone();
        fallback.status = QpStatus::MaxIter;
        fallback
    }
}

/// Closest point to `x0` satisfying equality rows, the listed inequality rows
/// as equalities, and the given fixings.
fn project(qp: &QuadraticProgram, x0: &[f64], fixed: &[Option<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let n = qp.n();
    let mut pos = vec![None; n];
    let mut free = Vec::new();
    for j in 0..n {
        if fixed[j].is_none() {
            pos[j] = Some(free.len());
            free.push(j);
        }
    }
    let nf = free.len();
    let mut upper = Vec::new();
    let mut vals = Vec::new();
    for a in 0..nf {
        upper.push((a, a));
        vals.push(1.0);
    }
    let mut rhs: Vec<f64> = free.iter().map(|&j| x0[j]).collect();
    let mut r = nf;
    let mut add_row = |c: &[usize], v: &[f64], b: f64, upper: &mut Vec<(usize, usize)>, vals: &mut Vec<f64>, rhs: &mut Vec<f64>| {
        let mut b = b;
        for (&j, &a) in c.iter().zip(v) {
            match pos[j] {
                Some(k) => {
                    upper.push((k, r));
                    vals.push(a);
                }
                None => b -= a * fixed[j].unwrap(),
            }
        }
        upper.push((r, r));
        vals.push(0.0);
        rhs.push(b);
        r += 1;
    };
    for i in 0..qp.a_eq.n_rows() {
        let (c, v) = qp.a_eq.row(i);
        add_row(c, v, qp.b_eq[i], &mut upper, &mut vals, &mut rhs);
    }
    for &i in active {
        let (c, v) = qp.g_in.row(i);
        add_row(c, v, qp.h_in[i], &mut upper, &mut vals, &mut rhs);
    }
    let dim = rhs.len();
    let m = SymMatrix { n: dim, upper, vals };
    let sign: Vec<f64> = (0..dim).map(|i| if i < nf { 1.0 } else { -1.0 }).collect();
    let mut reg = m.clone();
    for (k, &(i, j)) in reg.upper.iter().enumerate() {
        if i == j && i >= nf {
            reg.vals[k] = -1e-10;
        }
    }
    let sym = LdlSymbolic::analyze(dim, &reg.upper);
    let f = KktFactor::new(sym, &reg, &sign, 1e-14);
    let (sol, _) = f.solve_refined(&m, &rhs, 10);
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x: Vec<f64> = (0..n).map(|j| fixed[j].unwrap_or(0.0)).collect();
    for (a, &j) in free.iter().enumerate() {
        x[j] = sol[a];
    }
    Some(x)
}
