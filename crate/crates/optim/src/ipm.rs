//! Primal-dual interior-point method (Mehrotra predictor-corrector) used for
//! large relaxations; solutions are typically polished by the active-set
//! method afterwards.

use crate::ldl::{KktFactor, LdlSymbolic, SymMatrix};
use crate::qp::{dual_objective, kkt_residuals, QpSolution, QpStatus, QuadraticProgram};
use crate::sparse::{dot, norm_inf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions { tol: 1e-9, max_iter: 200 }
    }
}

/// Solves a convex QP whose variables all have lb < ub (fixed variables must be
/// eliminated beforehand; see [`crate::qp::FixedElimination`]).
pub fn solve(qp: &QuadraticProgram, opts: &IpmOptions) -> QpSolution {
    let n = qp.n();
    // singleton rows become bounds
    let mut lb = qp.lb.clone();
    let mut ub = qp.ub.clone();
    let mut lb_src: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut ub_src: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut rows = Vec::new();
    for i in 0..qp.g_in.n_rows() {
        let (c, v) = qp.g_in.row(i);
        if c.len() == 1 {
            let (j, a) = (c[0], v[0]);
            let b = qp.h_in[i] / a;
            if a > 0.0 {
                if b < ub[j] {
                    ub[j] = b;
                    ub_src[j] = Some((i, a));
                }
            } else if b > lb[j] {
                lb[j] = b;
                lb_src[j] = Some((i, a));
            }
        } else if c.is_empty() {
            if qp.h_in[i] < 0.0 {
                return QpSolution::failed(qp, QpStatus::Infeasible, vec![0.0; n], 0);
            }
        } else {
            rows.push(i);
        }
    }
    for j in 0..n {
        if lb[j] >= ub[j] {
            let st = if lb[j] > ub[j] + 1e-9 * (1.0 + ub[j].abs()) { QpStatus::Infeasible } else { QpStatus::MaxIter };
            return QpSolution::failed(qp, st, vec![0.0; n], 0);
        }
    }
    let me = qp.a_eq.n_rows();
    let mi = rows.len();
    let has_l: Vec<bool> = lb.iter().map(|v| v.is_finite()).collect();
    let has_u: Vec<bool> = ub.iter().map(|v| v.is_finite()).collect();
    let nb = has_l.iter().filter(|&&b| b).count() + has_u.iter().filter(|&&b| b).count();

    // KKT pattern: x block, eq rows, ineq rows
    let dim = n + me + mi;
    let mut upper: Vec<(usize, usize)> = Vec::new();
    let mut base_vals: Vec<f64> = Vec::new();
    let mut diag_pos = vec![usize::MAX; dim];
    for j in 0..n {
        let (c, v) = qp.q.row(j);
        let mut has_diag = false;
        for (&k, &val) in c.iter().zip(v) {
            if k >= j {
                if k == j {
                    diag_pos[j] = upper.len();
                    has_diag = true;
                }
                upper.push((j, k));
                base_vals.push(val);
            }
        }
        if !has_diag {
            diag_pos[j] = upper.len();
            upper.push((j, j));
            base_vals.push(0.0);
        }
    }
    for i in 0..me {
        let (c, v) = qp.a_eq.row(i);
        for (&j, &a) in c.iter().zip(v) {
            upper.push((j, n + i));
            base_vals.push(a);
        }
        diag_pos[n + i] = upper.len();
        upper.push((n + i, n + i));
        base_vals.push(0.0);
    }
    for (r, &i) in rows.iter().enumerate() {
        let (c, v) = qp.g_in.row(i);
        for (&j, &a) in c.iter().zip(v) {
            upper.push((j, n + me + r));
            base_vals.push(a);
        }
        diag_pos[n + me + r] = upper.len();
        upper.push((n + me + r, n + me + r));
        base_vals.push(0.0);
    }
    let sign: Vec<f64> = (0..dim).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let sym = LdlSymbolic::analyze(dim, &upper);

    let g_rows: Vec<(&[usize], &[f64])> = rows.iter().map(|&i| qp.g_in.row(i)).collect();
    let h: Vec<f64> = rows.iter().map(|&i| qp.h_in[i]).collect();
    let gmul = |x: &[f64]| -> Vec<f64> {
        g_rows.iter().map(|(c, v)| c.iter().zip(v.iter()).map(|(&j, &a)| a * x[j]).sum()).collect()
    };
    let gt_add = |w: &[f64], y: &mut [f64]| {
        for (r, (c, v)) in g_rows.iter().enumerate() {
            for (&j, &a) in c.iter().zip(v.iter()) {
                y[j] += a * w[r];
            }
        }
    };

    // starting point
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            let (l, u) = (lb[j], ub[j]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    let w = u - l;
                    0.0f64.max(l + 0.1 * w).min(u - 0.1 * w)
                }
                (true, false) => 0.0f64.max(l + 1.0),
                (false, true) => 0.0f64.min(u - 1.0),
                _ => 0.0,
            }
        })
        .collect();
    let gx = gmul(&x);
    let mut s: Vec<f64> = (0..mi).map(|r| (h[r] - gx[r]).max(1.0)).collect();
    let mut z = vec![1.0; mi];
    let mut zl: Vec<f64> = (0..n).map(|j| if has_l[j] { 1.0 } else { 0.0 }).collect();
    let mut zu: Vec<f64> = (0..n).map(|j| if has_u[j] { 1.0 } else { 0.0 }).collect();
    let mut y = vec![0.0; me];

    let scale_c = 1.0 + norm_inf(&qp.c);
    let scale_b = 1.0 + norm_inf(&qp.b_eq).max(norm_inf(&h));
    let mut status = QpStatus::MaxIter;
    let mut iter = 0;
    let delta = 1e-10;
    let mut factor: Option<KktFactor> = None;
    let n_comp = (mi + nb).max(1) as f64;
    while iter < opts.max_iter {
        iter += 1;
        // residuals
        let mut rd = qp.gradient(&x);
        qp.a_eq.add_transpose_mul(&y, &mut rd);
        gt_add(&z, &mut rd);
        for j in 0..n {
            rd[j] += zu[j] - zl[j];
        }
        let ax = qp.a_eq.mul_vec(&x);
        let rp: Vec<f64> = ax.iter().zip(&qp.b_eq).map(|(a, b)| a - b).collect();
        let gx = gmul(&x);
        let rg: Vec<f64> = (0..mi).map(|r| gx[r] + s[r] - h[r]).collect();
        let sl: Vec<f64> = (0..n).map(|j| if has_l[j] { x[j] - lb[j] } else { 0.0 }).collect();
        let su: Vec<f64> = (0..n).map(|j| if has_u[j] { ub[j] - x[j] } else { 0.0 }).collect();
        let mut comp = dot(&s, &z);
        for j in 0..n {
            comp += sl[j] * zl[j] + su[j] * zu[j];
        }
        let mu = comp / n_comp;
        let pobj = qp.objective(&x);
        let e_d = norm_inf(&rd) / scale_c;
        let e_p = norm_inf(&rp).max(norm_inf(&rg)) / scale_b;
        let e_mu = comp / (1.0 + pobj.abs());
        if e_d <= opts.tol && e_p <= opts.tol && e_mu <= opts.tol {
            status = QpStatus::Optimal;
            break;
        }
        // divergence of duals with stalled primal residual suggests infeasibility
        let dual_size = norm_inf(&z).max(norm_inf(&zl)).max(norm_inf(&zu)).max(norm_inf(&y));
        if iter > 30 && e_p > 1e3 * opts.tol && dual_size > 1e10 * scale_c {
            status = QpStatus::Infeasible;
            break;
        }
        // assemble KKT values
        let mut vals = base_vals.clone();
        for j in 0..n {
            let mut dj = 0.0;
            if has_l[j] {
                dj += zl[j] / sl[j];
            }
            if has_u[j] {
                dj += zu[j] / su[j];
            }
            vals[diag_pos[j]] += dj;
        }
        for r in 0..mi {
            vals[diag_pos[n + me + r]] = -s[r] / z[r];
        }
        let exact = SymMatrix { n: dim, upper: upper.clone(), vals: vals.clone() };
        let mut regv = vals;
        for j in 0..dim {
            regv[diag_pos[j]] += sign[j] * delta;
        }
        let reg = SymMatrix { n: dim, upper: upper.clone(), vals: regv };
        match factor.as_mut() {
            Some(f) => f.refactor(&reg, &sign, 1e-14),
            None => factor = Some(KktFactor::new(sym.clone(), &reg, &sign, 1e-14)),
        }
        let f = factor.as_ref().unwrap();
        let solve_dir = |rsz: &[f64], rszl: &[f64], rszu: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rhs = vec![0.0; dim];
            for j in 0..n {
                let mut v = -rd[j];
                if has_l[j] {
                    v += rszl[j] / sl[j];
                }
                if has_u[j] {
                    v -= rszu[j] / su[j];
                }
                rhs[j] = v;
            }
            for i in 0..me {
                rhs[n + i] = -rp[i];
            }
            for r in 0..mi {
                rhs[n + me + r] = -rg[r] - rsz[r] / z[r];
            }
            let (sol, _) = f.solve_refined(&exact, &rhs, 3);
            let dx = sol[..n].to_vec();
            let dy = sol[n..n + me].to_vec();
            let dz = sol[n + me..].to_vec();
            let gdx = gmul(&dx);
            let ds: Vec<f64> = (0..mi).map(|r| -rg[r] - gdx[r]).collect();
            let dzl: Vec<f64> = (0..n).map(|j| if has_l[j] { (rszl[j] - zl[j] * dx[j]) / sl[j] } else { 0.0 }).collect();
            let dzu: Vec<f64> = (0..n).map(|j| if has_u[j] { (rszu[j] + zu[j] * dx[j]) / su[j] } else { 0.0 }).collect();
            (dx, dy, dz, ds, dzl, dzu)
        };
        let max_step = |dx: &[f64], dz: &[f64], ds: &[f64], dzl: &[f64], dzu: &[f64]| -> f64 {
            let mut a: f64 = 1.0;
            for r in 0..mi {
                if ds[r] < 0.0 {
                    a = a.min(-s[r] / ds[r]);
                }
                if dz[r] < 0.0 {
                    a = a.min(-z[r] / dz[r]);
                }
            }
            for j in 0..n {
                if has_l[j] {
                    if dx[j] < 0.0 {
                        a = a.min(-sl[j] / dx[j]);
                    }
                    if dzl[j] < 0.0 {
                        a = a.min(-zl[j] / dzl[j]);
                    }
                }
                if has_u[j] {
                    if dx[j] > 0.0 {
                        a = a.min(su[j] / dx[j]);
                    }
                    if dzu[j] < 0.0 {
                        a = a.min(-zu[j] / dzu[j]);
                    }
                }
            }
            a
        };
        // predictor
        let rsz: Vec<f64> = (0..mi).map(|r| -s[r] * z[r]).collect();
        let rszl: Vec<f64> = (0..n).map(|j| -sl[j] * zl[j]).collect();
        let rszu: Vec<f64> = (0..n).map(|j| -su[j] * zu[j]).collect();
        let (dxa, _, dza, dsa, dzla, dzua) = solve_dir(&rsz, &rszl, &rszu);
        let aa = max_step(&dxa, &dza, &dsa, &dzla, &dzua);
        let mut comp_aff = 0.0;
        for r in 0..mi {
            comp_aff += (s[r] + aa * dsa[r]) * (z[r] + aa * dza[r]);
        }
        for j in 0..n {
            if has_l[j] {
                comp_aff += (sl[j] + aa * dxa[j]) * (zl[j] + aa * dzla[j]);
            }
            if has_u[j] {
                comp_aff += (su[j] - aa * dxa[j]) * (zu[j] + aa * dzua[j]);
            }
        }
        let mu_aff = comp_aff / n_comp;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        // corrector
        let rsz: Vec<f64> = (0..mi).map(|r| -s[r] * z[r] - dsa[r] * dza[r] + sigma * mu).collect();
        let rszl: Vec<f64> = (0..n)
            .map(|j| if has_l[j] { -sl[j] * zl[j] - dxa[j] * dzla[j] + sigma * mu } else { 0.0 })
            .collect();
        let rszu: Vec<f64> = (0..n)
            .map(|j| if has_u[j] { -su[j] * zu[j] + dxa[j] * dzua[j] + sigma * mu } else { 0.0 })
            .collect();
        let (dx, dy, dz, ds, dzl, dzu) = solve_dir(&rsz, &rszl, &rszu);
        let a = (0.995 * max_step(&dx, &dz, &ds, &dzl, &dzu)).min(1.0);
        for j in 0..n {
            x[j] += a * dx[j];
            if has_l[j] {
                zl[j] += a * dzl[j];
            }
            if has_u[j] {
                zu[j] += a * dzu[j];
            }
        }
        for i in 0..me {
            y[i] += a * dy[i];
        }
        for r in 0..mi {
            s[r] += a * ds[r];
            z[r] += a * dz[r];
        }
    }
    // map multipliers back
    let mut z_in = vec![0.0; qp.g_in.n_rows()];
    for (r, &i) in rows.iter().enumerate() {
        z_in[i] = z[r];
    }
    let mut z_lb = vec![0.0; n];
    let mut z_ub = vec![0.0; n];
    for j in 0..n {
        if has_l[j] {
            match lb_src[j] {
                Some((i, a)) => z_in[i] += zl[j] / -a,
                None => z_lb[j] = zl[j],
            }
        }
        if has_u[j] {
            match ub_src[j] {
                Some((i, a)) => z_in[i] += zu[j] / a,
                None => z_ub[j] = zu[j],
            }
        }
    }
    let mut sol = QpSolution {
        status,
        objective: qp.objective(&x),
        x,
        y_eq: y,
        z_in,
        z_lb,
        z_ub,
        dual_objective: 0.0,
        residuals: Default::default(),
        iterations: iter,
    };
    sol.dual_objective = dual_objective(qp, &sol);
    sol.residuals = kkt_residuals(qp, &sol);
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseRows;

    #[test]
    fn small_qp_converges() {
        // min (x-1)² + (y-2)² s.t. x + y ≤ 2, x ≥ 0
        let mut qp = QuadraticProgram::new(2);
        qp.q = SparseRows::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 2.0)]);
        qp.c = vec![-2.0, -4.0];
        qp.constant = 5.0;
        qp.g_in.push_row(&[(0, 1.0), (1, 1.0)]);
        qp.h_in.push(2.0);
        qp.lb[0] = 0.0;
        let s = solve(&qp, &IpmOptions::default());
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 0.5).abs() < 1e-7 && (s.x[1] - 1.5).abs() < 1e-7);
        assert!((s.objective - 0.5).abs() < 1e-7);
        assert!((s.z_in[0] - 1.0).abs() < 1e-6);
    }
}
