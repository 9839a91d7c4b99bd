#![allow(dead_code)]

use ies_optim::{QuadraticProgram, SparseRows};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random strictly convex QP with a known feasible point.
pub fn random_pd_qp(seed: u64, n: usize, m_eq: usize, m_in: usize, n_box: usize) -> QuadraticProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qp = QuadraticProgram::new(n);
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut v: f64 = (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() / n as f64;
            if i == j {
                v += 0.5;
            }
            trip.push((i, j, v));
        }
    }
    qp.q = SparseRows::from_triplets(n, n, &trip);
    qp.c = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..m_eq {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        let rhs: f64 = row.iter().map(|&(j, a)| a * x0[j]).sum();
        qp.a_eq.push_row(&row);
        qp.b_eq.push(rhs);
    }
    for _ in 0..m_in {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        let rhs: f64 = row.iter().map(|&(j, a)| a * x0[j]).sum::<f64>() + rng.gen_range(0.0..0.5);
        qp.g_in.push_row(&row);
        qp.h_in.push(rhs);
    }
    for j in 0..n_box.min(n) {
        qp.lb[j] = x0[j] - rng.gen_range(0.0..0.3);
        qp.ub[j] = x0[j] + rng.gen_range(0.0..0.3);
    }
    qp
}

/// Random positive semidefinite (possibly singular) QP over a box.
pub fn random_box_qp(seed: u64, n: usize, rank: usize) -> QuadraticProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qp = QuadraticProgram::new(n);
    let b: Vec<Vec<f64>> = (0..rank).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..rank).map(|k| b[k][i] * b[k][j]).sum();
            if v != 0.0 {
                trip.push((i, j, v));
            }
        }
    }
    qp.q = SparseRows::from_triplets(n, n, &trip);
    qp.c = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for j in 0..n {
        qp.lb[j] = rng.gen_range(-2.0..0.0);
        qp.ub[j] = rng.gen_range(0.0..2.0);
    }
    qp
}

pub fn dense(q: &SparseRows) -> Vec<Vec<f64>> {
    q.to_dense()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn objective(qp: &QuadraticProgram, x: &[f64]) -> f64 {
    let q = dense(&qp.q);
    let qx = mat_vec(&q, x);
    0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>() + x.iter().zip(&qp.c).map(|(a, b)| a * b).sum::<f64>() + qp.constant
}

/// Cholesky inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == c { 1.0 } else { 0.0 };
            y[i] = (rhs - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        for i in 0..n {
            inv[i][c] = x[i];
        }
    }
    inv
}

/// Projected gradient ascent (accelerated, with restart) on the Lagrangian
/// dual of a strictly convex QP. Returns the best dual value, a lower bound
/// on the optimum that converges to it.
pub fn dual_projected_gradient(qp: &QuadraticProgram, iters: usize) -> f64 {
    let n = qp.n();
    let qd = dense(&qp.q);
    let qinv = spd_inverse(&qd);
    // rows: equalities (free multipliers), inequalities and finite bounds (≥ 0)
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut free = Vec::new();
    for (r, &b) in qp.a_eq.to_dense().into_iter().zip(&qp.b_eq) {
        rows.push(r);
        rhs.push(b);
        free.push(true);
    }
    for (r, &h) in qp.g_in.to_dense().into_iter().zip(&qp.h_in) {
        rows.push(r);
        rhs.push(h);
        free.push(false);
    }
    for j in 0..n {
        if qp.ub[j].is_finite() {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            rows.push(r);
            rhs.push(qp.ub[j]);
            free.push(false);
        }
        if qp.lb[j].is_finite() {
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(-qp.lb[j]);
            free.push(false);
        }
    }
    let m = rows.len();
    let xof = |u: &[f64]| -> Vec<f64> {
        let mut w = qp.c.clone();
        for i in 0..m {
            for j in 0..n {
                w[j] += rows[i][j] * u[i];
            }
        }
        mat_vec(&qinv, &w).into_iter().map(|v| -v).collect()
    };
    let dual = |u: &[f64]| -> (f64, Vec<f64>) {
        let x = xof(u);
        let mut val = objective(qp, &x);
        let mut g = vec![0.0; m];
        for i in 0..m {
            let ax: f64 = rows[i].iter().zip(&x).map(|(a, b)| a * b).sum();
            g[i] = ax - rhs[i];
            val += u[i] * g[i];
        }
        (val, g)
    };
    if m == 0 {
        return dual(&[]).0;
    }
    // Lipschitz constant of the dual gradient by power iteration
    let k: Vec<Vec<f64>> = rows.clone();
    let mut v = vec![1.0; m];
    let mut lip = 1.0;
    for _ in 0..200 {
        let kt: Vec<f64> = (0..n).map(|j| (0..m).map(|i| k[i][j] * v[i]).sum()).collect();
        let t = mat_vec(&qinv, &kt);
        let w: Vec<f64> = (0..m).map(|i| k[i].iter().zip(&t).map(|(a, b)| a * b).sum()).collect();
        let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        lip = nw / v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = w.iter().map(|a| a / nw).collect();
    }
    let step = 1.0 / (1.05 * lip);
    let proj = |u: &mut Vec<f64>| {
        for i in 0..m {
            if !free[i] && u[i] < 0.0 {
                u[i] = 0.0;
            }
        }
    };
    let mut u = vec![0.0; m];
    let mut y = u.clone();
    let mut t = 1.0f64;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..iters {
        let (_, g) = dual(&y);
        let mut un: Vec<f64> = (0..m).map(|i| y[i] + step * g[i]).collect();
        proj(&mut un);
        let (val, _) = dual(&un);
        best = best.max(val);
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        // gradient restart
        let restart: f64 = (0..m).map(|i| (y[i] - un[i]) * (un[i] - u[i])).sum();
        if restart > 0.0 {
            t = 1.0;
            y = un.clone();
        } else {
            y = (0..m).map(|i| un[i] + (t - 1.0) / tn * (un[i] - u[i])).collect();
            t = tn;
        }
        u = un;
    }
    best
}

/// Plain projected gradient on a box-constrained convex QP.
pub fn box_projected_gradient(qp: &QuadraticProgram, iters: usize) -> (Vec<f64>, f64) {
    let n = qp.n();
    let q = dense(&qp.q);
    let lip: f64 = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let clamp = |x: &mut Vec<f64>| {
        for j in 0..n {
            x[j] = x[j].clamp(qp.lb[j], qp.ub[j]);
        }
    };
    let mut x = vec![0.0; n];
    clamp(&mut x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g: Vec<f64> = mat_vec(&q, &y).iter().zip(&qp.c).map(|(a, b)| a + b).collect();
        let mut xn: Vec<f64> = (0..n).map(|j| y[j] - g[j] / lip).collect();
        clamp(&mut xn);
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if objective(qp, &xn) > objective(qp, &x) {
            t = 1.0;
            y = x.clone();
            continue;
        }
        y = (0..n).map(|j| xn[j] + (t - 1.0) / tn * (xn[j] - x[j])).collect();
        t = tn;
        x = xn;
    }
    let f = objective(qp, &x);
    (x, f)
}
