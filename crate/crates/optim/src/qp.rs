//! Convex quadratic program data, solutions and KKT residuals.

use crate::sparse::{dot, norm_inf, quad_form, SparseRows};
use thiserror::Error;

/// minimize ½xᵀQx + cᵀx + constant
/// subject to A x = b, G x ≤ h, lb ≤ x ≤ ub.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub names: Vec<String>,
    /// Full symmetric matrix (both triangles stored).
    pub q: SparseRows,
    pub c: Vec<f64>,
    pub constant: f64,
    pub a_eq: SparseRows,
    pub b_eq: Vec<f64>,
    pub g_in: SparseRows,
    pub h_in: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("quadratic matrix is not symmetric")]
    NotSymmetric,
    #[error("quadratic matrix is not positive semidefinite (pivot {pivot:.3e} at variable {index})")]
    NotPsd { index: usize, pivot: f64 },
    #[error("lower bound exceeds upper bound for variable {0}")]
    BadBounds(usize),
}

impl QuadraticProgram {
    /// Unconstrained program with `n` free variables and zero objective.
    pub fn new(n: usize) -> Self {
        QuadraticProgram {
            names: (0..n).map(|i| format!("x{i}")).collect(),
            q: SparseRows::from_triplets(n, n, &[]),
            c: vec![0.0; n],
            constant: 0.0,
            a_eq: SparseRows::empty(n),
            b_eq: Vec::new(),
            g_in: SparseRows::empty(n),
            h_in: Vec::new(),
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * quad_form(&self.q, x) + dot(&self.c, x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.q.mul_vec(x);
        for (gi, ci) in g.iter_mut().zip(&self.c) {
            *gi += ci;
        }
        g
    }

    pub fn check_dimensions(&self) -> Result<(), QpError> {
        let n = self.n();
        let bad = |s: &str| Err(QpError::Dimension(s.to_string()));
        if self.names.len() != n {
            return bad("names");
        }
        if self.q.n_rows() != n || self.q.n_cols != n {
            return bad("quadratic matrix");
        }
        if self.a_eq.n_cols != n || self.a_eq.n_rows() != self.b_eq.len() {
            return bad("equality rows");
        }
        if self.g_in.n_cols != n || self.g_in.n_rows() != self.h_in.len() {
            return bad("inequality rows");
        }
        if self.lb.len() != n || self.ub.len() != n {
            return bad("bounds");
        }
        for i in 0..n {
            if self.lb[i] > self.ub[i] {
                return Err(QpError::BadBounds(i));
            }
        }
        Ok(())
    }

    /// Full validation: dimensions, symmetry and positive semidefiniteness.
    pub fn validate(&self) -> Result<(), QpError> {
        self.check_dimensions()?;
        if !self.q.is_symmetric(1e-12) {
            return Err(QpError::NotSymmetric);
        }
        check_psd(&self.q)
    }

    /// Largest violation of any constraint at x.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.a_eq.n_rows() {
            v = v.max((self.a_eq.row_dot(i, x) - self.b_eq[i]).abs());
        }
        for i in 0..self.g_in.n_rows() {
            v = v.max(self.g_in.row_dot(i, x) - self.h_in[i]);
        }
        for j in 0..self.n() {
            v = v.max(self.lb[j] - x[j]).max(x[j] - self.ub[j]);
        }
        v
    }
}

/// Positive semidefiniteness via symmetric elimination with diagonal pivoting.
/// The matrix is treated densely per connected block, which suffices for the
/// block-diagonal Hessians produced here.
pub fn check_psd(q: &SparseRows) -> Result<(), QpError> {
    let n = q.n_rows();
    // connected components of the sparsity graph
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut stack = vec![s];
        comp[s] = id;
        let mut members = Vec::new();
        while let Some(v) = stack.pop() {
            members.push(v);
            for &u in q.row(v).0 {
                if comp[u] == usize::MAX {
                    comp[u] = id;
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    let scale = q.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let tol = 1e-10 * scale;
    for members in comps {
        let k = members.len();
        let mut a = vec![vec![0.0; k]; k];
        for (r, &i) in members.iter().enumerate() {
            for (cc, &j) in members.iter().enumerate() {
                a[r][cc] = q.get(i, j);
            }
        }
        let mut active: Vec<usize> = (0..k).collect();
        while !active.is_empty() {
            // pivot on largest remaining diagonal
            let (pos, &p) = active
                .iter()
                .enumerate()
                .max_by(|x, y| a[*x.1][*x.1].partial_cmp(&a[*y.1][*y.1]).unwrap().then(y.1.cmp(x.1)))
                .unwrap();
            let d = a[p][p];
            if d < -tol {
                return Err(QpError::NotPsd { index: members[p], pivot: d });
            }
            active.remove(pos);
            if d <= tol {
                // the remaining block must vanish in row p
                for &j in &active {
                    if a[p][j].abs() > 1e-7 * scale {
                        return Err(QpError::NotPsd { index: members[p], pivot: d });
                    }
                }
                continue;
            }
            for &i in &active {
                let f = a[i][p] / d;
                if f == 0.0 {
                    continue;
                }
                for &j in &active {
                    a[i][j] -= f * a[p][j];
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Norms of the four KKT residual families.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

/// Solution with multipliers. Stationarity reads
/// Qx + c + Aᵀy + Gᵀz − z_lb + z_ub = 0 with z, z_lb, z_ub ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub y_eq: Vec<f64>,
    pub z_in: Vec<f64>,
    pub z_lb: Vec<f64>,
    pub z_ub: Vec<f64>,
    pub objective: f64,
    /// Lagrangian dual objective at the returned multipliers.
    pub dual_objective: f64,
    pub residuals: KktResiduals,
    pub iterations: usize,
}

impl QpSolution {
    pub fn failed(qp: &QuadraticProgram, status: QpStatus, x: Vec<f64>, iterations: usize) -> Self {
        let n = qp.n();
        let mut s = QpSolution {
            status,
            objective: qp.objective(&x),
            x,
            y_eq: vec![0.0; qp.a_eq.n_rows()],
            z_in: vec![0.0; qp.g_in.n_rows()],
            z_lb: vec![0.0; n],
            z_ub: vec![0.0; n],
            dual_objective: f64::NEG_INFINITY,
            residuals: KktResiduals::default(),
            iterations,
        };
        s.residuals = kkt_residuals(qp, &s);
        s
    }
}

/// Stationarity, primal violation, dual sign violation and complementarity.
pub fn kkt_residuals(qp: &QuadraticProgram, sol: &QpSolution) -> KktResiduals {
    let x = &sol.x;
    let mut r = qp.gradient(x);
    qp.a_eq.add_transpose_mul(&sol.y_eq, &mut r);
    qp.g_in.add_transpose_mul(&sol.z_in, &mut r);
    for j in 0..qp.n() {
        r[j] += sol.z_ub[j] - sol.z_lb[j];
    }
    let stationarity = norm_inf(&r);
    let primal = qp.max_violation(x).max(0.0);
    let mut dual: f64 = 0.0;
    for v in sol.z_in.iter().chain(&sol.z_lb).chain(&sol.z_ub) {
        dual = dual.max(-v);
    }
    let mut comp: f64 = 0.0;
    for i in 0..qp.g_in.n_rows() {
        let slack = qp.h_in[i] - qp.g_in.row_dot(i, x);
        comp = comp.max((sol.z_in[i] * slack).abs());
    }
    for j in 0..qp.n() {
        if qp.lb[j].is_finite() {
            comp = comp.max((sol.z_lb[j] * (x[j] - qp.lb[j])).abs());
        }
        if qp.ub[j].is_finite() {
            comp = comp.max((sol.z_ub[j] * (qp.ub[j] - x[j])).abs());
        }
    }
    KktResiduals { stationarity, primal, dual, complementarity: comp }
}

/// Lagrangian dual value −½xᵀQx − bᵀy − hᵀz + lbᵀz_lb − ubᵀz_ub (+ constant).
pub fn dual_objective(qp: &QuadraticProgram, sol: &QpSolution) -> f64 {
    let mut v = -0.5 * quad_form(&qp.q, &sol.x) - dot(&qp.b_eq, &sol.y_eq) - dot(&qp.h_in, &sol.z_in) + qp.constant;
    for j in 0..qp.n() {
        if sol.z_lb[j] != 0.0 {
            v += qp.lb[j] * sol.z_lb[j];
        }
        if sol.z_ub[j] != 0.0 {
            v -= qp.ub[j] * sol.z_ub[j];
        }
    }
    v
}

/// Removes variables with lb == ub, producing an equivalent smaller program.
#[derive(Debug, Clone)]
pub struct FixedElimination {
    pub reduced: QuadraticProgram,
    /// original index of each reduced variable
    pub keep: Vec<usize>,
    /// full-length point holding the fixed values
    pub base: Vec<f64>,
    pub eq_keep: Vec<usize>,
    pub in_keep: Vec<usize>,
    /// a row over fixed variables only is violated
    pub infeasible: bool,
}

impl FixedElimination {
    pub fn new(qp: &QuadraticProgram, tol: f64) -> Self {
        let n = qp.n();
        let fixed: Vec<bool> = (0..n).map(|j| qp.lb[j] == qp.ub[j]).collect();
        let mut map = vec![None; n];
        let mut keep = Vec::new();
        for j in 0..n {
            if !fixed[j] {
                map[j] = Some(keep.len());
                keep.push(j);
            }
        }
        let base: Vec<f64> = (0..n).map(|j| if fixed[j] { qp.lb[j] } else { 0.0 }).collect();
        let nr = keep.len();
        let mut red = QuadraticProgram::new(nr);
        red.names = keep.iter().map(|&j| qp.names[j].clone()).collect();
        let mut trip = Vec::new();
        let mut c = vec![0.0; nr];
        let mut constant = qp.constant;
        for j in 0..n {
            let (cols, vals) = qp.q.row(j);
            for (&k, &v) in cols.iter().zip(vals) {
                match (map[j], map[k]) {
                    (Some(a), Some(b)) => trip.push((a, b, v)),
                    (Some(a), None) => c[a] += v * base[k],
                    (None, None) => constant += 0.5 * v * base[j] * base[k],
                    (None, Some(_)) => {}
                }
            }
            match map[j] {
                Some(a) => c[a] += qp.c[j],
                None => constant += qp.c[j] * base[j],
            }
        }
        red.q = SparseRows::from_triplets(nr, nr, &trip);
        red.c = c;
        red.constant = constant;
        let mut infeasible = false;
        let mut eq_keep = Vec::new();
        let mut buf = Vec::new();
        for i in 0..qp.a_eq.n_rows() {
            buf.clear();
            let mut rhs = qp.b_eq[i];
            let (cols, vals) = qp.a_eq.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                match map[j] {
                    Some(a) => buf.push((a, v)),
                    None => rhs -= v * base[j],
                }
            }
            if buf.is_empty() {
                if rhs.abs() > tol * (1.0 + qp.b_eq[i].abs()) {
                    infeasible = true;
                }
                continue;
            }
            red.a_eq.push_row(&buf);
            red.b_eq.push(rhs);
            eq_keep.push(i);
        }
        let mut in_keep = Vec::new();
        for i in 0..qp.g_in.n_rows() {
            buf.clear();
            let mut rhs = qp.h_in[i];
            let (cols, vals) = qp.g_in.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                match map[j] {
                    Some(a) => buf.push((a, v)),
                    None => rhs -= v * base[j],
                }
            }
            if buf.is_empty() {
                if rhs < -tol * (1.0 + qp.h_in[i].abs()) {
                    infeasible = true;
                }
                continue;
            }
            red.g_in.push_row(&buf);
            red.h_in.push(rhs);
            in_keep.push(i);
        }
        red.lb = keep.iter().map(|&j| qp.lb[j]).collect();
        red.ub = keep.iter().map(|&j| qp.ub[j]).collect();
        FixedElimination { reduced: red, keep, base, eq_keep, in_keep, infeasible }
    }

    /// Lifts a reduced solution; fixed variables receive the multiplier that
    /// closes their stationarity row.
    pub fn expand(&self, qp: &QuadraticProgram, r: &QpSolution) -> QpSolution {
        let n = qp.n();
        let mut x = self.base.clone();
        for (a, &j) in self.keep.iter().enumerate() {
            x[j] = r.x[a];
        }
        let mut y_eq = vec![0.0; qp.a_eq.n_rows()];
        for (a, &i) in self.eq_keep.iter().enumerate() {
            y_eq[i] = r.y_eq[a];
        }
        let mut z_in = vec![0.0; qp.g_in.n_rows()];
        for (a, &i) in self.in_keep.iter().enumerate() {
            z_in[i] = r.z_in[a];
        }
        let mut z_lb = vec![0.0; n];
        let mut z_ub = vec![0.0; n];
        for (a, &j) in self.keep.iter().enumerate() {
            z_lb[j] = r.z_lb[a];
            z_ub[j] = r.z_ub[a];
        }
        let mut total = qp.gradient(&x);
        qp.a_eq.add_transpose_mul(&y_eq, &mut total);
        qp.g_in.add_transpose_mul(&z_in, &mut total);
        for j in 0..n {
            if qp.lb[j] == qp.ub[j] {
                let zz = -total[j];
                if zz >= 0.0 {
                    z_ub[j] = zz;
                } else {
                    z_lb[j] = -zz;
                }
            }
        }
        let mut sol = QpSolution {
            status: r.status,
            objective: qp.objective(&x),
            x,
            y_eq,
            z_in,
            z_lb,
            z_ub,
            dual_objective: 0.0,
            residuals: KktResiduals::default(),
            iterations: r.iterations,
        };
        sol.dual_objective = dual_objective(qp, &sol);
        sol.residuals = kkt_residuals(qp, &sol);
        sol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_check_rejects_indefinite() {
        let q = SparseRows::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(check_psd(&q), Err(QpError::NotPsd { .. })));
        let q = SparseRows::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(check_psd(&q).is_ok());
    }

    #[test]
    fn zero_diagonal_with_offdiagonal_is_not_psd() {
        let q = SparseRows::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        assert!(check_psd(&q).is_err());
    }
}
