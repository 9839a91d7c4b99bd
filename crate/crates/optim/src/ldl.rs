//! Sparse LDLᵀ factorization for symmetric quasi-definite systems.
//!
//! The pattern is analyzed once (minimum-degree ordering, elimination tree,
//! column counts) and may be refactored numerically any number of times.
//! Pivots whose sign disagrees with the expected inertia are replaced by a
//! small regularization value; callers recover accuracy by iterative refinement
//! against the unregularized matrix.

use std::collections::BTreeSet;

const NONE: usize = usize::MAX;

/// Minimum-degree ordering on the graph of a symmetric pattern.
/// Ties are broken by smallest vertex index.
pub fn min_degree_order(n: usize, upper: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in upper {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(&(deg, v)) = queue.iter().next() {
        queue.remove(&(deg, v));
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            let old = adj[u].len();
            merged.clear();
            let (a, b) = (&adj[u], &nbrs);
            let (mut p, mut q) = (0, 0);
            while p < a.len() || q < b.len() {
                let x = if q >= b.len() || (p < a.len() && a[p] < b[q]) {
                    p += 1;
                    a[p - 1]
                } else if p >= a.len() || b[q] < a[p] {
                    q += 1;
                    b[q - 1]
                } else {
                    p += 1;
                    q += 1;
                    a[p - 1]
                };
                if x != u && x != v {
                    merged.push(x);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            if adj[u].len() != old {
                queue.remove(&(old, u));
                queue.insert((adj[u].len(), u));
            }
        }
    }
    perm
}

/// Ordering, elimination tree and storage layout for one sparsity pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    pub n: usize,
    perm: Vec<usize>,
    ap: Vec<usize>,
    ai: Vec<usize>,
    amap: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
    n_entries: usize,
}

impl LdlSymbolic {
    /// `upper` lists unique (i, j) positions with i ≤ j. Missing diagonal
    /// positions are added internally.
    pub fn analyze(n: usize, upper: &[(usize, usize)]) -> Self {
        let perm = min_degree_order(n, upper);
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        // permuted upper entries, original entries first then diagonal fillers
        let mut pos: Vec<(usize, usize, usize)> = Vec::with_capacity(upper.len() + n);
        for (k, &(i, j)) in upper.iter().enumerate() {
            let (a, b) = (iperm[i], iperm[j]);
            pos.push((a.max(b), a.min(b), k));
        }
        for d in 0..n {
            pos.push((d, d, usize::MAX));
        }
        pos.sort_unstable();
        let mut ap = vec![0usize; n + 1];
        let mut ai = Vec::with_capacity(pos.len());
        let mut amap = vec![0usize; upper.len()];
        let mut last: Option<(usize, usize)> = None;
        for &(col, row, k) in &pos {
            if last != Some((col, row)) {
                ai.push(row);
                ap[col + 1] += 1;
                last = Some((col, row));
            }
            if k != usize::MAX {
                amap[k] = ai.len() - 1;
            }
        }
        for c in 0..n {
            ap[c + 1] += ap[c];
        }
        // elimination tree and column counts
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &i0 in &ai[ap[j]..ap[j + 1]] {
                let mut i = i0;
                while work[i] != j {
                    if parent[i] == NONE {
                        parent[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        LdlSymbolic { n, perm, ap, ai, amap, parent, lp, n_entries: upper.len() }
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }
}

/// Numeric factor P K Pᵀ = L D Lᵀ.
#[derive(Debug, Clone)]
pub struct LdlNumeric {
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    /// Number of pivots that were replaced by regularization.
    pub n_regularized: usize,
    /// Smallest pivot magnitude relative to the largest, before regularization.
    pub min_pivot_ratio: f64,
}

impl LdlNumeric {
    /// `vals[k]` is the value at `upper[k]`; `sign[i]` the expected pivot sign of
    /// original index i (+1 primal block, −1 dual block).
    pub fn factor(sym: &LdlSymbolic, vals: &[f64], sign: &[f64], delta: f64) -> LdlNumeric {
        assert_eq!(vals.len(), sym.n_entries);
        let n = sym.n;
        let mut ax = vec![0.0; sym.ai.len()];
        for (k, &v) in vals.iter().enumerate() {
            ax[sym.amap[k]] += v;
        }
        let psign: Vec<f64> = sym.perm.iter().map(|&p| sign[p]).collect();
        let nnz = sym.lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut lnext = vec![0usize; n];
        let mut d = vec![0.0; n];
        let mut dinv = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut mark = vec![NONE; n];
        let mut pattern: Vec<usize> = Vec::with_capacity(n);
        let mut n_reg = 0;
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for k in 0..n {
            pattern.clear();
            mark[k] = k;
            let mut dk = 0.0;
            for p in sym.ap[k]..sym.ap[k + 1] {
                let i0 = sym.ai[p];
                if i0 == k {
                    dk += ax[p];
                    continue;
                }
                y[i0] += ax[p];
                let mut i = i0;
                while i != NONE && i < k && mark[i] != k {
                    mark[i] = k;
                    pattern.push(i);
                    i = sym.parent[i];
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                let yj = y[j];
                y[j] = 0.0;
                let s = sym.lp[j];
                for p in s..s + lnext[j] {
                    y[li[p]] -= lx[p] * yj;
                }
                let lkj = yj * dinv[j];
                dk -= yj * lkj;
                li[s + lnext[j]] = k;
                lx[s + lnext[j]] = lkj;
                lnext[j] += 1;
            }
            dmax = dmax.max(dk.abs());
            dmin = dmin.min(dk.abs());
            if psign[k] * dk <= delta {
                dk = psign[k] * delta;
                n_reg += 1;
            }
            d[k] = dk;
            dinv[k] = 1.0 / dk;
        }
        LdlNumeric {
            li,
            lx,
            d,
            n_regularized: n_reg,
            min_pivot_ratio: if dmax > 0.0 { dmin / dmax } else { 0.0 },
        }
    }

    /// Solves with the factored (possibly regularized) matrix.
    pub fn solve(&self, sym: &LdlSymbolic, b: &[f64]) -> Vec<f64> {
        let n = sym.n;
        let mut x: Vec<f64> = sym.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in sym.lp[j]..sym.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in sym.lp[j]..sym.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &p) in sym.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

/// Symmetric matrix held as unique upper-triangle entries.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub n: usize,
    pub upper: Vec<(usize, usize)>,
    pub vals: Vec<f64>,
}

impl SymMatrix {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (&(i, j), &v) in self.upper.iter().zip(&self.vals) {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }
}

/// Factorization of a fixed-pattern symmetric system with refinement support.
#[derive(Debug, Clone)]
pub struct KktFactor {
    pub sym: LdlSymbolic,
    pub num: LdlNumeric,
}

impl KktFactor {
    pub fn new(sym: LdlSymbolic, m: &SymMatrix, sign: &[f64], delta: f64) -> Self {
        let num = LdlNumeric::factor(&sym, &m.vals, sign, delta);
        KktFactor { sym, num }
    }

    pub fn refactor(&mut self, m: &SymMatrix, sign: &[f64], delta: f64) {
        self.num = LdlNumeric::factor(&self.sym, &m.vals, sign, delta);
    }

    /// Solves `m x = b` with up to `iters` refinement sweeps against `m`.
    /// Returns the solution and the final residual infinity norm.
    pub fn solve_refined(&self, m: &SymMatrix, b: &[f64], iters: usize) -> (Vec<f64>, f64) {
        let mut x = self.num.solve(&self.sym, b);
        let mut res = residual(m, &x, b);
        let mut rn = crate::sparse::norm_inf(&res);
        for _ in 0..iters {
            if rn == 0.0 {
                break;
            }
            let dx = self.num.solve(&self.sym, &res);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let cres = residual(m, &cand, b);
            let cn = crate::sparse::norm_inf(&cres);
            if cn < rn {
                x = cand;
                res = cres;
                let improved = cn < 0.5 * rn;
                rn = cn;
                if !improved {
                    break;
                }
            } else {
                break;
            }
        }
        (x, rn)
    }
}

fn residual(m: &SymMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let kx = m.mul_vec(x);
    b.iter().zip(&kx).map(|(a, c)| a - c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn factor_solves_quasidefinite_system() {
        // [4 1 1; 1 3 0; 1 0 -2]
        let upper = vec![(0, 0), (0, 1), (1, 1), (0, 2), (2, 2)];
        let m = SymMatrix { n: 3, upper: upper.clone(), vals: vec![4.0, 1.0, 3.0, 1.0, -2.0] };
        let sym = LdlSymbolic::analyze(3, &upper);
        let f = KktFactor::new(sym, &m, &[1.0, 1.0, -1.0], 1e-14);
        let b = vec![1.0, 2.0, 3.0];
        let (x, r) = f.solve_refined(&m, &b, 3);
        assert!(r < 1e-12);
        let dense = vec![vec![4.0, 1.0, 1.0], vec![1.0, 3.0, 0.0], vec![1.0, 0.0, -2.0]];
        let bx = dense_mul(&dense, &x);
        for (p, q) in bx.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn arrow_matrix_has_no_fill() {
        let mut upper = vec![];
        for i in 0..6 {
            upper.push((i, i));
            if i > 0 {
                upper.push((0, i));
            }
        }
        let perm = min_degree_order(6, &upper);
        assert_ne!(perm[0], 0);
        let sym = LdlSymbolic::analyze(6, &upper);
        assert_eq!(sym.factor_nnz(), 5);
    }
}
