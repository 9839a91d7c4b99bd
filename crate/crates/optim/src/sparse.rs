//! Compressed sparse row storage and a triplet builder.

/// Row-compressed sparse matrix. Column indices within a row are sorted and unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseRows {
    pub fn empty(n_cols: usize) -> Self {
        SparseRows { n_cols, row_ptr: vec![0], col_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Appends a row given as (column, value) pairs; duplicates are summed, zeros dropped.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let mut e: Vec<(usize, f64)> = entries.to_vec();
        e.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(e.len());
        for (c, v) in e {
            assert!(c < self.n_cols, "column {c} out of range {}", self.n_cols);
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        for (c, v) in merged {
            if v != 0.0 {
                self.col_idx.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.vals[s..e])
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row_dot(i, x)).collect()
    }

    /// y += Aᵀ w
    pub fn add_transpose_mul(&self, w: &[f64], y: &mut [f64]) {
        for i in 0..self.n_rows() {
            if w[i] == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                y[j] += a * w[i];
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(p) => v[p],
            Err(_) => 0.0,
        }
    }

    /// Builds from triplets; duplicates summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(i, j, v) in trip {
            rows[i].push((j, v));
        }
        let mut m = SparseRows::empty(n_cols);
        for r in rows {
            m.push_row(&r);
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows()];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                row[j] = a;
            }
        }
        d
    }

    /// Column-wise view: for each column, the (row, value) entries.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                cols[j].push((i, a));
            }
        }
        cols
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows() != self.n_cols {
            return false;
        }
        for i in 0..self.n_rows() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if (self.get(j, i) - a).abs() > tol * (1.0 + a.abs()) {
                    return false;
                }
            }
        }
        true
    }

    /// Returns a copy restricted to the given columns, remapped through `col_map`
    /// (entries whose column maps to `None` are dropped).
    pub fn select(&self, rows: &[usize], col_map: &[Option<usize>], n_cols: usize) -> SparseRows {
        let mut out = SparseRows::empty(n_cols);
        let mut buf = Vec::new();
        for &i in rows {
            buf.clear();
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if let Some(k) = col_map[j] {
                    buf.push((k, a));
                }
            }
            out.push_row(&buf);
        }
        out
    }
}

/// Symmetric quadratic form value xᵀ Q x.
pub fn quad_form(q: &SparseRows, x: &[f64]) -> f64 {
    let qx = q.mul_vec(x);
    qx.iter().zip(x).map(|(a, b)| a * b).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_row_merges_duplicates_and_drops_zeros() {
        let mut m = SparseRows::empty(4);
        m.push_row(&[(2, 1.0), (0, 3.0), (2, 2.0), (1, 0.0)]);
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.row(0).1, &[3.0, 3.0]);
    }

    #[test]
    fn transpose_product_matches_dense() {
        let m = SparseRows::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        let mut y = vec![0.0; 3];
        m.add_transpose_mul(&[2.0, 3.0], &mut y);
        assert_eq!(y, vec![2.0, -3.0, 4.0]);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
    }
}
