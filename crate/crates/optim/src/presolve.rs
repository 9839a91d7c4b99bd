//! Bound propagation, probing on binaries, complementarity pair fixing and
//! big-M coefficient tightening.

use crate::qp::QuadraticProgram;
use crate::sparse::SparseRows;

/// Identifies the constraint that proved infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRef {
    Eq(usize),
    In(usize),
    Bound(usize),
}

struct RowView<'a> {
    cols: &'a [usize],
    vals: &'a [f64],
    rhs: f64,
    eq: bool,
    id: RowRef,
}

fn rows_of(qp: &QuadraticProgram) -> Vec<RowView<'_>> {
    let mut v = Vec::with_capacity(qp.a_eq.n_rows() + qp.g_in.n_rows());
    for i in 0..qp.a_eq.n_rows() {
        let (c, a) = qp.a_eq.row(i);
        v.push(RowView { cols: c, vals: a, rhs: qp.b_eq[i], eq: true, id: RowRef::Eq(i) });
    }
    for i in 0..qp.g_in.n_rows() {
        let (c, a) = qp.g_in.row(i);
        v.push(RowView { cols: c, vals: a, rhs: qp.h_in[i], eq: false, id: RowRef::In(i) });
    }
    v
}

/// Interval bound propagation engine for one program.
pub struct Propagator<'a> {
    rows: Vec<RowView<'a>>,
    var_rows: Vec<Vec<usize>>,
    is_bin: Vec<bool>,
    pub max_passes: usize,
}

#[derive(Default, Clone, Copy)]
struct Activity {
    fin: f64,
    n_inf: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(qp: &'a QuadraticProgram, binaries: &[usize]) -> Self {
        let rows = rows_of(qp);
        let mut var_rows = vec![Vec::new(); qp.n()];
        for (r, row) in rows.iter().enumerate() {
            for &j in row.cols {
                var_rows[j].push(r);
            }
        }
        let mut is_bin = vec![false; qp.n()];
        for &b in binaries {
            is_bin[b] = true;
        }
        Propagator { rows, var_rows, is_bin, max_passes: 30 }
    }

    /// Tightens `lb`/`ub` in place. Returns the violated constraint on infeasibility.
    pub fn propagate(&self, lb: &mut [f64], ub: &mut [f64]) -> Result<(), RowRef> {
        self.propagate_from(lb, ub, None)
    }

    /// Propagation seeded by rows touching the `changed` variables (all rows if None).
    pub fn propagate_from(&self, lb: &mut [f64], ub: &mut [f64], changed: Option<&[usize]>) -> Result<(), RowRef> {
        let nr = self.rows.len();
        let mut queued = vec![false; nr];
        let mut queue: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
        match changed {
            None => {
                for r in 0..nr {
                    queued[r] = true;
                    queue.push_back(r);
                }
            }
            Some(vars) => {
                for &j in vars {
                    for &r in &self.var_rows[j] {
                        if !queued[r] {
                            queued[r] = true;
                            queue.push_back(r);
                        }
                    }
                }
            }
        }
        for j in 0..lb.len() {
            if lb[j] > ub[j] + 1e-9 * (1.0 + lb[j].abs()) {
                return Err(RowRef::Bound(j));
            }
        }
        let budget = self.max_passes * nr.max(1);
        let mut work = 0usize;
        while let Some(r) = queue.pop_front() {
            queued[r] = false;
            work += 1;
            if work > budget {
                break;
            }
            let row = &self.rows[r];
            let mut changed_vars: Vec<usize> = Vec::new();
            self.tighten_row(row, lb, ub, &mut changed_vars)?;
            for j in changed_vars {
                for &r2 in &self.var_rows[j] {
                    if r2 != r && !queued[r2] {
                        queued[r2] = true;
                        queue.push_back(r2);
                    }
                }
            }
        }
        Ok(())
    }

    fn tighten_row(&self, row: &RowView, lb: &mut [f64], ub: &mut [f64], changed: &mut Vec<usize>) -> Result<(), RowRef> {
        let (mut amin, mut amax) = (Activity::default(), Activity::default());
        let mut scale: f64 = row.rhs.abs();
        for (&j, &a) in row.cols.iter().zip(row.vals) {
            let (lo, hi) = if a > 0.0 { (a * lb[j], a * ub[j]) } else { (a * ub[j], a * lb[j]) };
            if lo.is_finite() {
                amin.fin += lo;
                scale = scale.max(lo.abs());
            } else {
                amin.n_inf += 1;
            }
            if hi.is_finite() {
                amax.fin += hi;
                scale = scale.max(hi.abs());
            } else {
                amax.n_inf += 1;
            }
        }
        let tol = 1e-9 * (1.0 + scale);
        if amin.n_inf == 0 && amin.fin > row.rhs + tol {
            return Err(row.id);
        }
        if row.eq && amax.n_inf == 0 && amax.fin < row.rhs - tol {
            return Err(row.id);
        }
        for (&j, &a) in row.cols.iter().zip(row.vals) {
            let (lo, hi) = if a > 0.0 { (a * lb[j], a * ub[j]) } else { (a * ub[j], a * lb[j]) };
            // activity of the other terms
            let rest_min = if lo.is_finite() {
                (amin.n_inf == 0).then(|| amin.fin - lo)
            } else {
                (amin.n_inf == 1).then_some(amin.fin)
            };
            let rest_max = if hi.is_finite() {
                (amax.n_inf == 0).then(|| amax.fin - hi)
            } else {
                (amax.n_inf == 1).then_some(amax.fin)
            };
            // a x_j ≤ rhs − rest_min
            if let Some(rm) = rest_min {
                let lim = (row.rhs - rm) / a;
                if a > 0.0 {
                    self.set_ub(j, lim, lb, ub, changed, row.id)?;
                } else {
                    self.set_lb(j, lim, lb, ub, changed, row.id)?;
                }
            }
            if row.eq {
                if let Some(rm) = rest_max {
                    let lim = (row.rhs - rm) / a;
                    if a > 0.0 {
                        self.set_lb(j, lim, lb, ub, changed, row.id)?;
                    } else {
                        self.set_ub(j, lim, lb, ub, changed, row.id)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn set_ub(&self, j: usize, v: f64, lb: &mut [f64], ub: &mut [f64], changed: &mut Vec<usize>, id: RowRef) -> Result<(), RowRef> {
        if !v.is_finite() {
            return Ok(());
        }
        let mut v = v + 1e-9 * (1.0 + v.abs());
        if self.is_bin[j] {
            v = if v < 1.0 - 1e-6 { 0.0 } else { 1.0 };
        }
        if v < ub[j] {
            let width = if lb[j].is_finite() && ub[j].is_finite() { ub[j] - lb[j] } else { f64::INFINITY };
            if ub[j].is_infinite() || (ub[j] - v) > 1e-6 * width.max(1e-3) || self.is_bin[j] {
                if v < lb[j] - 1e-7 * (1.0 + lb[j].abs()) {
                    return Err(id);
                }
                ub[j] = v.max(lb[j]);
                changed.push(j);
            }
        }
        Ok(())
    }

    fn set_lb(&self, j: usize, v: f64, lb: &mut [f64], ub: &mut [f64], changed: &mut Vec<usize>, id: RowRef) -> Result<(), RowRef> {
        if !v.is_finite() {
            return Ok(());
        }
        let mut v = v - 1e-9 * (1.0 + v.abs());
        if self.is_bin[j] {
            v = if v > 1e-6 { 1.0 } else { 0.0 };
        }
        if v > lb[j] {
            let width = if lb[j].is_finite() && ub[j].is_finite() { ub[j] - lb[j] } else { f64::INFINITY };
            if lb[j].is_infinite() || (v - lb[j]) > 1e-6 * width.max(1e-3) || self.is_bin[j] {
                if v > ub[j] + 1e-7 * (1.0 + ub[j].abs()) {
                    return Err(id);
                }
                lb[j] = v.min(ub[j]);
                changed.push(j);
            }
        }
        Ok(())
    }
}

/// Outcome of the root presolve.
#[derive(Debug, Clone)]
pub struct PresolveResult {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// binaries fixed by pair analysis or probing: (variable, value)
    pub fixed: Vec<(usize, f64)>,
    pub tightened_rows: usize,
}

/// Bounds induced by singleton inequality rows.
pub fn singleton_bounds(qp: &QuadraticProgram) -> (Vec<f64>, Vec<f64>) {
    let mut lb = qp.lb.clone();
    let mut ub = qp.ub.clone();
    for i in 0..qp.g_in.n_rows() {
        let (c, v) = qp.g_in.row(i);
        if c.len() == 1 {
            let (j, a) = (c[0], v[0]);
            let b = qp.h_in[i] / a;
            if a > 0.0 {
                ub[j] = ub[j].min(b);
            } else {
                lb[j] = lb[j].max(b);
            }
        }
    }
    (lb, ub)
}

/// Complementarity pair fixing. A binary is fixed when one of its values makes
/// some row unsatisfiable over the current box, or when one value dominates:
/// the binary is absent from the objective and equalities, and every row it
/// enters is either relaxed by that value or redundant at both values. The
/// latter covers pairs whose slack or multiplier has a zero-width range.
pub fn pair_fixing(qp: &QuadraticProgram, binaries: &[usize], lb: &mut [f64], ub: &mut [f64]) -> Vec<(usize, f64)> {
    let mut fixed = Vec::new();
    let cols = qp.g_in.columns();
    let eq_cols = qp.a_eq.columns();
    for &b in binaries {
        if lb[b] == ub[b] {
            continue;
        }
        let mut ok0 = true;
        let mut ok1 = true;
        let mut dom0 = qp.c[b] == 0.0 && qp.q.row(b).0.is_empty() && eq_cols[b].is_empty();
        let mut dom1 = dom0;
        for &(i, a) in &cols[b] {
            let (c, v) = qp.g_in.row(i);
            let (mut rmin, mut rmax) = (0.0, 0.0);
            for (&j, &aj) in c.iter().zip(v) {
                if j == b {
                    continue;
                }
                let (lo, hi) = if aj > 0.0 { (aj * lb[j], aj * ub[j]) } else { (aj * ub[j], aj * lb[j]) };
                rmin += lo;
                rmax += hi;
            }
            let h = qp.h_in[i];
            let tol = 1e-9 * (1.0 + h.abs());
            if rmin > h + tol {
                ok0 = false;
            }
            if rmin + a > h + tol {
                ok1 = false;
            }
            let redundant = rmax <= h + tol && rmax + a <= h + tol;
            if !redundant {
                if a < 0.0 {
                    dom0 = false;
                }
                if a > 0.0 {
                    dom1 = false;
                }
            }
        }
        let v = if !ok0 && ok1 {
            Some(1.0)
        } else if ok0 && !ok1 {
            Some(0.0)
        } else if !ok0 && !ok1 {
            None
        } else if dom0 {
            Some(0.0)
        } else if dom1 {
            Some(1.0)
        } else {
            None
        };
        if let Some(v) = v {
            lb[b] = v;
            ub[b] = v;
            fixed.push((b, v));
        }
    }
    fixed
}

/// Root presolve: propagation, pair fixing and probing on the binaries.
pub fn presolve(qp: &QuadraticProgram, binaries: &[usize], probing: bool) -> Result<PresolveResult, RowRef> {
    let (mut lb, mut ub) = singleton_bounds(qp);
    let prop = Propagator::new(qp, binaries);
    prop.propagate(&mut lb, &mut ub)?;
    let mut fixed = pair_fixing(qp, binaries, &mut lb, &mut ub);
    prop.propagate(&mut lb, &mut ub)?;
    if probing {
        for _round in 0..3 {
            let mut progress = false;
            for &b in binaries {
                if lb[b] == ub[b] {
                    continue;
                }
                let try_value = |v: f64| -> Option<(Vec<f64>, Vec<f64>)> {
                    let mut l = lb.clone();
                    let mut u = ub.clone();
                    l[b] = v;
                    u[b] = v;
                    prop.propagate_from(&mut l, &mut u, Some(&[b])).ok().map(|_| (l, u))
                };
                match (try_value(0.0), try_value(1.0)) {
                    (None, None) => return Err(RowRef::Bound(b)),
                    (None, Some((l, u))) | (Some((l, u)), None) => {
                        let v = l[b];
                        lb = l;
                        ub = u;
                        fixed.push((b, v));
                        progress = true;
                    }
                    (Some((l0, u0)), Some((l1, u1))) => {
                        for j in 0..lb.len() {
                            let nl = l0[j].min(l1[j]);
                            let nu = u0[j].max(u1[j]);
                            if nl > lb[j] + 1e-6 * (1.0 + lb[j].abs()) || nu < ub[j] - 1e-6 * (1.0 + ub[j].abs()) {
                                progress = true;
                            }
                            lb[j] = lb[j].max(nl);
                            ub[j] = ub[j].min(nu);
                        }
                    }
                }
            }
            if !progress {
                break;
            }
            prop.propagate(&mut lb, &mut ub)?;
        }
    }
    fixed.sort_by_key(|f| f.0);
    fixed.dedup_by_key(|f| f.0);
    Ok(PresolveResult { lb, ub, fixed, tightened_rows: 0 })
}

/// Tightens the coefficient of a binary in inequality rows of the form
/// rest + a·ν ≤ h using bounds on `rest`. Valid for ν ∈ {0, 1}; returns the
/// number of rows changed.
pub fn tighten_big_m(qp: &mut QuadraticProgram, binaries: &[usize], lb: &[f64], ub: &[f64]) -> usize {
    let mut is_bin = vec![false; qp.n()];
    for &b in binaries {
        is_bin[b] = true;
    }
    let mut out = SparseRows::empty(qp.n());
    let mut count = 0;
    for i in 0..qp.g_in.n_rows() {
        let (c, v) = qp.g_in.row(i);
        let bins: Vec<usize> = (0..c.len()).filter(|&k| is_bin[c[k]]).collect();
        let mut entries: Vec<(usize, f64)> = c.iter().copied().zip(v.iter().copied()).collect();
        if bins.len() == 1 && c.len() > 1 && lb[c[bins[0]]] != ub[c[bins[0]]] {
            let k = bins[0];
            let a = v[k];
            let mut rmax = 0.0;
            for (&j, &aj) in c.iter().zip(v) {
                if j != c[k] {
                    rmax += if aj > 0.0 { aj * ub[j] } else { aj * lb[j] };
                }
            }
            let h = qp.h_in[i];
            if rmax.is_finite() {
                if a > 0.0 {
                    // ν = 0 branch: rest ≤ h is loose by d
                    let d = h - rmax;
                    if d > 1e-9 * (1.0 + h.abs()) && d < a {
                        entries[k].1 = a - d;
                        qp.h_in[i] = h - d;
                        count += 1;
                    }
                } else {
                    // ν = 1 branch: rest ≤ h − a is loose by d
                    let d = h - a - rmax;
                    if d > 1e-9 * (1.0 + h.abs()) && d < -a {
                        entries[k].1 = a + d;
                        count += 1;
                    }
                }
            }
        }
        out.push_row(&entries);
    }
    qp.g_in = out;
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_tightens_sum() {
        // x + y = 1, x, y ≥ 0 → both ≤ 1
        let mut qp = QuadraticProgram::new(2);
        qp.a_eq.push_row(&[(0, 1.0), (1, 1.0)]);
        qp.b_eq.push(1.0);
        qp.lb = vec![0.0, 0.0];
        let (mut lb, mut ub) = (qp.lb.clone(), qp.ub.clone());
        Propagator::new(&qp, &[]).propagate(&mut lb, &mut ub).unwrap();
        assert!(ub[0] <= 1.0 + 1e-8 && ub[1] <= 1.0 + 1e-8);
    }

    #[test]
    fn propagation_detects_infeasibility() {
        let mut qp = QuadraticProgram::new(2);
        qp.g_in.push_row(&[(0, 1.0), (1, 1.0)]);
        qp.h_in.push(-1.0);
        qp.lb = vec![0.0, 0.0];
        let (mut lb, mut ub) = (qp.lb.clone(), qp.ub.clone());
        assert_eq!(Propagator::new(&qp, &[]).propagate(&mut lb, &mut ub), Err(RowRef::In(0)));
    }

    #[test]
    fn zero_width_slack_fixes_binary() {
        // slack s ∈ [0,0]: s − Mν ≤ 0 and λ + Mν ≤ M → ν free; row 1 loose at ν=0
        let m = 100.0;
        let mut qp = QuadraticProgram::new(3); // s, λ, ν
        qp.g_in.push_row(&[(0, 1.0), (2, -m)]);
        qp.g_in.push_row(&[(1, 1.0), (2, m)]);
        qp.h_in = vec![0.0, m];
        qp.lb = vec![0.0, 0.0, 0.0];
        qp.ub = vec![0.0, m, 1.0];
        let (mut lb, mut ub) = (qp.lb.clone(), qp.ub.clone());
        let f = pair_fixing(&qp, &[2], &mut lb, &mut ub);
        assert_eq!(f, vec![(2, 0.0)]);
    }

    #[test]
    fn big_m_tightening_uses_rest_bounds() {
        let mut qp = QuadraticProgram::new(2);
        qp.g_in.push_row(&[(0, 1.0), (1, 1000.0)]);
        qp.h_in.push(1000.0);
        let lb = vec![0.0, 0.0];
        let ub = vec![10.0, 1.0];
        assert_eq!(tighten_big_m(&mut qp, &[1], &lb, &ub), 1);
        // x + 10ν ≤ 10
        assert!((qp.g_in.get(0, 1) - 10.0).abs() < 1e-9);
        assert!((qp.h_in[0] - 10.0).abs() < 1e-9);
    }
}
