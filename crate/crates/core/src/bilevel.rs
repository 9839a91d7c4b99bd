//! Follower QP, its KKT system, big-M linearization and the single-level MIQP.

use std::fmt::Write as _;

use ies_optim::presolve::{Propagator, RowRef};
use ies_optim::qp::check_psd;
use ies_optim::{MiqpProblem, QpError, QuadraticProgram, SparseRows};
use thiserror::Error;

use crate::building::{cuttable_bounds, ComfortError, ZoneKind};
use crate::data::{ScenarioConfig, StorageKind};
use crate::network::LoadPath;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Comfort(#[from] ComfortError),
    #[error("negative box width for {family} at hour {hour}")]
    BadBox { family: &'static str, hour: usize },
    #[error("lower-level objective is not convex: {0}")]
    NotConvex(QpError),
    #[error("lower-level variable {0} has explicit bounds; bounds must be inequality rows")]
    BoundedLower(usize),
    #[error("shift budget {budget} cannot be met inside the hourly boxes [{lo}, {hi}]")]
    ShiftBudget { budget: f64, lo: f64, hi: f64 },
    #[error("infeasible {family} constraints")]
    Infeasible { family: String },
}

/// Hourly electricity and heat prices, $/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct Prices {
    pub electricity: Vec<f64>,
    pub heat: Vec<f64>,
}

impl Prices {
    pub fn flat(cfg: &ScenarioConfig) -> Prices {
        Prices {
            electricity: vec![cfg.price_bounds.e_mean; cfg.horizon],
            heat: vec![cfg.price_bounds.h_mean; cfg.horizon],
        }
    }
}

/// Feasible set of the follower for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandBounds {
    pub shift_min: Vec<f64>,
    pub shift_max: Vec<f64>,
    /// Required Σ shift.
    pub shift_total: f64,
    /// Residential and public cut limits per hour.
    pub cut_max: [Vec<f64>; 2],
    /// Hours where the base load cannot hold the comfort floor, per zone.
    pub comfort_flags: [Vec<usize>; 2],
}

pub fn demand_bounds(cfg: &ScenarioConfig, mode: u8) -> Result<DemandBounds, AssemblyError> {
    let t_n = cfg.horizon;
    let mut shift_min = Vec::with_capacity(t_n);
    let mut shift_max = Vec::with_capacity(t_n);
    for t in 0..t_n {
        let (lo, hi) = cfg.shift_box(t);
        if lo > hi {
            return Err(AssemblyError::BadBox { family: "shift", hour: t });
        }
        shift_min.push(lo);
        shift_max.push(hi);
    }
    let mut cut_max: [Vec<f64>; 2] = Default::default();
    let mut comfort_flags: [Vec<usize>; 2] = Default::default();
    for kind in ZoneKind::ALL {
        let b = cuttable_bounds(cfg.zone(kind), &cfg.comfort, cfg.base_heat(kind), &cfg.profile.t_outdoor, mode, cfg.dt)?;
        cut_max[kind.index()] = b.bounds;
        comfort_flags[kind.index()] = b.infeasible_hours;
    }
    let budget = cfg.shift_budget();
    let lo: f64 = shift_min.iter().sum();
    let hi: f64 = shift_max.iter().sum();
    if budget < lo - 1e-9 || budget > hi + 1e-9 {
        return Err(AssemblyError::ShiftBudget { budget, lo, hi });
    }
    Ok(DemandBounds { shift_min, shift_max, shift_total: budget, cut_max, comfort_flags })
}

/// Follower variables are ordered shift, residential cut, public cut; each block has T entries.
pub fn lower_index(block: usize, t: usize, horizon: usize) -> usize {
    block * horizon + t
}

/// Inequality rows come in six families (shift ≥ min, shift ≤ max, cut_res ≥ 0,
/// cut_res ≤ bound, cut_pub ≥ 0, cut_pub ≤ bound); row = family·T + t.
pub fn lower_row(family: usize, t: usize, horizon: usize) -> usize {
    family * horizon + t
}

/// Follower problem at fixed prices: objective value equals the user cost F.
pub fn build_lower_qp(cfg: &ScenarioConfig, prices: &Prices, bounds: &DemandBounds) -> Result<QuadraticProgram, AssemblyError> {
    let t_n = cfg.horizon;
    let n = 3 * t_n;
    let mut qp = QuadraticProgram::new(n);
    let psi = cfg.comfort_penalty_psi;
    let mut q_trip = Vec::new();
    for t in 0..t_n {
        qp.names[lower_index(0, t, t_n)] = format!("shift[{t}]");
        qp.names[lower_index(1, t, t_n)] = format!("cut_res[{t}]");
        qp.names[lower_index(2, t, t_n)] = format!("cut_pub[{t}]");
        qp.c[lower_index(0, t, t_n)] = prices.electricity[t];
        qp.c[lower_index(1, t, t_n)] = -prices.heat[t];
        qp.c[lower_index(2, t, t_n)] = -prices.heat[t];
        q_trip.push((lower_index(1, t, t_n), lower_index(1, t, t_n), 2.0 * psi));
        q_trip.push((lower_index(2, t, t_n), lower_index(2, t, t_n), 2.0 * psi));
        qp.constant += prices.electricity[t] * cfg.profile.p_load_base[t]
            + prices.heat[t] * (cfg.profile.h_load_res_base[t] + cfg.profile.h_load_pub_base[t]);
    }
    qp.q = SparseRows::from_triplets(n, n, &q_trip);
    let all: Vec<(usize, f64)> = (0..t_n).map(|t| (lower_index(0, t, t_n), 1.0)).collect();
    qp.a_eq.push_row(&all);
    qp.b_eq.push(bounds.shift_total);
    for family in 0..6 {
        let block = family / 2;
        let upper = family % 2 == 1;
        for t in 0..t_n {
            let (lo, hi) = match block {
                0 => (bounds.shift_min[t], bounds.shift_max[t]),
                b => (0.0, bounds.cut_max[b - 1][t]),
            };
            if lo > hi {
                return Err(AssemblyError::BadBox { family: ["shift", "cut_res", "cut_pub"][block], hour: t });
            }
            let j = lower_index(block, t, t_n);
            if upper {
                qp.g_in.push_row(&[(j, 1.0)]);
                qp.h_in.push(hi);
            } else {
                qp.g_in.push_row(&[(j, -1.0)]);
                qp.h_in.push(-lo);
            }
        }
    }
    Ok(qp)
}

/// Symbolic variable of the KKT system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    /// Follower primal variable.
    X(usize),
    /// Equality multiplier.
    Eps(usize),
    /// Inequality multiplier.
    Lam(usize),
    /// Complementarity binary.
    Nu(usize),
}

/// Qⱼx + cⱼ + Aⱼᵀε + Gⱼᵀλ = 0; `terms` omits cⱼ, which the caller supplies.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityRow {
    pub primal: usize,
    pub terms: Vec<(Sym, f64)>,
    pub c: f64,
}

/// slack = h_i − G_i x ≥ 0, λ_i ≥ 0, slack·λ_i = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityPair {
    pub row: usize,
    pub slack: Vec<(Sym, f64)>,
    pub slack_constant: f64,
    pub multiplier: Sym,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSystem {
    pub lower: QuadraticProgram,
    pub stationarity: Vec<StationarityRow>,
    pub pairs: Vec<ComplementarityPair>,
}

pub fn build_kkt(lower: &QuadraticProgram) -> Result<KktSystem, AssemblyError> {
    check_psd(&lower.q).map_err(AssemblyError::NotConvex)?;
    let n = lower.n();
    if let Some(j) = (0..n).find(|&j| lower.lb[j].is_finite() || lower.ub[j].is_finite()) {
        return Err(AssemblyError::BoundedLower(j));
    }
    let mut rows: Vec<StationarityRow> = (0..n).map(|j| StationarityRow { primal: j, terms: Vec::new(), c: lower.c[j] }).collect();
    for j in 0..n {
        let (cols, vals) = lower.q.row(j);
        for (&k, &v) in cols.iter().zip(vals) {
            rows[j].terms.push((Sym::X(k), v));
        }
    }
    for i in 0..lower.a_eq.n_rows() {
        let (cols, vals) = lower.a_eq.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            rows[j].terms.push((Sym::Eps(i), v));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..lower.g_in.n_rows() {
        let (cols, vals) = lower.g_in.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            rows[j].terms.push((Sym::Lam(i), v));
        }
        pairs.push(ComplementarityPair {
            row: i,
            slack: cols.iter().zip(vals).map(|(&j, &v)| (Sym::X(j), -v)).collect(),
            slack_constant: lower.h_in[i],
            multiplier: Sym::Lam(i),
        });
    }
    Ok(KktSystem { lower: lower.clone(), stationarity: rows, pairs })
}

/// A row Σ terms ≤ rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(Sym, f64)>,
    pub rhs: f64,
}

/// Two rows per pair: slack ≤ ν·M and multiplier ≤ (1 − ν)·M.
pub fn big_m_linearize(kkt: &KktSystem, m: f64) -> Vec<LinearRow> {
    let mut rows = Vec::with_capacity(2 * kkt.pairs.len());
    for p in &kkt.pairs {
        let nu = Sym::Nu(p.row);
        // h − Gx − Mν ≤ 0
        let mut terms: Vec<(Sym, f64)> = p.slack.clone();
        terms.push((nu, -m));
        rows.push(LinearRow { terms, rhs: -p.slack_constant });
        rows.push(LinearRow { terms: vec![(p.multiplier, 1.0), (nu, m)], rhs: m });
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceKind {
    Electricity,
    Heat,
}

/// Revenue with price·quantity products replaced through stationarity and
/// complementarity:
/// Σ price_terms·κ + Σ linear − xᵀQx.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutedRevenue {
    pub price_terms: Vec<(PriceKind, usize, f64)>,
    pub linear: Vec<(Sym, f64)>,
    /// Follower Q; enters the revenue as −xᵀQx.
    pub quad: SparseRows,
}

impl SubstitutedRevenue {
    pub fn evaluate(&self, prices: &Prices, x: &[f64], eps: &[f64], lam: &[f64]) -> f64 {
        let mut v = 0.0;
        for &(k, t, a) in &self.price_terms {
            v += a * match k {
                PriceKind::Electricity => prices.electricity[t],
                PriceKind::Heat => prices.heat[t],
            };
        }
        for &(s, a) in &self.linear {
            v += a * match s {
                Sym::X(j) => x[j],
                Sym::Eps(i) => eps[i],
                Sym::Lam(i) => lam[i],
                Sym::Nu(_) => 0.0,
            };
        }
        v - ies_optim::sparse::quad_form(&self.quad, x)
    }
}

/// Multiplying stationarity by x and using Ax = b, λᵀ(h − Gx) = 0 gives
/// cᵀx = −xᵀQx − bᵀε − hᵀλ, which removes every price·quantity product.
pub fn eliminate_bilinear_revenue(kkt: &KktSystem, cfg: &ScenarioConfig) -> SubstitutedRevenue {
    let mut price_terms = Vec::new();
    for t in 0..cfg.horizon {
        price_terms.push((PriceKind::Electricity, t, cfg.profile.p_load_base[t]));
        price_terms.push((PriceKind::Heat, t, cfg.profile.h_load_res_base[t] + cfg.profile.h_load_pub_base[t]));
    }
    let mut linear = Vec::new();
    for (i, &b) in kkt.lower.b_eq.iter().enumerate() {
        linear.push((Sym::Eps(i), -b));
    }
    for (i, &h) in kkt.lower.h_in.iter().enumerate() {
        linear.push((Sym::Lam(i), -h));
    }
    SubstitutedRevenue { price_terms, linear, quad: kkt.lower.q.clone() }
}

/// Price variable multiplying follower variable `j` in its linear cost, with sign.
fn price_of(j: usize, horizon: usize) -> (PriceKind, usize, f64) {
    let (block, t) = (j / horizon, j % horizon);
    if block == 0 {
        (PriceKind::Electricity, t, 1.0)
    } else {
        (PriceKind::Heat, t, -1.0)
    }
}

/// Incremental model construction with named variables and tagged rows.
#[derive(Debug, Default)]
struct Builder {
    names: Vec<String>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    c: Vec<f64>,
    q: Vec<(usize, usize, f64)>,
    constant: f64,
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    eq_tags: Vec<&'static str>,
    le: Vec<(Vec<(usize, f64)>, f64)>,
    le_tags: Vec<&'static str>,
}

impl Builder {
    fn var(&mut self, name: String, lb: f64, ub: f64) -> usize {
        self.names.push(name);
        self.lb.push(lb);
        self.ub.push(ub);
        self.c.push(0.0);
        self.names.len() - 1
    }

    fn vars(&mut self, prefix: &str, n: usize, lb: f64, ub: f64) -> Vec<usize> {
        (0..n).map(|t| self.var(format!("{prefix}[{t}]"), lb, ub)).collect()
    }

    fn eq(&mut self, tag: &'static str, row: Vec<(usize, f64)>, rhs: f64) {
        self.eq.push((row, rhs));
        self.eq_tags.push(tag);
    }

    fn le(&mut self, tag: &'static str, row: Vec<(usize, f64)>, rhs: f64) {
        self.le.push((row, rhs));
        self.le_tags.push(tag);
    }

    /// Adds ½·coef·x_i·x_j + ½·coef·x_j·x_i (i.e. coef·x_i·x_j for i ≠ j, ½·coef·x_i² for i = j).
    fn quad(&mut self, i: usize, j: usize, coef: f64) {
        self.q.push((i, j, coef));
        if i != j {
            self.q.push((j, i, coef));
        }
    }

    fn build(self) -> (QuadraticProgram, Vec<&'static str>, Vec<&'static str>) {
        let n = self.names.len();
        let mut qp = QuadraticProgram::new(n);
        qp.names = self.names;
        qp.lb = self.lb;
        qp.ub = self.ub;
        qp.c = self.c;
        qp.constant = self.constant;
        qp.q = SparseRows::from_triplets(n, n, &self.q);
        for (row, rhs) in self.eq {
            qp.a_eq.push_row(&row);
            qp.b_eq.push(rhs);
        }
        for (row, rhs) in self.le {
            qp.g_in.push_row(&row);
            qp.h_in.push(rhs);
        }
        (qp, self.eq_tags, self.le_tags)
    }
}

/// Variable indices of an assembled model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub horizon: usize,
    pub ke: Vec<usize>,
    pub kh: Vec<usize>,
    pub tp_p: Vec<Vec<usize>>,
    pub tp_r: Vec<Vec<usize>>,
    pub chp_p: Vec<Vec<usize>>,
    pub chp_h: Vec<Vec<usize>>,
    pub chp_r: Vec<Vec<usize>>,
    pub st_ch: Vec<Vec<usize>>,
    pub st_dis: Vec<Vec<usize>>,
    pub st_soc: Vec<Vec<usize>>,
    /// Empty for heat storage.
    pub st_r: Vec<Vec<usize>>,
    pub ren: Vec<Vec<usize>>,
    pub p_eb: Vec<usize>,
    pub qsrc: [Vec<usize>; 2],
    pub shift: Vec<usize>,
    pub cut: [Vec<usize>; 2],
    pub eps: Vec<usize>,
    /// Indexed by lower-level inequality row.
    pub lam: Vec<usize>,
    pub nu: Vec<usize>,
}

impl Layout {
    /// Model index of a follower variable in lower-level order.
    pub fn follower(&self, j: usize) -> usize {
        let t_n = self.horizon;
        match j / t_n {
            0 => self.shift[j % t_n],
            b => self.cut[b - 1][j % t_n],
        }
    }

    fn sym(&self, s: Sym) -> usize {
        match s {
            Sym::X(j) => self.follower(j),
            Sym::Eps(i) => self.eps[i],
            Sym::Lam(i) => self.lam[i],
            Sym::Nu(i) => self.nu[i],
        }
    }

    fn price(&self, k: PriceKind, t: usize) -> usize {
        match k {
            PriceKind::Electricity => self.ke[t],
            PriceKind::Heat => self.kh[t],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// KKT-reformulated Stackelberg game.
    Bilevel,
    /// Operator decides demand response directly at fixed prices.
    SingleLayer,
    /// Generation only, with prices and demand response fixed.
    Dispatch,
}

/// An assembled optimization model with everything needed to read its solution.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub problem: MiqpProblem,
    pub layout: Layout,
    pub bounds: DemandBounds,
    pub eq_tags: Vec<&'static str>,
    pub in_tags: Vec<&'static str>,
    pub big_m: f64,
    pub kkt: Option<KktSystem>,
    pub revenue: Option<SubstitutedRevenue>,
    /// Reserve requirement per hour, MW.
    pub reserve_req: Vec<f64>,
    /// Load paths per zone.
    pub paths: [Vec<LoadPath>; 2],
}

/// z·Σ σ_frac·forecast per hour.
pub fn reserve_requirements(cfg: &ScenarioConfig) -> Vec<f64> {
    (0..cfg.horizon)
        .map(|t| cfg.reserve_z * cfg.renewables.iter().map(|r| r.forecast_sigma_frac * r.forecast(&cfg.profile, t)).sum::<f64>())
        .collect()
}

/// Leader-side physical model: units, storage, renewables, balances, network,
/// reserve and the operating cost. Follower variables are left free for the
/// follower rows to constrain, or fixed when `fixed_response` is given.
fn add_physical(b: &mut Builder, cfg: &ScenarioConfig, fixed_response: Option<&[f64]>) -> Layout {
    let t_n = cfg.horizon;
    let dt = cfg.dt;
    let mut l = Layout { horizon: t_n, ..Default::default() };
    let pb = &cfg.price_bounds;
    l.ke = b.vars("ke", t_n, pb.e_min, pb.e_max);
    l.kh = b.vars("kh", t_n, pb.h_min, pb.h_max);

    for (u, unit) in cfg.thermal.iter().enumerate() {
        let p = b.vars(&format!("tp_p{u}"), t_n, unit.p_min, unit.p_max);
        let r = b.vars(&format!("tp_r{u}"), t_n, 0.0, unit.ramp_up.min(unit.p_max - unit.p_min));
        for t in 0..t_n {
            b.quad(p[t], p[t], 2.0 * unit.cost_a * dt);
            b.c[p[t]] += unit.cost_b * dt;
            b.constant += unit.cost_c * dt;
            b.c[r[t]] += unit.reserve_factor * dt;
            b.le("reserve headroom", vec![(p[t], 1.0), (r[t], 1.0)], unit.p_max);
            if t > 0 {
                b.le("ramp", vec![(p[t], 1.0), (p[t - 1], -1.0)], unit.ramp_up * dt);
                b.le("ramp", vec![(p[t - 1], 1.0), (p[t], -1.0)], unit.ramp_down * dt);
            }
        }
        l.tp_p.push(p);
        l.tp_r.push(r);
    }
    for (u, unit) in cfg.chp.iter().enumerate() {
        let p = b.vars(&format!("chp_p{u}"), t_n, unit.p_min, unit.p_max);
        let h = b.vars(&format!("chp_h{u}"), t_n, 0.0, unit.h_max);
        let r = b.vars(&format!("chp_r{u}"), t_n, 0.0, unit.ramp_up.min(unit.p_max - unit.p_min));
        let (a, cv) = (unit.cost_a, unit.cv_ratio);
        for t in 0..t_n {
            b.quad(p[t], p[t], 2.0 * a * dt);
            b.quad(p[t], h[t], 2.0 * a * cv * dt);
            b.quad(h[t], h[t], 2.0 * a * cv * cv * dt);
            b.c[p[t]] += unit.cost_b * dt;
            b.c[h[t]] += unit.cost_b * cv * dt;
            b.constant += unit.cost_c * dt;
            b.c[r[t]] += unit.reserve_factor * dt;
            b.le("reserve headroom", vec![(p[t], 1.0), (r[t], 1.0)], unit.p_max);
            if t > 0 {
                b.le("ramp", vec![(p[t], 1.0), (p[t - 1], -1.0)], unit.ramp_up * dt);
                b.le("ramp", vec![(p[t - 1], 1.0), (p[t], -1.0)], unit.ramp_down * dt);
            }
        }
        l.chp_p.push(p);
        l.chp_h.push(h);
        l.chp_r.push(r);
    }
    for (s, st) in cfg.storages.iter().enumerate() {
        let tag = match st.kind {
            StorageKind::Electric => "es",
            StorageKind::Heat => "hs",
        };
        let ch = b.vars(&format!("{tag}{s}_ch"), t_n, 0.0, st.charge_max);
        let dis = b.vars(&format!("{tag}{s}_dis"), t_n, 0.0, st.discharge_max);
        let soc = b.vars(&format!("{tag}{s}_soc"), t_n, st.soc_min, st.soc_max);
        let init = st.soc_min + cfg.soc_init_frac * (st.soc_max - st.soc_min);
        for t in 0..t_n {
            b.c[ch[t]] += st.cycle_cost * dt;
            b.c[dis[t]] += st.cycle_cost * dt;
            let mut row = vec![(soc[t], 1.0), (ch[t], -st.eta_charge * dt), (dis[t], dt / st.eta_discharge)];
            let rhs = if t == 0 {
                init
            } else {
                row.push((soc[t - 1], -1.0));
                0.0
            };
            b.eq("storage balance", row, rhs);
        }
        b.eq("terminal storage", vec![(soc[t_n - 1], 1.0)], init);
        let r = if st.kind == StorageKind::Electric {
            let r = b.vars(&format!("{tag}{s}_r"), t_n, 0.0, st.discharge_max);
            for t in 0..t_n {
                b.c[r[t]] += st.reserve_factor * dt;
                b.le("reserve headroom", vec![(r[t], 1.0), (dis[t], 1.0)], st.discharge_max);
                b.le("reserve energy", vec![(r[t], dt / st.eta_discharge), (soc[t], -1.0)], -st.soc_min);
            }
            r
        } else {
            Vec::new()
        };
        l.st_ch.push(ch);
        l.st_dis.push(dis);
        l.st_soc.push(soc);
        l.st_r.push(r);
    }
    for (k, plant) in cfg.renewables.iter().enumerate() {
        let v: Vec<usize> = (0..t_n)
            .map(|t| b.var(format!("ren{k}[{t}]"), 0.0, plant.forecast(&cfg.profile, t)))
            .collect();
        l.ren.push(v);
    }
    if cfg.boiler.enabled {
        l.p_eb = b.vars("p_eb", t_n, 0.0, cfg.boiler.capacity);
    }
    for kind in ZoneKind::ALL {
        let net = &cfg.networks[kind.index()];
        let (lo, hi) = net.source_heat_range();
        l.qsrc[kind.index()] = b.vars(&format!("qsrc_{}", kind.as_str()), t_n, lo, hi);
    }
    match fixed_response {
        Some(x) => {
            l.shift = (0..t_n).map(|t| b.var(format!("shift[{t}]"), x[t], x[t])).collect();
            for z in 0..2 {
                let name = ["cut_res", "cut_pub"][z];
                l.cut[z] = (0..t_n).map(|t| b.var(format!("{name}[{t}]"), x[(z + 1) * t_n + t], x[(z + 1) * t_n + t])).collect();
            }
        }
        None => {
            l.shift = b.vars("shift", t_n, f64::NEG_INFINITY, f64::INFINITY);
            l.cut[0] = b.vars("cut_res", t_n, f64::NEG_INFINITY, f64::INFINITY);
            l.cut[1] = b.vars("cut_pub", t_n, f64::NEG_INFINITY, f64::INFINITY);
        }
    }

    let req = reserve_requirements(cfg);
    for t in 0..t_n {
        // electric balance
        let mut row = Vec::new();
        for p in l.tp_p.iter().chain(&l.chp_p).chain(&l.ren) {
            row.push((p[t], 1.0));
        }
        for (s, st) in cfg.storages.iter().enumerate() {
            if st.kind == StorageKind::Electric {
                row.push((l.st_dis[s][t], 1.0));
                row.push((l.st_ch[s][t], -1.0));
            }
        }
        if cfg.boiler.enabled {
            row.push((l.p_eb[t], -1.0));
        }
        row.push((l.shift[t], -1.0));
        b.eq("power balance", row, cfg.profile.p_load_base[t]);

        // heat balance at the sources
        let mut row = Vec::new();
        for h in &l.chp_h {
            row.push((h[t], 1.0));
        }
        for (s, st) in cfg.storages.iter().enumerate() {
            if st.kind == StorageKind::Heat {
                row.push((l.st_dis[s][t], 1.0));
                row.push((l.st_ch[s][t], -1.0));
            }
        }
        if cfg.boiler.enabled {
            row.push((l.p_eb[t], cfg.boiler.efficiency));
        }
        row.push((l.qsrc[0][t], -1.0));
        row.push((l.qsrc[1][t], -1.0));
        b.eq("heat balance", row, 0.0);

        // reserve adequacy
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in l.tp_r.iter().chain(&l.chp_r).chain(l.st_r.iter().filter(|r| !r.is_empty())) {
            row.push((r[t], -1.0));
        }
        b.le("reserve requirement", row, -req[t]);
    }

    // network transport: injection at hour s reaches each load after its path delay
    let mut paths: [Vec<LoadPath>; 2] = Default::default();
    for kind in ZoneKind::ALL {
        let z = kind.index();
        let net = &cfg.networks[z];
        paths[z] = net.load_paths(dt);
        let sup = net.supply_losses(t_n);
        let ret = net.return_losses(t_n);
        let base = cfg.base_heat(kind);
        for s in 0..t_n {
            let mut row = vec![(l.qsrc[z][s], 1.0)];
            let mut rhs = sup[s] + ret[s];
            for p in &paths[z] {
                let t = (s + p.delay) % t_n;
                row.push((l.cut[z][t], p.flow_share));
                rhs += p.flow_share * base[t];
            }
            b.eq("network heat", row, rhs);
        }
    }
    l
}

/// Follower feasibility rows (budget equality and the six box families).
fn add_follower_rows(b: &mut Builder, l: &Layout, lower: &QuadraticProgram) {
    for i in 0..lower.a_eq.n_rows() {
        let (c, v) = lower.a_eq.row(i);
        b.eq("shift budget", c.iter().zip(v).map(|(&j, &a)| (l.follower(j), a)).collect(), lower.b_eq[i]);
    }
    for i in 0..lower.g_in.n_rows() {
        let (c, v) = lower.g_in.row(i);
        b.le("demand response box", c.iter().zip(v).map(|(&j, &a)| (l.follower(j), a)).collect(), lower.h_in[i]);
    }
}

fn add_price_means(b: &mut Builder, cfg: &ScenarioConfig, l: &Layout) {
    let t_n = cfg.horizon as f64;
    b.eq("price mean", l.ke.iter().map(|&i| (i, 1.0)).collect(), cfg.price_bounds.e_mean * t_n);
    b.eq("price mean", l.kh.iter().map(|&i| (i, 1.0)).collect(), cfg.price_bounds.h_mean * t_n);
}

fn check_propagation(qp: &QuadraticProgram, binaries: &[usize], eq_tags: &[&'static str], in_tags: &[&'static str]) -> Result<(), AssemblyError> {
    let prop = Propagator::new(qp, binaries);
    let (mut lb, mut ub) = (qp.lb.clone(), qp.ub.clone());
    for &j in binaries {
        lb[j] = lb[j].max(0.0);
        ub[j] = ub[j].min(1.0);
    }
    prop.propagate(&mut lb, &mut ub).map_err(|r| AssemblyError::Infeasible {
        family: match r {
            RowRef::Eq(i) => eq_tags[i].to_string(),
            RowRef::In(i) => in_tags[i].to_string(),
            RowRef::Bound(j) => format!("bounds of {}", qp.names[j]),
        },
    })
}

/// Stackelberg game as a single-level convex MIQP (minimizes the negated leader profit).
pub fn assemble_single_level(cfg: &ScenarioConfig, mode: u8) -> Result<Model, AssemblyError> {
    let bounds = demand_bounds(cfg, mode)?;
    let t_n = cfg.horizon;
    let lower = build_lower_qp(cfg, &Prices::flat(cfg), &bounds)?;
    let kkt = build_kkt(&lower)?;
    let revenue = eliminate_bilinear_revenue(&kkt, cfg);
    let m = cfg.big_m;

    let mut b = Builder::default();
    let mut l = add_physical(&mut b, cfg, None);
    add_price_means(&mut b, cfg, &l);
    add_follower_rows(&mut b, &l, &lower);
    l.eps = (0..lower.a_eq.n_rows()).map(|i| b.var(format!("eps{i}"), f64::NEG_INFINITY, f64::INFINITY)).collect();
    let fam_names = ["lam1", "lam2", "lam3", "lam4", "lam5", "lam6"];
    for i in 0..lower.g_in.n_rows() {
        let (f, t) = (i / t_n, i % t_n);
        l.lam.push(b.var(format!("{}[{t}]", fam_names[f]), 0.0, m));
    }
    for i in 0..lower.g_in.n_rows() {
        let (f, t) = (i / t_n, i % t_n);
        l.nu.push(b.var(format!("nu{}[{t}]", f + 1), 0.0, 1.0));
    }
    for row in &kkt.stationarity {
        let (k, t, sign) = price_of(row.primal, t_n);
        let mut entries = vec![(l.price(k, t), sign)];
        entries.extend(row.terms.iter().map(|&(s, a)| (l.sym(s), a)));
        b.eq("stationarity", entries, 0.0);
    }
    for row in big_m_linearize(&kkt, m) {
        b.le("complementarity", row.terms.iter().map(|&(s, a)| (l.sym(s), a)).collect(), row.rhs);
    }
    // objective: operating cost − substituted revenue
    for &(k, t, a) in &revenue.price_terms {
        b.c[l.price(k, t)] -= a;
    }
    for &(s, a) in &revenue.linear {
        b.c[l.sym(s)] -= a;
    }
    for i in 0..revenue.quad.n_rows() {
        let (cols, vals) = revenue.quad.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            // +xᵀQx = ½xᵀ(2Q)x
            b.q.push((l.follower(i), l.follower(j), 2.0 * v));
        }
    }
    let (qp, eq_tags, in_tags) = b.build();
    let binaries = l.nu.clone();
    check_propagation(&qp, &binaries, &eq_tags, &in_tags)?;
    Ok(Model {
        kind: ModelKind::Bilevel,
        problem: MiqpProblem { qp, binaries },
        layout: l,
        bounds,
        eq_tags,
        in_tags,
        big_m: m,
        kkt: Some(kkt),
        revenue: Some(revenue),
        reserve_req: reserve_requirements(cfg),
        paths: paths_of(cfg),
    })
}

fn paths_of(cfg: &ScenarioConfig) -> [Vec<LoadPath>; 2] {
    [cfg.networks[0].load_paths(cfg.dt), cfg.networks[1].load_paths(cfg.dt)]
}

/// Time-of-use prices: hours split into load terciles priced at 0.75, 1 and
/// 1.25 times the mean, rescaled so the means hold exactly.
pub fn time_of_use_prices(cfg: &ScenarioConfig) -> Prices {
    let t_n = cfg.horizon;
    let heat: Vec<f64> = (0..t_n).map(|t| cfg.profile.h_load_res_base[t] + cfg.profile.h_load_pub_base[t]).collect();
    let tiers = |load: &[f64], mean: f64, lo: f64, hi: f64| -> Vec<f64> {
        let mut order: Vec<usize> = (0..t_n).collect();
        order.sort_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b)));
        let mut f = vec![0.0; t_n];
        for (rank, &t) in order.iter().enumerate() {
            f[t] = [0.75, 1.0, 1.25][(3 * rank / t_n).min(2)];
        }
        let raw: Vec<f64> = f.iter().map(|v| v * mean).collect();
        project_to_mean(&raw, lo, hi, mean)
    };
    let pb = &cfg.price_bounds;
    Prices {
        electricity: tiers(&cfg.profile.p_load_base, pb.e_mean, pb.e_min, pb.e_max),
        heat: tiers(&heat, pb.h_mean, pb.h_min, pb.h_max),
    }
}

/// Euclidean projection onto {lo ≤ κ ≤ hi, mean(κ) = mean}: κ = clip(raw + s).
pub fn project_to_mean(raw: &[f64], lo: f64, hi: f64, mean: f64) -> Vec<f64> {
    let target = mean * raw.len() as f64;
    let sum_at = |s: f64| raw.iter().map(|v| (v + s).clamp(lo, hi)).sum::<f64>();
    let (mut a, mut b) = (lo - hi - 1.0, hi - lo + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if sum_at(mid) < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let s = 0.5 * (a + b);
    let mut out: Vec<f64> = raw.iter().map(|v| (v + s).clamp(lo, hi)).collect();
    // put the rounding remainder on the component farthest from its bounds
    let err = target - out.iter().sum::<f64>();
    if let Some(k) = (0..out.len()).max_by(|&i, &j| {
        let room = |v: f64| (v - lo).min(hi - v);
        room(out[i]).total_cmp(&room(out[j])).then(j.cmp(&i))
    }) {
        out[k] = (out[k] + err).clamp(lo, hi);
    }
    out
}

/// Single-layer baseline: the operator picks demand response directly at
/// fixed time-of-use prices, paying the users' comfort penalty.
pub fn build_single_layer_model(cfg: &ScenarioConfig) -> Result<Model, AssemblyError> {
    let prices = time_of_use_prices(cfg);
    build_fixed_price_model(cfg, 6, &prices)
}

pub fn build_fixed_price_model(cfg: &ScenarioConfig, mode: u8, prices: &Prices) -> Result<Model, AssemblyError> {
    let bounds = demand_bounds(cfg, mode)?;
    let t_n = cfg.horizon;
    let lower = build_lower_qp(cfg, prices, &bounds)?;
    let mut b = Builder::default();
    let l = add_physical(&mut b, cfg, None);
    fix_prices(&mut b, &l, prices);
    add_follower_rows(&mut b, &l, &lower);
    // leader maximizes revenue minus comfort loss, i.e. minimizes minus the
    // follower's linear part plus the same quadratic
    for j in 0..3 * t_n {
        b.c[l.follower(j)] -= lower.c[j];
    }
    b.constant -= lower.constant;
    for i in 0..lower.q.n_rows() {
        let (cols, vals) = lower.q.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            b.q.push((l.follower(i), l.follower(j), v));
        }
    }
    finish_plain(cfg, b, l, bounds, ModelKind::SingleLayer)
}

fn fix_prices(b: &mut Builder, l: &Layout, prices: &Prices) {
    for t in 0..l.horizon {
        b.lb[l.ke[t]] = prices.electricity[t];
        b.ub[l.ke[t]] = prices.electricity[t];
        b.lb[l.kh[t]] = prices.heat[t];
        b.ub[l.kh[t]] = prices.heat[t];
    }
}

fn finish_plain(cfg: &ScenarioConfig, b: Builder, l: Layout, bounds: DemandBounds, kind: ModelKind) -> Result<Model, AssemblyError> {
    let (qp, eq_tags, in_tags) = b.build();
    check_propagation(&qp, &[], &eq_tags, &in_tags)?;
    Ok(Model {
        kind,
        problem: MiqpProblem { qp, binaries: Vec::new() },
        layout: l,
        bounds,
        eq_tags,
        in_tags,
        big_m: cfg.big_m,
        kkt: None,
        revenue: None,
        reserve_req: reserve_requirements(cfg),
        paths: paths_of(cfg),
    })
}

/// Generation-only model for a fixed price vector and follower response
/// (lower-level order); its optimum is the least operating cost.
pub fn build_dispatch_model(cfg: &ScenarioConfig, mode: u8, prices: &Prices, response: &[f64]) -> Result<Model, AssemblyError> {
    let bounds = demand_bounds(cfg, mode)?;
    let mut b = Builder::default();
    let l = add_physical(&mut b, cfg, Some(response));
    fix_prices(&mut b, &l, prices);
    let (qp, eq_tags, in_tags) = b.build();
    Ok(Model {
        kind: ModelKind::Dispatch,
        problem: MiqpProblem { qp, binaries: Vec::new() },
        layout: l,
        bounds,
        eq_tags,
        in_tags,
        big_m: cfg.big_m,
        kkt: None,
        revenue: None,
        reserve_req: reserve_requirements(cfg),
        paths: paths_of(cfg),
    })
}

/// Primal schedule read back from a model solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSolution {
    pub horizon: usize,
    pub prices: Prices,
    pub tp_p: Vec<Vec<f64>>,
    pub tp_r: Vec<Vec<f64>>,
    pub chp_p: Vec<Vec<f64>>,
    pub chp_h: Vec<Vec<f64>>,
    pub chp_r: Vec<Vec<f64>>,
    pub st_ch: Vec<Vec<f64>>,
    pub st_dis: Vec<Vec<f64>>,
    pub st_soc: Vec<Vec<f64>>,
    pub st_r: Vec<Vec<f64>>,
    pub renewable: Vec<Vec<f64>>,
    pub p_eb: Vec<f64>,
    pub q_source: [Vec<f64>; 2],
    pub shift: Vec<f64>,
    pub cut: [Vec<f64>; 2],
    pub eps: Vec<f64>,
    /// Multipliers in lower-level row order (zero for models without KKT rows).
    pub lam: Vec<f64>,
    pub nu: Vec<f64>,
    /// Model objective at the solution.
    pub objective: f64,
    /// Full model vector.
    pub x: Vec<f64>,
}

impl ScheduleSolution {
    /// Follower decision in lower-level order.
    pub fn response(&self) -> Vec<f64> {
        let mut v = self.shift.clone();
        v.extend_from_slice(&self.cut[0]);
        v.extend_from_slice(&self.cut[1]);
        v
    }
}

pub fn extract_solution(model: &Model, x: &[f64]) -> ScheduleSolution {
    let l = &model.layout;
    let pick = |v: &[usize]| v.iter().map(|&i| x[i]).collect::<Vec<f64>>();
    let pick2 = |v: &[Vec<usize>]| v.iter().map(|s| pick(s)).collect::<Vec<_>>();
    let t_n = l.horizon;
    ScheduleSolution {
        horizon: t_n,
        prices: Prices { electricity: pick(&l.ke), heat: pick(&l.kh) },
        tp_p: pick2(&l.tp_p),
        tp_r: pick2(&l.tp_r),
        chp_p: pick2(&l.chp_p),
        chp_h: pick2(&l.chp_h),
        chp_r: pick2(&l.chp_r),
        st_ch: pick2(&l.st_ch),
        st_dis: pick2(&l.st_dis),
        st_soc: pick2(&l.st_soc),
        st_r: l.st_r.iter().map(|r| if r.is_empty() { vec![0.0; t_n] } else { pick(r) }).collect(),
        renewable: pick2(&l.ren),
        p_eb: if l.p_eb.is_empty() { vec![0.0; t_n] } else { pick(&l.p_eb) },
        q_source: [pick(&l.qsrc[0]), pick(&l.qsrc[1])],
        shift: pick(&l.shift),
        cut: [pick(&l.cut[0]), pick(&l.cut[1])],
        eps: pick(&l.eps),
        lam: if l.lam.is_empty() { vec![0.0; 6 * t_n] } else { pick(&l.lam) },
        nu: if l.nu.is_empty() { vec![0.0; 6 * t_n] } else { pick(&l.nu) },
        objective: model.problem.qp.objective(x),
        x: x.to_vec(),
    }
}

/// Literal evaluation of the profit terms from the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    /// Σ κ_e(P_L0 + shift) + κ_h(H_L0 − cuts): operator income, user energy cost.
    pub c_prof: f64,
    /// Fuel, reserve and storage cycling cost.
    pub c_opf: f64,
    /// c_prof − c_opf
    pub leader_profit: f64,
    /// User cost: c_prof + comfort penalty.
    pub follower_cost: f64,
    pub comfort_penalty: f64,
    pub fuel_chp: f64,
    pub fuel_tp: f64,
    pub reserve_cost: f64,
    pub storage_cost: f64,
}

pub fn objective_value_direct(sol: &ScheduleSolution, cfg: &ScenarioConfig) -> ObjectiveBreakdown {
    let dt = cfg.dt;
    let mut fuel_tp = 0.0;
    let mut fuel_chp = 0.0;
    let mut reserve_cost = 0.0;
    let mut storage_cost = 0.0;
    for t in 0..sol.horizon {
        for (u, unit) in cfg.thermal.iter().enumerate() {
            fuel_tp += unit.fuel_cost(sol.tp_p[u][t]) * dt;
            reserve_cost += unit.reserve_factor * sol.tp_r[u][t] * dt;
        }
        for (u, unit) in cfg.chp.iter().enumerate() {
            fuel_chp += unit.fuel_cost(sol.chp_p[u][t], sol.chp_h[u][t]) * dt;
            reserve_cost += unit.reserve_factor * sol.chp_r[u][t] * dt;
        }
        for (s, st) in cfg.storages.iter().enumerate() {
            storage_cost += st.cycle_cost * (sol.st_ch[s][t] + sol.st_dis[s][t]) * dt;
            reserve_cost += st.reserve_factor * sol.st_r[s][t] * dt;
        }
    }
    let c_opf = fuel_tp + fuel_chp + reserve_cost + storage_cost;
    let p = &cfg.profile;
    let mut c_prof = 0.0;
    let mut comfort_penalty = 0.0;
    for t in 0..sol.horizon {
        c_prof += sol.prices.electricity[t] * (p.p_load_base[t] + sol.shift[t])
            + sol.prices.heat[t] * (p.h_load_res_base[t] - sol.cut[0][t] + p.h_load_pub_base[t] - sol.cut[1][t]);
        comfort_penalty += cfg.comfort_penalty_psi * (sol.cut[0][t].powi(2) + sol.cut[1][t].powi(2));
    }
    ObjectiveBreakdown {
        c_prof,
        c_opf,
        leader_profit: c_prof - c_opf,
        follower_cost: c_prof + comfort_penalty,
        comfort_penalty,
        fuel_chp,
        fuel_tp,
        reserve_cost,
        storage_cost,
    }
}

/// Text dump: variables, objective, constraint rows and the binary set.
pub fn dump_model(model: &Model) -> String {
    let qp = &model.problem.qp;
    let mut s = String::new();
    let _ = writeln!(s, "# variables {}", qp.n());
    let _ = writeln!(s, "# index name lb ub c");
    for j in 0..qp.n() {
        let _ = writeln!(s, "var {j} {} {} {} {}", qp.names[j], qp.lb[j], qp.ub[j], qp.c[j]);
    }
    let _ = writeln!(s, "# objective constant {}", qp.constant);
    let _ = writeln!(s, "# quadratic entries {} (row col value, full symmetric)", qp.q.nnz());
    for i in 0..qp.n() {
        let (c, v) = qp.q.row(i);
        for (&j, &a) in c.iter().zip(v) {
            let _ = writeln!(s, "q {i} {j} {a}");
        }
    }
    let row_text = |m: &SparseRows, i: usize| -> String {
        let (c, v) = m.row(i);
        c.iter().zip(v).map(|(j, a)| format!("{a}*{}", qp.names[*j])).collect::<Vec<_>>().join(" + ")
    };
    let _ = writeln!(s, "# equalities {}", qp.a_eq.n_rows());
    for i in 0..qp.a_eq.n_rows() {
        let _ = writeln!(s, "eq {i} [{}] {} = {}", model.eq_tags[i], row_text(&qp.a_eq, i), qp.b_eq[i]);
    }
    let _ = writeln!(s, "# inequalities {}", qp.g_in.n_rows());
    for i in 0..qp.g_in.n_rows() {
        let _ = writeln!(s, "le {i} [{}] {} <= {}", model.in_tags[i], row_text(&qp.g_in, i), qp.h_in[i]);
    }
    let _ = writeln!(s, "# binaries {}", model.problem.binaries.len());
    for &j in &model.problem.binaries {
        let _ = writeln!(s, "bin {j} {}", qp.names[j]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_config;

    #[test]
    fn lower_qp_shape() {
        let cfg = reference_config();
        let bounds = demand_bounds(&cfg, 5).unwrap();
        let qp = build_lower_qp(&cfg, &Prices::flat(&cfg), &bounds).unwrap();
        assert_eq!(qp.n(), 72);
        assert_eq!(qp.a_eq.n_rows(), 1);
        assert_eq!(qp.g_in.n_rows(), 48 + 96);
        let kkt = build_kkt(&qp).unwrap();
        assert_eq!(kkt.pairs.len(), 144);
        assert_eq!(kkt.stationarity.len(), 72);
        assert_eq!(big_m_linearize(&kkt, 1e5).len(), 288);
    }

    #[test]
    fn stationarity_families() {
        let cfg = reference_config();
        let bounds = demand_bounds(&cfg, 5).unwrap();
        let qp = build_lower_qp(&cfg, &Prices::flat(&cfg), &bounds).unwrap();
        let kkt = build_kkt(&qp).unwrap();
        let t_n = cfg.horizon;
        // shift row: κ_e + ε − λ1 + λ2
        let r = &kkt.stationarity[3];
        assert_eq!(r.c, cfg.price_bounds.e_mean);
        assert_eq!(r.terms, vec![(Sym::Eps(0), 1.0), (Sym::Lam(3), -1.0), (Sym::Lam(t_n + 3), 1.0)]);
        // residential cut row: 2ψH − κ_h − λ3 + λ4
        let r = &kkt.stationarity[t_n + 5];
        assert_eq!(r.c, -cfg.price_bounds.h_mean);
        assert_eq!(
            r.terms,
            vec![(Sym::X(t_n + 5), 2.0 * cfg.comfort_penalty_psi), (Sym::Lam(2 * t_n + 5), -1.0), (Sym::Lam(3 * t_n + 5), 1.0)]
        );
    }

    #[test]
    fn non_convex_lower_rejected() {
        let mut qp = QuadraticProgram::new(1);
        qp.q = SparseRows::from_triplets(1, 1, &[(0, 0, -1.0)]);
        assert!(matches!(build_kkt(&qp), Err(AssemblyError::NotConvex(_))));
    }

    #[test]
    fn pinned_mode_zero_cut_bounds() {
        let cfg = reference_config();
        let b = demand_bounds(&cfg, 2).unwrap();
        assert!(b.cut_max.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn substituted_revenue_without_response() {
        let cfg = reference_config();
        let bounds = demand_bounds(&cfg, 5).unwrap();
        let qp = build_lower_qp(&cfg, &Prices::flat(&cfg), &bounds).unwrap();
        let kkt = build_kkt(&qp).unwrap();
        let rev = eliminate_bilinear_revenue(&kkt, &cfg);
        let prices = Prices::flat(&cfg);
        let zeros = vec![0.0; qp.n()];
        let lam = vec![0.0; qp.g_in.n_rows()];
        let v = rev.evaluate(&prices, &zeros, &[0.0], &lam);
        let p = &cfg.profile;
        let hand: f64 = (0..cfg.horizon).map(|t| 65.0 * p.p_load_base[t] + 50.0 * (p.h_load_res_base[t] + p.h_load_pub_base[t])).sum();
        assert!((v - hand).abs() < 1e-9 * hand);
    }

    #[test]
    fn tou_prices_keep_means() {
        let cfg = reference_config();
        let p = time_of_use_prices(&cfg);
        let se: f64 = p.electricity.iter().sum();
        let sh: f64 = p.heat.iter().sum();
        assert!((se - 65.0 * 24.0).abs() < 1e-9);
        assert!((sh - 50.0 * 24.0).abs() < 1e-9);
        assert!(p.electricity.iter().all(|&v| (40.0..=90.0).contains(&v)));
    }

    #[test]
    fn bilevel_model_is_convex() {
        let cfg = reference_config();
        let m = assemble_single_level(&cfg, 5).unwrap();
        assert_eq!(m.problem.binaries.len(), 144);
        check_psd(&m.problem.qp.q).unwrap();
        let dump = dump_model(&m);
        assert!(dump.contains("bin ") && dump.contains("[stationarity]"));
    }

    #[test]
    fn single_layer_has_no_binaries() {
        let cfg = reference_config();
        let m = build_single_layer_model(&cfg).unwrap();
        assert!(m.problem.binaries.is_empty());
        check_psd(&m.problem.qp.q).unwrap();
    }
}
