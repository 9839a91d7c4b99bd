//! Reference dataset, profile synthesis and end-to-end mode runs.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ies_optim::miqp::solve_miqp_logged;
use ies_optim::{solve_convex_qp, MiqpOptions, MiqpStatus, QpOptions, QpStatus};
use thiserror::Error;

use crate::bilevel::{
    assemble_single_level, build_dispatch_model, build_single_layer_model, demand_bounds, extract_solution, lower_row, objective_value_direct,
    project_to_mean, time_of_use_prices, AssemblyError, Model, ModelKind, ObjectiveBreakdown, Prices, ScheduleSolution,
};
use crate::building::{heating_power_for_temp, temp_from_pmv, BuildingZone, ComfortWindow, ZoneKind};
use crate::data::{
    ChpUnit, ElectricBoiler, LoadProfile, PriceBounds, RenewablePlant, ScenarioConfig, StorageDevice, StorageKind, ThermalUnit,
};
use crate::network::{build_network, HeatNetwork};
use crate::oracle::{equilibrium_check, follower_best_response_with, follower_multipliers, EquilibriumReport};

/// Shape of the synthetic winter day.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileParams {
    pub hours: usize,
    pub dt: f64,
    pub t_out_mean: f64,
    pub t_out_amplitude: f64,
    /// MW
    pub load_floor: f64,
    pub morning_peak: f64,
    pub evening_peak: f64,
    /// Relative noise on the electric load.
    pub load_noise: f64,
    pub wind_mean: f64,
    pub wind_amplitude: f64,
    /// m/s
    pub wind_noise: f64,
    pub pv_peak: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            hours: 24,
            dt: 1.0,
            t_out_mean: -12.0,
            t_out_amplitude: 4.0,
            load_floor: 280.0,
            morning_peak: 60.0,
            evening_peak: 80.0,
            load_noise: 0.015,
            wind_mean: 9.0,
            wind_amplitude: 4.0,
            wind_noise: 0.5,
            pv_peak: 0.8,
        }
    }
}

/// Deterministic winter day. Base heat loads hold each zone at the PMV-0
/// temperature.
pub fn synthesize_profiles(params: &ProfileParams, zones: &[BuildingZone; 2], comfort: &ComfortWindow, seed: u64) -> LoadProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let n = params.hours;
    let mut t_outdoor = Vec::with_capacity(n);
    let mut p_load_base = Vec::with_capacity(n);
    let mut wind_speed = Vec::with_capacity(n);
    let mut pv_availability = Vec::with_capacity(n);
    for t in 0..n {
        let h = (t % 24) as f64;
        t_outdoor.push(params.t_out_mean + params.t_out_amplitude * (two_pi * (h - 9.0) / 24.0).sin());
        let shape = params.load_floor
            + params.morning_peak * (-(h - 10.0).powi(2) / 8.0).exp()
            + params.evening_peak * (-(h - 19.0).powi(2) / 6.0).exp();
        p_load_base.push(shape * (1.0 + params.load_noise * rng.gen_range(-1.0..=1.0)));
        let v = params.wind_mean + params.wind_amplitude * (two_pi * (h - 3.0) / 24.0).cos() + params.wind_noise * rng.gen_range(-1.0..=1.0);
        wind_speed.push(v.max(0.0));
        pv_availability.push(if (7.0..=17.0).contains(&h) { params.pv_peak * (std::f64::consts::PI * (h - 6.0) / 12.0).sin() } else { 0.0 });
    }
    let ideal = temp_from_pmv(0.0, comfort);
    let base = |z: &BuildingZone| -> Vec<f64> { t_outdoor.iter().map(|&o| heating_power_for_temp(ideal, ideal, o, z, params.dt)).collect() };
    LoadProfile {
        hours: n,
        h_load_res_base: base(&zones[0]),
        h_load_pub_base: base(&zones[1]),
        p_load_base,
        t_outdoor,
        wind_speed,
        pv_availability,
    }
}

pub const REFERENCE_SEED: u64 = 2024;
pub const TOTAL_VOLUME: f64 = 6e7;

pub fn reference_thermal_units() -> Vec<ThermalUnit> {
    [
        (50.0, 25.0, 25.0, 0.012, 17.82, 10.150, 13.7),
        (35.0, 10.0, 18.0, 0.069, 26.24, 31.670, 13.2),
        (30.0, 10.0, 15.0, 0.028, 37.69, 17.940, 13.2),
        (40.0, 12.0, 20.0, 0.010, 12.88, 6.778, 14.2),
    ]
    .iter()
    .map(|&(p_max, p_min, r, a, b, c, z)| ThermalUnit {
        p_max,
        p_min,
        ramp_up: r,
        ramp_down: r,
        cost_a: a,
        cost_b: b,
        cost_c: c,
        reserve_factor: z,
    })
    .collect()
}

pub fn reference_chp_units() -> Vec<ChpUnit> {
    let u = ChpUnit {
        p_max: 200.0,
        p_min: 100.0,
        h_max: 250.0,
        ramp_up: 50.0,
        ramp_down: 50.0,
        cost_a: 0.0044,
        cost_b: 13.29,
        cost_c: 39.0,
        cv_ratio: 0.15,
        reserve_factor: 16.2,
    };
    vec![u.clone(), u]
}

pub fn reference_storages() -> Vec<StorageDevice> {
    vec![
        StorageDevice {
            kind: StorageKind::Electric,
            charge_max: 40.0,
            discharge_max: 40.0,
            soc_min: 32.0,
            soc_max: 160.0,
            eta_charge: 0.9,
            eta_discharge: 0.9,
            cycle_cost: 2.0,
            reserve_factor: 10.0,
        },
        StorageDevice {
            kind: StorageKind::Heat,
            charge_max: 50.0,
            discharge_max: 50.0,
            soc_min: 40.0,
            soc_max: 200.0,
            eta_charge: 0.95,
            eta_discharge: 0.95,
            cycle_cost: 1.0,
            reserve_factor: 0.0,
        },
    ]
}

/// Six-node tree networks: residential nodes 1..6 and public nodes 7..12,
/// each with one source and three loads.
pub fn reference_networks(horizon: usize) -> [HeatNetwork; 2] {
    let res = build_network(
        &[(1, 2, 4000.0, 1.0, 2.0), (2, 3, 3000.0, 0.8, 2.0), (2, 4, 2500.0, 0.6, 2.0), (3, 5, 2000.0, 0.6, 2.0), (3, 6, 3500.0, 0.6, 2.0)],
        &[(4, 300.0), (5, 350.0), (6, 350.0)],
        5.0,
        horizon,
    );
    let mut public = build_network(
        &[(7, 8, 3000.0, 0.8, 2.0), (8, 9, 2500.0, 0.6, 2.0), (8, 10, 2000.0, 0.5, 2.0), (9, 11, 1500.0, 0.45, 2.0), (9, 12, 2500.0, 0.45, 2.0)],
        &[(10, 160.0), (11, 170.0), (12, 170.0)],
        5.0,
        horizon,
    );
    for p in public.pipes.iter_mut() {
        p.id += 10;
    }
    let mut res = res;
    for n in [&mut res, &mut public] {
        n.return_temp_limits = (35.0, 60.0);
    }
    [res, public]
}

pub fn reference_zones(residential_fraction: f64) -> [BuildingZone; 2] {
    [
        BuildingZone::new(ZoneKind::Residential, residential_fraction * TOTAL_VOLUME, 0.4, 0.5),
        BuildingZone::new(ZoneKind::Public, TOTAL_VOLUME - residential_fraction * TOTAL_VOLUME, 0.2, 0.5),
    ]
}

/// The bundled reference instance (T = 24, mode 5).
pub fn reference_config() -> ScenarioConfig {
    let zones = reference_zones(0.5);
    let comfort = ComfortWindow::default();
    let profile = synthesize_profiles(&ProfileParams::default(), &zones, &comfort, REFERENCE_SEED);
    ScenarioConfig {
        thermal: reference_thermal_units(),
        chp: reference_chp_units(),
        storages: reference_storages(),
        renewables: vec![RenewablePlant::wind(60.0, 3.0, 15.0, 25.0, 0.1), RenewablePlant::pv(120.0, 0.1)],
        boiler: ElectricBoiler::default(),
        price_bounds: PriceBounds { e_min: 40.0, e_max: 90.0, e_mean: 65.0, h_min: 30.0, h_max: 70.0, h_mean: 50.0 },
        networks: reference_networks(24),
        zones,
        comfort,
        profile,
        comfort_penalty_psi: 0.5,
        shift_fraction: 0.0,
        shift_bounds_frac: 0.1,
        mode: 5,
        big_m: 1e5,
        reserve_z: 1.645,
        horizon: 24,
        dt: 1.0,
        total_volume: TOTAL_VOLUME,
        residential_fraction: 0.5,
        soc_init_frac: 0.5,
    }
}

/// Same scenario with the residential share of the heated volume set to `k`.
/// Zone geometry, PMV-0 base loads and network flows follow the new volumes.
pub fn with_residential_fraction(cfg: &ScenarioConfig, k: f64) -> ScenarioConfig {
    let mut c = cfg.clone();
    let old = [cfg.zones[0].volume, cfg.zones[1].volume];
    c.residential_fraction = k;
    let v = [k * cfg.total_volume, cfg.total_volume - k * cfg.total_volume];
    for z in 0..2 {
        let zone = &cfg.zones[z];
        c.zones[z] = BuildingZone { volume: v[z], surface_area: zone.shape_coefficient * v[z], ..zone.clone() };
        let scale = v[z] / old[z];
        for q in c.networks[z].nominal_flows.iter_mut() {
            *q *= scale;
        }
    }
    let ideal = temp_from_pmv(0.0, &c.comfort);
    c.profile.h_load_res_base = c.profile.t_outdoor.iter().map(|&o| heating_power_for_temp(ideal, ideal, o, &c.zones[0], c.dt)).collect();
    c.profile.h_load_pub_base = c.profile.t_outdoor.iter().map(|&o| heating_power_for_temp(ideal, ideal, o, &c.zones[1], c.dt)).collect();
    c
}

/// Σ_t of both zones' cut limits at residential share `k`.
pub fn cut_bound_mass(cfg: &ScenarioConfig, k: f64, mode: u8) -> Result<f64, AssemblyError> {
    let c = with_residential_fraction(cfg, k);
    let b = demand_bounds(&c, mode)?;
    Ok(b.cut_max.iter().flatten().sum())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub workers: usize,
    pub batch: usize,
    pub check_equilibrium: bool,
    pub n_perturb: usize,
    pub perturb_step: f64,
    pub seed: u64,
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            gap_tol: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
            workers: 1,
            batch: 1,
            check_equilibrium: true,
            n_perturb: 50,
            perturb_step: 1.0,
            seed: 7,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: u8,
    pub net_revenue: f64,
    pub earnings: f64,
    pub operating_cost: f64,
    pub user_energy_cost: f64,
    pub comfort_loss: f64,
    pub overall_cost: f64,
    /// MWh
    pub total_heat_cut: f64,
    /// MWh
    pub chp_heat: f64,
    pub status: String,
    pub gap: f64,
    pub nodes: usize,
    pub solve_seconds: f64,
}

/// Post-solve checks of the reformulation and the physics.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub stationarity: f64,
    pub complementarity: f64,
    /// Largest of slack and multiplier over all pairs.
    pub max_pair_value: f64,
    pub big_m: f64,
    pub power_balance: f64,
    pub heat_balance: f64,
    pub network_balance: f64,
    pub price_mean_error: [f64; 2],
    pub price_box_ok: bool,
    pub max_violation: f64,
    /// |model objective − (operating cost − revenue [+ comfort])|
    pub objective_gap: f64,
    pub return_temp_range: (f64, f64),
    pub comfort_flags: usize,
}

impl Audit {
    pub fn m_binding(&self) -> bool {
        self.max_pair_value > 0.5 * self.big_m
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub mode: u8,
    pub solution: ScheduleSolution,
    pub summary: RunSummary,
    pub breakdown: ObjectiveBreakdown,
    pub audit: Audit,
    pub equilibrium: Option<EquilibriumReport>,
    pub status: MiqpStatus,
    pub bound: f64,
    pub root_bound: f64,
    pub presolve_fixed: usize,
    pub reserve_req: Vec<f64>,
    pub cut_max: [Vec<f64>; 2],
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] ies_optim::MiqpError),
    #[error("mode {mode}: no feasible schedule ({status})")]
    NoSolution { mode: u8, status: String },
}

/// Bilevel point built from a price vector: closed-form follower response and
/// multipliers plus the cheapest dispatch. `None` when the dispatch is infeasible.
pub fn point_from_prices(model: &Model, cfg: &ScenarioConfig, mode: u8, prices: &Prices) -> Result<Option<Vec<f64>>, AssemblyError> {
    let bounds = &model.bounds;
    let resp = follower_best_response_with(cfg, prices, bounds)?;
    let disp = build_dispatch_model(cfg, mode, prices, &resp.as_vector())?;
    let sol = solve_convex_qp(&disp.problem.qp, &QpOptions::default()).map_err(AssemblyError::NotConvex)?;
    if sol.status != QpStatus::Optimal {
        return Ok(None);
    }
    let n = model.problem.qp.n();
    let mut x = vec![0.0; n];
    // physical variables share their layout with the dispatch model
    x[..sol.x.len()].copy_from_slice(&sol.x);
    if model.kind == ModelKind::Bilevel {
        let (eps, lam) = follower_multipliers(cfg, prices, bounds)?;
        let l = &model.layout;
        x[l.eps[0]] = eps;
        for (i, &v) in lam.iter().enumerate() {
            x[l.lam[i]] = v;
            x[l.nu[i]] = if v == 0.0 { 1.0 } else { 0.0 };
        }
    }
    Ok(Some(x))
}

/// Load-following prices: the mean scaled by the relative load, projected back
/// onto the price constraints.
fn load_following(load: &[f64], lo: f64, hi: f64, mean: f64, gain: f64) -> Vec<f64> {
    let avg = load.iter().sum::<f64>() / load.len() as f64;
    let raw: Vec<f64> = load.iter().map(|l| mean * (1.0 + gain * (l / avg - 1.0))).collect();
    project_to_mean(&raw, lo, hi, mean)
}

/// Best of a few price heuristics, used as the starting incumbent.
pub fn initial_incumbent(model: &Model, cfg: &ScenarioConfig, mode: u8) -> Result<Option<Vec<f64>>, AssemblyError> {
    let pb = &cfg.price_bounds;
    let p = &cfg.profile;
    let heat: Vec<f64> = (0..cfg.horizon).map(|t| p.h_load_res_base[t] + p.h_load_pub_base[t]).collect();
    let mut candidates = vec![Prices::flat(cfg), time_of_use_prices(cfg)];
    for gain in [1.0, 3.0] {
        candidates.push(Prices {
            electricity: load_following(&p.p_load_base, pb.e_min, pb.e_max, pb.e_mean, gain),
            heat: load_following(&heat, pb.h_min, pb.h_max, pb.h_mean, gain),
        });
    }
    let qp = &model.problem.qp;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for prices in &candidates {
        if let Some(x) = point_from_prices(model, cfg, mode, prices)? {
            if qp.max_violation(&x) > 1e-6 {
                continue;
            }
            let obj = qp.objective(&x);
            if best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, x));
            }
        }
    }
    Ok(best.map(|b| b.1))
}

/// Assembles, solves and audits one mode.
pub fn run_mode(cfg: &ScenarioConfig, mode: u8, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let model = if mode == 6 { build_single_layer_model(cfg)? } else { assemble_single_level(cfg, mode)? };
    let incumbent = if model.kind == ModelKind::Bilevel { initial_incumbent(&model, cfg, mode)? } else { None };
    let miqp_opts = MiqpOptions {
        gap_tol: opts.gap_tol,
        node_limit: opts.node_limit,
        time_limit: opts.time_limit,
        workers: opts.workers,
        batch: opts.batch,
        presolve: true,
        incumbent,
        record_nodes: false,
    };
    let mut stderr = std::io::stderr();
    let log: Option<&mut dyn std::io::Write> = if opts.verbose { Some(&mut stderr) } else { None };
    let res = solve_miqp_logged(&model.problem, &miqp_opts, log)?;
    if res.x.is_empty() {
        return Err(RunError::NoSolution { mode, status: res.status.as_str().to_string() });
    }
    let solution = extract_solution(&model, &res.x);
    let breakdown = objective_value_direct(&solution, cfg);
    let audit = audit_solution(&model, cfg, &solution, &breakdown);
    let equilibrium = if model.kind == ModelKind::Bilevel && opts.check_equilibrium {
        Some(equilibrium_check(&solution, breakdown.leader_profit, res.status.as_str(), cfg, mode, opts.n_perturb, opts.perturb_step, opts.seed)?)
    } else {
        None
    };
    let summary = RunSummary {
        mode,
        net_revenue: breakdown.leader_profit,
        earnings: breakdown.c_prof,
        operating_cost: breakdown.c_opf,
        user_energy_cost: breakdown.c_prof,
        comfort_loss: breakdown.comfort_penalty,
        overall_cost: breakdown.c_prof + breakdown.comfort_penalty,
        total_heat_cut: solution.cut.iter().flatten().sum::<f64>() * cfg.dt,
        chp_heat: solution.chp_h.iter().flatten().sum::<f64>() * cfg.dt,
        status: res.status.as_str().to_string(),
        gap: res.gap,
        nodes: res.nodes,
        solve_seconds: res.elapsed.as_secs_f64(),
    };
    Ok(RunOutcome {
        mode,
        summary,
        breakdown,
        audit,
        equilibrium,
        status: res.status,
        bound: res.bound,
        root_bound: res.root_bound,
        presolve_fixed: res.presolve_fixed,
        reserve_req: model.reserve_req.clone(),
        cut_max: model.bounds.cut_max.clone(),
        solution,
    })
}

pub fn audit_solution(model: &Model, cfg: &ScenarioConfig, sol: &ScheduleSolution, br: &ObjectiveBreakdown) -> Audit {
    let qp = &model.problem.qp;
    let x = &sol.x;
    let t_n = cfg.horizon;
    let family_max = |tag: &str| -> f64 {
        (0..qp.a_eq.n_rows())
            .filter(|&i| model.eq_tags[i] == tag)
            .map(|i| (qp.a_eq.row_dot(i, x) - qp.b_eq[i]).abs())
            .fold(0.0, f64::max)
    };
    let (mut complementarity, mut max_pair_value) = (0.0f64, 0.0f64);
    if let Some(kkt) = &model.kkt {
        let resp = sol.response();
        for p in &kkt.pairs {
            let slack = kkt.lower.h_in[p.row] - kkt.lower.g_in.row_dot(p.row, &resp);
            let lam = sol.lam[p.row];
            complementarity = complementarity.max((slack * lam).abs());
            max_pair_value = max_pair_value.max(slack.max(lam));
        }
    }
    let sum_e: f64 = sol.prices.electricity.iter().sum();
    let sum_h: f64 = sol.prices.heat.iter().sum();
    let pb = &cfg.price_bounds;
    let price_box_ok = sol.prices.electricity.iter().all(|&v| v >= pb.e_min && v <= pb.e_max)
        && sol.prices.heat.iter().all(|&v| v >= pb.h_min && v <= pb.h_max);
    let direct = match model.kind {
        ModelKind::Bilevel => br.c_opf - br.c_prof,
        ModelKind::SingleLayer => br.c_opf - br.c_prof + br.comfort_penalty,
        ModelKind::Dispatch => br.c_opf,
    };
    let mut tr = (f64::INFINITY, f64::NEG_INFINITY);
    for z in 0..2 {
        for t in 0..t_n {
            let r = cfg.networks[z].operating_temps(sol.q_source[z][t]).1;
            tr = (tr.0.min(r), tr.1.max(r));
        }
    }
    Audit {
        stationarity: family_max("stationarity"),
        complementarity,
        max_pair_value,
        big_m: model.big_m,
        power_balance: family_max("power balance"),
        heat_balance: family_max("heat balance"),
        network_balance: family_max("network heat"),
        price_mean_error: [(sum_e / t_n as f64 - pb.e_mean).abs(), (sum_h / t_n as f64 - pb.h_mean).abs()],
        price_box_ok,
        max_violation: qp.max_violation(x),
        objective_gap: (sol.objective - direct).abs(),
        return_temp_range: tr,
        comfort_flags: model.bounds.comfort_flags.iter().map(|v| v.len()).sum(),
    }
}

/// Tolerances of the post-solve audit.
pub const STATIONARITY_TOL: f64 = 1e-6;
pub const BALANCE_TOL: f64 = 1e-6;
pub const PRICE_MEAN_TOL: f64 = 1e-9;
pub const OBJECTIVE_TOL: f64 = 1e-6;

/// Audit and equilibrium findings that make a run unacceptable.
pub fn verification_failures(o: &RunOutcome) -> Vec<String> {
    let a = &o.audit;
    let mut out = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            out.push(msg);
        }
    };
    check(a.stationarity <= STATIONARITY_TOL, format!("stationarity residual {:e}", a.stationarity));
    check(a.complementarity <= 1e-6 * a.big_m, format!("complementarity product {:e}", a.complementarity));
    check(!a.m_binding(), format!("big-M binding: max(slack, multiplier) = {}", a.max_pair_value));
    check(a.power_balance <= BALANCE_TOL, format!("power balance residual {:e}", a.power_balance));
    check(a.heat_balance <= BALANCE_TOL, format!("heat balance residual {:e}", a.heat_balance));
    check(a.network_balance <= BALANCE_TOL, format!("network balance residual {:e}", a.network_balance));
    check(a.price_mean_error.iter().all(|&e| e <= PRICE_MEAN_TOL), format!("price means off by {:?}", a.price_mean_error));
    check(a.price_box_ok, "price outside its box".into());
    check(a.objective_gap <= OBJECTIVE_TOL * o.solution.objective.abs().max(1.0), format!("objective mismatch {:e}", a.objective_gap));
    if let Some(e) = &o.equilibrium {
        check(e.follower_ok, format!("follower cost {} above best response {}", e.follower_cost_solution, e.follower_cost_best));
        check(e.leader_ok, format!("price perturbation improves leader profit by {}", e.max_improvement));
    }
    out
}

/// Direction checks across modes: (description, holds).
pub fn mode_trends(runs: &[RunOutcome]) -> Vec<(String, bool)> {
    let get = |m: u8| runs.iter().find(|r| r.mode == m).map(|r| &r.summary);
    let mut out = Vec::new();
    if let Some(s2) = get(2) {
        out.push(("mode 2 has zero heat cut and comfort loss".to_string(), s2.total_heat_cut == 0.0 && s2.comfort_loss == 0.0));
    }
    if let (Some(s5), Some(s3)) = (get(5), get(3)) {
        out.push(("mode 5 heat cut >= mode 3".to_string(), s5.total_heat_cut >= s3.total_heat_cut));
    }
    if let (Some(s5), Some(s4)) = (get(5), get(4)) {
        out.push(("mode 5 heat cut >= mode 4".to_string(), s5.total_heat_cut >= s4.total_heat_cut));
    }
    if let (Some(s6), Some(s5)) = (get(6), get(5)) {
        out.push(("mode 6 CHP heat >= mode 5".to_string(), s6.chp_heat >= s5.chp_heat));
    }
    out
}

/// Mode 5 at each residential share.
pub fn sensitivity_residential_fraction(cfg: &ScenarioConfig, k_values: &[f64], opts: &RunOptions) -> Result<Vec<(f64, RunOutcome)>, RunError> {
    k_values
        .iter()
        .map(|&k| {
            let c = with_residential_fraction(cfg, k);
            run_mode(&c, 5, opts).map(|o| (k, o))
        })
        .collect()
}

/// Multiplier families of a solution for one hour: (λ1..λ6).
pub fn hour_multipliers(sol: &ScheduleSolution, t: usize) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (f, o) in out.iter_mut().enumerate() {
        *o = sol.lam[lower_row(f, t, sol.horizon)];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_config;

    #[test]
    fn reference_validates() {
        let cfg = reference_config();
        assert_eq!(validate_config(cfg.clone()).unwrap(), cfg);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let zones = reference_zones(0.5);
        let w = ComfortWindow::default();
        let a = synthesize_profiles(&ProfileParams::default(), &zones, &w, 11);
        let b = synthesize_profiles(&ProfileParams::default(), &zones, &w, 11);
        assert_eq!(a, b);
        assert!(a.pv_availability[..7].iter().all(|&v| v == 0.0));
        let ideal = temp_from_pmv(0.0, &w);
        for t in 0..24 {
            assert_eq!(a.h_load_res_base[t], heating_power_for_temp(ideal, ideal, a.t_outdoor[t], &zones[0], 1.0));
        }
    }

    #[test]
    fn reserve_examples() {
        let mut cfg = reference_config().truncated(1);
        cfg.renewables = vec![RenewablePlant::wind(60.0, 3.0, 15.0, 25.0, 0.1), RenewablePlant::pv(40.0, 0.1)];
        cfg.profile.wind_speed[0] = 20.0;
        cfg.profile.pv_availability[0] = 1.0;
        let r = crate::bilevel::reserve_requirements(&cfg);
        assert!((r[0] - 16.45).abs() < 1e-9);
        cfg.reserve_z = 0.0;
        assert_eq!(crate::bilevel::reserve_requirements(&cfg)[0], 0.0);
    }

    #[test]
    fn residential_fraction_keeps_volume() {
        let cfg = reference_config();
        for k in [0.1, 0.3, 0.7, 0.9] {
            let c = with_residential_fraction(&cfg, k);
            assert!((c.zones[0].volume + c.zones[1].volume - TOTAL_VOLUME).abs() < 1e-6);
            validate_config(c).unwrap();
        }
    }

    #[test]
    fn incumbent_is_feasible() {
        let cfg = reference_config();
        let model = assemble_single_level(&cfg, 5).unwrap();
        let x = initial_incumbent(&model, &cfg, 5).unwrap().expect("heuristic point");
        assert!(model.problem.qp.max_violation(&x) <= 1e-6);
    }
}
