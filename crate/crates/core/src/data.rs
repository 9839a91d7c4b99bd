//! Domain types, parameter tables and instance validation.

use thiserror::Error;

use crate::building::{BuildingZone, ComfortWindow, ZoneKind};
use crate::network::HeatNetwork;

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalUnit {
    pub p_max: f64,
    pub p_min: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
    pub reserve_factor: f64,
}

impl ThermalUnit {
    /// Fuel cost in $/h at output `p` MW.
    pub fn fuel_cost(&self, p: f64) -> f64 {
        self.cost_a * p * p + self.cost_b * p + self.cost_c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChpUnit {
    pub p_max: f64,
    pub p_min: f64,
    pub h_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
    pub cv_ratio: f64,
    pub reserve_factor: f64,
}

impl ChpUnit {
    /// Fuel cost in $/h at electric output `p` and heat output `h`.
    pub fn fuel_cost(&self, p: f64, h: f64) -> f64 {
        let e = p + self.cv_ratio * h;
        self.cost_a * e * e + self.cost_b * e + self.cost_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Electric,
    Heat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageDevice {
    pub kind: StorageKind,
    pub charge_max: f64,
    pub discharge_max: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub cycle_cost: f64,
    /// Reserve price; only electric storage offers reserve.
    pub reserve_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewableKind {
    Wind,
    Pv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewablePlant {
    pub kind: RenewableKind,
    pub rated_power: f64,
    /// Wind only (m/s).
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    pub forecast_sigma_frac: f64,
}

impl RenewablePlant {
    pub fn wind(rated_power: f64, cut_in: f64, rated_speed: f64, cut_out: f64, sigma: f64) -> Self {
        RenewablePlant { kind: RenewableKind::Wind, rated_power, cut_in, rated_speed, cut_out, forecast_sigma_frac: sigma }
    }

    pub fn pv(rated_power: f64, sigma: f64) -> Self {
        RenewablePlant { kind: RenewableKind::Pv, rated_power, cut_in: 0.0, rated_speed: 0.0, cut_out: 0.0, forecast_sigma_frac: sigma }
    }

    /// Forecast output for hour `t` of a profile.
    pub fn forecast(&self, profile: &LoadProfile, t: usize) -> f64 {
        match self.kind {
            RenewableKind::Wind => wind_power(profile.wind_speed[t], self),
            RenewableKind::Pv => pv_power(profile.pv_availability[t], self),
        }
    }
}

/// Linear power curve between cut-in and rated speed, flat to cut-out.
pub fn wind_power(v: f64, plant: &RenewablePlant) -> f64 {
    if v < plant.cut_in || v >= plant.cut_out {
        0.0
    } else if v >= plant.rated_speed {
        plant.rated_power
    } else {
        plant.rated_power * (v - plant.cut_in) / (plant.rated_speed - plant.cut_in)
    }
}

pub fn pv_power(availability: f64, plant: &RenewablePlant) -> f64 {
    availability * plant.rated_power
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBounds {
    pub e_min: f64,
    pub e_max: f64,
    pub e_mean: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectricBoiler {
    pub capacity: f64,
    pub efficiency: f64,
    pub enabled: bool,
}

impl Default for ElectricBoiler {
    fn default() -> Self {
        ElectricBoiler { capacity: 0.0, efficiency: 0.99, enabled: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub hours: usize,
    pub p_load_base: Vec<f64>,
    pub h_load_res_base: Vec<f64>,
    pub h_load_pub_base: Vec<f64>,
    pub t_outdoor: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub pv_availability: Vec<f64>,
}

impl LoadProfile {
    /// First `t` hours of the profile.
    pub fn truncated(&self, t: usize) -> LoadProfile {
        let cut = |v: &Vec<f64>| v[..t.min(v.len())].to_vec();
        LoadProfile {
            hours: t.min(self.hours),
            p_load_base: cut(&self.p_load_base),
            h_load_res_base: cut(&self.h_load_res_base),
            h_load_pub_base: cut(&self.h_load_pub_base),
            t_outdoor: cut(&self.t_outdoor),
            wind_speed: cut(&self.wind_speed),
            pv_availability: cut(&self.pv_availability),
        }
    }
}

/// Complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub thermal: Vec<ThermalUnit>,
    pub chp: Vec<ChpUnit>,
    pub storages: Vec<StorageDevice>,
    pub renewables: Vec<RenewablePlant>,
    pub boiler: ElectricBoiler,
    pub price_bounds: PriceBounds,
    /// Residential and public heating networks.
    pub networks: [HeatNetwork; 2],
    /// Residential and public zones.
    pub zones: [BuildingZone; 2],
    pub comfort: ComfortWindow,
    pub profile: LoadProfile,
    /// ψ, $/MW²
    pub comfort_penalty_psi: f64,
    /// 𝒢: net shifted energy as a fraction of total base load.
    pub shift_fraction: f64,
    /// Per-hour shift box as a fraction of base load.
    pub shift_bounds_frac: f64,
    pub mode: u8,
    pub big_m: f64,
    pub reserve_z: f64,
    pub horizon: usize,
    pub dt: f64,
    pub total_volume: f64,
    pub residential_fraction: f64,
    /// Initial (and terminal) state of charge as a fraction of [soc_min, soc_max].
    pub soc_init_frac: f64,
}

impl ScenarioConfig {
    pub fn zone(&self, kind: ZoneKind) -> &BuildingZone {
        match kind {
            ZoneKind::Residential => &self.zones[0],
            ZoneKind::Public => &self.zones[1],
        }
    }

    pub fn base_heat(&self, kind: ZoneKind) -> &[f64] {
        match kind {
            ZoneKind::Residential => &self.profile.h_load_res_base,
            ZoneKind::Public => &self.profile.h_load_pub_base,
        }
    }

    /// Per-hour shift box (min, max).
    pub fn shift_box(&self, t: usize) -> (f64, f64) {
        let w = self.shift_bounds_frac * self.profile.p_load_base[t];
        (-w, w)
    }

    /// Net shifted energy required by the budget equality.
    pub fn shift_budget(&self) -> f64 {
        self.shift_fraction * self.profile.p_load_base.iter().sum::<f64>()
    }

    /// Same scenario over the first `t` hours.
    pub fn truncated(&self, t: usize) -> ScenarioConfig {
        let mut c = self.clone();
        c.profile = self.profile.truncated(t);
        c.horizon = c.profile.hours;
        for n in c.networks.iter_mut() {
            for s in n.soil_temperature.iter_mut() {
                s.truncate(t);
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} = {value}: {rule}")]
pub struct ValidationError {
    pub field: String,
    pub value: f64,
    pub rule: String,
}

fn fail(field: impl Into<String>, value: f64, rule: &str) -> Result<(), ValidationError> {
    Err(ValidationError { field: field.into(), value, rule: rule.to_string() })
}

fn check(ok: bool, field: impl Into<String>, value: f64, rule: &str) -> Result<(), ValidationError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        fail(field, value, rule)
    }
}

/// Checks every invariant of the instance and returns it unchanged.
pub fn validate_config(raw: ScenarioConfig) -> Result<ScenarioConfig, ValidationError> {
    let c = &raw;
    for (i, u) in c.thermal.iter().enumerate() {
        let f = |s: &str| format!("thermal[{i}].{s}");
        check(u.p_min >= 0.0, f("p_min"), u.p_min, "minimum output must be nonnegative")?;
        check(u.p_min <= u.p_max, f("p_max"), u.p_max, "maximum output must not be below minimum")?;
        check(u.ramp_up > 0.0, f("ramp_up"), u.ramp_up, "ramp limit must be positive")?;
        check(u.ramp_down > 0.0, f("ramp_down"), u.ramp_down, "ramp limit must be positive")?;
        check(u.cost_a >= 0.0, f("cost_a"), u.cost_a, "quadratic cost must be nonnegative")?;
        check(u.reserve_factor >= 0.0, f("reserve_factor"), u.reserve_factor, "reserve price must be nonnegative")?;
    }
    for (i, u) in c.chp.iter().enumerate() {
        let f = |s: &str| format!("chp[{i}].{s}");
        check(u.p_min >= 0.0, f("p_min"), u.p_min, "minimum output must be nonnegative")?;
        check(u.p_min <= u.p_max, f("p_max"), u.p_max, "maximum output must not be below minimum")?;
        check(u.h_max > 0.0, f("h_max"), u.h_max, "heat capacity must be positive")?;
        check(u.ramp_up > 0.0, f("ramp_up"), u.ramp_up, "ramp limit must be positive")?;
        check(u.ramp_down > 0.0, f("ramp_down"), u.ramp_down, "ramp limit must be positive")?;
        check(u.cost_a >= 0.0, f("cost_a"), u.cost_a, "quadratic cost must be nonnegative")?;
        check(u.cv_ratio > 0.0 && u.cv_ratio < 1.0, f("cv_ratio"), u.cv_ratio, "cv ratio must be in (0,1)")?;
        check(u.reserve_factor >= 0.0, f("reserve_factor"), u.reserve_factor, "reserve price must be nonnegative")?;
    }
    for (i, s) in c.storages.iter().enumerate() {
        let f = |n: &str| format!("storage[{i}].{n}");
        check(s.eta_charge > 0.0 && s.eta_charge <= 1.0, f("eta_charge"), s.eta_charge, "efficiency must be in (0,1]")?;
        check(s.eta_discharge > 0.0 && s.eta_discharge <= 1.0, f("eta_discharge"), s.eta_discharge, "efficiency must be in (0,1]")?;
        check(s.soc_min >= 0.0, f("soc_min"), s.soc_min, "state of charge must be nonnegative")?;
        check(s.soc_min < s.soc_max, f("soc_max"), s.soc_max, "soc_min must be below soc_max")?;
        check(s.charge_max > 0.0, f("charge_max"), s.charge_max, "charge limit must be positive")?;
        check(s.discharge_max > 0.0, f("discharge_max"), s.discharge_max, "discharge limit must be positive")?;
        check(s.cycle_cost >= 0.0, f("cycle_cost"), s.cycle_cost, "cycling cost must be nonnegative")?;
        check(s.reserve_factor >= 0.0, f("reserve_factor"), s.reserve_factor, "reserve price must be nonnegative")?;
    }
    for (i, r) in c.renewables.iter().enumerate() {
        let f = |n: &str| format!("renewable[{i}].{n}");
        check(r.rated_power > 0.0, f("rated_power"), r.rated_power, "rated power must be positive")?;
        if r.kind == RenewableKind::Wind {
            check(r.cut_in >= 0.0 && r.cut_in < r.rated_speed, f("cut_in"), r.cut_in, "cut-in speed must be below rated speed")?;
            check(r.rated_speed < r.cut_out, f("rated_speed"), r.rated_speed, "rated speed must be below cut-out speed")?;
        }
        check((0.0..=1.0).contains(&r.forecast_sigma_frac), f("forecast_sigma_frac"), r.forecast_sigma_frac, "forecast error fraction must be in [0,1]")?;
    }
    let b = &c.boiler;
    check(b.capacity >= 0.0, "boiler.capacity", b.capacity, "capacity must be nonnegative")?;
    check(b.efficiency > 0.0 && b.efficiency <= 1.0, "boiler.efficiency", b.efficiency, "efficiency must be in (0,1]")?;
    let p = &c.price_bounds;
    check(p.e_min <= p.e_mean && p.e_mean <= p.e_max, "price_bounds.e_mean", p.e_mean, "mean price must lie between min and max")?;
    check(p.h_min <= p.h_mean && p.h_mean <= p.h_max, "price_bounds.h_mean", p.h_mean, "mean price must lie between min and max")?;
    check(c.comfort_penalty_psi > 0.0, "psi", c.comfort_penalty_psi, "comfort penalty must be positive")?;
    check(c.big_m > 0.0, "big_m", c.big_m, "big-M must be positive")?;
    check(c.reserve_z >= 0.0, "reserve_z", c.reserve_z, "reserve quantile must be nonnegative")?;
    check(c.horizon >= 1, "horizon", c.horizon as f64, "horizon must be at least one step")?;
    check(c.dt > 0.0, "dt", c.dt, "time step must be positive")?;
    check((1..=6).contains(&c.mode), "mode", c.mode as f64, "mode must be in 1..6")?;
    check(c.shift_bounds_frac >= 0.0, "shift_bounds_frac", c.shift_bounds_frac, "shift bound fraction must be nonnegative")?;
    check(c.shift_fraction.abs() <= c.shift_bounds_frac, "shift_fraction", c.shift_fraction, "shift budget must fit inside the hourly boxes")?;
    check((0.0..=1.0).contains(&c.soc_init_frac), "soc_init_frac", c.soc_init_frac, "initial state of charge fraction must be in [0,1]")?;
    check(c.residential_fraction > 0.0 && c.residential_fraction < 1.0, "residential_fraction", c.residential_fraction, "residential fraction must be in (0,1)")?;

    let pr = &c.profile;
    check(pr.hours == c.horizon, "profile.hours", pr.hours as f64, "profile length must equal the horizon")?;
    for (name, s) in [
        ("profile.p_load", &pr.p_load_base),
        ("profile.h_load_res", &pr.h_load_res_base),
        ("profile.h_load_pub", &pr.h_load_pub_base),
        ("profile.t_out", &pr.t_outdoor),
        ("profile.wind_speed", &pr.wind_speed),
        ("profile.pv_avail", &pr.pv_availability),
    ] {
        check(s.len() == c.horizon, name, s.len() as f64, "series length must equal the horizon")?;
        for (t, &v) in s.iter().enumerate() {
            check(v.is_finite(), format!("{name}[{t}]"), v, "value must be finite")?;
        }
    }
    for (name, s) in [("profile.p_load", &pr.p_load_base), ("profile.h_load_res", &pr.h_load_res_base), ("profile.h_load_pub", &pr.h_load_pub_base), ("profile.wind_speed", &pr.wind_speed)] {
        for (t, &v) in s.iter().enumerate() {
            check(v >= 0.0, format!("{name}[{t}]"), v, "value must be nonnegative")?;
        }
    }
    for (t, &v) in pr.pv_availability.iter().enumerate() {
        check((0.0..=1.0).contains(&v), format!("profile.pv_avail[{t}]"), v, "availability must be in [0,1]")?;
    }
    for (k, z) in c.zones.iter().enumerate() {
        let f = |n: &str| format!("zones[{k}].{n}");
        check(z.volume > 0.0, f("volume"), z.volume, "volume must be positive")?;
        check(z.shape_coefficient > 0.0, f("shape_coefficient"), z.shape_coefficient, "shape coefficient must be positive")?;
        check(z.surface_area == z.shape_coefficient * z.volume, f("surface_area"), z.surface_area, "surface area must equal shape coefficient times volume")?;
        check(z.htc > 0.0, f("htc"), z.htc, "heat transfer coefficient must be positive")?;
        check(z.air_heat_capacity > 0.0 && z.air_density > 0.0, f("air_heat_capacity"), z.air_heat_capacity, "air properties must be positive")?;
    }
    check(c.zones[0].kind == ZoneKind::Residential && c.zones[1].kind == ZoneKind::Public, "zones", 0.0, "zones must be ordered residential, public")?;
    let vol = c.zones[0].volume + c.zones[1].volume;
    check((vol - c.total_volume).abs() <= 1e-9 * c.total_volume.abs().max(1.0), "total_volume", c.total_volume, "zone volumes must sum to the total volume")?;
    let w = &c.comfort;
    check(w.metabolic_rate > 0.0, "comfort.metabolic_rate", w.metabolic_rate, "metabolic rate must be positive")?;
    check(w.clothing_resistance > -0.1, "comfort.clothing_resistance", w.clothing_resistance, "clothing resistance must exceed -0.1")?;
    check(w.pmv_working > 0.0 && w.pmv_relaxed > 0.0, "comfort.pmv_working", w.pmv_working, "PMV bounds must be positive")?;
    check(w.public_floor < crate::building::temp_from_pmv(w.pmv_working, w), "comfort.public_floor", w.public_floor, "temperature floor must lie below the ceiling")?;
    for (k, n) in c.networks.iter().enumerate() {
        n.validate().map_err(|e| ValidationError { field: format!("networks[{k}].{}", e.field), value: e.value, rule: e.rule })?;
        for (p, s) in n.soil_temperature.iter().enumerate() {
            check(s.len() == c.horizon, format!("networks[{k}].soil_temperature[{p}]"), s.len() as f64, "series length must equal the horizon")?;
        }
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wind() -> RenewablePlant {
        RenewablePlant::wind(60.0, 3.0, 15.0, 25.0, 0.1)
    }

    #[test]
    fn wind_curve_examples() {
        assert_eq!(wind_power(2.0, &wind()), 0.0);
        assert_eq!(wind_power(15.0, &wind()), 60.0);
        assert!((wind_power(9.0, &wind()) - 30.0).abs() < 1e-12);
        assert_eq!(wind_power(3.0, &wind()), 0.0);
        assert_eq!(wind_power(25.0, &wind()), 0.0);
        assert_eq!(wind_power(24.9, &wind()), 60.0);
    }

    #[test]
    fn pv_examples() {
        let pv = RenewablePlant::pv(120.0, 0.1);
        assert_eq!(pv_power(0.0, &pv), 0.0);
        assert_eq!(pv_power(1.0, &pv), 120.0);
        assert_eq!(pv_power(0.25, &pv), 30.0);
    }

    #[test]
    fn fuel_costs() {
        let tp = ThermalUnit { p_max: 50.0, p_min: 25.0, ramp_up: 25.0, ramp_down: 25.0, cost_a: 0.012, cost_b: 17.82, cost_c: 10.15, reserve_factor: 13.7 };
        // 0.012·2500 + 17.82·50 + 10.15
        assert!((tp.fuel_cost(50.0) - 931.15).abs() < 1e-9);
        let chp = ChpUnit { p_max: 200.0, p_min: 100.0, h_max: 250.0, ramp_up: 50.0, ramp_down: 50.0, cost_a: 0.0044, cost_b: 13.29, cost_c: 39.0, cv_ratio: 0.15, reserve_factor: 16.2 };
        // e = 165: 0.0044·27225 + 13.29·165 + 39
        assert!((chp.fuel_cost(150.0, 100.0) - 2351.64).abs() < 1e-9);
    }
}
