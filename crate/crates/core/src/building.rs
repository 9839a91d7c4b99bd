//! Building thermal response, PMV comfort and cuttable heat-load bounds.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZoneKind {
    Residential,
    Public,
}

impl ZoneKind {
    pub const ALL: [ZoneKind; 2] = [ZoneKind::Residential, ZoneKind::Public];

    pub fn as_str(&self) -> &'static str {
        match self {
            ZoneKind::Residential => "res",
            ZoneKind::Public => "pub",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            ZoneKind::Residential => 0,
            ZoneKind::Public => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingZone {
    pub kind: ZoneKind,
    /// m³
    pub volume: f64,
    /// S/V
    pub shape_coefficient: f64,
    /// m², always shape_coefficient · volume
    pub surface_area: f64,
    /// W/(m²·°C)
    pub htc: f64,
    /// kJ/(kg·°C)
    pub air_heat_capacity: f64,
    /// kg/m³
    pub air_density: f64,
}

impl BuildingZone {
    pub fn new(kind: ZoneKind, volume: f64, shape_coefficient: f64, htc: f64) -> Self {
        BuildingZone {
            kind,
            volume,
            shape_coefficient,
            surface_area: surface_from_shape(shape_coefficient, volume),
            htc,
            air_heat_capacity: 1.007,
            air_density: 1.2,
        }
    }

    /// Envelope conductance K·S in W/°C.
    pub fn conductance(&self) -> f64 {
        self.htc * self.surface_area
    }

    /// Air heat capacity in J/°C.
    pub fn heat_capacity(&self) -> f64 {
        self.air_heat_capacity * 1e3 * self.air_density * self.volume
    }
}

/// Comfort rule parameters shared by both zones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComfortWindow {
    /// |PMV| limit during working hours.
    pub pmv_working: f64,
    /// |PMV| limit for residential non-working hours.
    pub pmv_relaxed: f64,
    /// Public-area floor outside working hours, °C.
    pub public_floor: f64,
    /// W/m²
    pub metabolic_rate: f64,
    /// m²·°C/W
    pub clothing_resistance: f64,
    /// °C
    pub skin_temp: f64,
}

impl Default for ComfortWindow {
    fn default() -> Self {
        ComfortWindow {
            pmv_working: 0.5,
            pmv_relaxed: 1.0,
            public_floor: 5.0,
            metabolic_rate: 80.0,
            clothing_resistance: 0.12,
            skin_temp: 33.5,
        }
    }
}

pub const RESIDENTIAL_STRICT_HOURS: std::ops::RangeInclusive<usize> = 7..=20;
pub const PUBLIC_WORKING_HOURS: std::ops::RangeInclusive<usize> = 8..=22;

pub fn surface_from_shape(coefficient: f64, volume: f64) -> f64 {
    coefficient * volume
}

/// Explicit Euler step of the zone air temperature. `h_supply` in MW, `dt` in hours.
pub fn indoor_temp_step(t_prev: f64, t_out: f64, h_supply: f64, zone: &BuildingZone, dt: f64) -> f64 {
    let net = h_supply * 1e6 - zone.conductance() * (t_prev - t_out);
    t_prev + dt * 3600.0 * net / zone.heat_capacity()
}

/// Heating power in MW that moves the zone from `t_prev` to `t_target` in one step.
pub fn heating_power_for_temp(t_target: f64, t_prev: f64, t_out: f64, zone: &BuildingZone, dt: f64) -> f64 {
    (zone.heat_capacity() * (t_target - t_prev) / (dt * 3600.0) + zone.conductance() * (t_prev - t_out)) / 1e6
}

pub fn pmv(t_in: f64, w: &ComfortWindow) -> f64 {
    2.43 - 3.76 * (w.skin_temp - t_in) / (w.metabolic_rate * (w.clothing_resistance + 0.1))
}

pub fn temp_from_pmv(target_pmv: f64, w: &ComfortWindow) -> f64 {
    w.skin_temp - (2.43 - target_pmv) * w.metabolic_rate * (w.clothing_resistance + 0.1) / 3.76
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComfortError {
    #[error("mode {0} is not in 1..6")]
    InvalidMode(u8),
}

fn pmv_band(limit: f64, w: &ComfortWindow) -> (f64, f64) {
    (temp_from_pmv(-limit, w), temp_from_pmv(limit, w))
}

/// Allowed indoor temperature range for a zone at an hour of day.
pub fn comfort_band(kind: ZoneKind, hour: usize, mode: u8, w: &ComfortWindow) -> Result<(f64, f64), ComfortError> {
    let hour = hour % 24;
    let ideal = temp_from_pmv(0.0, w);
    let pinned = (ideal, ideal);
    let strict = pmv_band(w.pmv_working, w);
    let residential = || if RESIDENTIAL_STRICT_HOURS.contains(&hour) { strict } else { pmv_band(w.pmv_relaxed, w) };
    let public = || if PUBLIC_WORKING_HOURS.contains(&hour) { strict } else { (w.public_floor, strict.1) };
    let band = match (mode, kind) {
        (1, _) => strict,
        (2, _) => pinned,
        (3, ZoneKind::Residential) => residential(),
        (3, ZoneKind::Public) => pinned,
        (4, ZoneKind::Residential) => pinned,
        (4, ZoneKind::Public) => strict,
        (5 | 6, ZoneKind::Residential) => residential(),
        (5 | 6, ZoneKind::Public) => public(),
        (m, _) => return Err(ComfortError::InvalidMode(m)),
    };
    Ok(band)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutBounds {
    /// MW per hour.
    pub bounds: Vec<f64>,
    /// Hours where the base load cannot even hold the band floor.
    pub infeasible_hours: Vec<usize>,
}

/// Largest heat cut per hour that keeps the zone on or above its band floor.
///
/// The floor trajectory is periodic over the day, so the floor of the hour
/// before hour 0 is the floor of hour 23.
pub fn cuttable_bounds(
    zone: &BuildingZone,
    window: &ComfortWindow,
    base_load: &[f64],
    t_out: &[f64],
    mode: u8,
    dt: f64,
) -> Result<CutBounds, ComfortError> {
    let mut bounds = Vec::with_capacity(base_load.len());
    let mut infeasible_hours = Vec::new();
    for (t, (&base, &out)) in base_load.iter().zip(t_out).enumerate() {
        let floor = comfort_band(zone.kind, t, mode, window)?.0;
        let prev = comfort_band(zone.kind, t + 23, mode, window)?.0;
        let h_min = heating_power_for_temp(floor, prev, out, zone, dt);
        if h_min > base {
            infeasible_hours.push(t);
        }
        bounds.push((base - h_min).clamp(0.0, base.max(0.0)));
    }
    Ok(CutBounds { bounds, infeasible_hours })
}
