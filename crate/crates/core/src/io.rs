//! Manifest and CSV ingestion, table export and result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::bilevel::Prices;
use crate::building::{BuildingZone, ComfortWindow, ZoneKind};
use crate::data::{
    validate_config, ChpUnit, ElectricBoiler, LoadProfile, PriceBounds, RenewableKind, RenewablePlant, ScenarioConfig, StorageDevice,
    StorageKind, ThermalUnit, ValidationError,
};
use crate::network::{HeatNetwork, Pipe, PipeKind};
use crate::scenario::{RunOptions, RunOutcome, RunSummary};

pub const TP_COLUMNS: [&str; 8] = ["p_max", "p_min", "ramp_up", "ramp_down", "cost_a", "cost_b", "cost_c", "reserve_factor"];
pub const CHP_COLUMNS: [&str; 10] =
    ["p_max", "p_min", "ramp_up", "ramp_down", "cost_a", "cost_b", "cost_c", "reserve_factor", "h_max", "cv_ratio"];
pub const STORAGE_COLUMNS: [&str; 8] =
    ["kind", "charge_max", "discharge_max", "soc_min", "soc_max", "eta_charge", "eta_discharge", "cycle_cost"];
pub const PIPE_COLUMNS: [&str; 8] = ["id", "from", "to", "kind", "length_m", "diameter_m", "resistance", "flow_nominal"];
pub const PROFILE_COLUMNS: [&str; 7] = ["hour", "t_out", "wind_speed", "pv_avail", "p_load", "h_load_res", "h_load_pub"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key '{key}' in [{section}]")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("duplicate key '{key}' in [{section}] on lines {first} and {second}")]
    DuplicateKey { section: String, key: String, first: usize, second: usize },
    #[error("missing required section [{0}]")]
    MissingSection(String),
    #[error("missing required key '{key}' in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("line {line}: [{section}] {key} = '{value}' is not a valid value")]
    BadValue { section: String, key: String, line: usize, value: String },
    #[error("[{section}] {key}: file {path} does not exist")]
    MissingFile { section: String, key: String, path: PathBuf },
    #[error("{file}: {msg}")]
    Table { file: String, msg: String },
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Keys accepted per section; `true` marks required ones.
const SCHEMA: [(&str, &[(&str, bool)]); 5] = [
    (
        "units",
        &[
            ("thermal", true),
            ("chp", true),
            ("storage", true),
            ("storage_reserve_factor", false),
            ("wind_rated_power", false),
            ("wind_cut_in", false),
            ("wind_rated_speed", false),
            ("wind_cut_out", false),
            ("pv_rated_power", false),
            ("pv_area", false),
            ("renewable_sigma", false),
            ("boiler_capacity", false),
            ("boiler_efficiency", false),
            ("boiler_enabled", false),
        ],
    ),
    (
        "network",
        &[
            ("pipes", true),
            ("supply_temp", false),
            ("supply_temp_min", false),
            ("supply_temp_max", false),
            ("return_temp_nominal", false),
            ("return_temp_min", false),
            ("return_temp_max", false),
            ("soil_temp", false),
            ("water_heat_capacity", false),
            ("water_density", false),
            ("history_injection", false),
        ],
    ),
    ("prices", &[("e_min", true), ("e_max", true), ("e_mean", true), ("h_min", true), ("h_max", true), ("h_mean", true)]),
    ("solver", &[("big_m", false), ("gap_tol", false), ("node_limit", false), ("time_limit_s", false), ("workers", false), ("batch", false)]),
    (
        "run",
        &[
            ("profile", true),
            ("mode", false),
            ("psi", false),
            ("shift_fraction", false),
            ("shift_bounds_frac", false),
            ("reserve_z", false),
            ("horizon", false),
            ("dt", false),
            ("seed", false),
            ("output_dir", false),
            ("total_volume", false),
            ("residential_fraction", false),
            ("shape_res", false),
            ("shape_pub", false),
            ("htc", false),
            ("soc_init_frac", false),
            ("pmv_working", false),
            ("pmv_relaxed", false),
            ("public_floor", false),
            ("metabolic_rate", false),
            ("clothing_resistance", false),
            ("skin_temp", false),
            ("perturbations", false),
            ("perturb_step", false),
            ("oracle_trials", false),
        ],
    ),
];

const FILE_KEYS: [(&str, &str); 5] = [("units", "thermal"), ("units", "chp"), ("units", "storage"), ("network", "pipes"), ("run", "profile")];

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    /// section → key → (value, line)
    pub entries: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl Manifest {
    pub fn raw(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.entries.get(section).and_then(|s| s.get(key))
    }

    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.raw(section, key).map(|(v, _)| self.base_dir.join(v))
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, IoError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| IoError::BadValue {
                section: section.into(),
                key: key.into(),
                line: *line,
                value: v.clone(),
            }),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, IoError> {
        Ok(self.parsed(section, key)?.unwrap_or(default))
    }

    pub fn f64_req(&self, section: &str, key: &str) -> Result<f64, IoError> {
        self.parsed(section, key)?.ok_or_else(|| IoError::MissingKey { section: section.into(), key: key.into() })
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, IoError> {
        Ok(self.parsed(section, key)?.unwrap_or(default))
    }

    fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, IoError> {
        Ok(self.parsed(section, key)?.unwrap_or(default))
    }
}

pub fn parse_manifest_str(text: &str, base_dir: &Path) -> Result<Manifest, IoError> {
    let mut entries: BTreeMap<String, BTreeMap<String, (String, usize)>> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| IoError::Syntax { line, msg: "unterminated section header".into() })?.trim();
            if !SCHEMA.iter().any(|(n, _)| *n == name) {
                return Err(IoError::UnknownSection { line, name: name.into() });
            }
            entries.entry(name.to_string()).or_default();
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| IoError::Syntax { line, msg: format!("expected 'key = value', found '{s}'") })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.clone().ok_or_else(|| IoError::Syntax { line, msg: "key outside of any section".into() })?;
        let allowed = SCHEMA.iter().find(|(n, _)| *n == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.iter().any(|(k, _)| *k == key) {
            return Err(IoError::UnknownKey { section: sec, key: key.into(), line });
        }
        let map = entries.entry(sec.clone()).or_default();
        if let Some((_, first)) = map.get(key) {
            return Err(IoError::DuplicateKey { section: sec, key: key.into(), first: *first, second: line });
        }
        map.insert(key.to_string(), (value.to_string(), line));
    }
    for (name, keys) in SCHEMA.iter() {
        let sec = entries.get(*name).ok_or_else(|| IoError::MissingSection(name.to_string()))?;
        for (k, required) in keys.iter() {
            if *required && !sec.contains_key(*k) {
                return Err(IoError::MissingKey { section: name.to_string(), key: k.to_string() });
            }
        }
    }
    Ok(Manifest { base_dir: base_dir.to_path_buf(), entries })
}

/// Reads an INI manifest and checks that every referenced table exists.
pub fn parse_manifest(path: &Path) -> Result<Manifest, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let m = parse_manifest_str(&text, path.parent().unwrap_or(Path::new(".")))?;
    for (section, key) in FILE_KEYS {
        let p = m.path(section, key).expect("required key present");
        if !p.is_file() {
            return Err(IoError::MissingFile { section: section.into(), key: key.into(), path: p });
        }
    }
    Ok(m)
}

/// Numeric table with a mandatory header matching `columns` exactly.
pub fn read_table(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let file = path.display().to_string();
    let terr = |msg: String| IoError::Table { file: file.clone(), msg };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(|e| terr(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| terr(e.to_string()))?.iter().map(str::to_string).collect();
    if header != columns {
        return Err(terr(format!("column mismatch: expected {}, found {}", columns.join(","), header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| terr(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(columns.len());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| terr(format!("line {line}, column {}: non-numeric cell '{cell}'", columns[c])))?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn kind_code(v: f64, file: &Path, what: &str) -> Result<u8, IoError> {
    match v {
        0.0 => Ok(0),
        1.0 => Ok(1),
        _ => Err(IoError::Table { file: file.display().to_string(), msg: format!("{what} code must be 0 or 1, found {v}") }),
    }
}

/// Splits pipes into connected networks ordered by their smallest node id.
fn split_networks(pipes: Vec<(Pipe, f64)>) -> Vec<Vec<(Pipe, f64)>> {
    let mut groups: Vec<(Vec<usize>, Vec<(Pipe, f64)>)> = Vec::new();
    for (p, q) in pipes {
        let hits: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].0.contains(&p.from_node) || groups[g].0.contains(&p.to_node)).collect();
        let mut merged: (Vec<usize>, Vec<(Pipe, f64)>) = (vec![p.from_node, p.to_node], Vec::new());
        for &g in hits.iter().rev() {
            let (nodes, ps) = groups.remove(g);
            merged.0.extend(nodes);
            let mut ps = ps;
            ps.append(&mut merged.1);
            merged.1 = ps;
        }
        merged.1.push((p, q));
        groups.push(merged);
    }
    groups.sort_by_key(|(nodes, _)| nodes.iter().copied().min().unwrap_or(0));
    groups.into_iter().map(|(_, ps)| ps).collect()
}

/// Builds and validates the scenario described by a manifest.
pub fn load_tables(m: &Manifest) -> Result<ScenarioConfig, IoError> {
    let tp_path = m.path("units", "thermal").expect("required");
    let thermal = read_table(&tp_path, &TP_COLUMNS)?
        .into_iter()
        .map(|r| ThermalUnit {
            p_max: r[0],
            p_min: r[1],
            ramp_up: r[2],
            ramp_down: r[3],
            cost_a: r[4],
            cost_b: r[5],
            cost_c: r[6],
            reserve_factor: r[7],
        })
        .collect();
    let chp_path = m.path("units", "chp").expect("required");
    let chp = read_table(&chp_path, &CHP_COLUMNS)?
        .into_iter()
        .map(|r| ChpUnit {
            p_max: r[0],
            p_min: r[1],
            ramp_up: r[2],
            ramp_down: r[3],
            cost_a: r[4],
            cost_b: r[5],
            cost_c: r[6],
            reserve_factor: r[7],
            h_max: r[8],
            cv_ratio: r[9],
        })
        .collect();
    let st_path = m.path("units", "storage").expect("required");
    let st_reserve = m.f64_or("units", "storage_reserve_factor", 0.0)?;
    let mut storages = Vec::new();
    for r in read_table(&st_path, &STORAGE_COLUMNS)? {
        let kind = if kind_code(r[0], &st_path, "storage kind")? == 0 { StorageKind::Electric } else { StorageKind::Heat };
        storages.push(StorageDevice {
            kind,
            charge_max: r[1],
            discharge_max: r[2],
            soc_min: r[3],
            soc_max: r[4],
            eta_charge: r[5],
            eta_discharge: r[6],
            cycle_cost: r[7],
            reserve_factor: if kind == StorageKind::Electric { st_reserve } else { 0.0 },
        });
    }
    let sigma = m.f64_or("units", "renewable_sigma", 0.1)?;
    let mut renewables = Vec::new();
    if m.raw("units", "wind_rated_power").is_some() {
        renewables.push(RenewablePlant::wind(
            m.f64_req("units", "wind_rated_power")?,
            m.f64_req("units", "wind_cut_in")?,
            m.f64_req("units", "wind_rated_speed")?,
            m.f64_req("units", "wind_cut_out")?,
            sigma,
        ));
    }
    if m.raw("units", "pv_rated_power").is_some() {
        renewables.push(RenewablePlant::pv(m.f64_req("units", "pv_rated_power")?, sigma));
    }
    let boiler_default = ElectricBoiler::default();
    let boiler = ElectricBoiler {
        capacity: m.f64_or("units", "boiler_capacity", boiler_default.capacity)?,
        efficiency: m.f64_or("units", "boiler_efficiency", boiler_default.efficiency)?,
        enabled: m.bool_or("units", "boiler_enabled", boiler_default.enabled)?,
    };
    let price_bounds = PriceBounds {
        e_min: m.f64_req("prices", "e_min")?,
        e_max: m.f64_req("prices", "e_max")?,
        e_mean: m.f64_req("prices", "e_mean")?,
        h_min: m.f64_req("prices", "h_min")?,
        h_max: m.f64_req("prices", "h_max")?,
        h_mean: m.f64_req("prices", "h_mean")?,
    };

    let horizon = m.usize_or("run", "horizon", 24)?;
    let prof_path = m.path("run", "profile").expect("required");
    let rows = read_table(&prof_path, &PROFILE_COLUMNS)?;
    if rows.len() != horizon {
        return Err(IoError::Table { file: prof_path.display().to_string(), msg: format!("expected {horizon} rows, found {}", rows.len()) });
    }
    let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let profile = LoadProfile {
        hours: horizon,
        t_outdoor: col(1),
        wind_speed: col(2),
        pv_availability: col(3),
        p_load_base: col(4),
        h_load_res_base: col(5),
        h_load_pub_base: col(6),
    };

    let pipe_path = m.path("network", "pipes").expect("required");
    let mut pipes = Vec::new();
    for r in read_table(&pipe_path, &PIPE_COLUMNS)? {
        let kind = if kind_code(r[3], &pipe_path, "pipe kind")? == 0 { PipeKind::Supply } else { PipeKind::Return };
        let pipe = Pipe {
            id: r[0] as usize,
            from_node: r[1] as usize,
            to_node: r[2] as usize,
            length: r[4],
            diameter: r[5],
            resistance_sum: r[6],
            kind,
        };
        pipes.push((pipe, r[7]));
    }
    let groups = split_networks(pipes);
    if groups.len() != 2 {
        return Err(IoError::Table {
            file: pipe_path.display().to_string(),
            msg: format!("expected two separate networks (residential, public), found {}", groups.len()),
        });
    }
    let soil = m.f64_or("network", "soil_temp", 5.0)?;
    let history = m.parsed::<f64>("network", "history_injection")?;
    let mut nets = Vec::new();
    for g in groups {
        nets.push(HeatNetwork {
            soil_temperature: vec![vec![soil; horizon]; g.len()],
            nominal_flows: g.iter().map(|(_, q)| *q).collect(),
            pipes: g.into_iter().map(|(p, _)| p).collect(),
            water_heat_capacity: m.f64_or("network", "water_heat_capacity", 4.2)?,
            water_density: m.f64_or("network", "water_density", 1000.0)?,
            supply_temp: m.f64_or("network", "supply_temp", 95.0)?,
            supply_temp_limits: (m.f64_or("network", "supply_temp_min", 90.0)?, m.f64_or("network", "supply_temp_max", 100.0)?),
            return_temp_nominal: m.f64_or("network", "return_temp_nominal", 50.0)?,
            return_temp_limits: (m.f64_or("network", "return_temp_min", 35.0)?, m.f64_or("network", "return_temp_max", 60.0)?),
            history_injection: history,
        });
    }
    let public = nets.pop().expect("two networks");
    let residential = nets.pop().expect("two networks");

    let total_volume = m.f64_or("run", "total_volume", 6e7)?;
    let k = m.f64_or("run", "residential_fraction", 0.5)?;
    let htc = m.f64_or("run", "htc", 0.5)?;
    let zones = [
        BuildingZone::new(ZoneKind::Residential, k * total_volume, m.f64_or("run", "shape_res", 0.4)?, htc),
        BuildingZone::new(ZoneKind::Public, total_volume - k * total_volume, m.f64_or("run", "shape_pub", 0.2)?, htc),
    ];
    let w = ComfortWindow::default();
    let comfort = ComfortWindow {
        pmv_working: m.f64_or("run", "pmv_working", w.pmv_working)?,
        pmv_relaxed: m.f64_or("run", "pmv_relaxed", w.pmv_relaxed)?,
        public_floor: m.f64_or("run", "public_floor", w.public_floor)?,
        metabolic_rate: m.f64_or("run", "metabolic_rate", w.metabolic_rate)?,
        clothing_resistance: m.f64_or("run", "clothing_resistance", w.clothing_resistance)?,
        skin_temp: m.f64_or("run", "skin_temp", w.skin_temp)?,
    };
    let mode: u8 = m.parsed("run", "mode")?.unwrap_or(5);
    let cfg = ScenarioConfig {
        thermal,
        chp,
        storages,
        renewables,
        boiler,
        price_bounds,
        networks: [residential, public],
        zones,
        comfort,
        profile,
        comfort_penalty_psi: m.f64_or("run", "psi", 0.5)?,
        shift_fraction: m.f64_or("run", "shift_fraction", 0.0)?,
        shift_bounds_frac: m.f64_or("run", "shift_bounds_frac", 0.1)?,
        mode,
        big_m: m.f64_or("solver", "big_m", 1e5)?,
        reserve_z: m.f64_or("run", "reserve_z", 1.645)?,
        horizon,
        dt: m.f64_or("run", "dt", 1.0)?,
        total_volume,
        residential_fraction: k,
        soc_init_frac: m.f64_or("run", "soc_init_frac", 0.5)?,
    };
    Ok(validate_config(cfg)?)
}

/// Solver and verification settings carried by the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub time_limit_s: Option<f64>,
    pub workers: usize,
    pub batch: usize,
    pub seed: u64,
    pub perturbations: usize,
    pub perturb_step: f64,
    pub oracle_trials: usize,
    pub output_dir: PathBuf,
}

impl Default for RunSettings {
    fn default() -> Self {
        let o = RunOptions::default();
        RunSettings {
            gap_tol: o.gap_tol,
            node_limit: o.node_limit,
            time_limit_s: None,
            workers: o.workers,
            batch: o.batch,
            seed: o.seed,
            perturbations: o.n_perturb,
            perturb_step: o.perturb_step,
            oracle_trials: 100,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunSettings {
    pub fn run_options(&self, verbose: bool) -> RunOptions {
        RunOptions {
            gap_tol: self.gap_tol,
            node_limit: self.node_limit,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            workers: self.workers,
            batch: self.batch,
            n_perturb: self.perturbations,
            perturb_step: self.perturb_step,
            seed: self.seed,
            verbose,
            ..RunOptions::default()
        }
    }
}

pub fn run_settings(m: &Manifest) -> Result<RunSettings, IoError> {
    let d = RunSettings::default();
    Ok(RunSettings {
        gap_tol: m.f64_or("solver", "gap_tol", d.gap_tol)?,
        node_limit: m.usize_or("solver", "node_limit", d.node_limit)?,
        time_limit_s: m.parsed("solver", "time_limit_s")?,
        workers: m.usize_or("solver", "workers", d.workers)?,
        batch: m.usize_or("solver", "batch", d.batch)?,
        seed: m.parsed("run", "seed")?.unwrap_or(d.seed),
        perturbations: m.usize_or("run", "perturbations", d.perturbations)?,
        perturb_step: m.f64_or("run", "perturb_step", d.perturb_step)?,
        oracle_trials: m.usize_or("run", "oracle_trials", d.oracle_trials)?,
        output_dir: m.raw("run", "output_dir").map_or(d.output_dir, |(v, _)| m.base_dir.join(v)),
    })
}

/// Manifest plus tables in one call.
pub fn load_scenario(path: &Path) -> Result<(ScenarioConfig, RunSettings), IoError> {
    let m = parse_manifest(path)?;
    Ok((load_tables(&m)?, run_settings(&m)?))
}

fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn nums(vs: &[f64]) -> Vec<String> {
    vs.iter().map(|&v| num(v)).collect()
}

/// Writes a manifest and its tables to `dir` such that loading them gives
/// back `cfg`. Soil temperature is written as the first pipe-hour value.
pub fn write_tables(cfg: &ScenarioConfig, settings: &RunSettings, dir: &Path) -> Result<PathBuf, IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tp = cfg.thermal.iter().map(|u| nums(&[u.p_max, u.p_min, u.ramp_up, u.ramp_down, u.cost_a, u.cost_b, u.cost_c, u.reserve_factor]));
    write_file(&dir.join("units_tp.csv"), &csv_text(&TP_COLUMNS, tp))?;
    let chp = cfg
        .chp
        .iter()
        .map(|u| nums(&[u.p_max, u.p_min, u.ramp_up, u.ramp_down, u.cost_a, u.cost_b, u.cost_c, u.reserve_factor, u.h_max, u.cv_ratio]));
    write_file(&dir.join("units_chp.csv"), &csv_text(&CHP_COLUMNS, chp))?;
    let st = cfg.storages.iter().map(|s| {
        let code = if s.kind == StorageKind::Electric { 0.0 } else { 1.0 };
        nums(&[code, s.charge_max, s.discharge_max, s.soc_min, s.soc_max, s.eta_charge, s.eta_discharge, s.cycle_cost])
    });
    write_file(&dir.join("storage.csv"), &csv_text(&STORAGE_COLUMNS, st))?;
    let pipes = cfg.networks.iter().flat_map(|n| {
        n.pipes.iter().zip(&n.nominal_flows).map(|(p, &q)| {
            let mut r = vec![p.id.to_string(), p.from_node.to_string(), p.to_node.to_string(), p.kind.code().to_string()];
            r.extend(nums(&[p.length, p.diameter, p.resistance_sum, q]));
            r
        })
    });
    write_file(&dir.join("pipes.csv"), &csv_text(&PIPE_COLUMNS, pipes))?;
    let p = &cfg.profile;
    let prof = (0..cfg.horizon).map(|t| {
        let mut r = vec![t.to_string()];
        r.extend(nums(&[p.t_outdoor[t], p.wind_speed[t], p.pv_availability[t], p.p_load_base[t], p.h_load_res_base[t], p.h_load_pub_base[t]]));
        r
    });
    write_file(&dir.join("profile.csv"), &csv_text(&PROFILE_COLUMNS, prof))?;

    let n = &cfg.networks[0];
    let mut s = String::new();
    let _ = writeln!(s, "[units]\nthermal = units_tp.csv\nchp = units_chp.csv\nstorage = storage.csv");
    if let Some(st) = cfg.storages.iter().find(|s| s.kind == StorageKind::Electric) {
        let _ = writeln!(s, "storage_reserve_factor = {}", st.reserve_factor);
    }
    if let Some(w) = cfg.renewables.iter().find(|r| r.kind == RenewableKind::Wind) {
        let _ = writeln!(
            s,
            "wind_rated_power = {}\nwind_cut_in = {}\nwind_rated_speed = {}\nwind_cut_out = {}",
            w.rated_power, w.cut_in, w.rated_speed, w.cut_out
        );
    }
    if let Some(pv) = cfg.renewables.iter().find(|r| r.kind == RenewableKind::Pv) {
        let _ = writeln!(s, "pv_rated_power = {}", pv.rated_power);
    }
    if let Some(r) = cfg.renewables.first() {
        let _ = writeln!(s, "renewable_sigma = {}", r.forecast_sigma_frac);
    }
    let b = &cfg.boiler;
    let _ = writeln!(s, "boiler_capacity = {}\nboiler_efficiency = {}\nboiler_enabled = {}\n", b.capacity, b.efficiency, b.enabled);
    let _ = writeln!(s, "[network]\npipes = pipes.csv");
    let _ = writeln!(
        s,
        "supply_temp = {}\nsupply_temp_min = {}\nsupply_temp_max = {}\nreturn_temp_nominal = {}\nreturn_temp_min = {}\nreturn_temp_max = {}",
        n.supply_temp, n.supply_temp_limits.0, n.supply_temp_limits.1, n.return_temp_nominal, n.return_temp_limits.0, n.return_temp_limits.1
    );
    let soil = n.soil_temperature.first().and_then(|v| v.first()).copied().unwrap_or(5.0);
    let _ = writeln!(s, "soil_temp = {soil}\nwater_heat_capacity = {}\nwater_density = {}", n.water_heat_capacity, n.water_density);
    if let Some(h) = n.history_injection {
        let _ = writeln!(s, "history_injection = {h}");
    }
    let pb = &cfg.price_bounds;
    let _ = writeln!(
        s,
        "\n[prices]\ne_min = {}\ne_max = {}\ne_mean = {}\nh_min = {}\nh_max = {}\nh_mean = {}\n",
        pb.e_min, pb.e_max, pb.e_mean, pb.h_min, pb.h_max, pb.h_mean
    );
    let _ = writeln!(s, "[solver]\nbig_m = {}\ngap_tol = {}\nnode_limit = {}", cfg.big_m, settings.gap_tol, settings.node_limit);
    if let Some(tl) = settings.time_limit_s {
        let _ = writeln!(s, "time_limit_s = {tl}");
    }
    let _ = writeln!(s, "workers = {}\nbatch = {}\n", settings.workers, settings.batch);
    let z = &cfg.zones;
    let w = &cfg.comfort;
    let _ = writeln!(s, "[run]\nprofile = profile.csv\nmode = {}\nhorizon = {}\ndt = {}", cfg.mode, cfg.horizon, cfg.dt);
    let _ = writeln!(
        s,
        "psi = {}\nshift_fraction = {}\nshift_bounds_frac = {}\nreserve_z = {}\nsoc_init_frac = {}",
        cfg.comfort_penalty_psi, cfg.shift_fraction, cfg.shift_bounds_frac, cfg.reserve_z, cfg.soc_init_frac
    );
    let _ = writeln!(
        s,
        "total_volume = {}\nresidential_fraction = {}\nshape_res = {}\nshape_pub = {}\nhtc = {}",
        cfg.total_volume, cfg.residential_fraction, z[0].shape_coefficient, z[1].shape_coefficient, z[0].htc
    );
    let _ = writeln!(
        s,
        "pmv_working = {}\npmv_relaxed = {}\npublic_floor = {}\nmetabolic_rate = {}\nclothing_resistance = {}\nskin_temp = {}",
        w.pmv_working, w.pmv_relaxed, w.public_floor, w.metabolic_rate, w.clothing_resistance, w.skin_temp
    );
    let _ = writeln!(
        s,
        "seed = {}\nperturbations = {}\nperturb_step = {}\noracle_trials = {}",
        settings.seed, settings.perturbations, settings.perturb_step, settings.oracle_trials
    );
    let path = dir.join("manifest.ini");
    write_file(&path, &s)?;
    Ok(path)
}

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "mode",
    "net_revenue",
    "earnings",
    "operating_cost",
    "user_energy_cost",
    "comfort_loss",
    "overall_cost",
    "total_heat_cut_mwh",
    "chp_heat_mwh",
    "status",
    "gap",
    "nodes",
];

fn summary_row(s: &RunSummary) -> Vec<String> {
    let mut r = vec![s.mode.to_string()];
    r.extend(nums(&[s.net_revenue, s.earnings, s.operating_cost, s.user_energy_cost, s.comfort_loss, s.overall_cost, s.total_heat_cut, s.chp_heat]));
    r.push(s.status.clone());
    r.push(num(s.gap));
    r.push(s.nodes.to_string());
    r
}

pub fn summary_csv(rows: &[RunSummary]) -> String {
    csv_text(&SUMMARY_COLUMNS, rows.iter().map(summary_row))
}

pub fn schedule_header(cfg: &ScenarioConfig) -> Vec<String> {
    let mut h: Vec<String> = vec!["hour".into(), "ke".into(), "kh".into()];
    for u in 0..cfg.thermal.len() {
        h.push(format!("tp{u}_p"));
    }
    for u in 0..cfg.chp.len() {
        h.push(format!("chp{u}_p"));
        h.push(format!("chp{u}_h"));
    }
    for (i, s) in cfg.storages.iter().enumerate() {
        let k = if s.kind == StorageKind::Electric { "es" } else { "hs" };
        for f in ["ch", "dis", "soc"] {
            h.push(format!("{k}{i}_{f}"));
        }
    }
    for f in ["shift", "cut_res", "cut_pub", "reserve"] {
        h.push(f.into());
    }
    h
}

pub fn schedule_csv(cfg: &ScenarioConfig, o: &RunOutcome) -> String {
    let s = &o.solution;
    let header = schedule_header(cfg);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..s.horizon).map(|t| {
        let mut r = vec![t.to_string(), num(s.prices.electricity[t]), num(s.prices.heat[t])];
        r.extend(s.tp_p.iter().map(|v| num(v[t])));
        for u in 0..s.chp_p.len() {
            r.push(num(s.chp_p[u][t]));
            r.push(num(s.chp_h[u][t]));
        }
        for i in 0..s.st_ch.len() {
            r.extend(nums(&[s.st_ch[i][t], s.st_dis[i][t], s.st_soc[i][t]]));
        }
        let reserve: f64 = s.tp_r.iter().chain(&s.chp_r).chain(&s.st_r).map(|v| v[t]).sum();
        r.extend(nums(&[s.shift[t], s.cut[0][t], s.cut[1][t], reserve]));
        r
    });
    csv_text(&header, rows)
}

pub fn kkt_report(o: &RunOutcome) -> String {
    let a = &o.audit;
    let mut s = String::new();
    let _ = writeln!(s, "mode {}", o.mode);
    let _ = writeln!(s, "status {} gap {:e} nodes {} root_bound {} bound {}", o.summary.status, o.summary.gap, o.summary.nodes, o.root_bound, o.bound);
    let _ = writeln!(s, "presolve fixed binaries {}", o.presolve_fixed);
    let _ = writeln!(s, "solve seconds {:.3}", o.summary.solve_seconds);
    let _ = writeln!(s, "\n[residuals]");
    let _ = writeln!(s, "stationarity {:e}", a.stationarity);
    let _ = writeln!(s, "complementarity {:e} (limit {:e})", a.complementarity, 1e-6 * a.big_m);
    let _ = writeln!(s, "power balance {:e}", a.power_balance);
    let _ = writeln!(s, "heat balance {:e}", a.heat_balance);
    let _ = writeln!(s, "network balance {:e}", a.network_balance);
    let _ = writeln!(s, "price mean error electricity {:e} heat {:e}", a.price_mean_error[0], a.price_mean_error[1]);
    let _ = writeln!(s, "price boxes {}", if a.price_box_ok { "ok" } else { "VIOLATED" });
    let _ = writeln!(s, "max constraint violation {:e}", a.max_violation);
    let _ = writeln!(s, "objective substituted vs direct {:e}", a.objective_gap);
    let _ = writeln!(s, "return temperature range {:.3} .. {:.3}", a.return_temp_range.0, a.return_temp_range.1);
    let _ = writeln!(s, "hours with comfort bound infeasible {}", a.comfort_flags);
    let _ = writeln!(s, "\n[big-M]");
    let _ = writeln!(s, "M {} max(slack, multiplier) {} binding {}", a.big_m, a.max_pair_value, a.m_binding());
    let _ = writeln!(s, "\n[equilibrium]");
    match &o.equilibrium {
        None => {
            let _ = writeln!(s, "not applicable");
        }
        Some(e) => {
            let _ = writeln!(s, "follower cost played {} best {} ok {}", e.follower_cost_solution, e.follower_cost_best, e.follower_ok);
            let _ = writeln!(
                s,
                "leader profit {} perturbations {} infeasible {} max improvement {} tolerance {} ok {}",
                e.leader_profit,
                e.perturbations.len(),
                e.infeasible_perturbations(),
                e.max_improvement,
                e.tolerance,
                e.leader_ok
            );
            let _ = writeln!(s, "passed {}", e.passed());
        }
    }
    s
}

fn plot_load_csv(cfg: &ScenarioConfig, o: &RunOutcome) -> String {
    let p = &cfg.profile;
    let s = &o.solution;
    let rows = (0..s.horizon).map(|t| {
        let mut r = vec![t.to_string()];
        r.extend(nums(&[
            p.p_load_base[t],
            p.p_load_base[t] + s.shift[t],
            p.h_load_res_base[t],
            p.h_load_res_base[t] - s.cut[0][t],
            p.h_load_pub_base[t],
            p.h_load_pub_base[t] - s.cut[1][t],
        ]));
        r
    });
    csv_text(&["hour", "p_load_before", "p_load_after", "h_res_before", "h_res_after", "h_pub_before", "h_pub_after"], rows)
}

fn plot_cuts_csv(o: &RunOutcome) -> String {
    let s = &o.solution;
    let rows = (0..s.horizon).map(|t| {
        let mut r = vec![t.to_string()];
        r.extend(nums(&[s.prices.heat[t], s.cut[0][t], s.cut[1][t], o.cut_max[0][t], o.cut_max[1][t]]));
        r
    });
    csv_text(&["hour", "kh", "cut_res", "cut_pub", "cut_res_max", "cut_pub_max"], rows)
}

/// schedule.csv, summary.csv, kkt_report.txt and the per-run plot series.
pub fn write_outputs(cfg: &ScenarioConfig, o: &RunOutcome, outdir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    write_file(&outdir.join("schedule.csv"), &schedule_csv(cfg, o))?;
    write_file(&outdir.join("summary.csv"), &summary_csv(std::slice::from_ref(&o.summary)))?;
    write_file(&outdir.join("kkt_report.txt"), &kkt_report(o))?;
    write_file(&outdir.join("plot_load.csv"), &plot_load_csv(cfg, o))?;
    write_file(&outdir.join("plot_cuts.csv"), &plot_cuts_csv(o))?;
    Ok(())
}

pub fn write_mode_table(rows: &[RunSummary], outdir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    write_file(&outdir.join("modes.csv"), &summary_csv(rows))
}

pub fn sensitivity_csv(rows: &[(f64, RunSummary)]) -> String {
    let data = rows.iter().map(|(k, s)| {
        nums(&[*k, s.earnings, s.operating_cost, s.net_revenue, s.user_energy_cost, s.comfort_loss, s.overall_cost, s.total_heat_cut])
    });
    csv_text(
        &["k", "earnings", "operating_cost", "net_revenue", "user_energy_cost", "comfort_loss", "overall_cost", "total_heat_cut_mwh"],
        data,
    )
}

pub fn write_sensitivity(rows: &[(f64, RunSummary)], outdir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    write_file(&outdir.join("plot_sensitivity.csv"), &sensitivity_csv(rows))
}

/// Prices as CSV rows, used by the oracle report.
pub fn prices_csv(p: &Prices) -> String {
    let rows = (0..p.electricity.len()).map(|t| vec![t.to_string(), num(p.electricity[t]), num(p.heat[t])]);
    csv_text(&["hour", "ke", "kh"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_config;

    const MINIMAL: &str = "[units]\nthermal = a\nchp = b\nstorage = c\n[network]\npipes = d\n[prices]\ne_min = 40\ne_max = 90\ne_mean = 65\nh_min = 30\nh_max = 70\nh_mean = 50\n[solver]\n[run]\nprofile = e\n";

    #[test]
    fn minimal_manifest_parses() {
        let m = parse_manifest_str(MINIMAL, Path::new("/x")).unwrap();
        assert_eq!(m.f64_req("prices", "e_mean").unwrap(), 65.0);
        assert_eq!(m.path("run", "profile").unwrap(), PathBuf::from("/x/e"));
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = MINIMAL.replace("e_max = 90\n", "e_max = 90\ne_max = 91\n");
        let e = parse_manifest_str(&text, Path::new(".")).unwrap_err();
        assert!(matches!(e, IoError::DuplicateKey { first: 9, second: 10, .. }), "{e}");
        assert!(e.to_string().contains("e_max") && e.to_string().contains("9") && e.to_string().contains("10"));
    }

    #[test]
    fn missing_prices_section() {
        let text: String = MINIMAL.lines().filter(|l| !l.starts_with("[prices]") && !l.starts_with("e_") && !l.starts_with("h_")).map(|l| format!("{l}\n")).collect();
        let e = parse_manifest_str(&text, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("required section"), "{e}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("[solver]\n", "[solver]\nturbo = 1\n");
        let e = parse_manifest_str(&text, Path::new(".")).unwrap_err();
        assert!(matches!(e, IoError::UnknownKey { line: 15, .. }), "{e}");
    }

    #[test]
    fn tables_round_trip() {
        let cfg = reference_config();
        let dir = tempfile::tempdir().unwrap();
        let path = write_tables(&cfg, &RunSettings::default(), dir.path()).unwrap();
        let (back, settings) = load_scenario(&path).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunSettings { output_dir: PathBuf::from("out"), ..settings }, RunSettings::default());
    }

    #[test]
    fn short_profile_rejected() {
        let cfg = reference_config();
        let dir = tempfile::tempdir().unwrap();
        let path = write_tables(&cfg, &RunSettings::default(), dir.path()).unwrap();
        let prof = dir.path().join("profile.csv");
        let text = fs::read_to_string(&prof).unwrap();
        let cut: Vec<&str> = text.lines().take(24).collect();
        fs::write(&prof, cut.join("\n") + "\n").unwrap();
        let e = load_scenario(&path).unwrap_err();
        assert!(e.to_string().contains("expected 24 rows"), "{e}");
    }

    #[test]
    fn bad_cells_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "p_max,p_min\n1,2\n").unwrap();
        assert!(read_table(&p, &TP_COLUMNS).unwrap_err().to_string().contains("column mismatch"));
        fs::write(&p, "a,b\n1,x\n").unwrap();
        assert!(read_table(&p, &["a", "b"]).unwrap_err().to_string().contains("non-numeric"));
    }
}
