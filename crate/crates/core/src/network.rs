//! District heating network: source heat, mixing, transport delay and pipe losses.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::data::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipeKind {
    Supply,
    Return,
}

impl PipeKind {
    pub fn code(&self) -> u8 {
        match self {
            PipeKind::Supply => 0,
            PipeKind::Return => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: usize,
    pub from_node: usize,
    pub to_node: usize,
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    /// m·°C/W
    pub resistance_sum: f64,
    pub kind: PipeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Source,
    Junction,
    Load,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatNetwork {
    pub pipes: Vec<Pipe>,
    /// kg/s, indexed like `pipes`.
    pub nominal_flows: Vec<f64>,
    /// °C per pipe per hour.
    pub soil_temperature: Vec<Vec<f64>>,
    /// kJ/(kg·°C)
    pub water_heat_capacity: f64,
    /// kg/m³
    pub water_density: f64,
    /// Nominal supply temperature, used for supply-pipe losses, °C.
    pub supply_temp: f64,
    /// Admissible supply temperature at the source, °C.
    pub supply_temp_limits: (f64, f64),
    /// Return temperature used for return-pipe losses, °C.
    pub return_temp_nominal: f64,
    /// Admissible return temperature at the source, °C.
    pub return_temp_limits: (f64, f64),
    /// Injection assumed before the horizon; `None` repeats the first hour.
    pub history_injection: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("unknown pipe id {0}")]
    UnknownPipe(usize),
    #[error("no flow given for pipe {0}")]
    MissingFlow(usize),
    #[error("node mixing needs at least one inflow")]
    EmptyInflow,
    #[error("horizon of {horizon} steps is shorter than the longest delay of {delay} steps")]
    HorizonTooShort { horizon: usize, delay: usize },
}

/// Heat delivered by the source, MW.
pub fn source_heat(q: f64, t_supply: f64, t_return: f64, c_water: f64) -> f64 {
    q * c_water * 1e3 * (t_supply - t_return) / 1e6
}

/// Heat carried by a pipe at temperature `t`, MW.
pub fn pipe_heat_power(q: f64, t: f64, c_water: f64) -> f64 {
    q * c_water * 1e3 * t / 1e6
}

pub fn node_mix_temperature(inflows: &[(f64, f64)]) -> Result<f64, NetworkError> {
    if inflows.is_empty() {
        return Err(NetworkError::EmptyInflow);
    }
    let q: f64 = inflows.iter().map(|p| p.0).sum();
    let qt: f64 = inflows.iter().map(|p| p.0 * p.1).sum();
    Ok(qt / q)
}

pub fn pipe_velocity(q: f64, d: f64, rho: f64) -> f64 {
    q / (rho * std::f64::consts::PI * (d / 2.0).powi(2))
}

/// Transport delay in whole steps; `f64::round` rounds half away from zero.
pub fn pipe_delay_steps(length: f64, v: f64, dt: f64) -> usize {
    let steps = (length / v / (dt * 3600.0)).round();
    if steps > 0.0 { steps as usize } else { 0 }
}

/// Heat lost to the soil along a pipe, MW. Negative when the water is colder than the soil.
pub fn pipe_heat_loss(t_in: f64, t_soil: f64, resistance_sum: f64, length: f64) -> f64 {
    2.0 * std::f64::consts::PI * (t_in - t_soil) / resistance_sum * length / 1e6
}

/// Supply path from the source to one load node.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPath {
    pub load_node: usize,
    /// Pipe indices from source to load.
    pub pipes: Vec<usize>,
    /// Share of the source flow delivered to this load.
    pub flow_share: f64,
    pub delay: usize,
}

/// Result of pushing a source injection series through the supply network.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// MW per load path per hour.
    pub load: Vec<Vec<f64>>,
    /// Delay per pipe, steps.
    pub pipe_delays: Vec<usize>,
    /// Supply-side loss per injection hour, MW.
    pub loss: Vec<f64>,
    /// Heat injected during the horizon that arrives after it, MW·h.
    pub in_flight: f64,
    /// History injection delivered inside the horizon, MW·h, net of its losses.
    pub from_history: f64,
}

impl HeatNetwork {
    pub fn nodes(&self) -> BTreeSet<usize> {
        self.pipes.iter().flat_map(|p| [p.from_node, p.to_node]).collect()
    }

    pub fn node_kind(&self, node: usize) -> NodeKind {
        let sup = || self.pipes.iter().filter(|p| p.kind == PipeKind::Supply);
        let has_in = sup().any(|p| p.to_node == node);
        let has_out = sup().any(|p| p.from_node == node);
        match (has_in, has_out) {
            (false, true) => NodeKind::Source,
            (true, false) => NodeKind::Load,
            _ => NodeKind::Junction,
        }
    }

    pub fn sources(&self) -> Vec<usize> {
        self.nodes().into_iter().filter(|&n| self.node_kind(n) == NodeKind::Source).collect()
    }

    pub fn loads(&self) -> Vec<usize> {
        self.nodes().into_iter().filter(|&n| self.node_kind(n) == NodeKind::Load).collect()
    }

    fn index_of(&self, id: usize) -> Option<usize> {
        self.pipes.iter().position(|p| p.id == id)
    }

    /// Total flow leaving the sources through supply pipes, kg/s.
    pub fn source_flow(&self) -> f64 {
        let src = self.sources();
        self.pipes
            .iter()
            .zip(&self.nominal_flows)
            .filter(|(p, _)| p.kind == PipeKind::Supply && src.contains(&p.from_node))
            .map(|(_, q)| q)
            .sum()
    }

    /// Per-node Σ inflow − Σ outflow for the given (pipe id, flow) pairs.
    pub fn mass_balance_residual(&self, flows: &[(usize, f64)]) -> Result<BTreeMap<usize, f64>, NetworkError> {
        let mut q = vec![None; self.pipes.len()];
        for &(id, f) in flows {
            let k = self.index_of(id).ok_or(NetworkError::UnknownPipe(id))?;
            q[k] = Some(f);
        }
        let mut res: BTreeMap<usize, f64> = self.nodes().into_iter().map(|n| (n, 0.0)).collect();
        for (p, f) in self.pipes.iter().zip(&q) {
            let f = f.ok_or(NetworkError::MissingFlow(p.id))?;
            *res.get_mut(&p.from_node).unwrap() -= f;
            *res.get_mut(&p.to_node).unwrap() += f;
        }
        Ok(res)
    }

    pub fn nominal_flow_pairs(&self) -> Vec<(usize, f64)> {
        self.pipes.iter().zip(&self.nominal_flows).map(|(p, &q)| (p.id, q)).collect()
    }

    pub fn pipe_delays(&self, dt: f64) -> Vec<usize> {
        self.pipes
            .iter()
            .zip(&self.nominal_flows)
            .map(|(p, &q)| pipe_delay_steps(p.length, pipe_velocity(q, p.diameter, self.water_density), dt))
            .collect()
    }

    /// Supply paths from the (single) source to each load node, in load-node order.
    pub fn load_paths(&self, dt: f64) -> Vec<LoadPath> {
        let delays = self.pipe_delays(dt);
        let total = self.source_flow();
        let mut out = Vec::new();
        for load in self.loads() {
            let mut pipes = Vec::new();
            let mut node = load;
            while let Some(k) = self.pipes.iter().position(|p| p.kind == PipeKind::Supply && p.to_node == node) {
                pipes.push(k);
                node = self.pipes[k].from_node;
                if pipes.len() > self.pipes.len() {
                    break;
                }
            }
            pipes.reverse();
            let last = *pipes.last().expect("load node has a feeding pipe");
            out.push(LoadPath {
                load_node: load,
                delay: pipes.iter().map(|&k| delays[k]).sum(),
                flow_share: self.nominal_flows[last] / total,
                pipes,
            });
        }
        out
    }

    /// Supply-pipe loss per hour at the fixed supply temperature, MW.
    pub fn supply_losses(&self, horizon: usize) -> Vec<f64> {
        self.kind_losses(PipeKind::Supply, self.supply_temp, horizon)
    }

    /// Return-pipe loss per hour at the nominal return temperature, MW.
    pub fn return_losses(&self, horizon: usize) -> Vec<f64> {
        self.kind_losses(PipeKind::Return, self.return_temp_nominal, horizon)
    }

    fn kind_losses(&self, kind: PipeKind, temp: f64, horizon: usize) -> Vec<f64> {
        (0..horizon)
            .map(|t| {
                self.pipes
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.kind == kind)
                    .map(|(k, p)| pipe_heat_loss(temp, self.soil_temperature[k][t], p.resistance_sum, p.length))
                    .sum()
            })
            .collect()
    }

    /// Range of heat the source can deliver at nominal flow, MW, from the
    /// supply and return temperature limits.
    pub fn source_heat_range(&self) -> (f64, f64) {
        let q = self.source_flow();
        let (r_lo, r_hi) = self.return_temp_limits;
        let (s_lo, s_hi) = self.supply_temp_limits;
        (source_heat(q, s_lo, r_hi, self.water_heat_capacity), source_heat(q, s_hi, r_lo, self.water_heat_capacity))
    }

    /// Supply and return temperatures realizing a source heat output: the
    /// supply temperature stays as close to nominal as the limits allow.
    pub fn operating_temps(&self, q_source: f64) -> (f64, f64) {
        let drop = q_source * 1e6 / (self.source_flow() * self.water_heat_capacity * 1e3);
        let (r_lo, r_hi) = self.return_temp_limits;
        let (s_lo, s_hi) = self.supply_temp_limits;
        let ts = self.supply_temp.clamp(r_lo + drop, r_hi + drop).clamp(s_lo, s_hi);
        (ts, ts - drop)
    }

    /// Non-cyclic simulation: each load path receives its flow share of the
    /// injection `delay` steps later, minus its share of every supply pipe's loss.
    pub fn propagate_source_to_load(&self, q_source: &[f64], supply_temps: &[f64], dt: f64) -> Result<Propagation, NetworkError> {
        let horizon = q_source.len();
        let paths = self.load_paths(dt);
        let max_delay = paths.iter().map(|p| p.delay).max().unwrap_or(0);
        if horizon < max_delay {
            return Err(NetworkError::HorizonTooShort { horizon, delay: max_delay });
        }
        let pipe_loss = |k: usize, t: usize| {
            let p = &self.pipes[k];
            let soil = self.soil_temperature[k][t.min(self.soil_temperature[k].len() - 1)];
            pipe_heat_loss(supply_temps[t], soil, p.resistance_sum, p.length)
        };
        let path_loss = |path: &LoadPath, t: usize| -> f64 {
            let q_l = self.nominal_flows[*path.pipes.last().unwrap()];
            path.pipes.iter().map(|&k| pipe_loss(k, t) * q_l / self.nominal_flows[k]).sum()
        };
        let hist = self.history_injection.unwrap_or(q_source.first().copied().unwrap_or(0.0));
        let mut load = Vec::new();
        let mut in_flight = 0.0;
        let mut from_history = 0.0;
        for path in &paths {
            let mut series = vec![0.0; horizon];
            for (t, s) in series.iter_mut().enumerate() {
                if t >= path.delay {
                    let src = t - path.delay;
                    *s = path.flow_share * q_source[src] - path_loss(path, src);
                } else {
                    // history flows at first-hour conditions
                    *s = path.flow_share * hist - path_loss(path, 0);
                    from_history += *s * dt;
                }
            }
            for src in horizon - path.delay..horizon {
                in_flight += (path.flow_share * q_source[src] - path_loss(path, src)) * dt;
            }
            load.push(series);
        }
        let ids: BTreeSet<usize> = paths.iter().flat_map(|p| p.pipes.iter().copied()).collect();
        let loss = (0..horizon).map(|t| ids.iter().map(|&k| pipe_loss(k, t)).sum()).collect();
        Ok(Propagation { load, pipe_delays: self.pipe_delays(dt), loss, in_flight, from_history })
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let err = |field: String, value: f64, rule: &str| Err(ValidationError { field, value, rule: rule.to_string() });
        if self.pipes.is_empty() {
            return err("pipes".into(), 0.0, "network needs at least one pipe");
        }
        if self.nominal_flows.len() != self.pipes.len() {
            return err("nominal_flows".into(), self.nominal_flows.len() as f64, "one flow per pipe");
        }
        if self.soil_temperature.len() != self.pipes.len() {
            return err("soil_temperature".into(), self.soil_temperature.len() as f64, "one soil series per pipe");
        }
        for (p, &q) in self.pipes.iter().zip(&self.nominal_flows) {
            let f = |s: &str| format!("pipe[{}].{s}", p.id);
            if !(p.length > 0.0) {
                return err(f("length"), p.length, "length must be positive");
            }
            if !(p.diameter > 0.0) {
                return err(f("diameter"), p.diameter, "diameter must be positive");
            }
            if !(p.resistance_sum > 0.0) {
                return err(f("resistance"), p.resistance_sum, "resistance must be positive");
            }
            if !(q > 0.0) {
                return err(f("flow_nominal"), q, "nominal flow must be positive");
            }
        }
        let ids: BTreeSet<usize> = self.pipes.iter().map(|p| p.id).collect();
        if ids.len() != self.pipes.len() {
            return err("pipes".into(), self.pipes.len() as f64, "pipe ids must be unique");
        }
        let sources = self.sources();
        if sources.len() != 1 {
            return err("nodes".into(), sources.len() as f64, "network must have exactly one source node");
        }
        // connectivity over the undirected graph
        let nodes = self.nodes();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([sources[0]]);
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                for p in &self.pipes {
                    if p.from_node == n {
                        queue.push_back(p.to_node);
                    }
                    if p.to_node == n {
                        queue.push_back(p.from_node);
                    }
                }
            }
        }
        if seen.len() != nodes.len() {
            return err("nodes".into(), (nodes.len() - seen.len()) as f64, "network must be connected");
        }
        for n in &nodes {
            let feeders = self.pipes.iter().filter(|p| p.kind == PipeKind::Supply && p.to_node == *n).count();
            if feeders > 1 {
                return err(format!("node[{n}]"), feeders as f64, "supply network must be a tree");
            }
        }
        for load in self.loads() {
            let mut node = load;
            let mut steps = 0;
            while let Some(p) = self.pipes.iter().find(|p| p.kind == PipeKind::Supply && p.to_node == node) {
                node = p.from_node;
                steps += 1;
                if steps > self.pipes.len() {
                    return err(format!("node[{load}]"), load as f64, "supply network contains a cycle");
                }
            }
            if node != sources[0] {
                return err(format!("node[{load}]"), load as f64, "load node must be reachable from the source");
            }
        }
        let res = self.mass_balance_residual(&self.nominal_flow_pairs()).expect("flows cover every pipe");
        let scale = self.source_flow();
        for (n, r) in res {
            if r.abs() > 1e-9 * scale {
                return err(format!("node[{n}]"), r, "nominal flows must balance at every node");
            }
        }
        let (s_lo, s_hi) = self.supply_temp_limits;
        if !(s_lo <= self.supply_temp && self.supply_temp <= s_hi) {
            return err("supply_temp".into(), self.supply_temp, "nominal supply temperature must lie within its limits");
        }
        let (lo, hi) = self.return_temp_limits;
        if !(lo < hi && hi < s_lo) {
            return err("return_temp_limits".into(), hi, "return temperature limits must lie below the supply temperature");
        }
        if !(self.water_heat_capacity > 0.0 && self.water_density > 0.0) {
            return err("water_heat_capacity".into(), self.water_heat_capacity, "water properties must be positive");
        }
        Ok(())
    }
}

/// Pipes of a tree network plus mirrored return pipes, with flows summed from the loads.
pub fn build_network(supply: &[(usize, usize, f64, f64, f64)], load_flows: &[(usize, f64)], soil: f64, horizon: usize) -> HeatNetwork {
    let mut pipes = Vec::new();
    let mut flows = Vec::new();
    let flow_into = |node: usize| -> f64 {
        // all loads downstream of `node`
        load_flows
            .iter()
            .filter(|&&(l, _)| {
                let mut n = l;
                loop {
                    if n == node {
                        return true;
                    }
                    match supply.iter().find(|s| s.1 == n) {
                        Some(s) => n = s.0,
                        None => return false,
                    }
                }
            })
            .map(|l| l.1)
            .sum()
    };
    for (i, &(from, to, length, diameter, r)) in supply.iter().enumerate() {
        pipes.push(Pipe { id: i + 1, from_node: from, to_node: to, length, diameter, resistance_sum: r, kind: PipeKind::Supply });
        flows.push(flow_into(to));
    }
    let n = supply.len();
    for (i, &(from, to, length, diameter, r)) in supply.iter().enumerate() {
        pipes.push(Pipe { id: n + i + 1, from_node: to, to_node: from, length, diameter, resistance_sum: r, kind: PipeKind::Return });
        flows.push(flow_into(to));
    }
    HeatNetwork {
        soil_temperature: vec![vec![soil; horizon]; pipes.len()],
        pipes,
        nominal_flows: flows,
        water_heat_capacity: 4.2,
        water_density: 1000.0,
        supply_temp: 95.0,
        supply_temp_limits: (90.0, 100.0),
        return_temp_nominal: 50.0,
        return_temp_limits: (30.0, 65.0),
        history_injection: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_pipe(length: f64, r: f64, q: f64, d: f64) -> HeatNetwork {
        HeatNetwork {
            pipes: vec![Pipe { id: 1, from_node: 1, to_node: 2, length, diameter: d, resistance_sum: r, kind: PipeKind::Supply }],
            nominal_flows: vec![q],
            soil_temperature: vec![vec![5.0; 8]],
            water_heat_capacity: 4.2,
            water_density: 1000.0,
            supply_temp: 95.0,
            supply_temp_limits: (90.0, 100.0),
            return_temp_nominal: 50.0,
            return_temp_limits: (30.0, 65.0),
            history_injection: None,
        }
    }

    #[test]
    fn operating_temps_stay_in_limits() {
        let n = single_pipe(1000.0, 2.0, 100.0, 0.3);
        let (lo, hi) = n.source_heat_range();
        assert!((lo - 100.0 * 4.2 * 25.0 / 1000.0).abs() < 1e-12);
        assert!((hi - 100.0 * 4.2 * 70.0 / 1000.0).abs() < 1e-12);
        for q in [lo, 0.5 * (lo + hi), hi] {
            let (ts, tr) = n.operating_temps(q);
            assert!((source_heat(100.0, ts, tr, 4.2) - q).abs() < 1e-9);
            assert!(ts >= 90.0 - 1e-9 && ts <= 100.0 + 1e-9 && tr >= 30.0 - 1e-9 && tr <= 65.0 + 1e-9);
        }
        assert_eq!(n.operating_temps(100.0 * 4.2 * 45.0 / 1000.0).0, 95.0);
    }

    #[test]
    fn source_heat_examples() {
        assert!((source_heat(100.0, 95.0, 55.0, 4.2) - 16.8).abs() < 1e-12);
        assert_eq!(source_heat(100.0, 70.0, 70.0, 4.2), 0.0);
        assert!((source_heat(50.0, 100.0, 60.0, 4.2) - 8.4).abs() < 1e-12);
    }

    #[test]
    fn pipe_power_examples() {
        assert!((pipe_heat_power(100.0, 95.0, 4.2) - 39.9).abs() < 1e-12);
        assert_eq!(pipe_heat_power(100.0, 0.0, 4.2), 0.0);
        assert_eq!(pipe_heat_power(0.0, 95.0, 4.2), 0.0);
    }

    #[test]
    fn mixing_examples() {
        assert_eq!(node_mix_temperature(&[(10.0, 90.0), (30.0, 80.0)]).unwrap(), 82.5);
        assert_eq!(node_mix_temperature(&[(7.0, 88.0)]).unwrap(), 88.0);
        assert_eq!(node_mix_temperature(&[(5.0, 70.0), (5.0, 90.0)]).unwrap(), 80.0);
        assert_eq!(node_mix_temperature(&[]), Err(NetworkError::EmptyInflow));
    }

    #[test]
    fn velocity_and_delay_examples() {
        let v = pipe_velocity(100.0, 0.5, 1000.0);
        assert!((v - 0.5093).abs() < 1e-3);
        assert!((pipe_velocity(100.0, 1.0, 1000.0) - v / 4.0).abs() < 1e-12);
        assert_eq!(pipe_velocity(0.0, 0.5, 1000.0), 0.0);
        assert_eq!(pipe_delay_steps(5000.0, 0.5093, 1.0), 3);
        assert_eq!(pipe_delay_steps(1833.3, 0.5093, 1.0), 1);
        assert_eq!(pipe_delay_steps(0.0, 0.5093, 1.0), 0);
        // exactly half a step rounds up
        assert_eq!(pipe_delay_steps(1800.0, 1.0, 1.0), 1);
    }

    #[test]
    fn loss_examples() {
        assert!((pipe_heat_loss(95.0, 5.0, 2.0, 1000.0) - 0.2827).abs() < 1e-4);
        assert_eq!(pipe_heat_loss(5.0, 5.0, 2.0, 1000.0), 0.0);
        let a = pipe_heat_loss(95.0, 5.0, 2.0, 1000.0);
        assert!((pipe_heat_loss(95.0, 5.0, 2.0, 2000.0) - 2.0 * a).abs() < 1e-12);
        assert!(pipe_heat_loss(2.0, 5.0, 2.0, 1000.0) < 0.0);
    }

    #[test]
    fn mass_balance_examples() {
        let net = single_pipe(1000.0, 2.0, 10.0, 0.5);
        let r = net.mass_balance_residual(&[(1, 10.0)]).unwrap();
        assert_eq!(r[&1], -10.0);
        assert_eq!(r[&2], 10.0);
        assert_eq!(net.mass_balance_residual(&[(9, 1.0)]), Err(NetworkError::UnknownPipe(9)));
        assert_eq!(net.mass_balance_residual(&[]), Err(NetworkError::MissingFlow(1)));

        let mut y = single_pipe(1000.0, 2.0, 10.0, 0.5);
        y.pipes.push(Pipe { id: 2, from_node: 3, to_node: 2, length: 1.0, diameter: 1.0, resistance_sum: 1.0, kind: PipeKind::Supply });
        y.pipes.push(Pipe { id: 3, from_node: 2, to_node: 4, length: 1.0, diameter: 1.0, resistance_sum: 1.0, kind: PipeKind::Supply });
        let r = y.mass_balance_residual(&[(1, 10.0), (2, 30.0), (3, 40.0)]).unwrap();
        assert_eq!(r[&2], 0.0);
    }

    #[test]
    fn single_pipe_propagation() {
        // 0.2827 MW loss; choose a velocity giving one step of delay
        let mut net = single_pipe(1000.0, 2.0, 1.0, 0.02);
        let v = pipe_velocity(1.0, 0.02, 1000.0);
        net.pipes[0].length = v * 3600.0;
        let loss = pipe_heat_loss(95.0, 5.0, 2.0, net.pipes[0].length);
        net.pipes[0].resistance_sum *= loss / 0.28;
        let prop = net.propagate_source_to_load(&[10.0, 12.0, 11.0], &[95.0; 3], 1.0).unwrap();
        assert_eq!(prop.pipe_delays, vec![1]);
        let l = &prop.load[0];
        assert!((l[0] - 9.72).abs() < 1e-9);
        assert!((l[1] - 9.72).abs() < 1e-9);
        assert!((l[2] - 11.72).abs() < 1e-9);
        let short = net.propagate_source_to_load(&[], &[], 1.0);
        assert_eq!(short, Err(NetworkError::HorizonTooShort { horizon: 0, delay: 1 }));
    }

    #[test]
    fn zero_loss_zero_delay_is_identity() {
        let mut net = single_pipe(1e-3, 1e30, 100.0, 1.0);
        net.soil_temperature = vec![vec![95.0; 4]];
        let q = [3.0, 4.0, 5.0, 6.0];
        let prop = net.propagate_source_to_load(&q, &[95.0; 4], 1.0).unwrap();
        assert_eq!(prop.load[0], q.to_vec());
    }

    fn two_branch() -> HeatNetwork {
        build_network(&[(1, 2, 4000.0, 0.6, 2.0), (2, 3, 2000.0, 0.4, 2.0), (2, 4, 6000.0, 0.4, 2.0)], &[(3, 100.0), (4, 150.0)], 5.0, 12)
    }

    #[test]
    fn built_network_balances() {
        let net = two_branch();
        net.validate().unwrap();
        let r = net.mass_balance_residual(&net.nominal_flow_pairs()).unwrap();
        assert!(r.values().all(|&v| v == 0.0));
        assert_eq!(net.source_flow(), 250.0);
    }

    proptest! {
        #[test]
        fn parallel_paths_conserve_energy(q in proptest::collection::vec(50.0..150.0f64, 12)) {
            let net = two_branch();
            let prop = net.propagate_source_to_load(&q, &[95.0; 12], 1.0).unwrap();
            let injected: f64 = q.iter().sum();
            let lost: f64 = prop.loss.iter().sum();
            let delivered: f64 = prop.load.iter().flatten().sum();
            let boundary = prop.in_flight - prop.from_history;
            prop_assert!((injected - lost - delivered - boundary).abs() < 1e-9 * injected);
        }

        #[test]
        fn mixing_within_range(pairs in proptest::collection::vec((0.1..100.0f64, 0.0..120.0f64), 1..6)) {
            let t = node_mix_temperature(&pairs).unwrap();
            let lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9);
        }

        #[test]
        fn delay_monotone(l in 0.0..20000.0f64, dl in 0.0..5000.0f64, v in 0.1..3.0f64, dv in 0.0..1.0f64) {
            prop_assert!(pipe_delay_steps(l + dl, v, 1.0) >= pipe_delay_steps(l, v, 1.0));
            prop_assert!(pipe_delay_steps(l, v + dv, 1.0) <= pipe_delay_steps(l, v, 1.0));
        }
    }
}
