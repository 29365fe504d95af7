//! Feeder, candidate assets and time structure.
//!
//! All electrical quantities held by [`GridModel`] are per unit on
//! `s_base_mva`, except BESS sizes and costs which stay in MW (the planning
//! builders convert). Voltage limits and regulation ratios are squared, so
//! they enter the LinDistFlow constraints linearly.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HYPERPLANES: usize = 12;

/// A voltage regulator that may be installed at a bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatorCandidate {
    pub cost: f64,
    pub ratio_min_sq: f64,
    pub ratio_max_sq: f64,
    pub big_m: Option<f64>,
}

/// Voltage regulation at a bus, either already in service or a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegulatorSite {
    Existing { ratio_min_sq: f64, ratio_max_sq: f64 },
    Candidate(RegulatorCandidate),
}

impl RegulatorSite {
    pub fn ratio_bounds(&self) -> (f64, f64) {
        match self {
            RegulatorSite::Existing {
                ratio_min_sq,
                ratio_max_sq,
            } => (*ratio_min_sq, *ratio_max_sq),
            RegulatorSite::Candidate(c) => (c.ratio_min_sq, c.ratio_max_sq),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub vmin_sq: f64,
    pub vmax_sq: f64,
    pub is_poi: bool,
    pub regulator: Option<RegulatorSite>,
}

impl Bus {
    pub fn new(id: impl Into<String>, vmin: f64, vmax: f64) -> Self {
        Bus {
            id: id.into(),
            vmin_sq: vmin * vmin,
            vmax_sq: vmax * vmax,
            is_poi: false,
            regulator: None,
        }
    }

    pub fn has_existing_regulator(&self) -> bool {
        matches!(self.regulator, Some(RegulatorSite::Existing { .. }))
    }

    pub fn regulator_candidate(&self) -> Option<&RegulatorCandidate> {
        match &self.regulator {
            Some(RegulatorSite::Candidate(c)) => Some(c),
            _ => None,
        }
    }

    /// Bus has existing or candidate regulation.
    pub fn is_regulated(&self) -> bool {
        self.regulator.is_some()
    }
}

/// One way of building a corridor: the existing conductor or a reinforcement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineOption {
    pub id: String,
    pub cost: f64,
    pub resistance: f64,
    pub reactance: f64,
    /// Apparent-power rating, p.u.
    pub capacity: f64,
    pub big_m: Option<f64>,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub from_bus: String,
    pub to_bus: String,
    pub options: Vec<LineOption>,
}

impl Corridor {
    pub fn baseline(&self) -> Option<&LineOption> {
        self.options.iter().find(|o| o.baseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessCandidate {
    pub id: String,
    pub bus: String,
    /// Currency per MW of power rating.
    pub unit_cost: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    /// Energy-to-power ratio, hours.
    pub duration_ratio: f64,
    /// MW.
    pub max_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStructure {
    pub hours_per_day: usize,
    pub day_ids: Vec<u32>,
    pub day_weights: Option<Vec<f64>>,
}

impl TimeStructure {
    pub fn new(hours_per_day: usize, day_ids: Vec<u32>) -> Self {
        TimeStructure {
            hours_per_day,
            day_ids,
            day_weights: None,
        }
    }

    pub fn num_days(&self) -> usize {
        self.day_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub name: String,
    pub buses: Vec<Bus>,
    pub corridors: Vec<Corridor>,
    pub bess_candidates: Vec<BessCandidate>,
    pub hours_per_day: usize,
    pub s_base_mva: f64,
    pub hyperplane_count: usize,
    /// Squared voltage held at the point of interconnection.
    pub v_ref_sq: f64,
}

/// A problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonRadial(String),
    DanglingReference(String),
    NonPositive(String),
    DuplicateId(String),
    PoiCount(usize),
    VoltageBounds(String),
    Regulator(String),
    Options(String),
    Bess(String),
    Time(String),
    BadIdentifier(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonRadial(m) => write!(f, "non-radial topology: {m}"),
            Violation::DanglingReference(m) => write!(f, "dangling reference: {m}"),
            Violation::NonPositive(m) => write!(f, "nonpositive value: {m}"),
            Violation::DuplicateId(m) => write!(f, "duplicate id: {m}"),
            Violation::PoiCount(n) => write!(f, "expected exactly one PoI bus, found {n}"),
            Violation::VoltageBounds(m) => write!(f, "voltage bounds: {m}"),
            Violation::Regulator(m) => write!(f, "regulator: {m}"),
            Violation::Options(m) => write!(f, "line options: {m}"),
            Violation::Bess(m) => write!(f, "bess candidate: {m}"),
            Violation::Time(m) => write!(f, "time structure: {m}"),
            Violation::BadIdentifier(m) => write!(f, "identifier: {m}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidModel(msgs.join("; ")))
        }
    }
}

/// Identifiers become parts of LP-file variable names, so they are limited
/// to characters every LP reader accepts.
pub fn is_valid_identifier(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Check a parsed model for structural problems. An empty report means the
/// model can be handed to the planning builders.
pub fn validate(model: &GridModel) -> ValidationReport {
    let mut v = Vec::new();

    let mut bus_ids = HashSet::new();
    for bus in &model.buses {
        if !is_valid_identifier(&bus.id) {
            v.push(Violation::BadIdentifier(format!("bus '{}'", bus.id)));
        }
        if !bus_ids.insert(bus.id.as_str()) {
            v.push(Violation::DuplicateId(format!("bus {}", bus.id)));
        }
        if !(bus.vmin_sq > 0.0 && bus.vmin_sq < bus.vmax_sq && bus.vmax_sq.is_finite()) {
            v.push(Violation::VoltageBounds(format!(
                "bus {}: need 0 < vmin_sq < vmax_sq, got [{}, {}]",
                bus.id, bus.vmin_sq, bus.vmax_sq
            )));
        }
        if let Some(site) = &bus.regulator {
            let (lo, hi) = site.ratio_bounds();
            if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
                v.push(Violation::Regulator(format!(
                    "bus {}: need 0 < ratio_min_sq <= 1 <= ratio_max_sq, got [{lo}, {hi}]",
                    bus.id
                )));
            }
            if let RegulatorSite::Candidate(c) = site {
                if !(c.cost >= 0.0) {
                    v.push(Violation::Regulator(format!("bus {}: negative cost", bus.id)));
                }
                if bus.is_poi {
                    v.push(Violation::Regulator(format!(
                        "bus {}: the PoI cannot host a regulator",
                        bus.id
                    )));
                }
            }
            if bus.is_poi && matches!(site, RegulatorSite::Existing { .. }) {
                v.push(Violation::Regulator(format!(
                    "bus {}: the PoI cannot host a regulator",
                    bus.id
                )));
            }
        }
    }
    let poi_count = model.buses.iter().filter(|b| b.is_poi).count();
    if poi_count != 1 {
        v.push(Violation::PoiCount(poi_count));
    }

    let mut option_ids = HashSet::new();
    for (ci, c) in model.corridors.iter().enumerate() {
        for end in [&c.from_bus, &c.to_bus] {
            if !bus_ids.contains(end.as_str()) {
                v.push(Violation::DanglingReference(format!(
                    "corridor {ci} references unknown bus '{end}'"
                )));
            }
        }
        if c.from_bus == c.to_bus {
            v.push(Violation::NonRadial(format!("corridor {ci} is a self-loop")));
        }
        if c.options.is_empty() {
            v.push(Violation::Options(format!("corridor {ci} has no options")));
        }
        let baselines = c.options.iter().filter(|o| o.baseline).count();
        if !c.options.is_empty() && baselines != 1 {
            v.push(Violation::Options(format!(
                "corridor {}-{} has {baselines} baseline options, expected 1",
                c.from_bus, c.to_bus
            )));
        }
        for o in &c.options {
            if !is_valid_identifier(&o.id) {
                v.push(Violation::BadIdentifier(format!("line option '{}'", o.id)));
            }
            if !option_ids.insert(o.id.as_str()) {
                v.push(Violation::DuplicateId(format!("line option {}", o.id)));
            }
            if !(o.capacity > 0.0 && o.capacity.is_finite()) {
                v.push(Violation::NonPositive(format!("capacity of option {}", o.id)));
            }
            if !(o.resistance >= 0.0 && o.reactance >= 0.0) {
                v.push(Violation::NonPositive(format!("impedance of option {}", o.id)));
            }
            if !(o.cost >= 0.0) {
                v.push(Violation::NonPositive(format!("cost of option {}", o.id)));
            }
            if o.baseline && o.cost != 0.0 {
                v.push(Violation::Options(format!(
                    "baseline option {} must have zero cost",
                    o.id
                )));
            }
            if let Some(m) = o.big_m {
                if !(m > 0.0 && m.is_finite()) {
                    v.push(Violation::NonPositive(format!("big_m of option {}", o.id)));
                }
            }
        }
    }

    let mut bess_ids = HashSet::new();
    for b in &model.bess_candidates {
        if !is_valid_identifier(&b.id) {
            v.push(Violation::BadIdentifier(format!("bess '{}'", b.id)));
        }
        if !bess_ids.insert(b.id.as_str()) {
            v.push(Violation::DuplicateId(format!("bess {}", b.id)));
        }
        if !bus_ids.contains(b.bus.as_str()) {
            v.push(Violation::DanglingReference(format!(
                "bess {} references unknown bus '{}'",
                b.id, b.bus
            )));
        }
        if !(b.eff_charge > 0.0 && b.eff_charge <= 1.0) {
            v.push(Violation::Bess(format!("{}: eff_charge outside (0, 1]", b.id)));
        }
        if !(b.eff_discharge > 0.0 && b.eff_discharge <= 1.0) {
            v.push(Violation::Bess(format!("{}: eff_discharge outside (0, 1]", b.id)));
        }
        if !(b.duration_ratio > 0.0) {
            v.push(Violation::NonPositive(format!("duration_ratio of bess {}", b.id)));
        }
        if !(b.max_capacity > 0.0 && b.max_capacity.is_finite()) {
            v.push(Violation::NonPositive(format!("max_capacity of bess {}", b.id)));
        }
        if !(b.unit_cost >= 0.0) {
            v.push(Violation::NonPositive(format!("unit_cost of bess {}", b.id)));
        }
    }

    if model.hours_per_day == 0 {
        v.push(Violation::Time("hours_per_day must be at least 1".into()));
    }
    if !(model.s_base_mva > 0.0) {
        v.push(Violation::NonPositive("s_base_mva".into()));
    }
    if model.hyperplane_count < 4 {
        v.push(Violation::Options(format!(
            "hyperplane_count {} below 4",
            model.hyperplane_count
        )));
    }
    if !(model.v_ref_sq > 0.0) {
        v.push(Violation::VoltageBounds("v_ref_sq must be positive".into()));
    }

    // Radiality only makes sense once references resolve.
    let dangling = v
        .iter()
        .any(|x| matches!(x, Violation::DanglingReference(_)));
    if !dangling && poi_count == 1 {
        if model.corridors.len() + 1 != model.buses.len() {
            v.push(Violation::NonRadial(format!(
                "{} corridors for {} buses (a tree needs buses - 1)",
                model.corridors.len(),
                model.buses.len()
            )));
        } else if let Err(msg) = orient(model) {
            v.push(Violation::NonRadial(msg));
        }
    }

    ValidationReport { violations: v }
}

/// Oriented view of a radial feeder.
#[derive(Debug, Clone)]
pub struct Topology {
    pub root: usize,
    pub bus_index: HashMap<String, usize>,
    /// Buses in breadth-first order from the root.
    pub order: Vec<usize>,
    /// Corridor feeding each bus (None for the root).
    pub parent_corridor: Vec<Option<usize>>,
    /// Per corridor: (bus nearer the root, bus farther from the root).
    pub ends: Vec<(usize, usize)>,
    /// Corridors leaving each bus away from the root.
    pub children: Vec<Vec<usize>>,
}

impl Topology {
    pub fn parent_bus(&self, bus: usize) -> Option<usize> {
        self.parent_corridor[bus].map(|c| self.ends[c].0)
    }
}

fn orient(model: &GridModel) -> std::result::Result<Topology, String> {
    let bus_index: HashMap<String, usize> = model
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.clone(), i))
        .collect();
    let n = model.buses.len();
    let root = model
        .buses
        .iter()
        .position(|b| b.is_poi)
        .ok_or_else(|| "no PoI bus".to_string())?;
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (ci, c) in model.corridors.iter().enumerate() {
        let a = *bus_index
            .get(&c.from_bus)
            .ok_or_else(|| format!("unknown bus {}", c.from_bus))?;
        let b = *bus_index
            .get(&c.to_bus)
            .ok_or_else(|| format!("unknown bus {}", c.to_bus))?;
        adjacency[a].push((b, ci));
        adjacency[b].push((a, ci));
    }
    let mut ends = vec![(usize::MAX, usize::MAX); model.corridors.len()];
    let mut parent_corridor = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(w, ci) in &adjacency[u] {
            if Some(ci) == parent_corridor[u] {
                continue;
            }
            if seen[w] {
                return Err(format!(
                    "cycle through corridor {}-{}",
                    model.corridors[ci].from_bus, model.corridors[ci].to_bus
                ));
            }
            seen[w] = true;
            ends[ci] = (u, w);
            parent_corridor[w] = Some(ci);
            children[u].push(ci);
            queue.push_back(w);
        }
    }
    if order.len() != n {
        return Err(format!(
            "{} of {n} buses unreachable from the PoI",
            n - order.len()
        ));
    }
    Ok(Topology {
        root,
        bus_index,
        order,
        parent_corridor,
        ends,
        children,
    })
}

impl GridModel {
    /// Validate and orient the feeder.
    pub fn topology(&self) -> Result<Topology> {
        validate(self).into_result()?;
        orient(self).map_err(Error::InvalidModel)
    }

    pub fn bus_position(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn poi(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.is_poi)
    }

    pub fn options(&self) -> impl Iterator<Item = &LineOption> {
        self.corridors.iter().flat_map(|c| c.options.iter())
    }

    pub fn find_option(&self, id: &str) -> Option<(usize, &LineOption)> {
        self.corridors.iter().enumerate().find_map(|(ci, c)| {
            c.options.iter().find(|o| o.id == id).map(|o| (ci, o))
        })
    }

    pub fn max_vmax_sq(&self) -> f64 {
        self.buses.iter().map(|b| b.vmax_sq).fold(f64::MIN, f64::max)
    }

    pub fn min_vmin_sq(&self) -> f64 {
        self.buses.iter().map(|b| b.vmin_sq).fold(f64::MAX, f64::min)
    }

    /// Number of binary decisions the planning models carry.
    pub fn binary_count(&self) -> usize {
        self.options().count()
            + self
                .buses
                .iter()
                .filter(|b| b.regulator_candidate().is_some())
                .count()
    }
}

/// Coefficients of the regular J-gon inscribed in the disk of radius C:
/// `cp * x_p + cq * x_q <= C` for every returned `(cp, cq)`.
pub fn hyperplanes(count: usize) -> Result<Vec<(f64, f64)>> {
    if count < 4 {
        return Err(Error::InvalidParameter(format!(
            "hyperplane count must be at least 4, got {count}"
        )));
    }
    let scale = 1.0 / (PI / count as f64).cos();
    Ok((0..count)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / count as f64;
            (theta.cos() * scale, theta.sin() * scale)
        })
        .collect())
}

/// Label describing how a scenario was generated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLabel {
    pub load_growth: Option<f64>,
    pub adoption: Option<String>,
}

/// Netload realizations indexed by (scenario, bus, day, hour), in MW/MVAr.
/// Bus order follows the grid model the set was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenario_ids: Vec<String>,
    pub bus_ids: Vec<String>,
    pub time: TimeStructure,
    pub netload_p: Vec<f64>,
    pub netload_q: Vec<f64>,
    pub labels: Vec<ScenarioLabel>,
}

impl ScenarioSet {
    /// An all-zero set with the given dimensions.
    pub fn zeros(scenario_ids: Vec<String>, bus_ids: Vec<String>, time: TimeStructure) -> Self {
        let len = scenario_ids.len() * bus_ids.len() * time.num_days() * time.hours_per_day;
        let labels = vec![ScenarioLabel::default(); scenario_ids.len()];
        ScenarioSet {
            scenario_ids,
            bus_ids,
            time,
            netload_p: vec![0.0; len],
            netload_q: vec![0.0; len],
            labels,
        }
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenario_ids.len()
    }

    pub fn num_buses(&self) -> usize {
        self.bus_ids.len()
    }

    #[inline]
    pub fn index(&self, k: usize, n: usize, d: usize, h: usize) -> usize {
        let hours = self.time.hours_per_day;
        ((k * self.bus_ids.len() + n) * self.time.num_days() + d) * hours + h
    }

    #[inline]
    pub fn p(&self, k: usize, n: usize, d: usize, h: usize) -> f64 {
        self.netload_p[self.index(k, n, d, h)]
    }

    #[inline]
    pub fn q(&self, k: usize, n: usize, d: usize, h: usize) -> f64 {
        self.netload_q[self.index(k, n, d, h)]
    }

    pub fn set(&mut self, k: usize, n: usize, d: usize, h: usize, p: f64, q: f64) {
        let i = self.index(k, n, d, h);
        self.netload_p[i] = p;
        self.netload_q[i] = q;
    }

    pub fn position(&self, scenario_id: &str) -> Option<usize> {
        self.scenario_ids.iter().position(|s| s == scenario_id)
    }

    /// Sum of bus active netloads for one scenario at (day, hour).
    pub fn aggregate_p(&self, k: usize, d: usize, h: usize) -> f64 {
        (0..self.num_buses()).map(|n| self.p(k, n, d, h)).sum()
    }

    /// Copy of the selected scenarios, in the given order.
    pub fn subset(&self, picks: &[usize]) -> ScenarioSet {
        let block = self.num_buses() * self.time.num_days() * self.time.hours_per_day;
        let mut p = Vec::with_capacity(picks.len() * block);
        let mut q = Vec::with_capacity(picks.len() * block);
        for &k in picks {
            p.extend_from_slice(&self.netload_p[k * block..(k + 1) * block]);
            q.extend_from_slice(&self.netload_q[k * block..(k + 1) * block]);
        }
        ScenarioSet {
            scenario_ids: picks.iter().map(|&k| self.scenario_ids[k].clone()).collect(),
            bus_ids: self.bus_ids.clone(),
            time: self.time.clone(),
            netload_p: p,
            netload_q: q,
            labels: picks.iter().map(|&k| self.labels[k].clone()).collect(),
        }
    }

    /// Concatenate scenarios of two sets sharing buses and time structure.
    pub fn concat(&self, other: &ScenarioSet) -> Result<ScenarioSet> {
        if self.bus_ids != other.bus_ids || self.time != other.time {
            return Err(Error::InvalidScenarios(
                "cannot concatenate sets with different buses or days".into(),
            ));
        }
        let mut out = self.clone();
        out.scenario_ids.extend(other.scenario_ids.iter().cloned());
        out.netload_p.extend_from_slice(&other.netload_p);
        out.netload_q.extend_from_slice(&other.netload_q);
        out.labels.extend(other.labels.iter().cloned());
        Ok(out)
    }

    /// Check dimensions, finiteness and consistency with a grid model.
    pub fn check_against(&self, model: &GridModel) -> Result<()> {
        let expected = self.num_scenarios()
            * self.num_buses()
            * self.time.num_days()
            * self.time.hours_per_day;
        if self.netload_p.len() != expected || self.netload_q.len() != expected {
            return Err(Error::InvalidScenarios(format!(
                "array length {} / {} does not match dimensions ({expected})",
                self.netload_p.len(),
                self.netload_q.len()
            )));
        }
        if self.labels.len() != self.num_scenarios() {
            return Err(Error::InvalidScenarios("one label per scenario required".into()));
        }
        if self.scenario_ids.is_empty() {
            return Err(Error::InvalidScenarios("no scenarios".into()));
        }
        let mut seen = HashSet::new();
        for id in &self.scenario_ids {
            if !is_valid_identifier(id) {
                return Err(Error::InvalidScenarios(format!("bad scenario id '{id}'")));
            }
            if !seen.insert(id) {
                return Err(Error::InvalidScenarios(format!("duplicate scenario id {id}")));
            }
        }
        let mut days = HashSet::new();
        if !self.time.day_ids.iter().all(|d| days.insert(*d)) {
            return Err(Error::InvalidScenarios("duplicate day ids".into()));
        }
        if self.time.day_ids.is_empty() {
            return Err(Error::InvalidScenarios("no representative days".into()));
        }
        if self.time.hours_per_day != model.hours_per_day {
            return Err(Error::InvalidScenarios(format!(
                "hours per day {} differs from the feeder's {}",
                self.time.hours_per_day, model.hours_per_day
            )));
        }
        let model_ids: Vec<&str> = model.buses.iter().map(|b| b.id.as_str()).collect();
        let own_ids: Vec<&str> = self.bus_ids.iter().map(String::as_str).collect();
        if model_ids != own_ids {
            return Err(Error::InvalidScenarios(
                "bus order differs from the grid model".into(),
            ));
        }
        if self
            .netload_p
            .iter()
            .chain(self.netload_q.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidScenarios("non-finite netload".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn option(id: &str, cost: f64, r: f64, x: f64, cap: f64, baseline: bool) -> LineOption {
        LineOption {
            id: id.into(),
            cost,
            resistance: r,
            reactance: x,
            capacity: cap,
            big_m: None,
            baseline,
        }
    }

    pub fn path_feeder(n: usize) -> GridModel {
        let mut buses: Vec<Bus> = (0..n).map(|i| Bus::new(format!("b{i}"), 0.95, 1.05)).collect();
        buses[0].is_poi = true;
        let corridors = (1..n)
            .map(|i| Corridor {
                from_bus: format!("b{}", i - 1),
                to_bus: format!("b{i}"),
                options: vec![option(&format!("l{i}"), 0.0, 0.01, 0.01, 1.0, true)],
            })
            .collect();
        GridModel {
            name: "path".into(),
            buses,
            corridors,
            bess_candidates: vec![],
            hours_per_day: 24,
            s_base_mva: 1.0,
            hyperplane_count: 12,
            v_ref_sq: 1.0,
        }
    }

    #[test]
    fn path_feeder_is_valid() {
        let report = validate(&path_feeder(3));
        assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn cycle_is_non_radial() {
        let mut m = path_feeder(3);
        // Replace the bus count check trigger: 3 corridors among 3 buses.
        m.corridors.push(Corridor {
            from_bus: "b2".into(),
            to_bus: "b0".into(),
            options: vec![option("l3", 0.0, 0.01, 0.01, 1.0, true)],
        });
        let report = validate(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().starts_with("non-radial topology")));
    }

    #[test]
    fn cycle_with_disconnected_bus_is_non_radial() {
        let mut m = path_feeder(4);
        // b1-b2-b3 loop plus an isolated bus keeps the count at buses - 1.
        m.corridors[0].to_bus = "b2".into();
        m.corridors[0].from_bus = "b3".into();
        let report = validate(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonRadial(_))));
    }

    #[test]
    fn unknown_bus_is_dangling() {
        let mut m = path_feeder(3);
        m.corridors[1].to_bus = "nowhere".into();
        let report = validate(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().starts_with("dangling reference")));
    }

    #[test]
    fn nonpositive_capacity_reported() {
        let mut m = path_feeder(3);
        m.corridors[0].options[0].capacity = 0.0;
        let report = validate(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonPositive(_))));
    }

    #[test]
    fn baseline_count_and_cost_checked() {
        let mut m = path_feeder(3);
        m.corridors[0].options.push(option("up", 3.0, 0.0, 0.0, 2.0, true));
        assert!(!validate(&m).is_valid());
        m.corridors[0].options[1].baseline = false;
        assert!(validate(&m).is_valid());
        m.corridors[0].options[0].cost = 1.0;
        assert!(!validate(&m).is_valid());
    }

    #[test]
    fn exactly_one_poi() {
        let mut m = path_feeder(3);
        m.buses[1].is_poi = true;
        assert!(validate(&m)
            .violations
            .contains(&Violation::PoiCount(2)));
    }

    #[test]
    fn topology_orients_towards_leaves() {
        let mut m = path_feeder(4);
        // Written leaf-to-root; orientation must still put b2 nearer the root.
        let c = &mut m.corridors[2];
        std::mem::swap(&mut c.from_bus, &mut c.to_bus);
        let t = m.topology().unwrap();
        assert_eq!(t.ends[2], (2, 3));
        assert_eq!(t.order, vec![0, 1, 2, 3]);
        assert_eq!(t.parent_bus(3), Some(2));
        assert_eq!(t.parent_bus(0), None);
    }

    #[test]
    fn hyperplanes_rejects_small_counts() {
        assert!(hyperplanes(3).is_err());
        assert_eq!(hyperplanes(4).unwrap().len(), 4);
    }

    #[test]
    fn square_polygon_coefficients() {
        let hp = hyperplanes(4).unwrap();
        let s = 2f64.sqrt();
        let expected = [(s, 0.0), (0.0, s), (-s, 0.0), (0.0, -s)];
        for ((a, b), (ea, eb)) in hp.iter().zip(expected) {
            assert!((a - ea).abs() < 1e-12 && (b - eb).abs() < 1e-12);
        }
        // Vertices of {|x_p|, |x_q| <= C / sqrt 2} enumerated directly.
        let c = 1.0;
        for (sp, sq) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let (xp, xq) = (sp * c / s, sq * c / s);
            assert!(hp.iter().all(|(a, b)| a * xp + b * xq <= c + 1e-12));
            assert!(xp * xp + xq * xq <= c * c + 1e-12);
        }
    }

    #[test]
    fn twelve_gon_points() {
        let hp = hyperplanes(12).unwrap();
        let c = 1.0;
        let inside = |x: (f64, f64)| hp.iter().all(|(a, b)| a * x.0 + b * x.1 <= c + 1e-12);
        assert!(!inside((c, 0.0)));
        let t = PI / 12.0;
        assert!(inside((0.95 * c * t.cos(), 0.95 * c * t.sin())));
        assert!(inside((0.0, 0.0)));
    }

    #[test]
    fn scenario_subset_and_index() {
        let time = TimeStructure::new(2, vec![5, 9]);
        let mut s = ScenarioSet::zeros(
            vec!["a".into(), "b".into()],
            vec!["b0".into(), "b1".into()],
            time,
        );
        s.set(1, 1, 1, 1, 3.0, 0.5);
        let sub = s.subset(&[1]);
        assert_eq!(sub.p(0, 1, 1, 1), 3.0);
        assert_eq!(sub.q(0, 1, 1, 1), 0.5);
        assert_eq!(sub.scenario_ids, vec!["b".to_string()]);
        assert_eq!(s.aggregate_p(1, 1, 1), 3.0);
    }
}
