//! Feeder documents, columnar netload files and the bundled test feeder.
//!
//! The feeder document is TOML with the tables `buses`, `corridors`,
//! `line_options`, `bess_candidates` and `regulators`. Voltages and ratios
//! are given as magnitudes (squared on ingest), line ratings in MVA and
//! impedances in p.u. on `s_base_mva`.
//!
//! Netloads are CSV with header `scenario,bus,day,hour,p_mw,q_mvar`; the
//! base-year profile is CSV with header `day,hour,load_pu,pv_pu`.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    validate, BessCandidate, Bus, Corridor, GridModel, LineOption, RegulatorCandidate,
    RegulatorSite, ScenarioLabel, ScenarioSet, TimeStructure, DEFAULT_HYPERPLANES,
};
use crate::scenario::{BaseTimeseries, SiteLimits};

pub const BUNDLED_FEEDER: &str = include_str!("../data/feeder24.toml");
pub const BUNDLED_PROFILE: &str = include_str!("../data/profile.csv");

fn default_hours() -> usize {
    24
}
fn default_hyperplanes() -> usize {
    DEFAULT_HYPERPLANES
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederDoc {
    pub name: String,
    pub s_base_mva: f64,
    #[serde(default = "default_hours")]
    pub hours_per_day: usize,
    #[serde(default = "default_hyperplanes")]
    pub hyperplanes: usize,
    #[serde(default = "one")]
    pub v_ref: f64,
    pub buses: Vec<BusDoc>,
    pub corridors: Vec<CorridorDoc>,
    pub line_options: Vec<LineOptionDoc>,
    #[serde(default)]
    pub bess_candidates: Vec<BessDoc>,
    #[serde(default)]
    pub regulators: Vec<RegulatorDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusDoc {
    pub id: String,
    pub vmin: f64,
    pub vmax: f64,
    #[serde(default)]
    pub poi: bool,
    /// Base-year peak active load, MW.
    #[serde(default)]
    pub peak_mw: f64,
    #[serde(default = "one")]
    pub power_factor: f64,
    /// Rooftop limit for PV adoption, kW.
    #[serde(default)]
    pub roof_kw: f64,
    /// Annual compensated-energy cap, kWh.
    #[serde(default)]
    pub self_consumption_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorDoc {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineOptionDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub cost: f64,
    pub r: f64,
    pub x: f64,
    pub capacity_mva: f64,
    #[serde(default)]
    pub baseline: bool,
    pub big_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessDoc {
    pub id: String,
    pub bus: String,
    /// Currency per MW.
    pub unit_cost: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    pub duration_h: f64,
    pub max_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegulatorKind {
    Existing,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorDoc {
    pub bus: String,
    pub kind: RegulatorKind,
    /// Voltage-magnitude ratio bounds.
    pub ratio_min: f64,
    pub ratio_max: f64,
    #[serde(default)]
    pub cost: f64,
    pub big_m: Option<f64>,
}

/// Per-bus base-year load parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusLoad {
    pub peak_mw: f64,
    pub power_factor: f64,
}

/// A parsed feeder: the grid model plus per-bus load and PV-site data in
/// model bus order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederData {
    pub model: GridModel,
    pub loads: Vec<BusLoad>,
    pub sites: Vec<SiteLimits>,
}

fn parse_err(context: &str, message: impl ToString) -> Error {
    Error::Parse {
        context: context.to_string(),
        message: message.to_string(),
    }
}

impl FeederDoc {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| parse_err("feeder document", e))
    }

    /// Convert to the internal model, validating it.
    pub fn into_data(self) -> Result<FeederData> {
        let sb = self.s_base_mva;
        if !(sb > 0.0 && sb.is_finite()) {
            return Err(Error::InvalidModel("s_base_mva must be > 0".into()));
        }
        let mut regs: HashMap<&str, &RegulatorDoc> = HashMap::new();
        for r in &self.regulators {
            if regs.insert(r.bus.as_str(), r).is_some() {
                return Err(Error::InvalidModel(format!("two regulators at bus {}", r.bus)));
            }
        }
        let mut buses = Vec::new();
        let mut loads = Vec::new();
        let mut sites = Vec::new();
        for b in &self.buses {
            let mut bus = Bus::new(b.id.clone(), b.vmin, b.vmax);
            bus.is_poi = b.poi;
            if let Some(r) = regs.get(b.id.as_str()) {
                let (lo, hi) = (r.ratio_min * r.ratio_min, r.ratio_max * r.ratio_max);
                bus.regulator = Some(match r.kind {
                    RegulatorKind::Existing => RegulatorSite::Existing {
                        ratio_min_sq: lo,
                        ratio_max_sq: hi,
                    },
                    RegulatorKind::Candidate => RegulatorSite::Candidate(RegulatorCandidate {
                        cost: r.cost,
                        ratio_min_sq: lo,
                        ratio_max_sq: hi,
                        big_m: r.big_m,
                    }),
                });
            }
            buses.push(bus);
            if !(b.power_factor > 0.0 && b.power_factor <= 1.0) || b.peak_mw < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "bus {}: peak_mw must be >= 0 and power_factor in (0, 1]",
                    b.id
                )));
            }
            loads.push(BusLoad {
                peak_mw: b.peak_mw,
                power_factor: b.power_factor,
            });
            sites.push(SiteLimits {
                roof_limit_kw: b.roof_kw,
                self_consumption_cap_kwh: b.self_consumption_kwh,
            });
        }
        for r in &self.regulators {
            if !self.buses.iter().any(|b| b.id == r.bus) {
                return Err(Error::InvalidModel(format!(
                    "dangling reference: regulator at unknown bus {}",
                    r.bus
                )));
            }
        }
        let mut corridors: Vec<Corridor> = self
            .corridors
            .iter()
            .map(|c| Corridor {
                from_bus: c.from.clone(),
                to_bus: c.to.clone(),
                options: Vec::new(),
            })
            .collect();
        for o in &self.line_options {
            let c = corridors
                .iter_mut()
                .find(|c| {
                    (c.from_bus == o.from && c.to_bus == o.to)
                        || (c.from_bus == o.to && c.to_bus == o.from)
                })
                .ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "dangling reference: option {} on unknown corridor {}-{}",
                        o.id, o.from, o.to
                    ))
                })?;
            c.options.push(LineOption {
                id: o.id.clone(),
                cost: o.cost,
                resistance: o.r,
                reactance: o.x,
                capacity: o.capacity_mva / sb,
                big_m: o.big_m,
                baseline: o.baseline,
            });
        }
        let bess_candidates = self
            .bess_candidates
            .iter()
            .map(|b| BessCandidate {
                id: b.id.clone(),
                bus: b.bus.clone(),
                unit_cost: b.unit_cost,
                eff_charge: b.eff_charge,
                eff_discharge: b.eff_discharge,
                duration_ratio: b.duration_h,
                max_capacity: b.max_mw,
            })
            .collect();
        let model = GridModel {
            name: self.name,
            buses,
            corridors,
            bess_candidates,
            hours_per_day: self.hours_per_day,
            s_base_mva: sb,
            hyperplane_count: self.hyperplanes,
            v_ref_sq: self.v_ref * self.v_ref,
        };
        validate(&model).into_result()?;
        Ok(FeederData {
            model,
            loads,
            sites,
        })
    }
}

pub fn read_feeder(text: &str) -> Result<FeederData> {
    FeederDoc::from_toml(text)?.into_data()
}

pub fn bundled_feeder() -> FeederData {
    read_feeder(BUNDLED_FEEDER).expect("bundled feeder is valid")
}

/// Base-year per-unit load and PV profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub hours_per_day: usize,
    pub day_ids: Vec<u32>,
    /// [day * H + hour]
    pub load_pu: Vec<f64>,
    pub pv_pu: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ProfileRow {
    day: u32,
    hour: usize,
    load_pu: f64,
    pv_pu: f64,
}

pub fn read_profile<R: Read>(reader: R, hours_per_day: usize) -> Result<Profile> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut day_ids = Vec::new();
    let mut load_pu = Vec::new();
    let mut pv_pu = Vec::new();
    for (i, row) in rdr.deserialize::<ProfileRow>().enumerate() {
        let row = row?;
        let expected_hour = i % hours_per_day;
        if row.hour != expected_hour {
            return Err(parse_err(
                "profile",
                format!("row {}: hour {} where {expected_hour} expected", i + 2, row.hour),
            ));
        }
        if expected_hour == 0 {
            day_ids.push(row.day);
        } else if Some(&row.day) != day_ids.last() {
            return Err(parse_err("profile", format!("row {}: day changes mid-day", i + 2)));
        }
        if !(0.0..=1.0).contains(&row.pv_pu) || !row.load_pu.is_finite() {
            return Err(parse_err("profile", format!("row {}: value out of range", i + 2)));
        }
        load_pu.push(row.load_pu);
        pv_pu.push(row.pv_pu);
    }
    if load_pu.is_empty() || load_pu.len() % hours_per_day != 0 {
        return Err(parse_err("profile", "profile must hold whole days"));
    }
    Ok(Profile {
        hours_per_day,
        day_ids,
        load_pu,
        pv_pu,
    })
}

pub fn bundled_profile() -> Profile {
    read_profile(BUNDLED_PROFILE.as_bytes(), 24).expect("bundled profile is valid")
}

/// Per-bus base-year series: peak load times the per-unit load profile,
/// reactive load from the power factor.
pub fn base_timeseries(data: &FeederData, profile: &Profile) -> BaseTimeseries {
    let m = &data.model;
    let mut load_p = Vec::new();
    let mut load_q = Vec::new();
    for l in &data.loads {
        let tan = (1.0 - l.power_factor * l.power_factor).sqrt() / l.power_factor;
        let p: Vec<f64> = profile.load_pu.iter().map(|x| x * l.peak_mw).collect();
        load_q.push(p.iter().map(|x| x * tan).collect());
        load_p.push(p);
    }
    BaseTimeseries {
        hours_per_day: profile.hours_per_day,
        day_ids: profile.day_ids.clone(),
        bus_ids: m.buses.iter().map(|b| b.id.clone()).collect(),
        load_p_mw: load_p,
        load_q_mvar: load_q,
        pv_profile: profile.pv_pu.clone(),
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct NetloadRow {
    scenario: String,
    bus: String,
    day: u32,
    hour: usize,
    p_mw: f64,
    q_mvar: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct LabelRow {
    scenario: String,
    load_growth: Option<f64>,
    adoption: Option<String>,
}

/// Write netloads in scenario, bus, day, hour order.
pub fn write_netloads<W: Write>(set: &ScenarioSet, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for k in 0..set.num_scenarios() {
        for n in 0..set.num_buses() {
            for d in 0..set.time.num_days() {
                for h in 0..set.time.hours_per_day {
                    w.serialize(NetloadRow {
                        scenario: set.scenario_ids[k].clone(),
                        bus: set.bus_ids[n].clone(),
                        day: set.time.day_ids[d],
                        hour: h,
                        p_mw: set.p(k, n, d, h),
                        q_mvar: set.q(k, n, d, h),
                    })?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels<W: Write>(set: &ScenarioSet, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for (id, l) in set.scenario_ids.iter().zip(&set.labels) {
        w.serialize(LabelRow {
            scenario: id.clone(),
            load_growth: l.load_growth,
            adoption: l.adoption.clone(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Read netloads for `model`. Scenarios and days keep their first-seen
/// order; every (scenario, bus, day, hour) cell must appear exactly once.
pub fn read_netloads<R: Read>(
    model: &GridModel,
    reader: R,
    labels: Option<&[(String, ScenarioLabel)]>,
) -> Result<ScenarioSet> {
    let mut rdr = csv::Reader::from_reader(reader);
    let rows: Vec<NetloadRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let mut scen: Vec<String> = Vec::new();
    let mut days: Vec<u32> = Vec::new();
    for r in &rows {
        if !scen.contains(&r.scenario) {
            scen.push(r.scenario.clone());
        }
        if !days.contains(&r.day) {
            days.push(r.day);
        }
    }
    let hours = model.hours_per_day;
    let bus_ids: Vec<String> = model.buses.iter().map(|b| b.id.clone()).collect();
    let mut set = ScenarioSet::zeros(scen.clone(), bus_ids, TimeStructure::new(hours, days.clone()));
    let mut seen = vec![false; set.netload_p.len()];
    for (i, r) in rows.iter().enumerate() {
        let k = scen.iter().position(|s| s == &r.scenario).expect("collected");
        let d = days.iter().position(|x| *x == r.day).expect("collected");
        let n = model
            .bus_position(&r.bus)
            .ok_or_else(|| parse_err("netloads", format!("row {}: unknown bus {}", i + 2, r.bus)))?;
        if r.hour >= hours {
            return Err(parse_err("netloads", format!("row {}: hour {} out of range", i + 2, r.hour)));
        }
        let idx = set.index(k, n, d, r.hour);
        if seen[idx] {
            return Err(parse_err("netloads", format!("row {}: duplicate cell", i + 2)));
        }
        seen[idx] = true;
        set.set(k, n, d, r.hour, r.p_mw, r.q_mvar);
    }
    if seen.iter().any(|s| !s) {
        return Err(parse_err("netloads", "missing (scenario, bus, day, hour) cells"));
    }
    if let Some(labels) = labels {
        let map: BTreeMap<&str, &ScenarioLabel> =
            labels.iter().map(|(id, l)| (id.as_str(), l)).collect();
        for (k, id) in scen.iter().enumerate() {
            if let Some(l) = map.get(id.as_str()) {
                set.labels[k] = (*l).clone();
            }
        }
    }
    set.check_against(model)?;
    Ok(set)
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, ScenarioLabel)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<LabelRow>()
        .map(|r| {
            let r = r?;
            Ok((
                r.scenario,
                ScenarioLabel {
                    load_growth: r.load_growth,
                    adoption: r.adoption,
                },
            ))
        })
        .collect()
}
