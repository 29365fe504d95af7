//! Long-term RPV adoption and load-growth scenarios.
//!
//! An ensemble of agent-based Bass diffusion runs is reduced to the
//! minimum, median-closest and maximum runs by final installed capacity.
//! Each selected run is combined with each load-growth rate into a netload
//! scenario over the representative days.

mod diffusion;
mod economics;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diffusion::{
    agents_for, bass_closed_form, expected_fraction_exact, mms_screen, mms_screen_with,
    simulate_adoption, AdoptionTrajectory, AgentState, DiffusionParams,
};
pub use economics::{size_project, EconomicParams, SiteLimits};

use crate::error::{Error, Result};
use crate::grid::{GridModel, ScenarioLabel, ScenarioSet, TimeStructure};

/// Independent RNG stream for one ensemble run.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub diffusion: DiffusionParams,
    pub mms_probability: f64,
    pub ensemble_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionRun {
    pub index: usize,
    /// Installed PV per bus at the horizon, kW, in model bus order.
    pub pv_kw: Vec<f64>,
    pub trajectory: AdoptionTrajectory,
}

impl AdoptionRun {
    pub fn total_kw(&self) -> f64 {
        self.trajectory.final_installed_kw()
    }
}

/// Run the ensemble. `sized_kw` gives the NPV-optimal size per bus in model
/// bus order. Runs are independent and use their own RNG stream, so the
/// result does not depend on scheduling.
pub fn run_ensemble(
    model: &GridModel,
    config: &EnsembleConfig,
    sized_kw: &[f64],
) -> Result<Vec<AdoptionRun>> {
    let p = config.mms_probability;
    run_ensemble_with(model, config, sized_kw, &|_: &AgentState| p)
}

/// As [`run_ensemble`], with a per-agent market-share mapping.
pub fn run_ensemble_with(
    model: &GridModel,
    config: &EnsembleConfig,
    sized_kw: &[f64],
    mms: &(dyn Fn(&AgentState) -> f64 + Sync),
) -> Result<Vec<AdoptionRun>> {
    config.diffusion.validate()?;
    if sized_kw.len() != model.buses.len() {
        return Err(Error::InvalidParameter(format!(
            "{} sizes for {} buses",
            sized_kw.len(),
            model.buses.len()
        )));
    }
    let template = agents_for(model, |id| {
        sized_kw[model.bus_position(id).expect("bus of the model")]
    });
    (0..config.ensemble_size)
        .into_par_iter()
        .map(|index| {
            let mut rng = run_rng(config.diffusion.seed, index);
            let mut agents = template.clone();
            mms_screen_with(&mut agents, mms, &mut rng)?;
            let trajectory = simulate_adoption(&config.diffusion, &mut agents, &mut rng)?;
            let mut pv_kw = vec![0.0; model.buses.len()];
            for a in agents.iter().filter(|a| a.adopted) {
                pv_kw[model.bus_position(&a.bus).expect("bus of the model")] += a.sized_capacity_kw;
            }
            Ok(AdoptionRun {
                index,
                pv_kw,
                trajectory,
            })
        })
        .collect()
}

/// Positions of the minimum, median-closest and maximum runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub min: usize,
    pub avg: usize,
    pub max: usize,
}

impl Selection {
    pub fn named(&self) -> [(&'static str, usize); 3] {
        [("min", self.min), ("avg", self.avg), ("max", self.max)]
    }
}

/// Select by final aggregate capacity; ties go to the lowest position.
pub fn select_scenarios(totals: &[f64]) -> Result<Selection> {
    if totals.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "selection needs at least 3 runs, got {}",
            totals.len()
        )));
    }
    if totals.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("non-finite run total".into()));
    }
    let mut sorted = totals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    let pick = |key: &dyn Fn(f64) -> f64| {
        let mut best = 0;
        for i in 1..totals.len() {
            if key(totals[i]) < key(totals[best]) {
                best = i;
            }
        }
        best
    };
    Ok(Selection {
        min: pick(&|t| t),
        avg: pick(&|t| (t - median).abs()),
        max: pick(&|t| -t),
    })
}

/// Base-year hourly data: per-bus load and a per-unit PV profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseTimeseries {
    pub hours_per_day: usize,
    pub day_ids: Vec<u32>,
    pub bus_ids: Vec<String>,
    /// [bus][day * H + hour], MW.
    pub load_p_mw: Vec<Vec<f64>>,
    /// [bus][day * H + hour], MVAr.
    pub load_q_mvar: Vec<Vec<f64>>,
    /// [day * H + hour], per unit of installed capacity.
    pub pv_profile: Vec<f64>,
}

impl BaseTimeseries {
    pub fn periods(&self) -> usize {
        self.hours_per_day * self.day_ids.len()
    }

    fn check(&self) -> Result<()> {
        let t = self.periods();
        if self.pv_profile.len() != t {
            return Err(Error::MissingTimeseries(format!(
                "PV profile has {} values, expected {t}",
                self.pv_profile.len()
            )));
        }
        for (i, id) in self.bus_ids.iter().enumerate() {
            if self.load_p_mw[i].len() != t || self.load_q_mvar[i].len() != t {
                return Err(Error::MissingTimeseries(format!("incomplete series for {id}")));
            }
        }
        Ok(())
    }

    /// Series rows in model bus order.
    fn rows_for(&self, model: &GridModel) -> Result<Vec<usize>> {
        model
            .buses
            .iter()
            .map(|b| {
                self.bus_ids
                    .iter()
                    .position(|x| x == &b.id)
                    .ok_or_else(|| Error::MissingTimeseries(format!("no base load for bus {}", b.id)))
            })
            .collect()
    }
}

/// One netload scenario to emit: a load-growth rate and a PV build-out.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub load_growth: f64,
    pub adoption: String,
    /// Installed PV per bus, kW, model bus order.
    pub pv_kw: Vec<f64>,
}

pub fn scenario_id(load_growth: f64, adoption: &str) -> String {
    format!("g{load_growth}_{adoption}")
}

struct YearNetload {
    /// [bus][t], MW
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

fn year_netload(
    model: &GridModel,
    base: &BaseTimeseries,
    rows: &[usize],
    spec: &ScenarioSpec,
    horizon: f64,
) -> YearNetload {
    let growth = (1.0 + spec.load_growth).powf(horizon);
    let mut p = Vec::with_capacity(model.buses.len());
    let mut q = Vec::with_capacity(model.buses.len());
    for (n, &row) in rows.iter().enumerate() {
        let pv_mw = spec.pv_kw[n] / 1000.0;
        p.push(
            base.load_p_mw[row]
                .iter()
                .zip(&base.pv_profile)
                .map(|(l, s)| l * growth - pv_mw * s)
                .collect(),
        );
        q.push(base.load_q_mvar[row].iter().map(|l| l * growth).collect());
    }
    YearNetload { p, q }
}

/// Days holding the largest and smallest hourly aggregate netload.
fn extreme_days(net: &YearNetload, hours: usize) -> (usize, usize) {
    let periods = net.p.first().map_or(0, Vec::len);
    let mut hi = (0, f64::NEG_INFINITY);
    let mut lo = (0, f64::INFINITY);
    for t in 0..periods {
        let agg: f64 = net.p.iter().map(|s| s[t]).sum();
        if agg > hi.1 {
            hi = (t, agg);
        }
        if agg < lo.1 {
            lo = (t, agg);
        }
    }
    (hi.0 / hours, lo.0 / hours)
}

/// Build netload scenarios and select the representative days: the union of
/// every scenario's highest-peak and lowest-netload days.
pub fn build_scenario_set(
    model: &GridModel,
    base: &BaseTimeseries,
    specs: &[ScenarioSpec],
    horizon: f64,
) -> Result<ScenarioSet> {
    base.check()?;
    let rows = base.rows_for(model)?;
    let mut picks = Vec::new();
    for s in specs {
        check_spec(model, s)?;
        let net = year_netload(model, base, &rows, s, horizon);
        let (hi, lo) = extreme_days(&net, base.hours_per_day);
        picks.push(hi);
        picks.push(lo);
    }
    picks.sort_unstable();
    picks.dedup();
    let days: Vec<u32> = picks.iter().map(|&d| base.day_ids[d]).collect();
    build_on_days(model, base, specs, horizon, &days)
}

/// Build netload scenarios on a given set of day ids.
pub fn build_on_days(
    model: &GridModel,
    base: &BaseTimeseries,
    specs: &[ScenarioSpec],
    horizon: f64,
    days: &[u32],
) -> Result<ScenarioSet> {
    base.check()?;
    if base.hours_per_day != model.hours_per_day {
        return Err(Error::InvalidScenarios(format!(
            "base timeseries has {} hours per day, model {}",
            base.hours_per_day, model.hours_per_day
        )));
    }
    let rows = base.rows_for(model)?;
    let day_pos: Vec<usize> = days
        .iter()
        .map(|d| {
            base.day_ids
                .iter()
                .position(|x| x == d)
                .ok_or_else(|| Error::MissingTimeseries(format!("day {d} not in base year")))
        })
        .collect::<Result<_>>()?;
    let hours = base.hours_per_day;
    let mut set = ScenarioSet::zeros(
        specs.iter().map(|s| s.id.clone()).collect(),
        model.buses.iter().map(|b| b.id.clone()).collect(),
        TimeStructure::new(hours, days.to_vec()),
    );
    for (k, s) in specs.iter().enumerate() {
        check_spec(model, s)?;
        let net = year_netload(model, base, &rows, s, horizon);
        for n in 0..model.buses.len() {
            for (d, &pos) in day_pos.iter().enumerate() {
                for h in 0..hours {
                    let t = pos * hours + h;
                    set.set(k, n, d, h, net.p[n][t], net.q[n][t]);
                }
            }
        }
        set.labels[k] = ScenarioLabel {
            load_growth: Some(s.load_growth),
            adoption: Some(s.adoption.clone()),
        };
    }
    set.check_against(model)?;
    Ok(set)
}

fn check_spec(model: &GridModel, s: &ScenarioSpec) -> Result<()> {
    if s.pv_kw.len() != model.buses.len() {
        return Err(Error::InvalidScenarios(format!(
            "scenario {} lists PV for {} buses, model has {}",
            s.id,
            s.pv_kw.len(),
            model.buses.len()
        )));
    }
    if !s.load_growth.is_finite() || s.load_growth < 0.0 {
        return Err(Error::InvalidScenarios(format!(
            "scenario {} has invalid growth rate",
            s.id
        )));
    }
    Ok(())
}

/// Growth rates crossed with the selected adoption runs, rate-major.
pub fn selected_specs(
    runs: &[AdoptionRun],
    selection: &Selection,
    load_growth_rates: &[f64],
) -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for &r in load_growth_rates {
        for (name, i) in selection.named() {
            out.push(ScenarioSpec {
                id: scenario_id(r, name),
                load_growth: r,
                adoption: name.to_string(),
                pv_kw: runs[i].pv_kw.clone(),
            });
        }
    }
    out
}

/// Per-bus NPV-optimal sizes, model bus order; the PoI gets 0.
pub fn sized_capacities(model: &GridModel, econ: &EconomicParams, sites: &[SiteLimits]) -> Result<Vec<f64>> {
    econ.validate()?;
    if sites.len() != model.buses.len() {
        return Err(Error::InvalidParameter(format!(
            "{} site limits for {} buses",
            sites.len(),
            model.buses.len()
        )));
    }
    Ok(model
        .buses
        .iter()
        .zip(sites)
        .map(|(b, s)| if b.is_poi { 0.0 } else { size_project(s, econ) })
        .collect())
}
