//! End-to-end scenario preparation shared by the command line, the
//! acceptance suite and the benchmarks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScenarioSet;
use crate::io::{base_timeseries, FeederData, Profile};
use crate::scenario::{
    build_on_days, build_scenario_set, run_ensemble, select_scenarios, selected_specs,
    sized_capacities, AdoptionRun, BaseTimeseries, DiffusionParams, EconomicParams,
    EnsembleConfig, ScenarioSpec, Selection,
};

/// Adoption economics without the PV profile, which comes from the base year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicInputs {
    pub capex_per_kw: f64,
    pub tariff: f64,
    pub discount_rate: f64,
    pub lifetime: f64,
}

impl Default for EconomicInputs {
    fn default() -> Self {
        Self {
            capex_per_kw: 1500.0,
            tariff: 0.2,
            discount_rate: 0.05,
            lifetime: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub diffusion: DiffusionParams,
    pub mms_probability: f64,
    pub ensemble_size: usize,
    pub load_growth_rates: Vec<f64>,
    /// Which growth rate is the expected one.
    pub expected_growth: f64,
    pub economics: EconomicInputs,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            diffusion: DiffusionParams::default(),
            mms_probability: 0.6,
            ensemble_size: 100,
            load_growth_rates: vec![0.02, 0.03, 0.04],
            expected_growth: 0.03,
            economics: EconomicInputs::default(),
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        if !(0.0..=1.0).contains(&self.mms_probability) {
            return Err(Error::InvalidParameter("mms_probability outside [0, 1]".into()));
        }
        if self.ensemble_size < 3 {
            return Err(Error::InvalidParameter("ensemble_size must be >= 3".into()));
        }
        if self.load_growth_rates.is_empty()
            || self.load_growth_rates.iter().any(|r| !(*r >= 0.0 && r.is_finite()))
        {
            return Err(Error::InvalidParameter("growth rates must be finite and >= 0".into()));
        }
        if !self.load_growth_rates.contains(&self.expected_growth) {
            return Err(Error::InvalidParameter(format!(
                "expected growth {} is not among the growth rates",
                self.expected_growth
            )));
        }
        Ok(())
    }

    pub fn economics(&self, profile: &Profile) -> EconomicParams {
        let e = self.economics;
        EconomicParams {
            capex_per_kw: e.capex_per_kw,
            tariff: e.tariff,
            discount_rate: e.discount_rate,
            lifetime: e.lifetime,
            capacity_factor_profile: profile.pv_pu.clone(),
            hours_per_day: profile.hours_per_day,
        }
    }
}

/// Everything produced between the raw inputs and the planning models.
#[derive(Debug, Clone)]
pub struct PreparedScenarios {
    pub base: BaseTimeseries,
    pub sized_kw: Vec<f64>,
    pub runs: Vec<AdoptionRun>,
    pub selection: Selection,
    pub specs: Vec<ScenarioSpec>,
    pub set: ScenarioSet,
    /// Scenario holding the expected growth with the median-closest run.
    pub expected: usize,
}

pub fn prepare(data: &FeederData, profile: &Profile, params: &ScenarioParams) -> Result<PreparedScenarios> {
    params.validate()?;
    let model = &data.model;
    let econ = params.economics(profile);
    let sized_kw = sized_capacities(model, &econ, &data.sites)?;
    let config = EnsembleConfig {
        diffusion: params.diffusion,
        mms_probability: params.mms_probability,
        ensemble_size: params.ensemble_size,
    };
    let runs = run_ensemble(model, &config, &sized_kw)?;
    let totals: Vec<f64> = runs.iter().map(AdoptionRun::total_kw).collect();
    let selection = select_scenarios(&totals)?;
    let specs = selected_specs(&runs, &selection, &params.load_growth_rates);
    let base = base_timeseries(data, profile);
    let set = build_scenario_set(model, &base, &specs, params.diffusion.horizon)?;
    let expected = specs
        .iter()
        .position(|s| s.load_growth == params.expected_growth && s.adoption == "avg")
        .expect("validated growth rate has an avg scenario");
    Ok(PreparedScenarios {
        base,
        sized_kw,
        runs,
        selection,
        specs,
        set,
        expected,
    })
}

impl PreparedScenarios {
    /// Scenarios for the given (growth rate, run position) pairs, built on
    /// the planning set's representative days.
    pub fn held_out(
        &self,
        data: &FeederData,
        horizon: f64,
        pairs: &[(f64, usize)],
    ) -> Result<ScenarioSet> {
        let specs: Vec<ScenarioSpec> = pairs
            .iter()
            .map(|&(r, i)| {
                let run = self.runs.get(i).ok_or_else(|| {
                    Error::InvalidParameter(format!("run {i} outside the ensemble"))
                })?;
                Ok(ScenarioSpec {
                    id: format!("h{r}_run{i}"),
                    load_growth: r,
                    adoption: format!("run{i}"),
                    pv_kw: run.pv_kw.clone(),
                })
            })
            .collect::<Result<_>>()?;
        build_on_days(&data.model, &self.base, &specs, horizon, &self.set.time.day_ids)
    }
}
