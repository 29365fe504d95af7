//! Budget sweep, plan evaluation and dispersion of peak netloads.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridModel, ScenarioSet};
use crate::milp::{solve, Solution, SolveStatus, SolverBackend};
use crate::plan::{
    build_deterministic, build_fixed_plan, build_scenario_based, build_transmission_aware,
    extract_plan, restrict_to_peak_minimization, AwareParams, BuildOptions, InvestmentPlan,
    PlanProblem, ScenarioDispatch,
};

/// Where the expected peaks come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedPeaks {
    /// (direct, reverse) in MW.
    Given { direct_mw: f64, reverse_mw: f64 },
    /// Evaluate the deterministic plan on the scenario at this position.
    FromDeterministic { expected_scenario: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub budgets: Vec<f64>,
    pub weight_w: f64,
    pub expected_peaks: ExpectedPeaks,
    #[serde(default)]
    pub build: BuildOptionsConfig,
}

/// Serializable subset of [`BuildOptions`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildOptionsConfig {
    pub substation_limit_mva: Option<f64>,
}

impl BuildOptionsConfig {
    pub fn options(&self) -> BuildOptions {
        BuildOptions {
            substation_limit_mva: self.substation_limit_mva,
            ..BuildOptions::default()
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() {
            return Err(Error::InvalidParameter("no budgets given".into()));
        }
        if self.budgets.iter().any(|b| b.is_nan() || *b < 0.0) {
            return Err(Error::InvalidParameter("budgets must be >= 0".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("budgets must be strictly increasing".into()));
        }
        if !(0.0..=1.0).contains(&self.weight_w) {
            return Err(Error::InvalidParameter("weight_w must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `count` budgets evenly spaced from `min_cost` to `max_multiple * min_cost`.
pub fn budget_grid(min_cost: f64, max_multiple: f64, count: usize) -> Result<Vec<f64>> {
    if !(min_cost > 0.0) || !(max_multiple > 1.0) || count < 2 {
        return Err(Error::InvalidParameter(
            "budget grid needs min_cost > 0, max_multiple > 1 and count >= 2".into(),
        ));
    }
    let top = min_cost * max_multiple;
    Ok((0..count)
        .map(|i| min_cost + (top - min_cost) * i as f64 / (count - 1) as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub lambda_d: f64,
    pub lambda_r: f64,
    pub plan_id: Option<String>,
    /// Weighted excess over the expected peaks, MW.
    pub objective: Option<f64>,
    pub status: String,
    pub plan: Option<InvestmentPlan>,
}

impl CurvePoint {
    pub fn is_feasible(&self) -> bool {
        self.plan.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRecord {
    pub gamma: f64,
    pub scenario_id: String,
    pub peak_d_mw: f64,
    pub peak_r_mw: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrccCurve {
    pub points: Vec<CurvePoint>,
    /// (direct, reverse), MW.
    pub expected_peaks: (f64, f64),
    pub weight_w: f64,
    pub dispersion: Vec<DispersionRecord>,
}

impl NrccCurve {
    /// Dispersion envelope (lowest reverse as a negative number, highest
    /// direct) of each point over its feasible evaluations.
    pub fn dispersion_bounds(&self, gamma: f64) -> Option<(f64, f64)> {
        let recs: Vec<_> = self
            .dispersion
            .iter()
            .filter(|r| r.gamma == gamma && r.feasible)
            .collect();
        if recs.is_empty() {
            return None;
        }
        let lo = recs.iter().map(|r| -r.peak_r_mw).fold(f64::INFINITY, f64::min);
        let hi = recs.iter().map(|r| r.peak_d_mw).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }
}

/// A constraint the fixed plan could not meet in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalViolation {
    pub kind: String,
    pub element: String,
    pub day: u32,
    pub hour: usize,
    /// Capacity fraction above the rating, or p.u.^2 outside the voltage band.
    pub amount: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioEvaluation {
    pub scenario_id: String,
    pub peak_direct_mw: f64,
    pub peak_reverse_mw: f64,
    pub feasible: bool,
    pub violations: Vec<OperationalViolation>,
    pub dispatch: ScenarioDispatch,
}

#[derive(Debug, Clone)]
pub struct PlanEvaluation {
    pub scenarios: Vec<ScenarioEvaluation>,
}

impl PlanEvaluation {
    pub fn feasible(&self) -> bool {
        self.scenarios.iter().all(|s| s.feasible)
    }

    /// Largest direct and reverse peaks over the feasible scenarios, MW.
    pub fn peaks(&self) -> (f64, f64) {
        let mut d: f64 = 0.0;
        let mut r: f64 = 0.0;
        for s in self.scenarios.iter().filter(|s| s.feasible) {
            d = d.max(s.peak_direct_mw);
            r = r.max(s.peak_reverse_mw);
        }
        (d, r)
    }

    pub fn dispatches(&self) -> Vec<ScenarioDispatch> {
        self.scenarios.iter().map(|s| s.dispatch.clone()).collect()
    }

    pub fn violations(&self) -> impl Iterator<Item = (&str, &OperationalViolation)> {
        self.scenarios
            .iter()
            .flat_map(|s| s.violations.iter().map(move |v| (s.scenario_id.as_str(), v)))
    }
}

const ELASTIC_TOL: f64 = 1e-6;

/// Fix the plan's investments and dispatch each scenario to minimize the
/// weighted peaks. Infeasible scenarios are re-solved with elastic limits
/// to summarize the violated constraints.
pub fn evaluate_plan(
    model: &GridModel,
    plan: &InvestmentPlan,
    scenarios: &ScenarioSet,
    weight: f64,
    backend: &dyn SolverBackend,
    options: BuildOptions,
) -> Result<PlanEvaluation> {
    let results = (0..scenarios.num_scenarios())
        .into_par_iter()
        .map(|k| evaluate_one(model, plan, &scenarios.subset(&[k]), weight, backend, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlanEvaluation { scenarios: results })
}

fn evaluate_one(
    model: &GridModel,
    plan: &InvestmentPlan,
    single: &ScenarioSet,
    weight: f64,
    backend: &dyn SolverBackend,
    options: BuildOptions,
) -> Result<ScenarioEvaluation> {
    let id = single.scenario_ids[0].clone();
    let strict = build_fixed_plan(model, single, plan, weight, false, options)?;
    let sol = solve(&strict.spec, backend);
    match sol.status {
        s if s.has_solution() => {
            let (d, r) = strict.observed_peaks_mw(&sol);
            Ok(ScenarioEvaluation {
                scenario_id: id,
                peak_direct_mw: d,
                peak_reverse_mw: r,
                feasible: true,
                violations: Vec::new(),
                dispatch: strict.dispatch(model, &sol, 0),
            })
        }
        SolveStatus::Infeasible => {
            let elastic = build_fixed_plan(model, single, plan, weight, true, options)?;
            let sol = solve(&elastic.spec, backend).require("elastic plan evaluation")?;
            let (d, r) = elastic.observed_peaks_mw(&sol);
            let violations = elastic_violations(&elastic, &sol, single);
            Ok(ScenarioEvaluation {
                scenario_id: id,
                peak_direct_mw: d,
                peak_reverse_mw: r,
                feasible: false,
                violations,
                dispatch: elastic.dispatch(model, &sol, 0),
            })
        }
        s => Err(Error::Solve {
            status: s.to_string(),
            context: format!("evaluating plan on {id}: {}", sol.message),
        }),
    }
}

fn elastic_violations(
    problem: &PlanProblem,
    sol: &Solution,
    single: &ScenarioSet,
) -> Vec<OperationalViolation> {
    let mut out = Vec::new();
    let hours = single.time.hours_per_day;
    let spec = &problem.spec;
    for (i, var) in spec.vars.iter().enumerate() {
        let value = sol.values[i];
        if value <= ELASTIC_TOL {
            continue;
        }
        let kind = if var.name.starts_with("ov_") {
            "line-capacity"
        } else if var.name.starts_with("svl_") {
            "voltage-min"
        } else if var.name.starts_with("svh_") {
            "voltage-max"
        } else {
            continue;
        };
        // Names end in _{k}_{day}_{hour}.
        let mut parts = var.name.rsplitn(4, '_');
        let hour: usize = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0);
        let day: u32 = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0);
        let _k = parts.next();
        let head = parts.next().unwrap_or("");
        let element = head.split_once('_').map_or(head, |(_, e)| e).to_string();
        debug_assert!(hour < hours);
        out.push(OperationalViolation {
            kind: kind.into(),
            element,
            day,
            hour,
            amount: value,
        });
    }
    out.sort_by(|a, b| {
        b.amount
            .partial_cmp(&a.amount)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.element.cmp(&b.element))
    });
    out
}

/// Solve a cost-minimizing model and extract its plan.
pub fn solve_plan(
    problem: &PlanProblem,
    model: &GridModel,
    backend: &dyn SolverBackend,
    context: &str,
) -> Result<(InvestmentPlan, Solution)> {
    let sol = solve(&problem.spec, backend).require(context)?;
    let plan = extract_plan(&sol, problem, model)?;
    Ok((plan, sol))
}

#[derive(Debug, Clone)]
pub struct ExpectedPeaksResult {
    /// (direct, reverse), MW.
    pub peaks: (f64, f64),
    pub plan: InvestmentPlan,
}

/// Expected peaks from the deterministic plan evaluated on its own scenario.
pub fn derive_expected_peaks(
    model: &GridModel,
    scenarios: &ScenarioSet,
    expected: usize,
    weight: f64,
    backend: &dyn SolverBackend,
    options: BuildOptions,
) -> Result<ExpectedPeaksResult> {
    let problem = build_deterministic(model, scenarios, expected, options)?;
    let (plan, _) = solve_plan(&problem, model, backend, "deterministic plan")?;
    let single = scenarios.subset(&[expected]);
    let eval = evaluate_plan(model, &plan, &single, weight, backend, options)?;
    if !eval.feasible() {
        return Err(Error::Problem(
            "deterministic plan infeasible on its own scenario".into(),
        ));
    }
    Ok(ExpectedPeaksResult {
        peaks: eval.peaks(),
        plan,
    })
}

/// Relative slack on the budget row, absorbing round-off in costs that were
/// themselves read back from a solve.
const BUDGET_RTOL: f64 = 1e-9;

fn sweep_point(
    model: &GridModel,
    scenarios: &ScenarioSet,
    gamma: f64,
    config: &SweepConfig,
    expected: (f64, f64),
    backend: &dyn SolverBackend,
    index: usize,
) -> Result<CurvePoint> {
    let options = config.build.options();
    let params = AwareParams {
        budget: gamma * (1.0 + BUDGET_RTOL) + BUDGET_RTOL,
        weight: config.weight_w,
        expected_peaks_mw: expected,
    };
    let mut problem = build_transmission_aware(model, scenarios, params, options)?;
    let first = solve(&problem.spec, backend);
    let infeasible = |status: &str| CurvePoint {
        gamma,
        lambda_d: f64::NAN,
        lambda_r: f64::NAN,
        plan_id: None,
        objective: None,
        status: status.to_string(),
        plan: None,
    };
    match first.status {
        SolveStatus::Infeasible => return Ok(infeasible("infeasible-budget")),
        s if !s.has_solution() => return Ok(infeasible(s.as_str())),
        _ => {}
    }
    let excess = first.objective.unwrap_or(0.0);
    let tol = 1e-7 + 1e-6 * excess.abs();
    restrict_to_peak_minimization(&mut problem, config.weight_w, excess, tol)?;
    let second = solve(&problem.spec, backend);
    let (sol, status) = if second.status.has_solution() {
        let worst = if first.status == SolveStatus::Optimal {
            second.status
        } else {
            first.status
        };
        (second, worst)
    } else {
        (first, SolveStatus::FeasibleGap)
    };
    let mut plan = extract_plan(&sol, &problem, model)?;
    plan.status = status.to_string();
    let (lambda_d, lambda_r) = problem.observed_peaks_mw(&sol);
    Ok(CurvePoint {
        gamma,
        lambda_d,
        lambda_r,
        plan_id: Some(format!("plan_{index:03}")),
        objective: Some(excess * model.s_base_mva),
        status: status.to_string(),
        plan: Some(plan),
    })
}

/// Solve the transmission-aware model for every budget and assemble the
/// curve. Infeasible budgets stay in the curve with their status.
pub fn run_sweep(
    model: &GridModel,
    scenarios: &ScenarioSet,
    config: &SweepConfig,
    backend: &dyn SolverBackend,
) -> Result<NrccCurve> {
    config.validate()?;
    let options = config.build.options();
    let expected = match config.expected_peaks {
        ExpectedPeaks::Given {
            direct_mw,
            reverse_mw,
        } => (direct_mw, reverse_mw),
        ExpectedPeaks::FromDeterministic { expected_scenario } => {
            derive_expected_peaks(
                model,
                scenarios,
                expected_scenario,
                config.weight_w,
                backend,
                options,
            )?
            .peaks
        }
    };
    let points = config
        .budgets
        .par_iter()
        .enumerate()
        .map(|(i, &g)| sweep_point(model, scenarios, g, config, expected, backend, i))
        .collect::<Result<Vec<_>>>()?;
    if points.iter().all(|p| !p.is_feasible()) {
        let problem = build_scenario_based(model, scenarios, options)?;
        let (plan, _) = solve_plan(&problem, model, backend, "scenario-based minimum cost")?;
        return Err(Error::AllBudgetsInfeasible {
            min_cost: plan.cost.total,
        });
    }
    Ok(NrccCurve {
        points,
        expected_peaks: expected,
        weight_w: config.weight_w,
        dispersion: Vec::new(),
    })
}

/// Evaluate every feasible point's plan on each held-out scenario. Records
/// are ordered by (gamma, scenario id).
pub fn compute_dispersion(
    model: &GridModel,
    curve: &mut NrccCurve,
    held_out: &ScenarioSet,
    backend: &dyn SolverBackend,
    options: BuildOptions,
) -> Result<()> {
    let jobs: Vec<(f64, &InvestmentPlan, usize)> = curve
        .points
        .iter()
        .filter_map(|p| p.plan.as_ref().map(|plan| (p.gamma, plan)))
        .flat_map(|(g, plan)| (0..held_out.num_scenarios()).map(move |k| (g, plan, k)))
        .collect();
    let weight = curve.weight_w;
    let mut records = jobs
        .into_par_iter()
        .map(|(gamma, plan, k)| {
            let single = held_out.subset(&[k]);
            let e = evaluate_one(model, plan, &single, weight, backend, options)?;
            Ok(DispersionRecord {
                gamma,
                scenario_id: e.scenario_id,
                peak_d_mw: e.peak_direct_mw,
                peak_r_mw: e.peak_reverse_mw,
                feasible: e.feasible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| {
        a.gamma
            .total_cmp(&b.gamma)
            .then_with(|| a.scenario_id.cmp(&b.scenario_id))
    });
    curve.dispersion = records;
    Ok(())
}

/// Whether each held-out scenario is bounded above by one planning scenario
/// and below by another, cell by cell in both P and Q. Peaks of such
/// scenarios are expected to fall inside the planning peak range.
pub fn dominated(planning: &ScenarioSet, held_out: &ScenarioSet) -> Result<Vec<bool>> {
    if planning.bus_ids != held_out.bus_ids || planning.time != held_out.time {
        return Err(Error::InvalidScenarios(
            "held-out scenarios use different buses or days".into(),
        ));
    }
    let cells = held_out.netload_p.len() / held_out.num_scenarios().max(1);
    let block = |set: &ScenarioSet, k: usize| {
        let r = k * cells..(k + 1) * cells;
        (set.netload_p[r.clone()].to_vec(), set.netload_q[r].to_vec())
    };
    let plans: Vec<_> = (0..planning.num_scenarios()).map(|k| block(planning, k)).collect();
    let all = |a: &[f64], b: &[f64], le: bool| {
        a.iter().zip(b).all(|(x, y)| if le { x <= y } else { x >= y })
    };
    Ok((0..held_out.num_scenarios())
        .map(|s| {
            let (p, q) = block(held_out, s);
            let above = plans.iter().any(|(pp, pq)| all(&p, pp, true) && all(&q, pq, true));
            let below = plans.iter().any(|(pp, pq)| all(&p, pp, false) && all(&q, pq, false));
            above && below
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let g = budget_grid(100.0, 3.0, 5).unwrap();
        assert_eq!(g, vec![100.0, 150.0, 200.0, 250.0, 300.0]);
        assert!(budget_grid(0.0, 3.0, 5).is_err());
        assert!(budget_grid(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SweepConfig {
            budgets: vec![1.0, 2.0],
            weight_w: 0.5,
            expected_peaks: ExpectedPeaks::Given {
                direct_mw: 1.0,
                reverse_mw: 0.0,
            },
            build: Default::default(),
        };
        assert!(c.validate().is_ok());
        c.budgets = vec![2.0, 2.0];
        assert!(c.validate().is_err());
        c.budgets = vec![1.0];
        c.weight_w = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn domination_needs_bounds_on_both_sides() {
        use crate::grid::TimeStructure;
        let set = |vals: &[f64]| {
            let mut s = ScenarioSet::zeros(
                (0..vals.len()).map(|k| format!("s{k}")).collect(),
                vec!["a".into(), "b".into()],
                TimeStructure::new(1, vec![1]),
            );
            for (k, v) in vals.iter().enumerate() {
                s.set(k, 0, 0, 0, *v, 0.0);
                s.set(k, 1, 0, 0, -v, 0.0);
            }
            s
        };
        // Bus b mirrors bus a, so neither planning scenario bounds 0.5 from above.
        let planning = set(&[0.0, 1.0]);
        let held = set(&[0.5, 0.0, 2.0]);
        assert_eq!(dominated(&planning, &held).unwrap(), [false, true, false]);
        let mut planning = set(&[0.0, 1.0]);
        planning.set(0, 1, 0, 0, -1.0, 0.0);
        planning.set(1, 1, 0, 0, 0.0, 0.0);
        assert_eq!(dominated(&planning, &set(&[0.5])).unwrap(), [true]);
    }
}
