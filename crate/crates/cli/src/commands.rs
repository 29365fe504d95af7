//! The four subcommands. Each fills a [`ResultBundle`] and a summary table;
//! nothing touches the file system until the bundle is committed.

use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use nrcc_core::acpf::{validate_plan, SweepOptions};
use nrcc_core::io::{
    bundled_feeder, bundled_profile, read_feeder, read_labels, read_netloads, read_profile,
    write_labels, write_netloads, FeederData, Profile,
};
use nrcc_core::milp::write_lp;
use nrcc_core::nrcc::{
    budget_grid, compute_dispersion, dominated, evaluate_plan, run_sweep, solve_plan,
    ExpectedPeaks, NrccCurve,
};
use nrcc_core::pipeline::{prepare, PreparedScenarios};
use nrcc_core::plan::{build_deterministic, build_scenario_based, plan_cost, BuildOptions};
use nrcc_core::scenario::scenario_id;
use nrcc_core::{HighsBackend, InvestmentPlan, ScenarioSet, SweepConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bundle::ResultBundle;
use crate::config::{PlanMode, Resolved};
use crate::Table;

pub const PLAN_FILE_SCHEMA: u32 = 1;

/// CSV number: shortest round-trip form, empty for NaN, no negative zero.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(if x == 0.0 { 0.0 } else { x })
    } else {
        Value::Null
    }
}

/// A plan on disk, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub source: String,
    /// Peak import and export at the PoI over the planning scenarios, MW.
    pub peak_direct_mw: Option<f64>,
    pub peak_reverse_mw: Option<f64>,
    pub plan: InvestmentPlan,
}

impl PlanFile {
    /// Accepts a plan file or a bare plan document.
    pub fn read(text: &str) -> Result<InvestmentPlan> {
        if let Ok(f) = serde_json::from_str::<PlanFile>(text) {
            return Ok(f.plan);
        }
        serde_json::from_str::<InvestmentPlan>(text).context("reading plan JSON")
    }
}

/// Planning scenarios and which one is expected.
pub struct Planning {
    pub set: ScenarioSet,
    pub expected: usize,
    /// Present when the scenarios came from the adoption ensemble.
    pub prepared: Option<PreparedScenarios>,
}

/// Inputs loaded once per command.
pub struct Session {
    pub resolved: Resolved,
    pub data: FeederData,
    pub profile: Profile,
    pub backend: HighsBackend,
    pub config_hash: String,
}

impl Session {
    pub fn open(resolved: Resolved, config_hash: String) -> Result<Self> {
        let c = &resolved.config;
        let data = match &c.inputs.feeder {
            Some(p) => {
                let p = resolved.path(p);
                let text = std::fs::read_to_string(&p)
                    .with_context(|| format!("reading {}", p.display()))?;
                read_feeder(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => bundled_feeder(),
        };
        let profile = match &c.inputs.profile {
            Some(p) => {
                let p = resolved.path(p);
                let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                read_profile(BufReader::new(f), data.model.hours_per_day)
                    .with_context(|| format!("in {}", p.display()))?
            }
            None => bundled_profile(),
        };
        let backend = HighsBackend::new(c.solver_settings());
        Ok(Session {
            resolved,
            data,
            profile,
            backend,
            config_hash,
        })
    }

    fn seed(&self) -> u64 {
        self.resolved.config.seed
    }

    fn options(&self) -> BuildOptions {
        self.resolved.config.build.options()
    }

    fn prepare(&self) -> Result<PreparedScenarios> {
        Ok(prepare(&self.data, &self.profile, &self.resolved.config.scenarios)?)
    }

    pub fn planning(&self) -> Result<Planning> {
        let c = &self.resolved.config;
        let (set, prepared) = match &c.inputs.netloads {
            Some(p) => {
                let labels = match &c.inputs.labels {
                    Some(l) => {
                        let l = self.resolved.path(l);
                        Some(read_labels(File::open(&l)?).with_context(|| format!("in {}", l.display()))?)
                    }
                    None => None,
                };
                let p = self.resolved.path(p);
                let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                let set = read_netloads(&self.data.model, BufReader::new(f), labels.as_deref())
                    .with_context(|| format!("in {}", p.display()))?;
                (set, None)
            }
            None => {
                let prep = self.prepare()?;
                (prep.set.clone(), Some(prep))
            }
        };
        let default_id = scenario_id(c.scenarios.expected_growth, "avg");
        let expected = match &c.plan.expected_scenario {
            Some(id) => set
                .position(id)
                .with_context(|| format!("expected scenario {id} is not in the scenario set"))?,
            None => match set.position(&default_id) {
                Some(k) => k,
                None if set.num_scenarios() == 1 => 0,
                None => bail!(
                    "no scenario {default_id}; set plan.expected_scenario to pick the expected one"
                ),
            },
        };
        Ok(Planning {
            set,
            expected,
            prepared,
        })
    }

    fn plan_file(&self, source: &str, plan: &InvestmentPlan, peaks: Option<(f64, f64)>) -> PlanFile {
        PlanFile {
            schema_version: PLAN_FILE_SCHEMA,
            seed: self.seed(),
            config_hash: self.config_hash.clone(),
            source: source.to_string(),
            peak_direct_mw: peaks.map(|p| p.0),
            peak_reverse_mw: peaks.map(|p| p.1),
            plan: plan.clone(),
        }
    }

    fn log_set(&self, bundle: &mut ResultBundle, set: &ScenarioSet) {
        bundle.log(format!(
            "scenarios: {} ({}), days {:?}",
            set.num_scenarios(),
            set.scenario_ids.join(" "),
            set.time.day_ids
        ));
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Validation found violations (exit code 2).
    Violations,
}

pub struct CommandOutput {
    pub bundle: ResultBundle,
    pub summary: Table,
    pub outcome: Outcome,
}

impl CommandOutput {
    fn clean(bundle: ResultBundle, summary: Table) -> Self {
        CommandOutput {
            bundle,
            summary,
            outcome: Outcome::Clean,
        }
    }
}

pub fn cmd_scenarios(s: &Session) -> Result<CommandOutput> {
    let prep = s.prepare()?;
    let mut b = ResultBundle::new();
    let model = &s.data.model;
    let mut buf = Vec::new();
    write_netloads(&prep.set, &mut buf)?;
    b.add("netloads.csv", buf);
    let mut buf = Vec::new();
    write_labels(&prep.set, &mut buf)?;
    b.add("labels.csv", buf);

    let selected = |i: usize| {
        prep.selection
            .named()
            .iter()
            .filter(|(_, r)| *r == i)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join("+")
    };
    let mut summary = Table::new(&["run", "adopters", "fraction", "installed_kw", "selected"]);
    let mut rows = Vec::new();
    for run in &prep.runs {
        let t = &run.trajectory;
        let last = t.adopted.len() - 1;
        rows.push(vec![
            run.index.to_string(),
            t.adopted[last].to_string(),
            num(t.fraction(last)),
            num(run.total_kw()),
            selected(run.index),
        ]);
        summary.push(vec![
            json!(run.index),
            json!(t.adopted[last]),
            jnum(t.fraction(last)),
            jnum(run.total_kw()),
            json!(selected(run.index)),
        ]);
        let steps = (0..t.adopted.len()).map(|k| {
            vec![
                k.to_string(),
                num(k as f64 * t.dt),
                t.adopted[k].to_string(),
                num(t.fraction(k)),
                num(t.installed_kw[k]),
            ]
        });
        b.add_csv(
            format!("trajectories/run_{:03}.csv", run.index),
            &["step", "t_years", "adopters", "fraction", "installed_kw"],
            steps,
        )?;
    }
    b.add_csv(
        "runs.csv",
        &["run", "adopters", "fraction", "installed_kw", "selected"],
        rows,
    )?;
    b.add_csv(
        "sizing.csv",
        &["bus", "sized_kw"],
        model
            .buses
            .iter()
            .zip(&prep.sized_kw)
            .map(|(bus, kw)| vec![bus.id.clone(), num(*kw)]),
    )?;
    let mut pv = Vec::new();
    for spec in &prep.specs {
        for (bus, kw) in model.buses.iter().zip(&spec.pv_kw) {
            pv.push(vec![spec.id.clone(), bus.id.clone(), num(*kw)]);
        }
    }
    b.add_csv("scenario_pv.csv", &["scenario_id", "bus", "pv_kw"], pv)?;
    b.add_json(
        "selection.json",
        &json!({
            "seed": s.seed(),
            "config_hash": s.config_hash,
            "ensemble_size": prep.runs.len(),
            "selection": prep.selection,
            "day_ids": prep.set.time.day_ids,
            "expected_scenario": prep.set.scenario_ids[prep.expected],
            "scenario_ids": prep.set.scenario_ids,
        }),
    )?;
    b.log(format!("ensemble: {} runs, seed {}", prep.runs.len(), s.seed()));
    for (name, i) in prep.selection.named() {
        b.log(format!("{name}: run {i}, {} kW", num(prep.runs[i].total_kw())));
    }
    s.log_set(&mut b, &prep.set);
    Ok(CommandOutput::clean(b, summary))
}

fn cost_table(plan: &InvestmentPlan, model: &nrcc_core::GridModel) -> Table {
    let mut t = Table::new(&["item", "kind", "detail", "cost"]);
    for l in plan.upgrades(model) {
        t.push(vec![
            json!(l.option_id),
            json!("line"),
            json!(format!("{}-{}", l.from_bus, l.to_bus)),
            jnum(l.cost),
        ]);
    }
    for bs in &plan.bess {
        t.push(vec![json!(bs.id), json!("bess"), json!(format!("{} MW at {}", num(bs.mw), bs.bus)), jnum(bs.cost)]);
    }
    for r in &plan.regulators {
        t.push(vec![json!(r), json!("regulator"), Value::Null, Value::Null]);
    }
    let c = plan.cost;
    for (k, v) in [("lines", c.lines), ("bess", c.bess), ("regulators", c.regulators), ("total", c.total)] {
        t.push(vec![json!(k), json!("subtotal"), Value::Null, jnum(v)]);
    }
    t
}

pub fn cmd_plan(s: &Session) -> Result<CommandOutput> {
    let c = &s.resolved.config;
    let mode = c.plan.mode;
    if mode == PlanMode::Aware && c.plan.budget.is_none() {
        bail!("aware mode needs an investment budget (--budget or plan.budget)");
    }
    let model = &s.data.model;
    let planning = s.planning()?;
    let set = &planning.set;
    let mut b = ResultBundle::new();
    s.log_set(&mut b, set);
    let opts = s.options();
    let (plan, peaks, source) = match mode {
        PlanMode::Deterministic | PlanMode::Scenario => {
            let problem = if mode == PlanMode::Deterministic {
                build_deterministic(model, set, planning.expected, opts)?
            } else {
                build_scenario_based(model, set, opts)?
            };
            b.log(format!(
                "model: {} variables, {} rows",
                problem.spec.vars.len(),
                problem.spec.constraints.len()
            ));
            if c.solver.export_lp {
                b.add("model.lp", write_lp(&problem.spec).into_bytes());
            }
            let (plan, sol) = solve_plan(&problem, model, &s.backend, "planning model")?;
            let peaks = problem.observed_peaks_mw(&sol);
            let source = if mode == PlanMode::Deterministic {
                format!("deterministic on {}", set.scenario_ids[planning.expected])
            } else {
                "scenario-based".to_string()
            };
            (plan, peaks, source)
        }
        PlanMode::Aware => {
            let budget = c.plan.budget.expect("checked above");
            let config = sweep_config(
                s,
                vec![budget],
                c.plan.weight,
                c.plan.expected_peaks_mw,
                planning.expected,
            );
            let curve = run_sweep(model, set, &config, &s.backend)?;
            let p = &curve.points[0];
            let plan = p.plan.clone().expect("a feasible sweep has a plan");
            b.log(format!(
                "expected peaks: {} / {} MW",
                num(curve.expected_peaks.0),
                num(curve.expected_peaks.1)
            ));
            (plan, (p.lambda_d, p.lambda_r), format!("transmission-aware, budget {}", num(budget)))
        }
    };
    b.log(format!("{source}: cost {}, status {}", num(plan.cost.total), plan.status));
    b.log(format!("peaks: {} / {} MW", num(peaks.0), num(peaks.1)));
    b.add_json("plan.json", &s.plan_file(&source, &plan, Some(peaks)))?;
    let summary = cost_table(&plan, model);
    Ok(CommandOutput::clean(b, summary))
}

fn sweep_config(
    s: &Session,
    budgets: Vec<f64>,
    weight: f64,
    given: Option<[f64; 2]>,
    expected: usize,
) -> SweepConfig {
    SweepConfig {
        budgets,
        weight_w: weight,
        expected_peaks: match given {
            Some([d, r]) => ExpectedPeaks::Given {
                direct_mw: d,
                reverse_mw: r,
            },
            None => ExpectedPeaks::FromDeterministic {
                expected_scenario: expected,
            },
        },
        build: s.resolved.config.build,
    }
}

/// Runs spread evenly over the ranking by installed capacity.
pub fn spread_runs(prep: &PreparedScenarios, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..prep.runs.len()).collect();
    order.sort_by(|&a, &b| {
        prep.runs[a]
            .total_kw()
            .total_cmp(&prep.runs[b].total_kw())
            .then(a.cmp(&b))
    });
    let m = order.len();
    let mut picks: Vec<usize> = match count {
        0 => Vec::new(),
        1 => vec![order[m / 2]],
        _ => (0..count)
            .map(|i| order[((i * (m - 1)) as f64 / (count - 1) as f64).round() as usize])
            .collect(),
    };
    picks.dedup();
    picks
}

pub fn cmd_nrcc(s: &Session) -> Result<CommandOutput> {
    let c = &s.resolved.config;
    let model = &s.data.model;
    let planning = s.planning()?;
    let set = &planning.set;
    let mut b = ResultBundle::new();
    s.log_set(&mut b, set);
    let budgets = match &c.nrcc.budgets {
        Some(v) => v.clone(),
        None => {
            let problem = build_scenario_based(model, set, s.options())?;
            let (plan, sol) = solve_plan(&problem, model, &s.backend, "scenario-based minimum cost")?;
            b.log(format!("minimum secure cost: {}", num(plan.cost.total)));
            b.add_json(
                "plans/min_cost.json",
                &s.plan_file("scenario-based", &plan, Some(problem.observed_peaks_mw(&sol))),
            )?;
            budget_grid(plan.cost.total, c.nrcc.max_multiple, c.nrcc.budget_count)?
        }
    };
    let config = sweep_config(s, budgets, c.nrcc.weight, c.nrcc.expected_peaks_mw, planning.expected);
    let mut curve = run_sweep(model, set, &config, &s.backend)?;
    b.log(format!(
        "expected peaks: {} / {} MW",
        num(curve.expected_peaks.0),
        num(curve.expected_peaks.1)
    ));

    let mut held_rows = Vec::new();
    match (&planning.prepared, c.nrcc.held_out_runs) {
        (_, 0) => b.log("dispersion: disabled"),
        (None, _) => b.log("dispersion: skipped, scenarios were read from a file"),
        (Some(prep), n) => {
            let runs = spread_runs(prep, n);
            let pairs: Vec<(f64, usize)> = c
                .nrcc
                .held_out_rates
                .iter()
                .flat_map(|&r| runs.iter().map(move |&i| (r, i)))
                .collect();
            let held = prep.held_out(&s.data, c.scenarios.diffusion.horizon, &pairs)?;
            let dom = dominated(set, &held)?;
            for (k, (r, i)) in pairs.iter().enumerate() {
                held_rows.push(vec![held.scenario_ids[k].clone(), num(*r), i.to_string(), dom[k].to_string()]);
            }
            b.log(format!(
                "dispersion: {} held-out scenarios, {} dominated",
                held.num_scenarios(),
                dom.iter().filter(|d| **d).count()
            ));
            compute_dispersion(model, &mut curve, &held, &s.backend, s.options())?;
        }
    }
    write_curve(s, &mut b, &curve, held_rows)?;
    let mut summary = Table::new(&["gamma", "lambda_d_mw", "lambda_r_mw", "status", "plan_id"]);
    for p in &curve.points {
        summary.push(vec![
            jnum(p.gamma),
            jnum(p.lambda_d),
            jnum(p.lambda_r),
            json!(p.status),
            json!(p.plan_id),
        ]);
    }
    Ok(CommandOutput::clean(b, summary))
}

fn write_curve(s: &Session, b: &mut ResultBundle, curve: &NrccCurve, held_rows: Vec<Vec<String>>) -> Result<()> {
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    let mut points = Vec::new();
    for p in &curve.points {
        rows.push(vec![
            num(p.gamma),
            num(p.lambda_d),
            num(p.lambda_r),
            p.objective.map(num).unwrap_or_default(),
            p.status.clone(),
            p.plan_id.clone().unwrap_or_default(),
        ]);
        let (lo, hi) = curve.dispersion_bounds(p.gamma).unwrap_or((f64::NAN, f64::NAN));
        plot.push(vec![num(p.gamma), num(p.lambda_d), num(p.lambda_r), num(lo), num(hi)]);
        points.push(json!({
            "gamma": jnum(p.gamma),
            "lambda_d_mw": jnum(p.lambda_d),
            "lambda_r_mw": jnum(p.lambda_r),
            "weighted_excess_mw": p.objective.map(jnum),
            "status": p.status,
            "plan_id": p.plan_id,
        }));
        if let (Some(id), Some(plan)) = (&p.plan_id, &p.plan) {
            let source = format!("transmission-aware, budget {}", num(p.gamma));
            b.add_json(
                format!("plans/{id}.json"),
                &s.plan_file(&source, plan, Some((p.lambda_d, p.lambda_r))),
            )?;
            b.log(format!(
                "{id}: budget {}, cost {}, peaks {} / {} MW, BESS {} MW",
                num(p.gamma),
                num(plan.cost.total),
                num(p.lambda_d),
                num(p.lambda_r),
                num(plan.total_bess_mw())
            ));
        } else {
            b.log(format!("budget {}: {}", num(p.gamma), p.status));
        }
    }
    b.add_csv(
        "curve.csv",
        &["gamma", "lambda_d_mw", "lambda_r_mw", "weighted_excess_mw", "status", "plan_id"],
        rows,
    )?;
    b.add_csv("plot.csv", &["gamma", "lambda_d", "lambda_r", "disp_lo", "disp_hi"], plot)?;
    b.add_csv(
        "dispersion.csv",
        &["gamma", "scenario_id", "peak_d_mw", "peak_r_mw", "feasible"],
        curve.dispersion.iter().map(|r| {
            vec![
                num(r.gamma),
                r.scenario_id.clone(),
                num(r.peak_d_mw),
                num(r.peak_r_mw),
                r.feasible.to_string(),
            ]
        }),
    )?;
    b.add_csv("held_out.csv", &["scenario_id", "load_growth", "run", "dominated"], held_rows)?;
    b.add_json(
        "curve.json",
        &json!({
            "seed": s.seed(),
            "config_hash": s.config_hash,
            "weight_w": curve.weight_w,
            "expected_peak_direct_mw": jnum(curve.expected_peaks.0),
            "expected_peak_reverse_mw": jnum(curve.expected_peaks.1),
            "points": points,
        }),
    )
}

pub fn cmd_validate(s: &Session) -> Result<CommandOutput> {
    let c = &s.resolved.config;
    let model = &s.data.model;
    let path = c
        .validate
        .plan
        .as_ref()
        .map(|p| s.resolved.path(p))
        .context("validate needs a plan file (--plan or validate.plan)")?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let plan = PlanFile::read(&text).with_context(|| format!("in {}", path.display()))?;
    let planning = s.planning()?;
    let set = &planning.set;
    let mut b = ResultBundle::new();
    s.log_set(&mut b, set);
    let cost = plan_cost(model, &plan)?;
    if (cost.total - plan.cost.total).abs() > 1e-6 * cost.total.abs().max(1.0) {
        b.log(format!(
            "warning: plan records cost {} but its assets cost {}",
            num(plan.cost.total),
            num(cost.total)
        ));
    }
    let eval = evaluate_plan(model, &plan, set, c.plan.weight, &s.backend, s.options())?;
    let report = validate_plan(model, &plan, set, &eval.dispatches(), &SweepOptions::default())?;

    let mut lines = report.lines.clone();
    lines.sort_by(|a, b| b.max_loading_pu.total_cmp(&a.max_loading_pu).then_with(|| a.line_id.cmp(&b.line_id)));
    let mut summary = Table::new(&["line_id", "max_loading_pu", "hour", "day", "scenario"]);
    for l in &lines {
        summary.push(vec![json!(l.line_id), jnum(l.max_loading_pu), json!(l.hour), json!(l.day), json!(l.scenario)]);
    }
    b.add_csv(
        "loading.csv",
        &["line_id", "from_bus", "to_bus", "max_loading_pu", "hour", "day", "scenario"],
        lines.iter().map(|l| {
            vec![
                l.line_id.clone(),
                l.from_bus.clone(),
                l.to_bus.clone(),
                num(l.max_loading_pu),
                l.hour.to_string(),
                l.day.to_string(),
                l.scenario.clone(),
            ]
        }),
    )?;
    b.add_csv(
        "voltage.csv",
        &["bus", "vmin", "vmax", "limit_min", "limit_max", "violated"],
        report.buses.iter().map(|e| {
            vec![
                e.bus.clone(),
                num(e.vmin),
                num(e.vmax),
                num(e.limit_min),
                num(e.limit_max),
                e.violated().to_string(),
            ]
        }),
    )?;
    let mut vio = Vec::new();
    for l in &report.overloaded {
        vio.push(vec!["ac".into(), "overload".into(), l.line_id.clone(), l.scenario.clone(), l.day.to_string(), l.hour.to_string(), num(l.max_loading_pu - 1.0)]);
    }
    for e in &report.voltage_violations {
        let amount = (e.limit_min - e.vmin).max(e.vmax - e.limit_max);
        vio.push(vec!["ac".into(), "voltage".into(), e.bus.clone(), String::new(), String::new(), String::new(), num(amount)]);
    }
    for (scen, v) in eval.violations() {
        vio.push(vec!["linear".into(), v.kind.clone(), v.element.clone(), scen.to_string(), v.day.to_string(), v.hour.to_string(), num(v.amount)]);
    }
    b.add_csv("violations.csv", &["check", "kind", "element", "scenario", "day", "hour", "amount"], vio)?;
    let (pd, pr) = eval.peaks();
    let infeasible: Vec<&str> = eval
        .scenarios
        .iter()
        .filter(|e| !e.feasible)
        .map(|e| e.scenario_id.as_str())
        .collect();
    b.add_json(
        "validation.json",
        &json!({
            "seed": s.seed(),
            "config_hash": s.config_hash,
            "plan_cost": jnum(plan.cost.total),
            "linear_feasible": eval.feasible(),
            "infeasible_scenarios": infeasible,
            "ac_clean": !report.has_violations(),
            "overloaded_lines": report.overloaded.len(),
            "voltage_violations": report.voltage_violations.len(),
            "peak_direct_mw": jnum(pd),
            "peak_reverse_mw": jnum(pr),
            "operating_points": report.points,
            "max_sweep_iterations": report.max_iterations,
            "max_residual": jnum(report.max_residual),
            "poi_mismatch_fraction": jnum(report.poi_mismatch_fraction),
            "max_sq_voltage_gap": jnum(report.max_sq_voltage_gap),
        }),
    )?;
    let bad = !eval.feasible() || report.has_violations();
    b.log(format!(
        "linear feasible: {}, AC overloads: {}, voltage violations: {}",
        eval.feasible(),
        report.overloaded.len(),
        report.voltage_violations.len()
    ));
    Ok(CommandOutput {
        bundle: b,
        summary,
        outcome: if bad { Outcome::Violations } else { Outcome::Clean },
    })
}
