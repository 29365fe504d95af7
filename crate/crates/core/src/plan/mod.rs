//! Investment-planning MILPs.
//!
//! Three models share one set of operational constraints, replicated per
//! netload scenario:
//!
//! - deterministic: minimum investment cost for a single expected scenario;
//! - scenario-based: minimum investment cost secure for every scenario;
//! - transmission-aware: minimum weighted excess of the substation peak
//!   netloads over expected peaks, under an investment budget.
//!
//! Quantities inside the problems are per unit on the feeder's MVA base.
//! Plans and peaks leave this module in MW.

mod constraints;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use constraints::{add_bess, add_line_capacity, add_power_balance, add_voltage};

use crate::error::{Error, Result};
use crate::grid::{hyperplanes, GridModel, ScenarioSet, Topology};
use crate::milp::{LinExpr, ProblemSpec, Relation, Sense, Solution, VarKind, VarRef};

pub const PLAN_SCHEMA_VERSION: u32 = 1;

/// Per-option and per-bus big-M constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BigM {
    /// One entry per line option in flattened corridor order.
    pub line: Vec<f64>,
    /// Candidate-regulator buses only.
    pub regulator: Vec<Option<f64>>,
}

/// Big-M values for the gated voltage-drop and regulator identity
/// constraints. Explicit overrides on the model take precedence.
///
/// For an option whose receiving bus is regulated, the voltage span is
/// widened to the range the regulator's inner voltage can reach.
pub fn compute_big_m(model: &GridModel) -> Result<BigM> {
    let topo = model.topology()?;
    let vmax = model.max_vmax_sq();
    let vmin = model.min_vmin_sq();
    let mut line = Vec::new();
    for (ci, c) in model.corridors.iter().enumerate() {
        let to = &model.buses[topo.ends[ci].1];
        let (mut hi, mut lo) = (vmax, vmin);
        if let Some(site) = &to.regulator {
            let (rmin, rmax) = site.ratio_bounds();
            hi = hi.max(to.vmax_sq / rmin);
            lo = lo.min(to.vmin_sq / rmax);
        }
        for o in &c.options {
            let m = match o.big_m {
                Some(m) => m,
                None => {
                    (hi - lo)
                        + 2.0 * (o.resistance + o.reactance) * o.capacity * std::f64::consts::SQRT_2
                }
            };
            if !m.is_finite() {
                return Err(Error::InvalidParameter(format!("big-M of {} not finite", o.id)));
            }
            line.push(m);
        }
    }
    let regulator = model
        .buses
        .iter()
        .map(|b| {
            b.regulator_candidate().map(|c| match c.big_m {
                Some(m) => m,
                None => b.vmax_sq / c.ratio_min_sq,
            })
        })
        .collect::<Vec<_>>();
    if regulator.iter().flatten().any(|m| !m.is_finite()) {
        return Err(Error::InvalidParameter("regulator big-M not finite".into()));
    }
    Ok(BigM { line, regulator })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Multiplier on every big-M, used to check the constants never bind.
    pub big_m_scale: f64,
    /// Optional MVA limit on the substation exchange.
    pub substation_limit_mva: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            big_m_scale: 1.0,
            substation_limit_mva: None,
        }
    }
}

/// A line option located in the oriented feeder.
#[derive(Debug, Clone, Copy)]
pub struct OptionRef {
    pub corridor: usize,
    pub index: usize,
    pub fr: usize,
    pub to: usize,
}

/// Shared data for emitting constraints.
pub struct Context<'a> {
    pub model: &'a GridModel,
    pub scenarios: &'a ScenarioSet,
    pub topo: Topology,
    pub hyperplanes: Vec<(f64, f64)>,
    pub big_m: BigM,
    pub opts: Vec<OptionRef>,
    pub corridor_opts: Vec<Vec<usize>>,
    pub bess_at: Vec<Vec<usize>>,
    pub options: BuildOptions,
    elastic_options: Option<HashSet<String>>,
}

impl<'a> Context<'a> {
    pub fn new(
        model: &'a GridModel,
        scenarios: &'a ScenarioSet,
        options: BuildOptions,
    ) -> Result<Self> {
        let topo = model.topology()?;
        scenarios.check_against(model)?;
        let mut opts = Vec::new();
        let mut corridor_opts = Vec::new();
        for (ci, c) in model.corridors.iter().enumerate() {
            let (fr, to) = topo.ends[ci];
            let mut ids = Vec::new();
            for index in 0..c.options.len() {
                ids.push(opts.len());
                opts.push(OptionRef {
                    corridor: ci,
                    index,
                    fr,
                    to,
                });
            }
            corridor_opts.push(ids);
        }
        let mut bess_at = vec![Vec::new(); model.buses.len()];
        for (b, cand) in model.bess_candidates.iter().enumerate() {
            bess_at[topo.bus_index[&cand.bus]].push(b);
        }
        Ok(Context {
            model,
            scenarios,
            hyperplanes: hyperplanes(model.hyperplane_count)?,
            big_m: compute_big_m(model)?,
            topo,
            opts,
            corridor_opts,
            bess_at,
            options,
            elastic_options: None,
        })
    }

    /// (day index, hour) pairs in day-major order.
    pub fn periods(&self) -> impl Iterator<Item = (usize, usize)> {
        let hours = self.scenarios.time.hours_per_day;
        let days = self.scenarios.time.num_days();
        (0..days).flat_map(move |d| (0..hours).map(move |h| (d, h)))
    }

    pub fn num_periods(&self) -> usize {
        self.scenarios.time.hours_per_day * self.scenarios.time.num_days()
    }

    pub fn is_elastic_option(&self, id: &str) -> bool {
        self.elastic_options
            .as_ref()
            .is_some_and(|set| set.contains(id))
    }

    fn is_elastic(&self) -> bool {
        self.elastic_options.is_some()
    }

    fn option(&self, o: usize) -> &crate::grid::LineOption {
        let r = self.opts[o];
        &self.model.corridors[r.corridor].options[r.index]
    }
}

/// Build decisions shared by every scenario.
#[derive(Debug, Clone)]
pub struct InvestmentVars {
    /// One binary per line option, flattened corridor order.
    pub x_line: Vec<VarRef>,
    /// Power rating per BESS candidate, p.u.
    pub x_bess: Vec<VarRef>,
    /// Binary per bus with a candidate regulator.
    pub x_reg: Vec<Option<VarRef>>,
}

impl InvestmentVars {
    fn register(spec: &mut ProblemSpec, ctx: &Context) -> Result<Self> {
        let mut x_line = Vec::with_capacity(ctx.opts.len());
        for o in 0..ctx.opts.len() {
            x_line.push(spec.binary(format!("xl_{}", ctx.option(o).id))?);
        }
        let mut x_bess = Vec::new();
        for b in &ctx.model.bess_candidates {
            x_bess.push(spec.add_var(
                format!("xb_{}", b.id),
                VarKind::NonNegative,
                0.0,
                b.max_capacity / ctx.model.s_base_mva,
            )?);
        }
        let mut x_reg = Vec::new();
        for bus in &ctx.model.buses {
            x_reg.push(match bus.regulator_candidate() {
                Some(_) => Some(spec.binary(format!("xr_{}", bus.id))?),
                None => None,
            });
        }
        for (ci, ids) in ctx.corridor_opts.iter().enumerate() {
            let mut e = LinExpr::new();
            for &o in ids {
                e.add(x_line[o], 1.0);
            }
            spec.add_constraint(format!("one_{ci}"), e, Relation::Eq, 1.0)?;
        }
        Ok(InvestmentVars {
            x_line,
            x_bess,
            x_reg,
        })
    }

    /// Total investment cost as a linear expression, currency units.
    pub fn cost_expr(&self, ctx: &Context) -> LinExpr {
        let mut e = LinExpr::new();
        for (o, &x) in self.x_line.iter().enumerate() {
            e.add(x, ctx.option(o).cost);
        }
        for (b, &x) in self.x_bess.iter().enumerate() {
            e.add(x, ctx.model.bess_candidates[b].unit_cost * ctx.model.s_base_mva);
        }
        for (n, x) in self.x_reg.iter().enumerate() {
            if let (Some(x), Some(c)) = (x, ctx.model.buses[n].regulator_candidate()) {
                e.add(*x, c.cost);
            }
        }
        e
    }
}

/// Operational variables of one scenario, indexed by period `t = d * H + h`.
#[derive(Debug, Clone)]
pub struct OperationalVars {
    pub rho_p: Vec<VarRef>,
    pub rho_q: Vec<VarRef>,
    /// [option][t]
    pub flow_p: Vec<Vec<VarRef>>,
    pub flow_q: Vec<Vec<VarRef>>,
    /// [bess][t]
    pub bess_dis: Vec<Vec<VarRef>>,
    pub bess_chg: Vec<Vec<VarRef>>,
    pub bess_q: Vec<Vec<VarRef>>,
    pub bess_e: Vec<Vec<VarRef>>,
    /// [bus][t]
    pub v_sq: Vec<Vec<VarRef>>,
    /// Inner regulator voltage for regulated buses.
    pub vreg_sq: Vec<Option<Vec<VarRef>>>,
    /// Elastic voltage-limit slacks (below, above) for plan evaluation.
    pub volt_slack: Option<Vec<Vec<(VarRef, VarRef)>>>,
}

impl OperationalVars {
    fn register(spec: &mut ProblemSpec, ctx: &Context, k: usize) -> Result<Self> {
        let day_ids = &ctx.scenarios.time.day_ids;
        let periods: Vec<(u32, usize)> = ctx.periods().map(|(d, h)| (day_ids[d], h)).collect();
        let series = |spec: &mut ProblemSpec,
                      prefix: &str,
                      kind: VarKind,
                      lo: f64,
                      hi: f64|
         -> Result<Vec<VarRef>> {
            periods
                .iter()
                .map(|(day, h)| spec.add_var(format!("{prefix}_{k}_{day}_{h}"), kind, lo, hi))
                .collect()
        };
        let inf = f64::INFINITY;
        let rho_p = series(spec, "rp", VarKind::Free, -inf, inf)?;
        let rho_q = series(spec, "rq", VarKind::Free, -inf, inf)?;
        let mut flow_p = Vec::new();
        let mut flow_q = Vec::new();
        for o in 0..ctx.opts.len() {
            let id = &ctx.option(o).id;
            flow_p.push(series(spec, &format!("fp_{id}"), VarKind::Free, -inf, inf)?);
            flow_q.push(series(spec, &format!("fq_{id}"), VarKind::Free, -inf, inf)?);
        }
        let (mut bess_dis, mut bess_chg, mut bess_q, mut bess_e) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for b in &ctx.model.bess_candidates {
            bess_dis.push(series(spec, &format!("pd_{}", b.id), VarKind::NonNegative, 0.0, inf)?);
            bess_chg.push(series(spec, &format!("pc_{}", b.id), VarKind::NonNegative, 0.0, inf)?);
            bess_q.push(series(spec, &format!("qb_{}", b.id), VarKind::Free, -inf, inf)?);
            bess_e.push(series(spec, &format!("eb_{}", b.id), VarKind::NonNegative, 0.0, inf)?);
        }
        let elastic = ctx.is_elastic();
        let mut v_sq = Vec::new();
        let mut vreg_sq = Vec::new();
        for (n, bus) in ctx.model.buses.iter().enumerate() {
            let (lo, hi) = if n == ctx.topo.root {
                (ctx.model.v_ref_sq, ctx.model.v_ref_sq)
            } else if elastic {
                (0.0, inf)
            } else {
                (bus.vmin_sq, bus.vmax_sq)
            };
            v_sq.push(series(spec, &format!("v_{}", bus.id), VarKind::NonNegative, lo, hi)?);
            vreg_sq.push(if bus.is_regulated() {
                Some(series(
                    spec,
                    &format!("vr_{}", bus.id),
                    VarKind::NonNegative,
                    0.0,
                    inf,
                )?)
            } else {
                None
            });
        }
        let volt_slack = if elastic {
            let mut all = Vec::new();
            for bus in &ctx.model.buses {
                let lo = series(spec, &format!("svl_{}", bus.id), VarKind::NonNegative, 0.0, inf)?;
                let hi = series(spec, &format!("svh_{}", bus.id), VarKind::NonNegative, 0.0, inf)?;
                for (&a, &b) in lo.iter().zip(&hi) {
                    spec.objective.add(a, 1.0);
                    spec.objective.add(b, 1.0);
                }
                all.push(lo.into_iter().zip(hi).collect());
            }
            Some(all)
        } else {
            None
        };
        Ok(OperationalVars {
            rho_p,
            rho_q,
            flow_p,
            flow_q,
            bess_dis,
            bess_chg,
            bess_q,
            bess_e,
            v_sq,
            vreg_sq,
            volt_slack,
        })
    }
}

/// Peak netload variables of the transmission-aware model (p.u.).
#[derive(Debug, Clone, Copy)]
pub struct PeakVars {
    pub lambda_d: VarRef,
    pub lambda_r: VarRef,
    pub slack_d: VarRef,
    pub slack_r: VarRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Deterministic,
    ScenarioBased,
    TransmissionAware,
    FixedPlan,
}

/// An assembled planning problem with handles to its variables.
#[derive(Debug, Clone)]
pub struct PlanProblem {
    pub kind: ModelKind,
    pub spec: ProblemSpec,
    pub inv: InvestmentVars,
    pub ops: Vec<OperationalVars>,
    pub peaks: Option<PeakVars>,
    pub scenario_ids: Vec<String>,
    pub s_base_mva: f64,
    pub hours_per_day: usize,
    cost: LinExpr,
}

fn emit_operations(spec: &mut ProblemSpec, ctx: &Context, inv: &InvestmentVars) -> Result<Vec<OperationalVars>> {
    let mut ops = Vec::with_capacity(ctx.scenarios.num_scenarios());
    for k in 0..ctx.scenarios.num_scenarios() {
        let o = OperationalVars::register(spec, ctx, k)?;
        add_power_balance(spec, ctx, k, &o)?;
        add_line_capacity(spec, ctx, k, &o, inv)?;
        add_bess(spec, ctx, k, &o, inv)?;
        add_voltage(spec, ctx, k, &o, inv)?;
        ops.push(o);
    }
    Ok(ops)
}

fn link_peaks(
    spec: &mut ProblemSpec,
    ops: &[OperationalVars],
    expected_pu: Option<(f64, f64)>,
) -> Result<PeakVars> {
    let lambda_d = spec.nonneg("lam_d")?;
    let lambda_r = spec.nonneg("lam_r")?;
    let slack_d = spec.nonneg("slack_d")?;
    let slack_r = spec.nonneg("slack_r")?;
    for (k, o) in ops.iter().enumerate() {
        for (t, &rho) in o.rho_p.iter().enumerate() {
            spec.add_constraint(
                format!("pkd_{k}_{t}"),
                LinExpr::new().plus(lambda_d, 1.0).plus(rho, -1.0),
                Relation::Ge,
                0.0,
            )?;
            spec.add_constraint(
                format!("pkr_{k}_{t}"),
                LinExpr::new().plus(lambda_r, 1.0).plus(rho, 1.0),
                Relation::Ge,
                0.0,
            )?;
        }
    }
    if let Some((ld, lr)) = expected_pu {
        spec.add_constraint(
            "excess_d",
            LinExpr::new().plus(slack_d, 1.0).plus(lambda_d, -1.0),
            Relation::Ge,
            -ld,
        )?;
        spec.add_constraint(
            "excess_r",
            LinExpr::new().plus(slack_r, 1.0).plus(lambda_r, -1.0),
            Relation::Ge,
            -lr,
        )?;
    }
    Ok(PeakVars {
        lambda_d,
        lambda_r,
        slack_d,
        slack_r,
    })
}

fn assemble_cost_model(
    name: &str,
    kind: ModelKind,
    model: &GridModel,
    scenarios: &ScenarioSet,
    options: BuildOptions,
) -> Result<PlanProblem> {
    let ctx = Context::new(model, scenarios, options)?;
    let mut spec = ProblemSpec::new(name);
    let inv = InvestmentVars::register(&mut spec, &ctx)?;
    let ops = emit_operations(&mut spec, &ctx, &inv)?;
    let cost = inv.cost_expr(&ctx);
    spec.set_objective(cost.clone(), Sense::Minimize);
    Ok(PlanProblem {
        kind,
        spec,
        inv,
        ops,
        peaks: None,
        scenario_ids: scenarios.scenario_ids.clone(),
        s_base_mva: model.s_base_mva,
        hours_per_day: model.hours_per_day,
        cost,
    })
}

/// Least-cost plan secure for the single scenario at `expected`.
pub fn build_deterministic(
    model: &GridModel,
    scenarios: &ScenarioSet,
    expected: usize,
    options: BuildOptions,
) -> Result<PlanProblem> {
    if expected >= scenarios.num_scenarios() {
        return Err(Error::InvalidScenarios(format!(
            "expected scenario index {expected} out of range"
        )));
    }
    let single = scenarios.subset(&[expected]);
    assemble_cost_model(
        "deterministic",
        ModelKind::Deterministic,
        model,
        &single,
        options,
    )
}

/// Least-cost plan secure for every scenario of the set.
pub fn build_scenario_based(
    model: &GridModel,
    scenarios: &ScenarioSet,
    options: BuildOptions,
) -> Result<PlanProblem> {
    assemble_cost_model(
        "scenario_based",
        ModelKind::ScenarioBased,
        model,
        scenarios,
        options,
    )
}

/// Inputs of the transmission-aware model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwareParams {
    /// Investment budget, currency. `f64::INFINITY` drops the budget row.
    pub budget: f64,
    /// Weight of the direct-peak excess; the reverse excess gets `1 - weight`.
    pub weight: f64,
    /// Expected (direct, reverse) peaks, MW.
    pub expected_peaks_mw: (f64, f64),
}

/// Budget-constrained plan minimizing the weighted excess of the peak
/// netloads over their expected values.
pub fn build_transmission_aware(
    model: &GridModel,
    scenarios: &ScenarioSet,
    params: AwareParams,
    options: BuildOptions,
) -> Result<PlanProblem> {
    if !(0.0..=1.0).contains(&params.weight) {
        return Err(Error::InvalidParameter(format!(
            "weight {} outside [0, 1]",
            params.weight
        )));
    }
    let (ed, er) = params.expected_peaks_mw;
    if !(ed >= 0.0 && er >= 0.0) {
        return Err(Error::InvalidParameter("expected peaks must be >= 0".into()));
    }
    if params.budget.is_nan() {
        return Err(Error::InvalidParameter("budget is NaN".into()));
    }
    let mut p = assemble_cost_model(
        "transmission_aware",
        ModelKind::TransmissionAware,
        model,
        scenarios,
        options,
    )?;
    let sb = model.s_base_mva;
    let peaks = link_peaks(&mut p.spec, &p.ops, Some((ed / sb, er / sb)))?;
    if params.budget.is_finite() {
        p.spec
            .add_constraint("budget", p.cost.clone(), Relation::Le, params.budget)?;
    }
    p.spec.set_objective(
        LinExpr::new()
            .plus(peaks.slack_d, params.weight)
            .plus(peaks.slack_r, 1.0 - params.weight),
        Sense::Minimize,
    );
    p.peaks = Some(peaks);
    Ok(p)
}

/// Second stage of a lexicographic transmission-aware solve: keep the
/// weighted excess at its optimum `excess` (plus `tol`) and minimize the
/// weighted peaks themselves, which pins down λ when the excess is flat.
pub fn restrict_to_peak_minimization(
    problem: &mut PlanProblem,
    weight: f64,
    excess: f64,
    tol: f64,
) -> Result<()> {
    let peaks = problem
        .peaks
        .ok_or_else(|| Error::Problem("model has no peak variables".into()))?;
    problem.spec.add_constraint(
        "excess_cap",
        LinExpr::new()
            .plus(peaks.slack_d, weight)
            .plus(peaks.slack_r, 1.0 - weight),
        Relation::Le,
        excess + tol,
    )?;
    problem.spec.set_objective(
        LinExpr::new()
            .plus(peaks.lambda_d, weight)
            .plus(peaks.lambda_r, 1.0 - weight),
        Sense::Minimize,
    );
    Ok(())
}

/// Operational problem with every investment fixed to `plan`: minimizes the
/// weighted peaks over all scenarios of the set. With `elastic`, capacity
/// and voltage limits of the built network may be exceeded at a cost and
/// the objective becomes the total violation.
pub fn build_fixed_plan(
    model: &GridModel,
    scenarios: &ScenarioSet,
    plan: &InvestmentPlan,
    weight: f64,
    elastic: bool,
    options: BuildOptions,
) -> Result<PlanProblem> {
    let mut ctx = Context::new(model, scenarios, options)?;
    if elastic {
        ctx.elastic_options = Some(plan.lines.iter().map(|l| l.option_id.clone()).collect());
    }
    let mut spec = ProblemSpec::new(if elastic { "fixed_plan_elastic" } else { "fixed_plan" });
    let inv = InvestmentVars::register(&mut spec, &ctx)?;
    fix_investments(&mut spec, &ctx, &inv, plan)?;
    let ops = emit_operations(&mut spec, &ctx, &inv)?;
    let peaks = link_peaks(&mut spec, &ops, None)?;
    if !elastic {
        spec.set_objective(
            LinExpr::new()
                .plus(peaks.lambda_d, weight)
                .plus(peaks.lambda_r, 1.0 - weight),
            Sense::Minimize,
        );
    } else {
        // Violation slacks were accumulated into the objective while emitting.
        let mut obj = std::mem::take(&mut spec.objective);
        // A tiny peak term keeps the dispatch well defined among equal violations.
        obj.add(peaks.lambda_d, 1e-6 * weight);
        obj.add(peaks.lambda_r, 1e-6 * (1.0 - weight));
        spec.set_objective(obj, Sense::Minimize);
    }
    let cost = inv.cost_expr(&ctx);
    let spec = spec.relaxed();
    Ok(PlanProblem {
        kind: ModelKind::FixedPlan,
        spec,
        inv,
        ops,
        peaks: Some(peaks),
        scenario_ids: scenarios.scenario_ids.clone(),
        s_base_mva: model.s_base_mva,
        hours_per_day: model.hours_per_day,
        cost,
    })
}

fn fix_investments(
    spec: &mut ProblemSpec,
    ctx: &Context,
    inv: &InvestmentVars,
    plan: &InvestmentPlan,
) -> Result<()> {
    let chosen: HashSet<&str> = plan.lines.iter().map(|l| l.option_id.as_str()).collect();
    if plan.lines.len() != ctx.model.corridors.len() {
        return Err(Error::Extraction(format!(
            "plan lists {} line choices for {} corridors",
            plan.lines.len(),
            ctx.model.corridors.len()
        )));
    }
    for (o, &x) in inv.x_line.iter().enumerate() {
        let on = chosen.contains(ctx.option(o).id.as_str());
        spec.fix(x, if on { 1.0 } else { 0.0 });
    }
    for (b, &x) in inv.x_bess.iter().enumerate() {
        let id = &ctx.model.bess_candidates[b].id;
        let mw = plan
            .bess
            .iter()
            .find(|c| &c.id == id)
            .map(|c| c.mw)
            .unwrap_or(0.0);
        spec.fix(x, mw / ctx.model.s_base_mva);
    }
    let regs: HashSet<&str> = plan.regulators.iter().map(String::as_str).collect();
    for (n, x) in inv.x_reg.iter().enumerate() {
        if let Some(x) = x {
            let on = regs.contains(ctx.model.buses[n].id.as_str());
            spec.fix(*x, if on { 1.0 } else { 0.0 });
        }
    }
    for r in &plan.regulators {
        let ok = ctx
            .model
            .buses
            .iter()
            .any(|b| &b.id == r && b.regulator_candidate().is_some());
        if !ok {
            return Err(Error::Extraction(format!(
                "plan places a regulator at {r}, which is not a candidate"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineChoice {
    pub from_bus: String,
    pub to_bus: String,
    pub option_id: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessChoice {
    pub id: String,
    pub bus: String,
    pub mw: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub lines: f64,
    pub bess: f64,
    pub regulators: f64,
    pub total: f64,
}

/// Investment decisions read back from a solved planning model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestmentPlan {
    pub schema_version: u32,
    pub model: ModelKind,
    pub lines: Vec<LineChoice>,
    pub bess: Vec<BessChoice>,
    pub regulators: Vec<String>,
    pub cost: CostBreakdown,
    pub status: String,
    pub mip_gap: Option<f64>,
}

impl InvestmentPlan {
    /// Plan that keeps every corridor on its baseline option and builds nothing.
    pub fn baseline(model: &GridModel) -> Result<Self> {
        let topo = model.topology()?;
        let lines = model
            .corridors
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let o = c.baseline().expect("validated corridor has a baseline");
                LineChoice {
                    from_bus: model.buses[topo.ends[ci].0].id.clone(),
                    to_bus: model.buses[topo.ends[ci].1].id.clone(),
                    option_id: o.id.clone(),
                    cost: 0.0,
                }
            })
            .collect();
        Ok(InvestmentPlan {
            schema_version: PLAN_SCHEMA_VERSION,
            model: ModelKind::FixedPlan,
            lines,
            bess: Vec::new(),
            regulators: Vec::new(),
            cost: CostBreakdown::default(),
            status: "baseline".into(),
            mip_gap: None,
        })
    }

    /// Upgraded corridors only (options other than the baseline).
    pub fn upgrades<'a>(&'a self, model: &'a GridModel) -> impl Iterator<Item = &'a LineChoice> {
        self.lines.iter().filter(move |l| {
            model
                .find_option(&l.option_id)
                .is_some_and(|(_, o)| !o.baseline)
        })
    }

    pub fn total_bess_mw(&self) -> f64 {
        self.bess.iter().fold(0.0, |s, b| s + b.mw)
    }
}

/// Recompute a plan's cost from model parameters.
pub fn plan_cost(model: &GridModel, plan: &InvestmentPlan) -> Result<CostBreakdown> {
    let mut c = CostBreakdown::default();
    for l in &plan.lines {
        let (_, o) = model
            .find_option(&l.option_id)
            .ok_or_else(|| Error::Extraction(format!("unknown option {}", l.option_id)))?;
        c.lines += o.cost;
    }
    for b in &plan.bess {
        let cand = model
            .bess_candidates
            .iter()
            .find(|x| x.id == b.id)
            .ok_or_else(|| Error::Extraction(format!("unknown bess {}", b.id)))?;
        c.bess += cand.unit_cost * b.mw;
    }
    for r in &plan.regulators {
        let cand = model
            .buses
            .iter()
            .find(|b| &b.id == r)
            .and_then(|b| b.regulator_candidate())
            .ok_or_else(|| Error::Extraction(format!("no regulator candidate at {r}")))?;
        c.regulators += cand.cost;
    }
    c.total = c.lines + c.bess + c.regulators;
    Ok(c)
}

const BINARY_THRESHOLD: f64 = 0.5;
const COST_CHECK_RTOL: f64 = 1e-4;

/// Read the investment decisions out of a solution.
///
/// Binaries are rounded at 0.5; the cost is recomputed from parameters. For
/// cost-minimizing models the recomputed cost must match the objective.
pub fn extract_plan(
    solution: &Solution,
    problem: &PlanProblem,
    model: &GridModel,
) -> Result<InvestmentPlan> {
    if !solution.status.has_solution() {
        return Err(Error::Extraction(format!(
            "solution status {} carries no values",
            solution.status
        )));
    }
    let topo = model.topology()?;
    let mut lines = Vec::new();
    let mut o = 0;
    for (ci, c) in model.corridors.iter().enumerate() {
        let mut picked = Vec::new();
        for opt in &c.options {
            if solution.value(problem.inv.x_line[o]) > BINARY_THRESHOLD {
                picked.push(opt);
            }
            o += 1;
        }
        if picked.len() != 1 {
            return Err(Error::Extraction(format!(
                "corridor {}-{} has {} options selected after rounding",
                c.from_bus,
                c.to_bus,
                picked.len()
            )));
        }
        lines.push(LineChoice {
            from_bus: model.buses[topo.ends[ci].0].id.clone(),
            to_bus: model.buses[topo.ends[ci].1].id.clone(),
            option_id: picked[0].id.clone(),
            cost: picked[0].cost,
        });
    }
    let mut bess = Vec::new();
    for (b, cand) in model.bess_candidates.iter().enumerate() {
        let mut mw = solution.value(problem.inv.x_bess[b]) * model.s_base_mva;
        if mw.abs() < 1e-9 {
            mw = 0.0;
        }
        if mw < 0.0 {
            return Err(Error::Extraction(format!("negative BESS size at {}", cand.id)));
        }
        if mw > 0.0 {
            bess.push(BessChoice {
                id: cand.id.clone(),
                bus: cand.bus.clone(),
                mw,
                cost: mw * cand.unit_cost,
            });
        }
    }
    let mut regulators = Vec::new();
    for (n, x) in problem.inv.x_reg.iter().enumerate() {
        if let Some(x) = x {
            if solution.value(*x) > BINARY_THRESHOLD {
                regulators.push(model.buses[n].id.clone());
            }
        }
    }
    let mut plan = InvestmentPlan {
        schema_version: PLAN_SCHEMA_VERSION,
        model: problem.kind,
        lines,
        bess,
        regulators,
        cost: CostBreakdown::default(),
        status: solution.status.to_string(),
        mip_gap: solution.mip_gap,
    };
    plan.cost = plan_cost(model, &plan)?;
    if matches!(
        problem.kind,
        ModelKind::Deterministic | ModelKind::ScenarioBased
    ) {
        let obj = solution.objective.unwrap_or(f64::NAN);
        check_cost(plan.cost.total, obj)?;
    }
    Ok(plan)
}

/// Consistency between a recomputed plan cost and a solver objective.
pub fn check_cost(recomputed: f64, objective: f64) -> Result<()> {
    let scale = objective.abs().max(recomputed.abs()).max(1.0);
    if !((recomputed - objective).abs() <= COST_CHECK_RTOL * scale) {
        return Err(Error::Extraction(format!(
            "recomputed cost {recomputed} differs from objective {objective}"
        )));
    }
    Ok(())
}

/// Dispatch and voltages of one scenario read from a solution, p.u.
#[derive(Debug, Clone)]
pub struct ScenarioDispatch {
    /// [t]
    pub rho_p: Vec<f64>,
    pub rho_q: Vec<f64>,
    /// Net BESS injection per bus, [bus][t].
    pub bess_p: Vec<Vec<f64>>,
    pub bess_q: Vec<Vec<f64>>,
    /// [bus][t]
    pub v_sq: Vec<Vec<f64>>,
    /// Inner regulator voltage, regulated buses only.
    pub vreg_sq: Vec<Option<Vec<f64>>>,
    /// Corridor flows (sum of option flows), [corridor][t].
    pub flow_p: Vec<Vec<f64>>,
    pub flow_q: Vec<Vec<f64>>,
}

impl PlanProblem {
    pub fn cost_expr(&self) -> &LinExpr {
        &self.cost
    }

    /// Substation import peaks (direct, reverse) in MW, computed from ρ.
    pub fn observed_peaks_mw(&self, solution: &Solution) -> (f64, f64) {
        let mut direct: f64 = 0.0;
        let mut reverse: f64 = 0.0;
        for o in &self.ops {
            for &r in &o.rho_p {
                let v = solution.value(r);
                direct = direct.max(v);
                reverse = reverse.max(-v);
            }
        }
        (direct * self.s_base_mva, reverse * self.s_base_mva)
    }

    /// λ values in MW, for models that carry them.
    pub fn lambda_mw(&self, solution: &Solution) -> Option<(f64, f64)> {
        self.peaks.map(|p| {
            (
                solution.value(p.lambda_d) * self.s_base_mva,
                solution.value(p.lambda_r) * self.s_base_mva,
            )
        })
    }

    pub fn dispatch(&self, model: &GridModel, solution: &Solution, k: usize) -> ScenarioDispatch {
        let ops = &self.ops[k];
        let vals = |vs: &[VarRef]| vs.iter().map(|&v| solution.value(v)).collect::<Vec<f64>>();
        let periods = ops.rho_p.len();
        let n = model.buses.len();
        let mut bess_p = vec![vec![0.0; periods]; n];
        let mut bess_q = vec![vec![0.0; periods]; n];
        for (b, cand) in model.bess_candidates.iter().enumerate() {
            let bus = model.bus_position(&cand.bus).expect("validated");
            for t in 0..periods {
                bess_p[bus][t] +=
                    solution.value(ops.bess_dis[b][t]) - solution.value(ops.bess_chg[b][t]);
                bess_q[bus][t] += solution.value(ops.bess_q[b][t]);
            }
        }
        let mut flow_p = Vec::new();
        let mut flow_q = Vec::new();
        let mut o = 0;
        for c in &model.corridors {
            let mut fp = vec![0.0; periods];
            let mut fq = vec![0.0; periods];
            for _ in &c.options {
                for t in 0..periods {
                    fp[t] += solution.value(ops.flow_p[o][t]);
                    fq[t] += solution.value(ops.flow_q[o][t]);
                }
                o += 1;
            }
            flow_p.push(fp);
            flow_q.push(fq);
        }
        ScenarioDispatch {
            rho_p: vals(&ops.rho_p),
            rho_q: vals(&ops.rho_q),
            bess_p,
            bess_q,
            v_sq: ops.v_sq.iter().map(|v| vals(v)).collect(),
            vreg_sq: ops.vreg_sq.iter().map(|v| v.as_ref().map(|v| vals(v))).collect(),
            flow_p,
            flow_q,
        }
    }
}

#[cfg(test)]
mod tests;
