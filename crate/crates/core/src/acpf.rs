//! AC power-flow check of plans by backward/forward sweep.
//!
//! Regulators are ideal ratio transformers at the receiving end of the
//! corridor feeding their bus: `V_bus = a * V_end`, with the line current
//! scaled by the same ratio.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridModel, RegulatorSite, ScenarioSet, Topology};
use crate::plan::{InvestmentPlan, ScenarioDispatch};

/// Radial network with the line options of a plan, in per unit.
#[derive(Debug, Clone)]
pub struct RadialNetwork {
    pub root: usize,
    /// Buses in breadth-first order from the root.
    pub order: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    /// Impedance of the corridor feeding each bus.
    pub z: Vec<Complex64>,
    /// Rating of the corridor feeding each bus, p.u.
    pub capacity: Vec<f64>,
    /// Corridor feeding each bus.
    pub corridor: Vec<Option<usize>>,
}

impl RadialNetwork {
    /// Network with the plan's chosen option on every corridor.
    pub fn from_plan(model: &GridModel, plan: &InvestmentPlan) -> Result<Self> {
        let topo = model.topology()?;
        let n = model.buses.len();
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let mut capacity = vec![f64::INFINITY; n];
        for (ci, c) in model.corridors.iter().enumerate() {
            let chosen = c
                .options
                .iter()
                .find(|o| plan.lines.iter().any(|l| l.option_id == o.id))
                .ok_or_else(|| {
                    Error::PowerFlow(format!(
                        "plan has no option for corridor {}-{}",
                        c.from_bus, c.to_bus
                    ))
                })?;
            let to = topo.ends[ci].1;
            z[to] = Complex64::new(chosen.resistance, chosen.reactance);
            capacity[to] = chosen.capacity;
        }
        Ok(Self::assemble(&topo, z, capacity))
    }

    fn assemble(topo: &Topology, z: Vec<Complex64>, capacity: Vec<f64>) -> Self {
        let n = topo.order.len();
        RadialNetwork {
            root: topo.root,
            order: topo.order.clone(),
            parent: (0..n).map(|b| topo.parent_bus(b)).collect(),
            z,
            capacity,
            corridor: topo.parent_corridor.clone(),
        }
    }

    /// A path feeder 0 - 1 - ... - (n-1) with identical lines.
    pub fn path(n: usize, z: Complex64, capacity: f64) -> Self {
        RadialNetwork {
            root: 0,
            order: (0..n).collect(),
            parent: (0..n).map(|b| b.checked_sub(1)).collect(),
            z: (0..n).map(|b| if b == 0 { Complex64::new(0.0, 0.0) } else { z }).collect(),
            capacity: (0..n).map(|b| if b == 0 { f64::INFINITY } else { capacity }).collect(),
            corridor: (0..n).map(|b| b.checked_sub(1)).collect(),
        }
    }
}

/// Injections and regulator ratios for one time point, per unit.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    /// Net complex injection per bus (generation positive).
    pub injection: Vec<Complex64>,
    /// Voltage-magnitude ratio of the regulator at each bus (1 if none).
    pub tap: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub v_root: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            v_root: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStatus {
    Converged,
    NotConverged,
    /// Voltage collapse or non-finite iterates.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub status: SweepStatus,
    pub iterations: usize,
    pub voltage: Vec<Complex64>,
    /// Line-side current in the corridor feeding each bus.
    pub branch_current: Vec<Complex64>,
    /// Complex power entering the corridor at its sending end.
    pub branch_power_sending: Vec<Complex64>,
    /// Complex power leaving the line section at the receiving end.
    pub branch_power_receiving: Vec<Complex64>,
    /// Largest nodal power mismatch, p.u.
    pub residual: f64,
}

impl SweepResult {
    pub fn converged(&self) -> bool {
        self.status == SweepStatus::Converged
    }

    /// Apparent power over rating for the corridor feeding `bus`.
    pub fn loading(&self, net: &RadialNetwork, bus: usize) -> f64 {
        let s = self.branch_power_sending[bus]
            .norm()
            .max(self.branch_power_receiving[bus].norm());
        s / net.capacity[bus]
    }
}

const COLLAPSE_VOLTAGE: f64 = 0.3;

/// Backward current aggregation and forward voltage update until the
/// largest voltage change falls below the tolerance.
pub fn backward_forward_sweep(
    net: &RadialNetwork,
    point: &OperatingPoint,
    opts: &SweepOptions,
) -> SweepResult {
    let n = net.order.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![Complex64::new(opts.v_root, 0.0); n];
    for &b in &net.order {
        if let Some(p) = net.parent[b] {
            v[b] = v[p] * point.tap[b];
        }
    }
    let mut bus_current = vec![zero; n];
    let mut line = vec![zero; n];
    let mut status = SweepStatus::NotConverged;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        currents(net, point, &v, &mut bus_current, &mut line);
        let mut change: f64 = 0.0;
        let mut finite = true;
        for &b in &net.order {
            let Some(p) = net.parent[b] else { continue };
            let end = v[p] - net.z[b] * line[b];
            let next = end * point.tap[b];
            change = change.max((next - v[b]).norm());
            finite &= next.re.is_finite() && next.im.is_finite();
            v[b] = next;
        }
        if !finite || v.iter().any(|x| x.norm() < COLLAPSE_VOLTAGE) {
            status = SweepStatus::Diverged;
            break;
        }
        if change < opts.tolerance {
            status = SweepStatus::Converged;
            break;
        }
    }
    currents(net, point, &v, &mut bus_current, &mut line);
    // Branch flows from the final voltages (Ohm's law), so the nodal
    // balance below measures how far the iterate is from a solution.
    let mut sending = vec![zero; n];
    let mut receiving = vec![zero; n];
    for &b in &net.order {
        if let Some(p) = net.parent[b] {
            let end = v[b] / point.tap[b];
            if net.z[b].norm() > 1e-12 {
                line[b] = (v[p] - end) / net.z[b];
            }
            sending[b] = v[p] * line[b].conj();
            receiving[b] = end * line[b].conj();
        }
    }
    // Nodal balance: injection plus inflow equals outflow to children.
    let mut balance: Vec<Complex64> = point.injection.clone();
    for &b in &net.order {
        if let Some(p) = net.parent[b] {
            balance[p] -= sending[b];
            balance[b] += receiving[b];
        }
    }
    let residual = balance
        .iter()
        .enumerate()
        .filter(|(b, _)| *b != net.root)
        .map(|(_, s)| s.norm())
        .fold(0.0, f64::max);
    SweepResult {
        status,
        iterations,
        voltage: v,
        branch_current: line,
        branch_power_sending: sending,
        branch_power_receiving: receiving,
        residual,
    }
}

fn currents(
    net: &RadialNetwork,
    point: &OperatingPoint,
    v: &[Complex64],
    bus_current: &mut [Complex64],
    line: &mut [Complex64],
) {
    for (b, c) in bus_current.iter_mut().enumerate() {
        // Current drawn by the bus: conj(S_load / V) with S_load = -injection.
        *c = -(point.injection[b] / v[b]).conj();
    }
    for &b in net.order.iter().rev() {
        if let Some(p) = net.parent[b] {
            line[b] = bus_current[b] * point.tap[b];
            bus_current[p] += line[b];
        }
    }
}

/// Worst loading observed on one corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineLoading {
    pub line_id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub max_loading_pu: f64,
    pub scenario: String,
    pub day: u32,
    pub hour: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusEnvelope {
    pub bus: String,
    pub vmin: f64,
    pub vmax: f64,
    pub limit_min: f64,
    pub limit_max: f64,
}

impl BusEnvelope {
    pub fn violated(&self) -> bool {
        self.vmin < self.limit_min - VOLTAGE_TOL || self.vmax > self.limit_max + VOLTAGE_TOL
    }
}

const VOLTAGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Per corridor, model order.
    pub lines: Vec<LineLoading>,
    pub buses: Vec<BusEnvelope>,
    /// Lines loaded above 1.0, sorted by descending loading.
    pub overloaded: Vec<LineLoading>,
    pub voltage_violations: Vec<BusEnvelope>,
    pub points: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
    /// Largest |P_ac - rho_milp| at the PoI over the largest |rho_milp|.
    pub poi_mismatch_fraction: f64,
    /// Largest |v_milp - |V_ac|^2| over buses and points, p.u.^2.
    pub max_sq_voltage_gap: f64,
}

impl ViolationReport {
    pub fn has_violations(&self) -> bool {
        !self.overloaded.is_empty() || !self.voltage_violations.is_empty()
    }
}

struct PointResult {
    k: usize,
    d: usize,
    h: usize,
    result: SweepResult,
    rho_p: f64,
    /// Active import at the PoI from the AC solution.
    poi_import: f64,
    v_sq_milp: Vec<f64>,
}

/// Run the sweep at every (scenario, day, hour) with the MILP dispatch of
/// each scenario, and aggregate line loadings and voltage envelopes.
pub fn validate_plan(
    model: &GridModel,
    plan: &InvestmentPlan,
    scenarios: &ScenarioSet,
    dispatches: &[ScenarioDispatch],
    opts: &SweepOptions,
) -> Result<ViolationReport> {
    scenarios.check_against(model)?;
    if dispatches.len() != scenarios.num_scenarios() {
        return Err(Error::PowerFlow(format!(
            "{} dispatches for {} scenarios",
            dispatches.len(),
            scenarios.num_scenarios()
        )));
    }
    let net = RadialNetwork::from_plan(model, plan)?;
    let sb = model.s_base_mva;
    let hours = scenarios.time.hours_per_day;
    let days = scenarios.time.num_days();
    let nb = model.buses.len();
    let installed = |bus: usize| -> bool {
        match &model.buses[bus].regulator {
            Some(RegulatorSite::Existing { .. }) => true,
            Some(RegulatorSite::Candidate(_)) => plan.regulators.contains(&model.buses[bus].id),
            None => false,
        }
    };
    let points: Vec<(usize, usize, usize)> = (0..scenarios.num_scenarios())
        .flat_map(|k| (0..days).flat_map(move |d| (0..hours).map(move |h| (k, d, h))))
        .collect();
    let results = points
        .par_iter()
        .map(|&(k, d, h)| {
            let disp = &dispatches[k];
            let t = d * hours + h;
            let injection = (0..nb)
                .map(|n| {
                    Complex64::new(
                        disp.bess_p[n][t] - scenarios.p(k, n, d, h) / sb,
                        disp.bess_q[n][t] - scenarios.q(k, n, d, h) / sb,
                    )
                })
                .collect();
            let tap = (0..nb)
                .map(|n| match (&model.buses[n].regulator, &disp.vreg_sq[n]) {
                    (Some(site), Some(inner)) if installed(n) => {
                        let (lo, hi) = site.ratio_bounds();
                        let ratio = if inner[t] > 0.0 { disp.v_sq[n][t] / inner[t] } else { 1.0 };
                        ratio.clamp(lo, hi).sqrt()
                    }
                    _ => 1.0,
                })
                .collect();
            let point = OperatingPoint { injection, tap };
            let result = backward_forward_sweep(&net, &point, opts);
            let poi_import = net
                .order
                .iter()
                .filter(|&&b| net.parent[b] == Some(net.root))
                .map(|&b| result.branch_power_sending[b].re)
                .sum::<f64>()
                - point.injection[net.root].re;
            PointResult {
                k,
                d,
                h,
                result,
                rho_p: disp.rho_p[t],
                poi_import,
                v_sq_milp: disp.v_sq.iter().map(|v| v[t]).collect(),
            }
        })
        .collect::<Vec<_>>();

    let mut lines: Vec<LineLoading> = model
        .corridors
        .iter()
        .map(|c| LineLoading {
            line_id: String::new(),
            from_bus: c.from_bus.clone(),
            to_bus: c.to_bus.clone(),
            max_loading_pu: 0.0,
            scenario: String::new(),
            day: 0,
            hour: 0,
        })
        .collect();
    for (ci, c) in model.corridors.iter().enumerate() {
        if let Some(l) = plan.lines.iter().find(|l| c.options.iter().any(|o| o.id == l.option_id)) {
            lines[ci].line_id = l.option_id.clone();
        }
    }
    let mut buses: Vec<BusEnvelope> = model
        .buses
        .iter()
        .map(|b| BusEnvelope {
            bus: b.id.clone(),
            vmin: f64::INFINITY,
            vmax: f64::NEG_INFINITY,
            limit_min: b.vmin_sq.sqrt(),
            limit_max: b.vmax_sq.sqrt(),
        })
        .collect();
    let mut max_iterations = 0;
    let mut max_residual: f64 = 0.0;
    let mut max_mismatch: f64 = 0.0;
    let mut max_rho: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for pr in &results {
        let r = &pr.result;
        let where_ = || {
            format!(
                "scenario {} day {} hour {}",
                scenarios.scenario_ids[pr.k], scenarios.time.day_ids[pr.d], pr.h
            )
        };
        match r.status {
            SweepStatus::Converged => {}
            SweepStatus::NotConverged => {
                return Err(Error::PowerFlow(format!(
                    "sweep did not converge in {} iterations at {}",
                    r.iterations,
                    where_()
                )))
            }
            SweepStatus::Diverged => {
                return Err(Error::PowerFlow(format!("voltage collapse at {}", where_())))
            }
        }
        max_iterations = max_iterations.max(r.iterations);
        max_residual = max_residual.max(r.residual);
        for b in 0..nb {
            let mag = r.voltage[b].norm();
            buses[b].vmin = buses[b].vmin.min(mag);
            buses[b].vmax = buses[b].vmax.max(mag);
            max_gap = max_gap.max((pr.v_sq_milp[b] - mag * mag).abs());
            if let Some(ci) = net.corridor[b] {
                let loading = r.loading(&net, b);
                if loading > lines[ci].max_loading_pu {
                    lines[ci].max_loading_pu = loading;
                    lines[ci].scenario = scenarios.scenario_ids[pr.k].clone();
                    lines[ci].day = scenarios.time.day_ids[pr.d];
                    lines[ci].hour = pr.h;
                }
            }
        }
        max_mismatch = max_mismatch.max((pr.poi_import - pr.rho_p).abs());
        max_rho = max_rho.max(pr.rho_p.abs());
    }
    let mut overloaded: Vec<LineLoading> = lines
        .iter()
        .filter(|l| l.max_loading_pu > 1.0)
        .cloned()
        .collect();
    overloaded.sort_by(|a, b| {
        b.max_loading_pu
            .partial_cmp(&a.max_loading_pu)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.line_id.cmp(&b.line_id))
    });
    let voltage_violations = buses.iter().filter(|b| b.violated()).cloned().collect();
    Ok(ViolationReport {
        lines,
        buses,
        overloaded,
        voltage_violations,
        points: results.len(),
        max_iterations,
        max_residual,
        poi_mismatch_fraction: if max_rho > 0.0 { max_mismatch / max_rho } else { max_mismatch },
        max_sq_voltage_gap: max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(inj: Vec<Complex64>) -> OperatingPoint {
        let n = inj.len();
        OperatingPoint {
            injection: inj,
            tap: vec![1.0; n],
        }
    }

    #[test]
    fn zero_injection_is_flat_in_one_iteration() {
        let net = RadialNetwork::path(4, Complex64::new(0.01, 0.02), 1.0);
        let r = backward_forward_sweep(&net, &point(vec![Complex64::new(0.0, 0.0); 4]), &SweepOptions::default());
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        assert!(r.voltage.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        assert!(r.branch_power_sending.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn two_bus_matches_closed_form() {
        // V^2 = V - R P for a resistive line and a unit-pf load P at V0 = 1.
        let r_line = 0.01;
        let p = 1.0;
        let net = RadialNetwork::path(2, Complex64::new(r_line, 0.0), 10.0);
        let res = backward_forward_sweep(
            &net,
            &point(vec![Complex64::new(0.0, 0.0), Complex64::new(-p, 0.0)]),
            &SweepOptions::default(),
        );
        assert!(res.converged());
        let exact = (1.0 + (1.0 - 4.0 * r_line * p).sqrt()) / 2.0;
        assert!((res.voltage[1].norm() - exact).abs() < 1e-8, "{} vs {exact}", res.voltage[1]);
        assert!(res.residual < 1e-7);
    }

    #[test]
    fn lossless_network_is_flat() {
        let net = RadialNetwork::path(5, Complex64::new(0.0, 0.0), 1.0);
        let inj = (0..5).map(|i| Complex64::new(-0.1 * i as f64, -0.05)).collect();
        let r = backward_forward_sweep(&net, &point(inj), &SweepOptions::default());
        assert!(r.converged());
        assert!(r.voltage.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn heavier_load_lowers_leaf_voltage() {
        let net = RadialNetwork::path(6, Complex64::new(0.01, 0.02), 5.0);
        let mut last = f64::INFINITY;
        for step in 0..20 {
            let mut inj = vec![Complex64::new(-0.05, -0.02); 6];
            inj[0] = Complex64::new(0.0, 0.0);
            inj[3] = Complex64::new(-0.05 - 0.05 * step as f64, -0.02);
            let r = backward_forward_sweep(&net, &point(inj), &SweepOptions::default());
            assert!(r.converged());
            let leaf = r.voltage[5].norm();
            assert!(leaf <= last + 1e-12);
            last = leaf;
        }
    }

    #[test]
    fn collapse_is_reported() {
        let net = RadialNetwork::path(2, Complex64::new(0.5, 0.5), 10.0);
        let r = backward_forward_sweep(
            &net,
            &point(vec![Complex64::new(0.0, 0.0), Complex64::new(-5.0, -5.0)]),
            &SweepOptions::default(),
        );
        assert!(!r.converged());
    }

    #[test]
    fn regulator_scales_downstream_voltage() {
        let net = RadialNetwork::path(3, Complex64::new(0.0, 0.0), 1.0);
        let mut pt = point(vec![Complex64::new(0.0, 0.0); 3]);
        pt.tap[1] = 1.05;
        let r = backward_forward_sweep(&net, &pt, &SweepOptions::default());
        assert!((r.voltage[1].norm() - 1.05).abs() < 1e-12);
        assert!((r.voltage[2].norm() - 1.05).abs() < 1e-12);
    }
}
