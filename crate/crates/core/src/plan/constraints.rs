//! Operational constraint families, emitted once per scenario.

use crate::error::Result;
use crate::milp::{LinExpr, ProblemSpec, Relation, VarRef};

use super::{Context, InvestmentVars, OperationalVars};

/// Nodal active and reactive balances. Flow on a corridor is the sum of its
/// option flows, oriented away from the PoI.
pub fn add_power_balance(
    spec: &mut ProblemSpec,
    ctx: &Context,
    k: usize,
    ops: &OperationalVars,
) -> Result<()> {
    let topo = &ctx.topo;
    let scen = ctx.scenarios;
    let sb = ctx.model.s_base_mva;
    for n in 0..ctx.model.buses.len() {
        let bus_id = &ctx.model.buses[n].id;
        for (t, (d, h)) in ctx.periods().enumerate() {
            let day = scen.time.day_ids[d];
            let mut p = LinExpr::new();
            let mut q = LinExpr::new();
            if n == topo.root {
                p.add(ops.rho_p[t], 1.0);
                q.add(ops.rho_q[t], 1.0);
            }
            for &b in &ctx.bess_at[n] {
                p.add(ops.bess_dis[b][t], 1.0);
                p.add(ops.bess_chg[b][t], -1.0);
                q.add(ops.bess_q[b][t], 1.0);
            }
            for &c in &topo.children[n] {
                for &o in &ctx.corridor_opts[c] {
                    p.add(ops.flow_p[o][t], -1.0);
                    q.add(ops.flow_q[o][t], -1.0);
                }
            }
            if let Some(c) = topo.parent_corridor[n] {
                for &o in &ctx.corridor_opts[c] {
                    p.add(ops.flow_p[o][t], 1.0);
                    q.add(ops.flow_q[o][t], 1.0);
                }
            }
            let ld_p = scen.p(k, n, d, h) / sb;
            let ld_q = scen.q(k, n, d, h) / sb;
            spec.add_constraint(
                format!("pbal_{bus_id}_{k}_{day}_{h}"),
                p,
                Relation::Eq,
                ld_p,
            )?;
            spec.add_constraint(
                format!("qbal_{bus_id}_{k}_{day}_{h}"),
                q,
                Relation::Eq,
                ld_q,
            )?;
        }
    }
    if let Some(limit) = ctx.options.substation_limit_mva {
        let cap = limit / sb;
        for (t, (d, h)) in ctx.periods().enumerate() {
            let day = scen.time.day_ids[d];
            for (j, &(cp, cq)) in ctx.hyperplanes.iter().enumerate() {
                spec.add_constraint(
                    format!("sub_{k}_{day}_{h}_{j}"),
                    LinExpr::new().plus(ops.rho_p[t], cp).plus(ops.rho_q[t], cq),
                    Relation::Le,
                    cap,
                )?;
            }
        }
    }
    Ok(())
}

/// Polygonal apparent-power limit gated by the option's build decision.
pub fn add_line_capacity(
    spec: &mut ProblemSpec,
    ctx: &Context,
    k: usize,
    ops: &OperationalVars,
    inv: &InvestmentVars,
) -> Result<()> {
    let day_ids = &ctx.scenarios.time.day_ids;
    for (o, opt) in ctx.opts.iter().enumerate() {
        let line = &ctx.model.corridors[opt.corridor].options[opt.index];
        let elastic = ctx.is_elastic_option(&line.id);
        for (t, (d, h)) in ctx.periods().enumerate() {
            let day = day_ids[d];
            let overload = if elastic {
                Some(spec.nonneg(format!("ov_{}_{k}_{day}_{h}", line.id))?)
            } else {
                None
            };
            for (j, &(cp, cq)) in ctx.hyperplanes.iter().enumerate() {
                let mut e = LinExpr::new()
                    .plus(ops.flow_p[o][t], cp)
                    .plus(ops.flow_q[o][t], cq)
                    .plus(inv.x_line[o], -line.capacity);
                if let Some(s) = overload {
                    e.add(s, -line.capacity);
                }
                spec.add_constraint(
                    format!("cap_{}_{k}_{day}_{h}_{j}", line.id),
                    e,
                    Relation::Le,
                    0.0,
                )?;
            }
            if let Some(s) = overload {
                spec.objective.add(s, 1.0);
            }
        }
    }
    Ok(())
}

/// Storage energy balance (cyclic within each day), energy cap and
/// apparent-power polygon.
pub fn add_bess(
    spec: &mut ProblemSpec,
    ctx: &Context,
    k: usize,
    ops: &OperationalVars,
    inv: &InvestmentVars,
) -> Result<()> {
    let hours = ctx.scenarios.time.hours_per_day;
    let day_ids = &ctx.scenarios.time.day_ids;
    for (b, cand) in ctx.model.bess_candidates.iter().enumerate() {
        for (t, (d, h)) in ctx.periods().enumerate() {
            let day = day_ids[d];
            let prev = d * hours + (h + hours - 1) % hours;
            spec.add_constraint(
                format!("esoc_{}_{k}_{day}_{h}", cand.id),
                LinExpr::new()
                    .plus(ops.bess_e[b][t], 1.0)
                    .plus(ops.bess_e[b][prev], -1.0)
                    .plus(ops.bess_dis[b][t], 1.0 / cand.eff_discharge)
                    .plus(ops.bess_chg[b][t], -cand.eff_charge),
                Relation::Eq,
                0.0,
            )?;
            spec.add_constraint(
                format!("emax_{}_{k}_{day}_{h}", cand.id),
                LinExpr::new()
                    .plus(ops.bess_e[b][t], 1.0)
                    .plus(inv.x_bess[b], -cand.duration_ratio),
                Relation::Le,
                0.0,
            )?;
            for (j, &(cp, cq)) in ctx.hyperplanes.iter().enumerate() {
                spec.add_constraint(
                    format!("bcap_{}_{k}_{day}_{h}_{j}", cand.id),
                    LinExpr::new()
                        .plus(ops.bess_dis[b][t], cp)
                        .plus(ops.bess_chg[b][t], -cp)
                        .plus(ops.bess_q[b][t], cq)
                        .plus(inv.x_bess[b], -1.0),
                    Relation::Le,
                    0.0,
                )?;
            }
        }
    }
    Ok(())
}

/// Big-M gated LinDistFlow drops, voltage limits and regulator ranges.
pub fn add_voltage(
    spec: &mut ProblemSpec,
    ctx: &Context,
    k: usize,
    ops: &OperationalVars,
    inv: &InvestmentVars,
) -> Result<()> {
    let day_ids = &ctx.scenarios.time.day_ids;
    for (o, opt) in ctx.opts.iter().enumerate() {
        let line = &ctx.model.corridors[opt.corridor].options[opt.index];
        let m = ctx.big_m.line[o] * ctx.options.big_m_scale;
        let receiving = |t: usize| -> VarRef {
            match &ops.vreg_sq[opt.to] {
                Some(inner) => inner[t],
                None => ops.v_sq[opt.to][t],
            }
        };
        for (t, (d, h)) in ctx.periods().enumerate() {
            let day = day_ids[d];
            let drop = LinExpr::new()
                .plus(receiving(t), 1.0)
                .plus(ops.v_sq[opt.fr][t], -1.0)
                .plus(ops.flow_p[o][t], 2.0 * line.resistance)
                .plus(ops.flow_q[o][t], 2.0 * line.reactance);
            spec.add_constraint(
                format!("vdu_{}_{k}_{day}_{h}", line.id),
                drop.clone().plus(inv.x_line[o], m),
                Relation::Le,
                m,
            )?;
            spec.add_constraint(
                format!("vdl_{}_{k}_{day}_{h}", line.id),
                drop.plus(inv.x_line[o], -m),
                Relation::Ge,
                -m,
            )?;
        }
    }

    for (n, bus) in ctx.model.buses.iter().enumerate() {
        for (t, (d, h)) in ctx.periods().enumerate() {
            let day = day_ids[d];
            let v = ops.v_sq[n][t];
            if let Some(elastic) = &ops.volt_slack {
                if n != ctx.topo.root {
                    let (lo, hi) = elastic[n][t];
                    spec.add_constraint(
                        format!("vmin_{}_{k}_{day}_{h}", bus.id),
                        LinExpr::new().plus(v, 1.0).plus(lo, 1.0),
                        Relation::Ge,
                        bus.vmin_sq,
                    )?;
                    spec.add_constraint(
                        format!("vmax_{}_{k}_{day}_{h}", bus.id),
                        LinExpr::new().plus(v, 1.0).plus(hi, -1.0),
                        Relation::Le,
                        bus.vmax_sq,
                    )?;
                }
            }
            let Some(site) = &bus.regulator else { continue };
            let inner = ops.vreg_sq[n].as_ref().expect("regulated bus has inner voltage")[t];
            let (lo, hi) = site.ratio_bounds();
            spec.add_constraint(
                format!("rlo_{}_{k}_{day}_{h}", bus.id),
                LinExpr::new().plus(v, 1.0).plus(inner, -lo),
                Relation::Ge,
                0.0,
            )?;
            spec.add_constraint(
                format!("rhi_{}_{k}_{day}_{h}", bus.id),
                LinExpr::new().plus(v, 1.0).plus(inner, -hi),
                Relation::Le,
                0.0,
            )?;
            if let (Some(x), Some(m)) = (inv.x_reg[n], ctx.big_m.regulator[n]) {
                let m = m * ctx.options.big_m_scale;
                spec.add_constraint(
                    format!("rmu_{}_{k}_{day}_{h}", bus.id),
                    LinExpr::new().plus(v, 1.0).plus(inner, -1.0).plus(x, -m),
                    Relation::Le,
                    0.0,
                )?;
                spec.add_constraint(
                    format!("rml_{}_{k}_{day}_{h}", bus.id),
                    LinExpr::new().plus(v, 1.0).plus(inner, -1.0).plus(x, m),
                    Relation::Ge,
                    0.0,
                )?;
            }
        }
    }
    Ok(())
}
