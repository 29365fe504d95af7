use super::*;
use crate::grid::tests::{option, path_feeder};
use crate::grid::{BessCandidate, Bus, Corridor, RegulatorCandidate, RegulatorSite, TimeStructure};
use crate::milp::{solve, HighsBackend, SolveStatus, SolverSettings};
use approx::assert_abs_diff_eq;

fn backend() -> HighsBackend {
    HighsBackend::new(SolverSettings {
        mip_gap: 1e-9,
        ..SolverSettings::default()
    })
}

/// Constant loads (MW, MVAr) per bus over `days` days.
fn flat_set(model: &GridModel, loads: &[(f64, f64)], days: usize) -> ScenarioSet {
    let mut set = ScenarioSet::zeros(
        vec!["s0".into()],
        model.buses.iter().map(|b| b.id.clone()).collect(),
        TimeStructure::new(model.hours_per_day, (1..=days as u32).collect()),
    );
    for (n, &(p, q)) in loads.iter().enumerate() {
        for d in 0..days {
            for h in 0..model.hours_per_day {
                set.set(0, n, d, h, p, q);
            }
        }
    }
    set
}

fn two_bus(r: f64, x: f64, cap: f64) -> GridModel {
    let mut m = path_feeder(2);
    m.corridors[0].options = vec![option("l1", 0.0, r, x, cap, true)];
    m
}

fn fixed(model: &GridModel, set: &ScenarioSet) -> (PlanProblem, Solution) {
    let plan = InvestmentPlan::baseline(model).unwrap();
    let p = build_fixed_plan(model, set, &plan, 0.5, false, BuildOptions::default()).unwrap();
    let sol = solve(&p.spec, &backend());
    (p, sol)
}

#[test]
fn path_flow_reaches_the_substation() {
    let m = path_feeder(4);
    let set = flat_set(&m, &[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.5, 0.1)], 1);
    let (p, sol) = fixed(&m, &set);
    assert_eq!(sol.status, SolveStatus::Optimal);
    for &r in &p.ops[0].rho_p {
        assert_abs_diff_eq!(sol.value(r), 0.5, epsilon = 1e-9);
    }
}

#[test]
fn zero_load_is_the_null_operating_point() {
    let m = path_feeder(3);
    let set = flat_set(&m, &[(0.0, 0.0); 3], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let sol = solve(&problem.spec, &backend());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_abs_diff_eq!(sol.objective.unwrap(), 0.0, epsilon = 1e-12);
}

#[test]
fn y_feeder_sums_branch_loads() {
    let mut m = path_feeder(3);
    m.corridors[1].from_bus = "b0".into();
    let set = flat_set(&m, &[(0.0, 0.0), (0.1, 0.0), (0.2, 0.0)], 1);
    let (p, sol) = fixed(&m, &set);
    for &r in &p.ops[0].rho_p {
        assert_abs_diff_eq!(sol.value(r), 0.3, epsilon = 1e-9);
    }
}

#[test]
fn polygon_limit_on_a_single_line() {
    let m = two_bus(0.0, 0.0, 1.0);
    let status = |p: f64, q: f64| {
        let set = flat_set(&m, &[(0.0, 0.0), (p, q)], 1);
        fixed(&m, &set).1.status
    };
    assert_eq!(status(0.99, 0.0), SolveStatus::Infeasible);
    assert_eq!(status(0.96, 0.0), SolveStatus::Optimal);
    assert_eq!(status(0.0, 0.5), SolveStatus::Optimal);
    assert_eq!(status(-0.96, 0.0), SolveStatus::Optimal);
}

#[test]
fn unbuilt_options_carry_no_flow() {
    let mut m = path_feeder(3);
    m.corridors[1]
        .options
        .push(option("l2u", 10.0, 0.005, 0.005, 2.0, false));
    let set = flat_set(&m, &[(0.0, 0.0), (0.0, 0.0), (0.4, 0.1)], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let sol = solve(&problem.spec, &backend());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let plan = extract_plan(&sol, &problem, &m).unwrap();
    assert_eq!(plan.lines[1].option_id, "l2");
    // Option index 2 in flattened order is the upgrade.
    for t in 0..24 {
        assert_eq!(sol.value(problem.ops[0].flow_p[2][t]), 0.0);
        assert_eq!(sol.value(problem.ops[0].flow_q[2][t]), 0.0);
    }
}

#[test]
fn lossless_and_resistive_voltage_drop() {
    let m = two_bus(0.0, 0.0, 2.0);
    let set = flat_set(&m, &[(0.0, 0.0), (1.0, 0.3)], 1);
    let (p, sol) = fixed(&m, &set);
    let d = p.dispatch(&m, &sol, 0);
    assert_abs_diff_eq!(d.v_sq[1][5], 1.0, epsilon = 1e-12);

    let mut m = two_bus(0.01, 0.0, 2.0);
    m.buses[1] = Bus::new("b1", 0.9, 1.05);
    let set = flat_set(&m, &[(0.0, 0.0), (1.0, 0.0)], 1);
    let (p, sol) = fixed(&m, &set);
    let d = p.dispatch(&m, &sol, 0);
    assert_abs_diff_eq!(d.v_sq[1][0], 0.98, epsilon = 1e-9);
}

#[test]
fn voltage_limit_can_make_operation_infeasible() {
    let m = two_bus(0.06, 0.0, 2.0);
    // Drop 2 * 0.06 * 1.0 = 0.12 leaves v^2 = 0.88 < 0.95^2.
    let set = flat_set(&m, &[(0.0, 0.0), (1.0, 0.0)], 1);
    assert_eq!(fixed(&m, &set).1.status, SolveStatus::Infeasible);
}

#[test]
fn unbuilt_regulator_keeps_inner_voltage_equal() {
    let mut m = two_bus(0.01, 0.01, 2.0);
    m.buses[1].regulator = Some(RegulatorSite::Candidate(RegulatorCandidate {
        cost: 5.0,
        ratio_min_sq: 0.81,
        ratio_max_sq: 1.21,
        big_m: None,
    }));
    let set = flat_set(&m, &[(0.0, 0.0), (0.5, 0.2)], 1);
    let (p, sol) = fixed(&m, &set);
    assert_eq!(sol.status, SolveStatus::Optimal);
    let d = p.dispatch(&m, &sol, 0);
    let inner = d.vreg_sq[1].as_ref().unwrap();
    for t in 0..24 {
        assert_abs_diff_eq!(inner[t], d.v_sq[1][t], epsilon = 1e-9);
    }
}

#[test]
fn regulator_is_bought_when_voltage_binds() {
    let mut m = two_bus(0.06, 0.0, 2.0);
    m.buses[1].regulator = Some(RegulatorSite::Candidate(RegulatorCandidate {
        cost: 7.0,
        ratio_min_sq: 0.81,
        ratio_max_sq: 1.21,
        big_m: None,
    }));
    let set = flat_set(&m, &[(0.0, 0.0), (1.0, 0.0)], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let sol = solve(&problem.spec, &backend());
    let plan = extract_plan(&sol, &problem, &m).unwrap();
    assert_eq!(plan.regulators, vec!["b1".to_string()]);
    assert_abs_diff_eq!(plan.cost.total, 7.0, epsilon = 1e-9);
}

fn with_bess(eff: f64) -> GridModel {
    let mut m = two_bus(0.0, 0.0, 5.0);
    m.bess_candidates.push(BessCandidate {
        id: "s1".into(),
        bus: "b1".into(),
        unit_cost: 1.0,
        eff_charge: eff,
        eff_discharge: eff,
        duration_ratio: 4.0,
        max_capacity: 1.0,
    });
    m
}

fn bess_plan(m: &GridModel, mw: f64) -> InvestmentPlan {
    let mut plan = InvestmentPlan::baseline(m).unwrap();
    plan.bess.push(BessChoice {
        id: "s1".into(),
        bus: "b1".into(),
        mw,
        cost: mw,
    });
    plan
}

#[test]
fn lossless_storage_is_energy_neutral_per_day() {
    let m = with_bess(1.0);
    let mut set = flat_set(&m, &[(0.0, 0.0), (0.0, 0.0)], 2);
    for d in 0..2 {
        for h in 0..24 {
            let p = if (17..21).contains(&h) { 2.0 } else { 0.5 };
            set.set(0, 1, d, h, p + 0.1 * d as f64, 0.0);
        }
    }
    let plan = bess_plan(&m, 1.0);
    let p = build_fixed_plan(&m, &set, &plan, 1.0, false, BuildOptions::default()).unwrap();
    let sol = solve(&p.spec, &backend());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let (peak, _) = p.observed_peaks_mw(&sol);
    assert!(peak < 2.1 - 0.1, "storage should shave the evening peak, got {peak}");
    let o = &p.ops[0];
    for d in 0..2 {
        let sum = |v: &Vec<VarRef>| (0..24).map(|h| sol.value(v[d * 24 + h])).sum::<f64>();
        assert_abs_diff_eq!(sum(&o.bess_dis[0]), sum(&o.bess_chg[0]), epsilon = 1e-7);
    }
}

#[test]
fn storage_energy_limits_sustained_discharge() {
    let m = with_bess(1.0);
    let set = flat_set(&m, &[(0.0, 0.0), (0.0, 0.0)], 1);
    let plan = bess_plan(&m, 1.0);
    let status = |hours: usize| {
        let mut p = build_fixed_plan(&m, &set, &plan, 0.5, false, BuildOptions::default()).unwrap();
        for h in 10..10 + hours {
            // 0.9 MW stays inside the inscribed polygon of a 1 MW rating.
            p.spec.fix(p.ops[0].bess_dis[0][h], 0.9);
            p.spec.fix(p.ops[0].bess_chg[0][h], 0.0);
        }
        solve(&p.spec, &backend()).status
    };
    assert_eq!(status(4), SolveStatus::Optimal);
    assert_eq!(status(5), SolveStatus::Infeasible);
}

#[test]
fn unbuilt_storage_stays_idle() {
    let m = with_bess(0.9);
    let set = flat_set(&m, &[(0.0, 0.0), (0.7, 0.0)], 1);
    let plan = InvestmentPlan::baseline(&m).unwrap();
    let p = build_fixed_plan(&m, &set, &plan, 1.0, false, BuildOptions::default()).unwrap();
    let sol = solve(&p.spec, &backend());
    let o = &p.ops[0];
    for t in 0..24 {
        for v in [o.bess_dis[0][t], o.bess_chg[0][t], o.bess_q[0][t], o.bess_e[0][t]] {
            assert_abs_diff_eq!(sol.value(v), 0.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn big_m_formula() {
    let mut m = path_feeder(2);
    m.corridors[0].options = vec![option("l1", 0.0, 0.01, 0.01, 1.0, true)];
    let big = compute_big_m(&m).unwrap();
    let expected = (1.1025 - 0.9025) + 0.04 * 2f64.sqrt();
    assert_abs_diff_eq!(big.line[0], expected, epsilon = 1e-12);
    assert_abs_diff_eq!(big.line[0], 0.2566, epsilon = 1e-4);

    m.corridors[0].options = vec![option("l1", 0.0, 0.0, 0.0, 1.0, true)];
    assert_abs_diff_eq!(compute_big_m(&m).unwrap().line[0], 0.2, epsilon = 1e-12);

    m.corridors[0].options[0].big_m = Some(3.0);
    assert_eq!(compute_big_m(&m).unwrap().line[0], 3.0);

    m.corridors[0].options[0].big_m = Some(f64::INFINITY);
    assert!(compute_big_m(&m).is_err());
}

#[test]
fn big_m_slack_over_the_voltage_box_when_unbuilt() {
    // With zero flow, |v_to - v_fr| never exceeds the voltage span, which
    // the constant covers for every option.
    let m = path_feeder(3);
    let big = compute_big_m(&m).unwrap();
    let span = m.max_vmax_sq() - m.min_vmin_sq();
    assert!(big.line.iter().all(|&x| x >= span));
}

#[test]
fn regulator_big_m_bounds_the_inner_voltage_gap() {
    let mut m = path_feeder(2);
    m.buses[1].regulator = Some(RegulatorSite::Candidate(RegulatorCandidate {
        cost: 1.0,
        ratio_min_sq: 0.81,
        ratio_max_sq: 1.21,
        big_m: None,
    }));
    let big = compute_big_m(&m).unwrap();
    let mr = big.regulator[1].unwrap();
    assert_abs_diff_eq!(mr, 1.1025 / 0.81, epsilon = 1e-12);
    // Largest |v - v_inner| inside the ratio range is vmax (1 - 1/0.81) in magnitude.
    assert!(mr >= (1.1025f64 * (1.0 / 0.81 - 1.0)).abs());
}

#[test]
fn baseline_suffices_costs_nothing() {
    let m = path_feeder(4);
    let set = flat_set(&m, &[(0.0, 0.0), (0.1, 0.0), (0.1, 0.0), (0.1, 0.0)], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let (plan, _) = crate::nrcc::solve_plan(&problem, &m, &backend(), "test").unwrap();
    assert_eq!(plan.cost.total, 0.0);
    assert!(plan.upgrades(&m).next().is_none());
}

#[test]
fn overloaded_leaf_buys_the_upgrade() {
    let mut m = path_feeder(3);
    m.corridors[1].options = vec![
        option("l2", 0.0, 0.01, 0.01, 0.3, true),
        option("l2u", 5.0, 0.01, 0.01, 1.0, false),
    ];
    let set = flat_set(&m, &[(0.0, 0.0), (0.0, 0.0), (0.5, 0.0)], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let (plan, sol) = crate::nrcc::solve_plan(&problem, &m, &backend(), "test").unwrap();
    assert_abs_diff_eq!(sol.objective.unwrap(), 5.0, epsilon = 1e-9);
    assert_eq!(plan.lines[1].option_id, "l2u");
}

fn two_scenarios(m: &GridModel, loads: [f64; 2]) -> ScenarioSet {
    let mut set = ScenarioSet::zeros(
        vec!["lo".into(), "hi".into()],
        m.buses.iter().map(|b| b.id.clone()).collect(),
        TimeStructure::new(24, vec![1]),
    );
    let leaf = m.buses.len() - 1;
    for (k, &p) in loads.iter().enumerate() {
        for h in 0..24 {
            set.set(k, leaf, 0, h, p, 0.1 * p);
        }
    }
    set
}

#[test]
fn single_scenario_reduction_matches_deterministic() {
    let mut m = path_feeder(3);
    m.corridors[1].options = vec![
        option("l2", 0.0, 0.01, 0.01, 0.3, true),
        option("l2u", 5.0, 0.01, 0.01, 1.0, false),
    ];
    let set = two_scenarios(&m, [0.5, 0.7]);
    let det = build_deterministic(&m, &set, 1, BuildOptions::default()).unwrap();
    let sb = build_scenario_based(&m, &set.subset(&[1]), BuildOptions::default()).unwrap();
    let a = solve(&det.spec, &backend());
    let b = solve(&sb.spec, &backend());
    assert_abs_diff_eq!(a.objective.unwrap(), b.objective.unwrap(), epsilon = 1e-9);
}

#[test]
fn more_scenarios_never_cost_less() {
    let mut m = path_feeder(3);
    m.corridors[1].options = vec![
        option("l2", 0.0, 0.01, 0.01, 0.3, true),
        option("l2m", 3.0, 0.01, 0.01, 0.6, false),
        option("l2h", 5.0, 0.01, 0.01, 1.0, false),
    ];
    let set = two_scenarios(&m, [0.5, 0.8]);
    let det = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let sb = build_scenario_based(&m, &set, BuildOptions::default()).unwrap();
    let a = solve(&det.spec, &backend()).objective.unwrap();
    let b = solve(&sb.spec, &backend()).objective.unwrap();
    assert_abs_diff_eq!(a, 3.0, epsilon = 1e-9);
    assert_abs_diff_eq!(b, 5.0, epsilon = 1e-9);
}

#[test]
fn extraction_reports_storage_in_megawatts() {
    let mut m = with_bess(0.95);
    m.s_base_mva = 10.0;
    m.bess_candidates[0].unit_cost = 1000.0;
    let set = flat_set(&m, &[(0.0, 0.0), (1.0, 0.0)], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let mut values = vec![0.0; problem.spec.num_vars()];
    values[problem.inv.x_line[0].index()] = 1.0;
    values[problem.inv.x_bess[0].index()] = 0.044;
    let sol = Solution {
        status: SolveStatus::Optimal,
        objective: Some(440.0),
        values,
        mip_gap: Some(0.0),
        message: String::new(),
    };
    let plan = extract_plan(&sol, &problem, &m).unwrap();
    assert_abs_diff_eq!(plan.bess[0].mw, 0.44, epsilon = 1e-12);
    assert_abs_diff_eq!(plan.total_bess_mw() * 1000.0, 440.0, epsilon = 1e-9);
    assert_abs_diff_eq!(plan.cost.bess, 440.0, epsilon = 1e-9);

    let wrong = Solution {
        objective: Some(450.0),
        ..sol.clone()
    };
    assert!(matches!(
        extract_plan(&wrong, &problem, &m),
        Err(Error::Extraction(_))
    ));
}

#[test]
fn extraction_rejects_two_options_on_a_corridor() {
    let mut m = path_feeder(2);
    m.corridors[0]
        .options
        .push(option("l1u", 2.0, 0.01, 0.01, 2.0, false));
    let set = flat_set(&m, &[(0.0, 0.0), (0.1, 0.0)], 1);
    let problem = build_deterministic(&m, &set, 0, BuildOptions::default()).unwrap();
    let mut values = vec![0.0; problem.spec.num_vars()];
    values[problem.inv.x_line[0].index()] = 0.6;
    values[problem.inv.x_line[1].index()] = 0.6;
    let sol = Solution {
        status: SolveStatus::FeasibleGap,
        objective: Some(2.0),
        values,
        mip_gap: Some(0.1),
        message: String::new(),
    };
    assert!(extract_plan(&sol, &problem, &m).is_err());
}

#[test]
fn all_baseline_plan_costs_nothing() {
    let m = path_feeder(4);
    let plan = InvestmentPlan::baseline(&m).unwrap();
    assert_eq!(plan_cost(&m, &plan).unwrap().total, 0.0);
}

#[test]
fn unlimited_budget_with_own_peaks_has_zero_excess() {
    let m = path_feeder(3);
    let set = flat_set(&m, &[(0.0, 0.0), (0.2, 0.0), (0.1, 0.0)], 1);
    let params = AwareParams {
        budget: f64::INFINITY,
        weight: 0.5,
        expected_peaks_mw: (0.3, 0.0),
    };
    let p = build_transmission_aware(&m, &set, params, BuildOptions::default()).unwrap();
    let sol = solve(&p.spec, &backend());
    assert_abs_diff_eq!(sol.objective.unwrap(), 0.0, epsilon = 1e-9);
}

#[test]
fn aware_rejects_bad_inputs() {
    let m = path_feeder(2);
    let set = flat_set(&m, &[(0.0, 0.0), (0.2, 0.0)], 1);
    let mk = |weight, peaks, budget| {
        build_transmission_aware(
            &m,
            &set,
            AwareParams {
                budget,
                weight,
                expected_peaks_mw: peaks,
            },
            BuildOptions::default(),
        )
    };
    assert!(mk(1.5, (0.0, 0.0), 1.0).is_err());
    assert!(mk(0.5, (-1.0, 0.0), 1.0).is_err());
    assert!(mk(0.5, (0.0, 0.0), f64::NAN).is_err());
    assert!(mk(0.5, (0.0, 0.0), 1.0).is_ok());
}

#[test]
fn direct_weight_one_ignores_reverse_excess() {
    // Storage can lower the evening peak only by charging at noon, when the
    // PV export already defines the reverse peak; with W = 1 the reverse
    // side is free to grow.
    let m = with_bess(1.0);
    let mut set = flat_set(&m, &[(0.0, 0.0), (0.0, 0.0)], 1);
    for h in 0..24 {
        let p = match h {
            10..=14 => -0.6,
            18..=20 => 1.2,
            _ => 0.5,
        };
        set.set(0, 1, 0, h, p, 0.0);
    }
    let solve_w = |w: f64| {
        let params = AwareParams {
            budget: 1.0,
            weight: w,
            expected_peaks_mw: (0.0, 0.0),
        };
        let mut p = build_transmission_aware(&m, &set, params, BuildOptions::default()).unwrap();
        let first = solve(&p.spec, &backend());
        let excess = first.objective.unwrap();
        restrict_to_peak_minimization(&mut p, w, excess, 1e-9).unwrap();
        let sol = solve(&p.spec, &backend());
        p.lambda_mw(&sol).unwrap()
    };
    let (d1, r1) = solve_w(1.0);
    let (d9, r9) = solve_w(0.999);
    assert!(d1 <= d9 + 1e-7, "direct peak must be minimized first: {d1} vs {d9}");
    assert!(d1 < 1.2 - 1e-3);
    assert!(r1 >= r9 - 1e-7);
}

#[test]
fn fixed_plan_checks_line_count_and_regulators() {
    let m = path_feeder(3);
    let set = flat_set(&m, &[(0.0, 0.0), (0.1, 0.0), (0.1, 0.0)], 1);
    let mut plan = InvestmentPlan::baseline(&m).unwrap();
    plan.lines.pop();
    assert!(build_fixed_plan(&m, &set, &plan, 0.5, false, BuildOptions::default()).is_err());
    let mut plan = InvestmentPlan::baseline(&m).unwrap();
    plan.regulators.push("b2".into());
    assert!(build_fixed_plan(&m, &set, &plan, 0.5, false, BuildOptions::default()).is_err());
}

#[test]
fn elastic_evaluation_prices_overloads() {
    let m = two_bus(0.0, 0.0, 0.5);
    let set = flat_set(&m, &[(0.0, 0.0), (0.6, 0.0)], 1);
    let plan = InvestmentPlan::baseline(&m).unwrap();
    let strict = build_fixed_plan(&m, &set, &plan, 0.5, false, BuildOptions::default()).unwrap();
    assert_eq!(solve(&strict.spec, &backend()).status, SolveStatus::Infeasible);
    let elastic = build_fixed_plan(&m, &set, &plan, 0.5, true, BuildOptions::default()).unwrap();
    let sol = solve(&elastic.spec, &backend());
    assert_eq!(sol.status, SolveStatus::Optimal);
    // Needed polygon scale is 0.6 / (0.5 cos 15°), one unit of slack per hour
    // above 1.
    let need = 0.6 / (0.5 * (PI_12).cos()) - 1.0;
    let ov = sol.value_by_name(&elastic.spec, "ov_l1_0_1_7").unwrap();
    assert_abs_diff_eq!(ov, need, epsilon = 1e-7);
}

const PI_12: f64 = std::f64::consts::PI / 12.0;

#[test]
fn corridor_with_two_options_needs_a_corridor() {
    let mut m = path_feeder(2);
    m.corridors.push(Corridor {
        from_bus: "b0".into(),
        to_bus: "b1".into(),
        options: vec![option("dup", 0.0, 0.01, 0.01, 1.0, true)],
    });
    let set = flat_set(&path_feeder(2), &[(0.0, 0.0), (0.1, 0.0)], 1);
    assert!(build_deterministic(&m, &set, 0, BuildOptions::default()).is_err());
}
