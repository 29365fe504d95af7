mod support;

use nrcc_core::grid::{validate, ScenarioLabel, TimeStructure, Violation};
use nrcc_core::io::{read_labels, read_netloads, write_labels, write_netloads};
use nrcc_core::milp::solve;
use nrcc_core::nrcc::solve_plan;
use nrcc_core::plan::{
    build_scenario_based, build_transmission_aware, AwareParams, BuildOptions,
};
use nrcc_core::{hyperplanes, Bus, Corridor, GridModel, HighsBackend, LineOption, ScenarioSet, SolverSettings};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{random_feeder, random_scenarios};

fn backend() -> HighsBackend {
    HighsBackend::new(SolverSettings {
        mip_gap: 1e-10,
        ..SolverSettings::default()
    })
}

#[test]
fn polygon_points_lie_inside_the_disk() {
    let planes = hyperplanes(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut accepted = 0;
    while accepted < 10_000 {
        let cap = rng.gen_range(0.1..10.0);
        let p = rng.gen_range(-1.2..1.2) * cap;
        let q = rng.gen_range(-1.2..1.2) * cap;
        if planes.iter().all(|&(a, b)| a * p + b * q <= cap) {
            accepted += 1;
            assert!(p * p + q * q <= cap * cap * (1.0 + 1e-12), "({p}, {q}) outside {cap}");
        }
    }
}

#[test]
fn polygon_vertices_touch_the_circle() {
    // Adjacent hyperplanes meet on the circle of radius C.
    let planes = hyperplanes(12).unwrap();
    for cap in [1.0, 3.7] {
        let mut max_norm: f64 = 0.0;
        for j in 0..12 {
            let (a1, b1) = planes[j];
            let (a2, b2) = planes[(j + 1) % 12];
            let det = a1 * b2 - a2 * b1;
            let p = cap * (b2 - b1) / det;
            let q = cap * (a1 - a2) / det;
            max_norm = max_norm.max((p * p + q * q).sqrt());
        }
        assert!((max_norm - cap).abs() <= 1e-12 * cap);
    }
}

fn tree(parents: &[usize]) -> GridModel {
    let n = parents.len() + 1;
    let mut buses: Vec<Bus> = (0..n).map(|i| Bus::new(format!("b{i}"), 0.95, 1.05)).collect();
    buses[0].is_poi = true;
    let corridors = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| Corridor {
            from_bus: format!("b{p}"),
            to_bus: format!("b{}", i + 1),
            options: vec![LineOption {
                id: format!("l{}", i + 1),
                cost: 0.0,
                resistance: 0.01,
                reactance: 0.01,
                capacity: 1.0,
                big_m: None,
                baseline: true,
            }],
        })
        .collect();
    GridModel {
        name: "tree".into(),
        buses,
        corridors,
        bess_candidates: vec![],
        hours_per_day: 24,
        s_base_mva: 1.0,
        hyperplane_count: 12,
        v_ref_sq: 1.0,
    }
}

fn parents_strategy() -> impl Strategy<Value = Vec<usize>> {
    (1usize..20).prop_flat_map(|n| {
        (0..n)
            .map(|i| (0..=i).boxed())
            .collect::<Vec<_>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_trees_are_radial(parents in parents_strategy()) {
        let m = tree(&parents);
        prop_assert!(validate(&m).is_valid());
        let topo = m.topology().unwrap();
        prop_assert_eq!(topo.order.len(), m.buses.len());
        prop_assert_eq!(topo.order[0], topo.root);
    }

    #[test]
    fn an_extra_corridor_breaks_radiality(parents in parents_strategy(), pick in any::<prop::sample::Index>()) {
        let mut m = tree(&parents);
        let n = m.buses.len();
        let a = pick.index(n);
        let b = (a + 1) % n;
        m.corridors.push(Corridor {
            from_bus: format!("b{a}"),
            to_bus: format!("b{b}"),
            options: m.corridors[0].options.iter().map(|o| LineOption { id: "extra".into(), ..o.clone() }).collect(),
        });
        let report = validate(&m);
        prop_assert!(report.violations.iter().any(|v| matches!(v, Violation::NonRadial(_))));
    }

    #[test]
    fn netload_files_round_trip(
        values in prop::collection::vec(-5.0f64..5.0, 2 * 3 * 2 * 24),
        growth in prop::option::of(0.0f64..0.1),
    ) {
        let m = tree(&[0, 1]);
        let mut set = ScenarioSet::zeros(
            vec!["a".into(), "b".into()],
            m.buses.iter().map(|b| b.id.clone()).collect(),
            TimeStructure::new(24, vec![40, 12]),
        );
        set.netload_p.copy_from_slice(&values);
        set.netload_q = values.iter().map(|v| v * 0.3).collect();
        set.labels[1] = ScenarioLabel { load_growth: growth, adoption: Some("avg".into()) };
        let mut buf = Vec::new();
        write_netloads(&set, &mut buf).unwrap();
        let mut lab = Vec::new();
        write_labels(&set, &mut lab).unwrap();
        let labels = read_labels(lab.as_slice()).unwrap();
        let back = read_netloads(&m, buf.as_slice(), Some(&labels)).unwrap();
        prop_assert_eq!(back, set);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unbuilt_options_never_carry_flow(seed in 0u64..1000) {
        let model = random_feeder(seed);
        let set = random_scenarios(&model, seed, 2, 1);
        let problem = build_scenario_based(&model, &set, BuildOptions::default()).unwrap();
        let sol = solve(&problem.spec, &backend());
        prop_assume!(sol.status.has_solution());
        for ops in &problem.ops {
            for (o, &x) in problem.inv.x_line.iter().enumerate() {
                if sol.value(x) < 0.5 {
                    for t in 0..ops.rho_p.len() {
                        prop_assert!(sol.value(ops.flow_p[o][t]).abs() <= 1e-9);
                        prop_assert!(sol.value(ops.flow_q[o][t]).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn slacks_are_exact_positive_parts(seed in 0u64..1000, w in prop::sample::select(vec![0.25, 0.5, 0.75])) {
        let model = random_feeder(seed);
        let set = random_scenarios(&model, seed, 2, 1);
        let params = AwareParams { budget: 30.0, weight: w, expected_peaks_mw: (0.25, 0.02) };
        let p = build_transmission_aware(&model, &set, params, BuildOptions::default()).unwrap();
        let sol = solve(&p.spec, &backend());
        prop_assume!(sol.status.has_solution());
        let pk = p.peaks.unwrap();
        let (ld, lr) = (sol.value(pk.lambda_d), sol.value(pk.lambda_r));
        prop_assert!((sol.value(pk.slack_d) - (ld - 0.25).max(0.0)).abs() <= 1e-8);
        prop_assert!((sol.value(pk.slack_r) - (lr - 0.02).max(0.0)).abs() <= 1e-8);
    }

    #[test]
    fn larger_budgets_never_worsen_the_excess(seed in 0u64..1000) {
        let model = random_feeder(seed);
        let set = random_scenarios(&model, seed, 2, 1);
        let Ok((plan, _)) = solve_plan(
            &build_scenario_based(&model, &set, BuildOptions::default()).unwrap(),
            &model,
            &backend(),
            "minimum cost",
        ) else {
            return Ok(());
        };
        let mut last = f64::INFINITY;
        for extra in [0.0, 2.0, 5.0, 20.0] {
            let params = AwareParams {
                budget: plan.cost.total + extra + 1e-9,
                weight: 0.5,
                expected_peaks_mw: (0.1, 0.0),
            };
            let p = build_transmission_aware(&model, &set, params, BuildOptions::default()).unwrap();
            let obj = solve(&p.spec, &backend()).objective.unwrap();
            prop_assert!(obj <= last + 1e-7, "budget +{extra}: {obj} after {last}");
            last = obj;
        }
    }
}
