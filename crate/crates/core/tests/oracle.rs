mod support;

use nrcc_core::milp::solve;
use nrcc_core::plan::{
    build_deterministic, build_scenario_based, build_transmission_aware, AwareParams, BuildOptions,
};
use nrcc_core::{HighsBackend, SolveStatus, SolverSettings};
use support::{brute_force, random_feeder, random_scenarios};

fn exact() -> HighsBackend {
    HighsBackend::new(SolverSettings {
        mip_gap: 1e-10,
        ..SolverSettings::default()
    })
}

#[test]
fn cost_models_match_exhaustive_enumeration() {
    let backend = exact();
    for seed in [101, 202] {
        let model = random_feeder(seed);
        let set = random_scenarios(&model, seed, 2, 2);
        for (name, problem) in [
            ("deterministic", build_deterministic(&model, &set, 0, BuildOptions::default())),
            ("scenario-based", build_scenario_based(&model, &set, BuildOptions::default())),
        ] {
            let problem = problem.unwrap();
            let milp = solve(&problem.spec, &backend);
            let oracle = brute_force(&problem.spec, &backend);
            match oracle {
                Some(best) => {
                    assert_eq!(milp.status, SolveStatus::Optimal, "{name} seed {seed}");
                    let got = milp.objective.unwrap();
                    assert!((got - best).abs() <= 1e-6, "{name} seed {seed}: {got} vs {best}");
                }
                None => assert_eq!(milp.status, SolveStatus::Infeasible),
            }
        }
    }
}

#[test]
fn aware_model_matches_exhaustive_enumeration() {
    let backend = exact();
    let model = random_feeder(7);
    let set = random_scenarios(&model, 7, 2, 1);
    let params = AwareParams {
        budget: 12.0,
        weight: 0.5,
        expected_peaks_mw: (0.2, 0.0),
    };
    let problem = build_transmission_aware(&model, &set, params, BuildOptions::default()).unwrap();
    let milp = solve(&problem.spec, &backend);
    match brute_force(&problem.spec, &backend) {
        Some(best) => {
            let got = milp.objective.unwrap();
            assert!((got - best).abs() <= 1e-6, "{got} vs {best}");
        }
        None => assert_eq!(milp.status, SolveStatus::Infeasible),
    }
}

#[test]
fn larger_big_m_leaves_the_optimum_unchanged() {
    let backend = exact();
    for seed in [11, 12, 13] {
        let model = random_feeder(seed);
        let set = random_scenarios(&model, seed, 2, 1);
        let base = build_scenario_based(&model, &set, BuildOptions::default()).unwrap();
        let wide = build_scenario_based(
            &model,
            &set,
            BuildOptions {
                big_m_scale: 10.0,
                ..BuildOptions::default()
            },
        )
        .unwrap();
        let a = solve(&base.spec, &backend);
        let b = solve(&wide.spec, &backend);
        assert_eq!(a.status, b.status);
        if let (Some(x), Some(y)) = (a.objective, b.objective) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "seed {seed}: {x} vs {y}");
        }
    }
}
