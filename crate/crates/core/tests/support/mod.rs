//! Shared test fixtures: random small feeders and an exhaustive oracle.
#![allow(dead_code)]

use nrcc_core::grid::{ScenarioLabel, TimeStructure};
use nrcc_core::milp::{solve, ProblemSpec, VarKind};
use nrcc_core::{
    BessCandidate, Bus, Corridor, GridModel, LineOption, RegulatorCandidate, RegulatorSite,
    ScenarioSet, SolveStatus, SolverBackend,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const MAX_BINARIES: usize = 12;

fn line(id: String, cost: f64, r: f64, x: f64, cap: f64, baseline: bool) -> LineOption {
    LineOption {
        id,
        cost,
        resistance: r,
        reactance: x,
        capacity: cap,
        big_m: None,
        baseline,
    }
}

/// A random radial feeder with at most [`MAX_BINARIES`] binary decisions,
/// one BESS candidate and possibly one candidate regulator. Capacities are
/// drawn so that some upgrades are usually needed.
pub fn random_feeder(seed: u64) -> GridModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=6);
    let mut buses: Vec<Bus> = (0..n).map(|i| Bus::new(format!("n{i}"), 0.95, 1.05)).collect();
    buses[0].is_poi = true;
    let with_reg = rng.gen_bool(0.4);
    let mut budget = MAX_BINARIES - (n - 1) - usize::from(with_reg);
    let parents: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    // Buses fed through each corridor, itself included.
    let mut fed = vec![1usize; n];
    for i in (1..n).rev() {
        fed[parents[i - 1]] += fed[i];
    }
    let mut corridors = Vec::new();
    for i in 1..n {
        let parent = parents[i - 1];
        let r = rng.gen_range(0.005..0.02);
        let x = rng.gen_range(0.005..0.03);
        // Around the expected downstream peak of the random scenarios.
        let cap = 0.09 * fed[i] as f64 * rng.gen_range(0.8..1.5);
        let mut options = vec![line(format!("c{i}"), 0.0, r, x, cap, true)];
        let extra = rng.gen_range(0..=2usize).min(budget);
        budget -= extra;
        for u in 0..extra {
            let scale = 1.5 + u as f64;
            options.push(line(
                format!("c{i}u{u}"),
                f64::from(rng.gen_range(2..10u32)) * scale,
                r / scale,
                x / scale,
                cap * scale,
                false,
            ));
        }
        corridors.push(Corridor {
            from_bus: format!("n{parent}"),
            to_bus: format!("n{i}"),
            options,
        });
    }
    if with_reg {
        let at = rng.gen_range(1..n);
        buses[at].regulator = Some(RegulatorSite::Candidate(RegulatorCandidate {
            cost: f64::from(rng.gen_range(1..6u32)),
            ratio_min_sq: 0.81,
            ratio_max_sq: 1.21,
            big_m: None,
        }));
    }
    let bess_at = rng.gen_range(1..n);
    let bess = BessCandidate {
        id: "st".into(),
        bus: format!("n{bess_at}"),
        unit_cost: rng.gen_range(5.0..20.0),
        eff_charge: 0.95,
        eff_discharge: 0.95,
        duration_ratio: 4.0,
        max_capacity: 0.2,
    };
    GridModel {
        name: format!("random{seed}"),
        buses,
        corridors,
        bess_candidates: vec![bess],
        hours_per_day: 24,
        s_base_mva: 1.0,
        hyperplane_count: 12,
        v_ref_sq: 1.0,
    }
}

/// Random netload with an evening peak and midday PV, MW on a 1 MVA base.
pub fn random_scenarios(model: &GridModel, seed: u64, scenarios: usize, days: usize) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut set = ScenarioSet::zeros(
        (0..scenarios).map(|k| format!("k{k}")).collect(),
        model.buses.iter().map(|b| b.id.clone()).collect(),
        TimeStructure::new(24, (1..=days as u32).collect()),
    );
    for k in 0..scenarios {
        let growth = 1.0 + 0.25 * k as f64;
        for n in 1..model.buses.len() {
            let peak = rng.gen_range(0.03..0.12) * growth;
            let pv = rng.gen_range(0.0..0.1);
            for d in 0..days {
                let sun = rng.gen_range(0.3..1.0);
                for h in 0..24 {
                    let evening = if (17..22).contains(&h) { 1.0 } else { 0.55 };
                    let solar = if (7..18).contains(&h) {
                        (std::f64::consts::PI * (h as f64 - 7.0) / 11.0).sin()
                    } else {
                        0.0
                    };
                    let p = peak * evening - pv * sun * solar;
                    set.set(k, n, d, h, p, 0.3 * peak * evening);
                }
            }
        }
        set.labels[k] = ScenarioLabel {
            load_growth: Some(growth - 1.0),
            adoption: None,
        };
    }
    set
}

/// Minimum objective over every binary assignment, each solved as an LP.
/// Assignments violating a row made only of binaries (the corridor-choice
/// rows) are skipped without a solve, as no continuous value can repair
/// them. Returns `None` when no assignment is feasible.
pub fn brute_force(spec: &ProblemSpec, backend: &dyn SolverBackend) -> Option<f64> {
    let bins = spec.binaries();
    assert!(bins.len() <= MAX_BINARIES, "{} binaries", bins.len());
    let is_bin: Vec<bool> = spec.vars.iter().map(|v| v.kind == VarKind::Binary).collect();
    let pure: Vec<_> = spec
        .constraints
        .iter()
        .filter(|c| c.expr.terms.iter().all(|(v, _)| is_bin[v.index()]))
        .collect();
    let relaxed = spec.relaxed();
    (0u32..1 << bins.len())
        .into_par_iter()
        .filter_map(|mask| {
            let mut values = vec![0.0; spec.vars.len()];
            for (i, v) in bins.iter().enumerate() {
                values[v.index()] = f64::from((mask >> i) & 1);
            }
            let ok = pure.iter().all(|c| c.violation(&values) <= 1e-9);
            if !ok {
                return None;
            }
            let mut lp = relaxed.clone();
            for v in &bins {
                lp.fix(*v, values[v.index()]);
            }
            let sol = solve(&lp, backend);
            match sol.status {
                SolveStatus::Optimal => sol.objective,
                SolveStatus::Infeasible => None,
                s => panic!("oracle LP ended with {s}: {}", sol.message),
            }
        })
        .reduce_with(f64::min)
}
