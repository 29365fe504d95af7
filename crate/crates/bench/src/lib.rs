//! Shared fixtures for the benchmarks.

use nrcc_core::acpf::{OperatingPoint, RadialNetwork};
use nrcc_core::io::{bundled_feeder, bundled_profile, FeederData};
use nrcc_core::pipeline::{prepare, PreparedScenarios, ScenarioParams};
use nrcc_core::scenario::AgentState;
use num_complex::Complex64;

/// Bundled feeder with a small adoption ensemble.
pub fn bundled(ensemble_size: usize) -> (FeederData, PreparedScenarios) {
    let data = bundled_feeder();
    let params = ScenarioParams {
        ensemble_size,
        ..ScenarioParams::default()
    };
    let prep = prepare(&data, &bundled_profile(), &params).expect("bundled data prepares");
    (data, prep)
}

/// A path feeder of `n` buses, each drawing a modest load.
pub fn path_feeder(n: usize) -> (RadialNetwork, OperatingPoint) {
    let net = RadialNetwork::path(n, Complex64::new(0.002, 0.004), 10.0);
    let mut injection = vec![Complex64::new(-0.02, -0.008); n];
    injection[0] = Complex64::new(0.0, 0.0);
    (net, OperatingPoint { injection, tap: vec![1.0; n] })
}

/// `n` eligible agents of 5 kW each, none adopted.
pub fn agents(n: usize) -> Vec<AgentState> {
    (0..n)
        .map(|i| AgentState {
            eligible: true,
            ..AgentState::new(format!("b{i}"), 5.0)
        })
        .collect()
}
