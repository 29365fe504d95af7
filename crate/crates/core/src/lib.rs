//! Distribution feeder planning under long-term DER growth uncertainty.
//!
//! The crate turns an agent-based rooftop-PV adoption ensemble into netload
//! scenarios, assembles investment-planning MILPs over a LinDistFlow feeder
//! model, sweeps the investment budget to build Netload Range Cost Curves
//! (NRCCs) and checks the resulting plans with an AC backward/forward sweep.
//!
//! Module map:
//!
//! - [`grid`]: feeder, candidate assets, time structure and scenario arrays.
//! - [`scenario`]: Bass-diffusion adoption simulation and scenario assembly.
//! - [`milp`]: solver-agnostic MILP modeling layer, LP export, HiGHS backend.
//! - [`plan`]: the deterministic, scenario-based and transmission-aware models.
//! - [`nrcc`]: budget sweep, plan evaluation and dispersion.
//! - [`acpf`]: AC power-flow validation of plans.
//! - [`io`]: feeder documents, columnar netload files, bundled test feeder.
//! - [`pipeline`]: inputs to planning-ready scenario sets in one call.

pub mod acpf;
pub mod error;
pub mod grid;
pub mod io;
pub mod milp;
pub mod nrcc;
pub mod pipeline;
pub mod plan;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::{
    hyperplanes, BessCandidate, Bus, Corridor, GridModel, LineOption, RegulatorCandidate,
    RegulatorSite, ScenarioSet, TimeStructure, ValidationReport, Violation,
};
pub use milp::{
    HighsBackend, ProblemSpec, RootLp, Solution, SolveStatus, SolverBackend, SolverSettings,
};
pub use nrcc::{NrccCurve, SweepConfig};
pub use plan::InvestmentPlan;

/// Crate version, recorded in result manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
