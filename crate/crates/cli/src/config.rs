//! Run configuration: one TOML document, command-line overrides on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nrcc_core::nrcc::BuildOptionsConfig;
use nrcc_core::pipeline::ScenarioParams;
use nrcc_core::{RootLp, SolverSettings};
use serde::{Deserialize, Serialize};

use crate::bundle::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the adoption ensemble and the solver. Overrides any seed in
    /// `[scenarios.diffusion]`.
    pub seed: u64,
    /// Output directory, relative to the working directory.
    pub out: Option<PathBuf>,
    pub inputs: Inputs,
    pub solver: SolverConfig,
    pub scenarios: ScenarioParams,
    pub build: BuildOptionsConfig,
    pub plan: PlanConfig,
    pub nrcc: NrccConfig,
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out: None,
            inputs: Inputs::default(),
            solver: SolverConfig::default(),
            scenarios: ScenarioParams::default(),
            build: BuildOptionsConfig::default(),
            plan: PlanConfig::default(),
            nrcc: NrccConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

/// Input files. Relative paths resolve against the config file's directory.
/// Absent feeder or profile means the bundled 24-bus feeder.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub feeder: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    /// Planning scenarios from a netload file instead of the adoption ensemble.
    pub netloads: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Highs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: Backend,
    pub mip_gap: f64,
    /// Seconds per solve.
    pub time_limit: Option<f64>,
    pub threads: u32,
    /// First LP relaxation of each MIP: "ipm" or "simplex".
    pub root_lp: RootLp,
    /// Also write each cost-minimizing model as an LP file.
    pub export_lp: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverConfig {
            backend: Backend::Highs,
            mip_gap: s.mip_gap,
            time_limit: s.time_limit,
            threads: s.threads,
            root_lp: s.root_lp,
            export_lp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Deterministic,
    Scenario,
    Aware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub mode: PlanMode,
    /// Investment budget for the aware mode.
    pub budget: Option<f64>,
    pub weight: f64,
    /// Scenario id of the expected scenario. Defaults to the expected growth
    /// with the median-closest adoption run.
    pub expected_scenario: Option<String>,
    /// (direct, reverse) MW; derived from the deterministic plan if absent.
    pub expected_peaks_mw: Option<[f64; 2]>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            mode: PlanMode::Scenario,
            budget: None,
            weight: 0.5,
            expected_scenario: None,
            expected_peaks_mw: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NrccConfig {
    /// Explicit budgets. Otherwise `budget_count` points from the
    /// scenario-based minimum cost up to `max_multiple` times it.
    pub budgets: Option<Vec<f64>>,
    pub budget_count: usize,
    pub max_multiple: f64,
    pub weight: f64,
    pub expected_peaks_mw: Option<[f64; 2]>,
    /// Held-out growth rates for the dispersion bars.
    pub held_out_rates: Vec<f64>,
    /// Ensemble runs per held-out rate, spread over the capacity ranking.
    /// Zero disables the dispersion step.
    pub held_out_runs: usize,
}

impl Default for NrccConfig {
    fn default() -> Self {
        NrccConfig {
            budgets: None,
            budget_count: 6,
            max_multiple: 3.0,
            weight: 0.5,
            expected_peaks_mw: None,
            held_out_rates: vec![0.02, 0.025, 0.03, 0.035, 0.04],
            held_out_runs: 6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Plan file to check.
    pub plan: Option<PathBuf>,
}

/// A config with paths resolved and validated, ready for a command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing run config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            mip_gap: self.solver.mip_gap,
            time_limit: self.solver.time_limit,
            threads: self.solver.threads,
            seed: self.seed,
            root_lp: self.solver.root_lp,
            verbose: false,
        }
    }

    /// Propagate the top-level seed and check ranges that the core crate
    /// would only reject deep inside a command.
    pub fn finish(mut self) -> Result<Self> {
        self.scenarios.diffusion.seed = self.seed;
        self.scenarios.validate()?;
        if !(self.solver.mip_gap >= 0.0 && self.solver.mip_gap < 1.0) {
            bail!("solver.mip_gap must lie in [0, 1)");
        }
        if let Some(t) = self.solver.time_limit {
            if !(t > 0.0) {
                bail!("solver.time_limit must be > 0");
            }
        }
        for w in [self.plan.weight, self.nrcc.weight] {
            if !(0.0..=1.0).contains(&w) {
                bail!("weights must lie in [0, 1]");
            }
        }
        Ok(self)
    }
}

impl Resolved {
    pub fn new(config: RunConfig, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let r = Resolved {
            config: config.finish()?,
            base_dir: base_dir.into(),
        };
        for (name, p) in r.input_paths() {
            if !p.is_file() {
                bail!("{name} file {} does not exist", p.display());
            }
        }
        Ok(r)
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every referenced input file by role.
    pub fn input_paths(&self) -> Vec<(&'static str, PathBuf)> {
        let c = &self.config;
        [
            ("feeder", &c.inputs.feeder),
            ("profile", &c.inputs.profile),
            ("netloads", &c.inputs.netloads),
            ("labels", &c.inputs.labels),
            ("plan", &c.validate.plan),
        ]
        .into_iter()
        .filter_map(|(n, p)| p.as_ref().map(|p| (n, self.path(p))))
        .collect()
    }

    /// Digest of everything that can change a command's results: the
    /// command and its arguments, the config with paths replaced by the
    /// content hashes of the files they name, and the bundled data when
    /// used. The output directory and worker count are excluded.
    pub fn config_hash(&self, command: &str, args: &BTreeMap<String, String>) -> Result<String> {
        let mut semantic = self.config.clone();
        semantic.out = None;
        let mut inputs = BTreeMap::new();
        for (name, p) in self.input_paths() {
            let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
            inputs.insert(name.to_string(), sha256_hex(&bytes));
        }
        if self.config.inputs.feeder.is_none() {
            inputs.insert("feeder".into(), sha256_hex(nrcc_core::io::BUNDLED_FEEDER.as_bytes()));
        }
        if self.config.inputs.profile.is_none() {
            inputs.insert("profile".into(), sha256_hex(nrcc_core::io::BUNDLED_PROFILE.as_bytes()));
        }
        semantic.inputs = Inputs::default();
        semantic.validate = ValidateConfig::default();
        let doc = serde_json::json!({
            "command": command,
            "args": args,
            "config": semantic,
            "inputs": inputs,
            "core_version": nrcc_core::VERSION,
        });
        Ok(sha256_hex(&serde_json::to_vec(&doc)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 3").is_err());
        assert!(RunConfig::from_toml("[solver]\ngap = 0.1").is_err());
    }

    #[test]
    fn seed_reaches_the_ensemble() {
        let c = RunConfig::from_toml("seed = 9\n[scenarios.diffusion]\nseed = 1").unwrap();
        assert_eq!(c.finish().unwrap().scenarios.diffusion.seed, 9);
    }

    #[test]
    fn hash_tracks_semantic_inputs_only() {
        let args = BTreeMap::new();
        let base = Resolved::new(RunConfig::default(), ".").unwrap();
        let h = base.config_hash("plan", &args).unwrap();
        let mut moved = RunConfig::default();
        moved.out = Some("elsewhere".into());
        assert_eq!(Resolved::new(moved, ".").unwrap().config_hash("plan", &args).unwrap(), h);
        let mut seeded = RunConfig::default();
        seeded.seed += 1;
        assert_ne!(Resolved::new(seeded, ".").unwrap().config_hash("plan", &args).unwrap(), h);
        assert_ne!(base.config_hash("nrcc", &args).unwrap(), h);
    }

    #[test]
    fn missing_inputs_fail_at_launch() {
        let mut c = RunConfig::default();
        c.inputs.feeder = Some("no/such/feeder.toml".into());
        let err = Resolved::new(c, ".").unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }
}
