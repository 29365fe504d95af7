use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nrcc_cli::{execute, Command, Format, Outcome, PlanMode, Resolved, RunConfig};

/// Distribution planning under DER growth uncertainty: adoption scenarios,
/// investment plans, netload range cost curves and AC validation.
///
/// Every flag can also be set through an environment variable with the
/// NRCC_ prefix (NRCC_CONFIG, NRCC_SEED, NRCC_OUT, ...).
#[derive(Parser, Debug)]
#[command(name = "nrcc", version)]
struct Cli {
    /// Run configuration (TOML). Defaults apply when absent.
    #[arg(long, global = true, env = "NRCC_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "NRCC_SEED")]
    seed: Option<u64>,
    /// Output directory [default: out/<command>].
    #[arg(long, global = true, env = "NRCC_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "NRCC_MIP_GAP")]
    mip_gap: Option<f64>,
    /// Seconds per solve.
    #[arg(long, global = true, env = "NRCC_TIME_LIMIT")]
    time_limit: Option<f64>,
    /// Worker threads for scenario and budget parallelism.
    #[arg(long, global = true, env = "NRCC_JOBS")]
    jobs: Option<usize>,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value = "csv", env = "NRCC_FORMAT")]
    format: Format,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the adoption ensemble and emit the planning scenario set.
    Scenarios,
    /// Solve one planning model and emit the plan.
    Plan {
        #[arg(long, value_enum, env = "NRCC_MODE")]
        mode: Option<PlanMode>,
        /// Investment budget, required by the aware mode.
        #[arg(long, env = "NRCC_BUDGET")]
        budget: Option<f64>,
    },
    /// Sweep the budget and emit the curve, its plans and dispersion.
    Nrcc,
    /// Check a plan on the planning scenarios with the AC power flow.
    /// Exits 2 when violations are found.
    Validate {
        #[arg(long, env = "NRCC_PLAN")]
        plan: Option<PathBuf>,
    },
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()?.join(p)
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring worker threads")?;
    }
    let (mut config, base_dir) = match &cli.config {
        Some(p) => {
            let dir = absolute(p)?.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(p)?, dir)
        }
        None => (RunConfig::default(), std::env::current_dir()?),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(g) = cli.mip_gap {
        config.solver.mip_gap = g;
    }
    if let Some(t) = cli.time_limit {
        config.solver.time_limit = Some(t);
    }
    let command = match cli.command {
        Sub::Scenarios => Command::Scenarios,
        Sub::Plan { mode, budget } => {
            if let Some(m) = mode {
                config.plan.mode = m;
            }
            if budget.is_some() {
                config.plan.budget = budget;
            }
            Command::Plan
        }
        Sub::Nrcc => Command::Nrcc,
        Sub::Validate { plan } => {
            if let Some(p) = plan {
                config.validate.plan = Some(absolute(&p)?);
            }
            Command::Validate
        }
    };
    let out = match (cli.out, &config.out) {
        (Some(o), _) => o,
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from("out").join(command.name()),
    };
    let resolved = Resolved::new(config, base_dir)?;
    let report = execute(resolved, command, &out)?;
    report.summary.write(cli.format, std::io::stdout().lock())?;
    eprintln!(
        "wrote {} files to {} (bundle {})",
        report.manifest.files.len() + 1,
        out.display(),
        &report.manifest.bundle_sha256[..12]
    );
    Ok(report.outcome)
}

fn main() -> ExitCode {
    // Exit code 2 is reserved for validation findings, so usage errors are
    // reported as 1 instead of clap's default.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
