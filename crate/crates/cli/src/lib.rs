//! Command-line pipeline: configuration, the four subcommands and result
//! bundles. `main.rs` only parses arguments and maps outcomes to exit codes.

pub mod bundle;
pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde_json::Value;

pub use bundle::{Manifest, ResultBundle};
pub use commands::{Outcome, PlanFile, Session};
pub use config::{PlanMode, Resolved, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Scenarios,
    Plan,
    Nrcc,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scenarios => "scenarios",
            Command::Plan => "plan",
            Command::Nrcc => "nrcc",
            Command::Validate => "validate",
        }
    }
}

/// A small table printed to stdout after a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(|v| match v {
                        Value::Null => String::new(),
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    }))?;
                }
                w.flush()?;
            }
            Format::Json => {
                let doc = serde_json::json!({ "columns": self.columns, "rows": self.rows });
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, &doc)?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

pub struct Report {
    pub manifest: Manifest,
    pub summary: Table,
    pub outcome: Outcome,
}

/// Run one command and commit its bundle to `out`.
pub fn execute(resolved: Resolved, command: Command, out: &Path) -> Result<Report> {
    let start = Instant::now();
    let hash = resolved.config_hash(command.name(), &BTreeMap::new())?;
    let seed = resolved.config.seed;
    let session = Session::open(resolved, hash.clone())?;
    let output = match command {
        Command::Scenarios => commands::cmd_scenarios(&session)?,
        Command::Plan => commands::cmd_plan(&session)?,
        Command::Nrcc => commands::cmd_nrcc(&session)?,
        Command::Validate => commands::cmd_validate(&session)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = output.bundle.commit(out, command.name(), seed, &hash, elapsed)?;
    Ok(Report {
        manifest,
        summary: output.summary,
        outcome: output.outcome,
    })
}
