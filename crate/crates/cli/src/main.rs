//! `errbound`: batch error-bound analyses from a JSON spec.
//!
//! Exit codes: 0 every check holds, 1 some check fails, 2 some result is
//! inconclusive, 3 an analysis raised an error, 4 the spec is invalid, 5 an
//! I/O error, 6 a usage error.

mod analysis;
mod expr;
mod model;
mod report;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use analysis::{Finding, Outcome};
use model::{Overrides, ValidationError};
use report::{Report, ResultEntry};
use spec::Spec;

const EXIT_SPEC: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_USAGE: u8 = 6;

#[derive(Parser)]
#[command(name = "errbound", version, about = "Error bounds, slopes, subregularity and calmness from a JSON spec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of a spec and write a report.
    Analyze {
        spec: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "errbound-out")]
        out: PathBuf,
        /// Overrides `config.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `config.grid` (points per axis).
        #[arg(long)]
        grid: Option<usize>,
        /// Overrides `config.tol`.
        #[arg(long)]
        tol: Option<f64>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Parse and validate a spec without running it.
    Check { spec: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Spec(_) => EXIT_SPEC,
            Failure::Io(_) => EXIT_IO,
        }
    }
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        Failure::Spec(format!("invalid spec: {e}"))
    }
}

struct Loaded {
    bytes: Vec<u8>,
    spec: Spec,
    model: model::Model,
    cfg: errbound::Config,
}

fn load(path: &Path, overrides: &Overrides) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let spec: Spec = serde_json::from_slice(&bytes).map_err(|e| Failure::Spec(format!("{}: {e}", path.display())))?;
    if spec.analysis.is_empty() {
        return Err(Failure::Spec("invalid spec: analysis: at least one analysis is required".into()));
    }
    let cfg = model::config(&spec, overrides)?;
    let model = model::build(&spec)?;
    for (i, a) in spec.analysis.iter().enumerate() {
        analysis::validate(&model, a).map_err(|m| Failure::Spec(format!("invalid spec: analysis[{i}]: {m}")))?;
    }
    Ok(Loaded { bytes, spec, model, cfg })
}

fn run_all(l: &Loaded) -> Vec<(ResultEntry, Vec<analysis::Table>)> {
    l.spec
        .analysis
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let (entry, tables) = match analysis::run(&l.model, a, i, &l.cfg) {
                Ok(Finding { status, output, tables }) => {
                    (ResultEntry { index: i, analysis: a.clone(), status, output, error: None }, tables)
                }
                Err(e) => (
                    ResultEntry {
                        index: i,
                        analysis: a.clone(),
                        status: Outcome::Error,
                        output: serde_json::Value::Null,
                        error: Some(e.to_string()),
                    },
                    Vec::new(),
                ),
            };
            (entry, tables)
        })
        .collect()
}

fn analyze(path: &Path, out: &Path, overrides: Overrides, jobs: Option<usize>, format: Format) -> Result<u8, Failure> {
    let start = Instant::now();
    let loaded = load(path, &overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().context("cannot start the worker pool")?;
    let rows = pool.install(|| run_all(&loaded));
    let mut results = Vec::new();
    let mut tables: Vec<analysis::Table> = analysis::profile(&loaded.model).into_iter().collect();
    for (entry, t) in rows {
        let label = serde_json::to_value(entry.status).unwrap_or_default();
        match &entry.error {
            Some(e) => println!("[{}] {}: error: {e}", entry.index, entry.analysis.name()),
            None => println!("[{}] {}: {}", entry.index, entry.analysis.name(), label.as_str().unwrap_or("")),
        }
        results.push(entry);
        tables.extend(t);
    }
    let report = Report {
        spec_bytes: &loaded.bytes,
        spec: serde_json::to_value(&loaded.spec).context("cannot serialize the spec")?,
        cfg: &loaded.cfg,
        dim: loaded.model.problem.dim(),
        results: &results,
        tables: &tables,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    match format {
        Format::Json => report::write_json(out, &report),
        Format::Csv => report::write_csv(out, &report),
    }
    .with_context(|| format!("cannot write to {}", out.display()))?;
    Ok(report::exit_code(&results) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze { spec, out, seed, grid, tol, jobs, format } => {
            analyze(&spec, &out, Overrides { seed, grid, tol }, jobs, format)
        }
        Command::Check { spec } => load(&spec, &Overrides::default()).map(|l| {
            println!("{}: {} analyses, {} problem", spec.display(), l.spec.analysis.len(), l.model.problem.kind());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.code())
        }
    }
}
