//! Command-line surface: validation, validity reports, simulation of the
//! full and reduced models, closeness comparison, and initial-condition
//! projection.
//!
//! Exit codes: 0 on success (for `compare`, success means the closeness
//! test passed), 1 for model-validation failures, runtime failures, and
//! failed comparisons, 2 for unusable input (I/O, malformed JSON, bad
//! flags).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::full::{integrate_full, write_csv, TrajectoryTable};
use crate::network::{parse_network, validate_network, NetworkError, NetworkSpec};
use crate::ode::{IntegratorConfig, OdeError, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::reduction::{integrate_reduced, project_initial, ReductionError};
use crate::validity::{epsilon_report, ValidityError};

#[derive(Parser)]
#[command(
    name = "tqssa",
    version,
    about = "Assemble, reduce, validate, and simulate coupled enzymatic reaction networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative integration tolerance
    #[arg(long, global = true, default_value_t = DEFAULT_RTOL)]
    rtol: f64,
    /// Absolute integration tolerance
    #[arg(long, global = true, default_value_t = DEFAULT_ATOL)]
    atol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    Reduced,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and print diagnostics
    Validate { path: PathBuf },
    /// Print the validity report (epsilon, ratio flags, manifold spectrum) as JSON
    Report {
        path: PathBuf,
        /// Active-protein point for the spectrum, comma-separated (default: p0)
        #[arg(long, value_delimiter = ',')]
        at: Option<Vec<f64>>,
    },
    /// Integrate the model and emit trajectory CSV
    Simulate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long = "t-end", default_value_t = 10.0)]
        t_end: f64,
        /// Output sample spacing (default: t-end/100)
        #[arg(long = "dt-out")]
        dt_out: Option<f64>,
        /// Output file (defaults to standard output; required for --mode both)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append reconstructed manifold complexes to reduced-mode output
        #[arg(long)]
        with_complexes: bool,
    },
    /// Integrate both models and summarize their closeness after the transient
    Compare {
        path: PathBuf,
        #[arg(long = "t-end", default_value_t = 10.0)]
        t_end: f64,
        /// Transient cutoff before errors count (default: 0.05 * t-end)
        #[arg(long)]
        transient: Option<f64>,
        /// Relative sup-error threshold for a passing comparison
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Print the manifold-projected initial condition as a JSON vector
    Project { path: PathBuf },
}

/// Closeness summary of the full vs reduced active-protein trajectories.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub transient_cutoff: f64,
    pub sup_error_per_protein: Vec<f64>,
    pub relative_sup_error: f64,
    pub epsilon: f64,
    pub pass: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Write { .. } | CliError::Usage(_) => 2,
            CliError::Network(NetworkError::Json(_)) => 2,
            _ => 1,
        }
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_spec(path: &Path) -> Result<NetworkSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_network(&text)?)
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Validate { path } => cmd_validate(path),
        Command::Report { path, at } => cmd_report(path, at.as_deref()),
        Command::Simulate { path, mode, t_end, dt_out, out, with_complexes } => cmd_simulate(
            path,
            *mode,
            *t_end,
            *dt_out,
            out.as_deref(),
            *with_complexes,
            cli.rtol,
            cli.atol,
        ),
        Command::Compare { path, t_end, transient, tol } => {
            cmd_compare(path, *t_end, *transient, *tol, cli.rtol, cli.atol)
        }
        Command::Project { path } => cmd_project(path),
    }
}

fn cmd_validate(path: &Path) -> Result<i32, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match parse_network(&text) {
        Ok(spec) => {
            let diags = validate_network(&spec);
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
            }
            Ok(0)
        }
        Err(NetworkError::Invalid(diags)) => {
            for d in &diags {
                println!("{d}");
            }
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_report(path: &Path, at: Option<&[f64]>) -> Result<i32, CliError> {
    let spec = load_spec(path)?;
    let p_query = match at {
        Some(p) if p.len() == spec.n => p.to_vec(),
        Some(p) => {
            return Err(CliError::Usage(format!(
                "--at expects {} comma-separated values, got {}",
                spec.n,
                p.len()
            )))
        }
        None => spec.p0.clone(),
    };
    let report = epsilon_report(&spec, &p_query)?;
    println!("{}", report.to_json());
    Ok(0)
}

// traj.csv -> traj_full.csv / traj_reduced.csv
fn sibling_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let named = match out.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{stem}_{suffix}"),
    };
    out.with_file_name(named)
}

fn emit_table(
    table: &TrajectoryTable,
    spec: &NetworkSpec,
    with_complexes: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_csv(table, spec, with_complexes, &mut buf).expect("in-memory write cannot fail");
    match out {
        Some(path) => fs::write(path, &buf).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            std::io::stdout()
                .write_all(&buf)
                .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    mode: Mode,
    t_end: f64,
    dt_out: Option<f64>,
    out: Option<&Path>,
    with_complexes: bool,
    rtol: f64,
    atol: f64,
) -> Result<i32, CliError> {
    let spec = load_spec(path)?;
    let dt_out = dt_out.unwrap_or(if t_end > 0.0 { t_end / 100.0 } else { 1.0 });
    if dt_out <= 0.0 {
        return Err(CliError::Usage("--dt-out must be positive".into()));
    }
    let cfg = IntegratorConfig { rtol, atol, ..IntegratorConfig::new(t_end, dt_out) };

    match mode {
        Mode::Full => {
            let table = integrate_full(&spec, &cfg)?;
            emit_table(&table, &spec, false, out)?;
        }
        Mode::Reduced => {
            let table = integrate_reduced(&spec, &cfg)?;
            emit_table(&table, &spec, with_complexes, out)?;
        }
        Mode::Both => {
            let out = out.ok_or_else(|| {
                CliError::Usage("--mode both writes two files; --out is required".into())
            })?;
            let table = integrate_full(&spec, &cfg)?;
            emit_table(&table, &spec, false, Some(&sibling_path(out, "full")))?;
            let table = integrate_reduced(&spec, &cfg)?;
            emit_table(&table, &spec, with_complexes, Some(&sibling_path(out, "reduced")))?;
        }
    }
    Ok(0)
}

/// Sup-norm closeness of the two trajectories on the shared grid at
/// t ≥ transient, normalized by the largest protein total.
pub fn comparison_summary(
    spec: &NetworkSpec,
    full: &TrajectoryTable,
    reduced: &TrajectoryTable,
    transient: f64,
    tol: f64,
    epsilon: f64,
) -> ComparisonSummary {
    let n = spec.n;
    let mut sup = vec![0.0_f64; n];
    for ((t, a), b) in full.times.iter().zip(&full.states).zip(&reduced.states) {
        if *t + 1e-12 < transient {
            continue;
        }
        for i in 0..n {
            sup[i] = sup[i].max((a.p[i] - b.p[i]).abs());
        }
    }
    let scale = spec.u_total.iter().cloned().fold(0.0_f64, f64::max);
    let relative = sup.iter().cloned().fold(0.0_f64, f64::max) / scale;
    ComparisonSummary {
        transient_cutoff: transient,
        sup_error_per_protein: sup,
        relative_sup_error: relative,
        epsilon,
        pass: relative <= tol,
    }
}

fn cmd_compare(
    path: &Path,
    t_end: f64,
    transient: Option<f64>,
    tol: f64,
    rtol: f64,
    atol: f64,
) -> Result<i32, CliError> {
    let spec = load_spec(path)?;
    let transient = transient.unwrap_or(0.05 * t_end);
    let dt_out = if t_end > 0.0 { t_end / 200.0 } else { 1.0 };
    let cfg = IntegratorConfig { rtol, atol, ..IntegratorConfig::new(t_end, dt_out) };

    let full = integrate_full(&spec, &cfg)?;
    let reduced = integrate_reduced(&spec, &cfg)?;
    let epsilon = epsilon_report(&spec, &spec.p0)?.eps;
    let summary = comparison_summary(&spec, &full, &reduced, transient, tol, epsilon);
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serialization cannot fail")
    );
    Ok(if summary.pass { 0 } else { 1 })
}

fn cmd_project(path: &Path) -> Result<i32, CliError> {
    let spec = load_spec(path)?;
    let model = project_initial(&spec)?;
    println!(
        "{}",
        serde_json::to_string(&model.p_hat0).expect("vector serialization cannot fail")
    );
    Ok(0)
}
