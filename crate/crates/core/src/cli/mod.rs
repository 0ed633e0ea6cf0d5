//! `fpm` command line: `solve`, `bench` and `mesh-info`.
//!
//! Exit codes: 0 success, 1 run failure (divergence, inversion, no
//! convergence), 2 unreadable input file or bad flags, 3 invalid
//! configuration.

mod config;
mod vtk;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;
pub use vtk::{vtk_text, write_vtk};

use crate::approx::{ShapeFunctionSet, WeightScheme};
use crate::bench::{run_case, BenchError, CaseId, CaseStudy};
use crate::dynamics::PenaltyConfig;
use crate::geometry::Vec3;
use crate::mesh::{read_mesh, DualComplex, MeshError, SimplicialMesh};
use crate::solver::{QuasiStaticProblem, SolveStatus, SolverControls};

#[derive(Debug, Parser)]
#[command(
    name = "fpm",
    version,
    about = "Explicit total-Lagrangian fragile points solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args, Default)]
pub struct Overrides {
    /// Output directory (overrides the config's)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Penalty coefficient p
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Fraction of the critical time step
    #[arg(long = "dt-safety")]
    pub dt_safety: Option<f64>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
    /// Progress log file, relative to the output directory
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the quasi-static problem described by a JSON config
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run validation studies and write NRMSE reports and VTK fields
    Bench {
        #[arg(long, required_unless_present = "all")]
        case: Option<String>,
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print mesh and dual-cell statistics
    MeshInfo {
        #[arg(long)]
        mesh: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Run(String),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Config(_) => 3,
            CliError::Run(_) | CliError::Output(_) => 1,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Input { .. } => "input error",
            CliError::Config(_) => "config error",
            CliError::Run(_) => "run error",
            CliError::Output(_) => "output error",
        }
    }
}

fn mesh_error(path: &Path, e: MeshError) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn output_error(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

/// Join `rel` under `dir`, refusing anything that would escape it.
fn under(dir: &Path, rel: &Path) -> Result<PathBuf, CliError> {
    let escapes = rel.is_absolute()
        || rel
            .components()
            .any(|c| matches!(c, Component::ParentDir | Component::Prefix(_)));
    if escapes {
        return Err(CliError::Config(vec![format!(
            "{} must be a relative path inside the output directory",
            rel.display()
        )]));
    }
    Ok(dir.join(rel))
}

fn threads_from_env() -> usize {
    std::env::var("FPM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn apply_overrides(controls: &mut SolverControls, o: &Overrides) {
    if let Some(s) = o.dt_safety {
        controls.dt_safety = s;
    }
    if let Some(m) = o.max_steps {
        controls.max_steps = m;
    }
    controls.threads = threads_from_env();
}

fn solve(config_path: &Path, o: &Overrides, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(config_path).map_err(|e| CliError::Input {
        path: config_path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    if let Some(p) = o.penalty {
        cfg.penalty = p;
    }
    apply_overrides(&mut cfg.controls, o);
    let out_dir = o.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut bad = cfg.violations();
    if let Some(log) = &o.log {
        if let Err(CliError::Config(v)) = under(&out_dir, log) {
            bad.extend(v);
        }
    }
    let mesh_path = cfg.resolve_mesh(config_path.parent().unwrap_or(Path::new(".")));
    let mesh = read_mesh(&mesh_path).map_err(|e| mesh_error(&mesh_path, e))?;
    bad.extend(cfg.mesh_violations(&mesh));
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }

    let complex = DualComplex::build(mesh).map_err(|e| CliError::Run(e.to_string()))?;
    let shapes = ShapeFunctionSet::build(&complex, WeightScheme::Uniform)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let penalty =
        PenaltyConfig::new(cfg.penalty).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let mut problem = QuasiStaticProblem::new(
        &complex,
        &shapes,
        cfg.material,
        penalty,
        cfg.boundary_conditions.clone(),
    );
    problem.body = Vec3::from(cfg.body_force);

    fs::create_dir_all(&out_dir).map_err(output_error)?;
    let mut log_file = match &o.log {
        Some(rel) => Some(fs::File::create(under(&out_dir, rel)?).map_err(output_error)?),
        None => None,
    };
    let mut controls = cfg.controls.clone();
    if log_file.is_some() && controls.log_every == 0 {
        controls.log_every = 100;
    }
    let report = problem
        .solve_logged(&controls, log_file.as_mut().map(|f| f as &mut dyn Write))
        .map_err(|e| CliError::Run(e.to_string()))?;

    write_vtk(complex.mesh(), &report.u, &out_dir.join("solution.vtk")).map_err(output_error)?;
    let summary = serde_json::json!({
        "status": report.status,
        "steps": report.steps,
        "time": report.time,
        "dt": report.dt,
        "dt_crit": report.dt_crit,
        "damping": report.damping,
        "jumps": report.jumps,
        "max_displacement": report.u.iter().map(|u| u.norm()).fold(0.0, f64::max),
    });
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&summary).unwrap(),
    )
    .map_err(output_error)?;
    let _ = writeln!(
        stdout,
        "{:?} after {} steps (dt = {:.3e} s); output in {}",
        report.status,
        report.steps,
        report.dt,
        out_dir.display()
    );
    match report.status {
        SolveStatus::Converged => Ok(()),
        SolveStatus::MaxSteps => Err(CliError::Run(format!(
            "no convergence within {} steps; partial state written",
            report.steps
        ))),
        SolveStatus::Inverted { cell, step } => Err(CliError::Run(format!(
            "cell {cell} inverted at step {step}; last valid state written"
        ))),
    }
}

fn bench(
    case: Option<&str>,
    all: bool,
    o: &Overrides,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let ids: Vec<CaseId> = if all {
        CaseId::ALL.to_vec()
    } else {
        let name = case.unwrap_or_default();
        vec![name
            .parse()
            .map_err(|e: BenchError| CliError::Config(vec![e.to_string()]))?]
    };
    let out_dir = o.out.clone().unwrap_or_else(|| PathBuf::from("bench_out"));
    let mut bad = Vec::new();
    if let Some(p) = o.penalty {
        if PenaltyConfig::new(p).is_err() {
            bad.push(format!("penalty must be finite and ≥ 0, got {p}"));
        }
    }
    if let Some(log) = &o.log {
        if let Err(CliError::Config(v)) = under(&out_dir, log) {
            bad.extend(v);
        }
    }
    let mut controls = SolverControls::default();
    apply_overrides(&mut controls, o);
    bad.extend(controls.violations());
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }
    let mut log = match &o.log {
        Some(rel) => {
            fs::create_dir_all(&out_dir).map_err(output_error)?;
            Some(fs::File::create(under(&out_dir, rel)?).map_err(output_error)?)
        }
        None => None,
    };
    for id in ids {
        let mut study = CaseStudy::standard(id);
        study.controls.dt_safety = controls.dt_safety;
        study.controls.max_steps = controls.max_steps;
        study.controls.threads = controls.threads;
        if let Some(p) = o.penalty {
            study.penalty = p;
        }
        let run = run_case(&study).map_err(|e| CliError::Run(format!("{id}: {e}")))?;
        let dir = out_dir.join(id.as_str());
        fs::create_dir_all(&dir).map_err(output_error)?;
        fs::write(dir.join("report.csv"), run.report.to_csv()).map_err(output_error)?;
        let summary = run.report.summary();
        fs::write(dir.join("summary.txt"), &summary).map_err(output_error)?;
        for s in &run.solutions {
            write_vtk(
                &s.mesh,
                &s.report.u,
                &dir.join(format!("{}.vtk", sanitize(&s.label))),
            )
            .map_err(output_error)?;
        }
        let _ = writeln!(stdout, "{summary}");
        if let Some(f) = log.as_mut() {
            writeln!(f, "{id}: {} rows", run.report.rows.len()).map_err(output_error)?;
        }
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn mesh_summary(mesh: &SimplicialMesh) -> String {
    let mut s = format!(
        "dimension {}\nnodes {}\nelements {}\ntotal measure {:.6e}\nmean edge length {:.6e}\n",
        mesh.dim(),
        mesh.node_count(),
        mesh.element_count(),
        mesh.total_measure(),
        mesh.mean_edge_length()
    );
    for (name, faces) in mesh.boundary_sets() {
        s.push_str(&format!("boundary set {name}: {} facets\n", faces.len()));
    }
    s
}

fn mesh_info(path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mesh = read_mesh(path).map_err(|e| mesh_error(path, e))?;
    let mut s = mesh_summary(&mesh);
    let complex = DualComplex::build(mesh).map_err(|e| CliError::Run(e.to_string()))?;
    let vols: Vec<f64> = complex.cells().iter().map(|c| c.volume).collect();
    s.push_str(&format!(
        "dual cells {} (volume min {:.6e}, max {:.6e})\ninterfaces {}\nboundary facets {}\n",
        vols.len(),
        vols.iter().cloned().fold(f64::INFINITY, f64::min),
        vols.iter().cloned().fold(0.0, f64::max),
        complex.interfaces().len(),
        complex.boundary_facets().len()
    ));
    let _ = write!(stdout, "{s}");
    Ok(())
}

/// Run with explicit arguments; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve { config, overrides } => solve(config, overrides, stdout),
        Command::Bench {
            case,
            all,
            overrides,
        } => bench(case.as_deref(), *all, overrides, stdout),
        Command::MeshInfo { mesh } => mesh_info(mesh, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", e.category());
            e.exit_code()
        }
    }
}
