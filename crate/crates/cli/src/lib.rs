//! Argument parsing and subcommand execution for the `plafem` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::warn;

use plafem_core::edges::edge_table;
use plafem_core::eigen::iiss;
use plafem_core::estimator::{dorfler_mark, estimate_all};
use plafem_core::io::{save_mesh, write_vtk};
use plafem_core::plap::{DcInit, PLaplaceSolver};
use plafem_core::{run_afem, AfemConfig, AfemError, Domain, Mesh, Source, StopReason};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// `--help` or `--version` output; not an error for the exit code.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "plafem", version, about = "Adaptive FEM for the first eigenpair of the Dirichlet p-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the adaptive loop.
    Run(Common),
    /// Write the initial mesh.
    Mesh {
        #[command(flatten)]
        common: Common,
        /// Rounds of bisecting every element once.
        #[arg(long, default_value_t = 0)]
        refine: usize,
    },
    /// Solve -Delta_p u = f with constant f on the initial mesh.
    SolvePlap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        f: f64,
    },
    /// Compute the eigenpair on the initial mesh and report indicators and marking.
    Estimate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// square | lshape | disk | file:<path>
    #[arg(long, value_parser = parse_domain)]
    domain: Domain,
    /// Cells per unit length, or refinement levels for the disk.
    #[arg(long, default_value_t = 8)]
    resolution: usize,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    p: f64,
    #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long = "eps-k", default_value_t = 1e-4, allow_negative_numbers = true)]
    eps_k: f64,
    #[arg(long = "eps-m", default_value_t = 1e-5, allow_negative_numbers = true)]
    eps_m: f64,
    #[arg(long = "eps-n", default_value_t = 1e-5, allow_negative_numbers = true)]
    eps_n: f64,
    #[arg(long = "max-loops", default_value_t = 30)]
    max_loops: usize,
    #[arg(long = "max-iiss", default_value_t = 200)]
    max_iiss: usize,
    #[arg(long = "max-dc", default_value_t = 500)]
    max_dc: usize,
    #[arg(long, default_value_t = plafem_core::plap::DEFAULT_SEED)]
    seed: u64,
    /// Output directory (for `mesh`: output file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Start each level from the torsion function instead of the previous eigenpair.
    #[arg(long = "cold-start")]
    cold_start: bool,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    match s {
        "square" => Ok(Domain::Square),
        "lshape" => Ok(Domain::LShape),
        "disk" => Ok(Domain::Disk),
        _ => match s.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(Domain::File(PathBuf::from(path))),
            _ => Err(format!("unknown domain `{s}`, expected square, lshape, disk or file:<path>")),
        },
    }
}

impl Common {
    fn config(&self) -> AfemConfig {
        AfemConfig {
            domain: self.domain.clone(),
            resolution: self.resolution,
            p: self.p,
            theta: self.theta,
            eps_k: self.eps_k,
            eps_m: self.eps_m,
            eps_n: self.eps_n,
            max_loops: self.max_loops,
            max_m: self.max_iiss,
            max_dc_iter: self.max_dc,
            seed: self.seed,
            out_dir: self.out.clone(),
            cold_start: self.cold_start,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Run(AfemConfig),
    Mesh { config: AfemConfig, refine: usize },
    SolvePlap { config: AfemConfig, f: f64 },
    Estimate(AfemConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliInvocation {
    pub command: Command,
}

impl CliInvocation {
    pub fn config(&self) -> &AfemConfig {
        match &self.command {
            Command::Run(c) | Command::Estimate(c) => c,
            Command::Mesh { config, .. } | Command::SolvePlap { config, .. } => config,
        }
    }
}

/// Parses and validates `argv` (including the program name).
pub fn parse_cli<I, T>(argv: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    })?;
    let command = match cli.command {
        Sub::Run(c) => Command::Run(c.config()),
        Sub::Mesh { common, refine } => Command::Mesh { config: common.config(), refine },
        Sub::SolvePlap { common, f } => {
            if !f.is_finite() {
                return Err(CliError::Usage(format!("--f must be finite, got {f}")));
            }
            Command::SolvePlap { config: common.config(), f }
        }
        Sub::Estimate(c) => Command::Estimate(c.config()),
    };
    let inv = CliInvocation { command };
    inv.config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(inv)
}

fn load_initial(config: &AfemConfig) -> Result<Mesh, CliError> {
    config.domain.initial_mesh(config.resolution).map_err(|e| CliError::Usage(e.to_string()))
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn create_dir(dir: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| failure(format!("creating {}: {e}", dir.display())))
}

/// Runs a validated invocation, writing the human-readable report to `out`.
pub fn execute(inv: &CliInvocation, out: &mut dyn Write) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| failure(e);
    match &inv.command {
        Command::Run(config) => {
            // Fail on unreadable mesh files as a usage error before any compute.
            if matches!(config.domain, Domain::File(_)) {
                load_initial(config)?;
            }
            let outcome = run_afem(config).map_err(|e| {
                if let Some(log) = e.partial_log() {
                    warn!("{} loop(s) completed before the failure", log.rows.len());
                }
                match e {
                    AfemError::Config(e) => CliError::Usage(e.to_string()),
                    e => failure(e),
                }
            })?;
            writeln!(out, "{:>3} {:>9} {:>9} {:>18} {:>11} {:>5} {:>6} {:>7}", "k", "vertices", "elements", "mu", "eta", "iiss", "dc", "marked")
                .map_err(io_err)?;
            for r in &outcome.log.rows {
                writeln!(
                    out,
                    "{:>3} {:>9} {:>9} {:>18.12} {:>11.4e} {:>5} {:>6} {:>7}",
                    r.k, r.vertices, r.elements, r.mu, r.eta, r.iiss_iters, r.dc_iters, r.marked
                )
                .map_err(io_err)?;
            }
            let reason = match &outcome.log.stop_reason {
                Some(StopReason::EpsK) => "eps-k",
                Some(StopReason::MaxLoops) => "max-loops",
                _ => "unknown",
            };
            writeln!(out, "stopped by {reason}; final mu = {:.12}", outcome.eigen.mu_rayleigh).map_err(io_err)?;
        }
        Command::Mesh { config, refine } => {
            let mut mesh = load_initial(config)?;
            for _ in 0..*refine {
                mesh = mesh.refine_uniform();
            }
            writeln!(
                out,
                "{} vertices, {} elements, {} interior vertices, area {:.12}, min angle {:.4} deg",
                mesh.num_vertices(),
                mesh.num_triangles(),
                mesh.num_interior_vertices(),
                mesh.total_area(),
                mesh.min_angle().to_degrees()
            )
            .map_err(io_err)?;
            if let Some(path) = &config.out_dir {
                if path.extension().is_some_and(|e| e == "vtk") {
                    write_vtk(&mesh, None, path).map_err(failure)?;
                } else {
                    save_mesh(&mesh, path).map_err(failure)?;
                }
            }
        }
        Command::SolvePlap { config, f } => {
            let mesh = load_initial(config)?;
            let solver = PLaplaceSolver::new(&mesh, config.p).map_err(failure)?;
            let opts = config.iiss_options().dc;
            let (state, report) = solver
                .solve(&Source::Constant(*f), &opts, &DcInit::Random { seed: config.seed }, None)
                .map_err(failure)?;
            writeln!(
                out,
                "{} vertices, {} sweeps, rel change {:.3e}, sup |u| = {:.12}",
                mesh.num_vertices(),
                report.iterations,
                report.rel_change,
                state.u.sup_norm()
            )
            .map_err(io_err)?;
            if let Some(dir) = &config.out_dir {
                create_dir(dir)?;
                write_vtk(&mesh, Some(&state.u), &dir.join("solution.vtk")).map_err(failure)?;
            }
            if !report.converged {
                return Err(failure(format!("DC iteration did not converge in {} sweeps", report.iterations)));
            }
        }
        Command::Estimate(config) => {
            let mesh = load_initial(config)?;
            let eig = iiss(&mesh, config.p, &config.iiss_options()).map_err(failure)?;
            let edges = edge_table(&mesh).map_err(failure)?;
            let ind = estimate_all(&mesh, &edges, eig.mu_rayleigh, &eig.u_lp, config.p).map_err(failure)?;
            let marked = dorfler_mark(&ind, config.theta).map_err(failure)?;
            writeln!(
                out,
                "mu = {:.12}, lambda = {:.12}, eta = {:.6e}, max indicator at element {}, {} of {} elements marked",
                eig.mu_rayleigh,
                eig.lambda_iiss,
                ind.total_eta,
                ind.argmax_element,
                marked.len(),
                mesh.num_triangles()
            )
            .map_err(io_err)?;
            if let Some(dir) = &config.out_dir {
                create_dir(dir)?;
                let mut csv = String::from("element,eta_q,marked\n");
                let mut is_marked = vec![false; mesh.num_triangles()];
                for &t in &marked {
                    is_marked[t] = true;
                }
                for (t, v) in ind.eta_q.iter().enumerate() {
                    csv.push_str(&format!("{t},{v:.16e},{}\n", u8::from(is_marked[t])));
                }
                let path = dir.join("indicators.csv");
                std::fs::write(&path, csv).map_err(|e| failure(format!("writing {}: {e}", path.display())))?;
                write_vtk(&mesh, Some(&eig.u_sup), &dir.join("eigenfunction.vtk")).map_err(failure)?;
            }
        }
    }
    Ok(())
}

/// Parses, executes and returns the process exit code.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = parse_cli(argv).and_then(|inv| execute(&inv, out));
    match result {
        Ok(()) => 0,
        Err(CliError::Info(msg)) => {
            let _ = write!(out, "{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
