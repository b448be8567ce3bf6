//! The adaptive loop: SOLVE, ESTIMATE, MARK, REFINE.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::edges::edge_table;
use crate::eigen::{iiss_with, EigenResult, IissOptions, IissStart};
use crate::error::{FemError, IoError, MeshError, SolveError};
use crate::estimator::{dorfler_mark, estimate_all, IndicatorSet};
use crate::fem::{P1Function, PwConstVecField};
use crate::io;
use crate::mesh::{generate_disk, generate_lshape, generate_unit_square, Mesh};
use crate::plap::{DcInit, DcOptions, PLaplaceSolver, DEFAULT_SEED};

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// `(0,1)^2`, resolution = cells per side.
    Square,
    /// `(0,2)^2 \ [1,2]^2`, resolution = cells per unit length.
    LShape,
    /// Unit disk, resolution = uniform refinements of a hexagon.
    Disk,
    /// Mesh file in the plain-text format of [`crate::io`]; resolution is ignored.
    File(PathBuf),
}

impl Domain {
    pub fn initial_mesh(&self, resolution: usize) -> Result<Mesh, IoError> {
        Ok(match self {
            Domain::Square => generate_unit_square(resolution.max(1)),
            Domain::LShape => generate_lshape(resolution.max(1)),
            Domain::Disk => generate_disk(resolution),
            Domain::File(path) => io::load_mesh(path)?,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Domain::Square => "square".into(),
            Domain::LShape => "lshape".into(),
            Domain::Disk => "disk".into(),
            Domain::File(p) => format!("file:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AfemConfig {
    pub domain: Domain,
    pub resolution: usize,
    pub p: f64,
    pub theta: f64,
    pub eps_k: f64,
    pub eps_m: f64,
    pub eps_n: f64,
    /// Last loop index `K`; at most `K + 1` loops run.
    pub max_loops: usize,
    pub max_m: usize,
    pub max_dc_iter: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Start every level from the torsion function and fresh random fields
    /// (seed + k) instead of the interpolated previous eigenpair.
    pub cold_start: bool,
}

impl Default for AfemConfig {
    fn default() -> Self {
        AfemConfig {
            domain: Domain::Square,
            resolution: 8,
            p: 2.0,
            theta: 0.6,
            eps_k: 1e-4,
            eps_m: 1e-5,
            eps_n: 1e-5,
            max_loops: 30,
            max_m: 200,
            max_dc_iter: 500,
            seed: DEFAULT_SEED,
            out_dir: None,
            cold_start: false,
        }
    }
}

impl AfemConfig {
    /// Checks every invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), FemError> {
        let bad = |msg: String| Err(FemError::InvalidInput(msg));
        if !(self.p > 1.0) || !self.p.is_finite() {
            return bad(format!("p must satisfy p > 1, got {}", self.p));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        for (name, v) in [("eps-k", self.eps_k), ("eps-m", self.eps_m), ("eps-n", self.eps_n)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_m == 0 {
            return bad("max-iiss must be at least 1".into());
        }
        if self.max_dc_iter < 2 {
            return bad("max-dc must be at least 2".into());
        }
        if matches!(self.domain, Domain::Square | Domain::LShape) && self.resolution == 0 {
            return bad("resolution must be at least 1".into());
        }
        Ok(())
    }

    pub fn iiss_options(&self) -> IissOptions {
        IissOptions {
            eps_m: self.eps_m,
            max_m: self.max_m,
            dc: DcOptions { eps_n: self.eps_n, max_iter: self.max_dc_iter },
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopRecord {
    pub k: usize,
    pub vertices: usize,
    pub elements: usize,
    pub mu: f64,
    pub lambda_iiss: f64,
    pub eta: f64,
    pub iiss_iters: usize,
    pub dc_iters: usize,
    pub marked: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    EpsK,
    MaxLoops,
    SolverFailure(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceLog {
    pub rows: Vec<LoopRecord>,
    pub stop_reason: Option<StopReason>,
}

impl ConvergenceLog {
    pub fn final_mu(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mu)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AfemError {
    #[error("invalid configuration: {0}")]
    Config(#[from] FemError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("refinement failed at loop {k}: {source}")]
    Mesh { k: usize, source: MeshError, log: ConvergenceLog },
    #[error("solver failed at loop {k}: {source}")]
    Solve { k: usize, source: SolveError, log: ConvergenceLog },
}

impl AfemError {
    /// Rows recorded before the failure, if any loop ran.
    pub fn partial_log(&self) -> Option<&ConvergenceLog> {
        match self {
            AfemError::Mesh { log, .. } | AfemError::Solve { log, .. } => Some(log),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AfemOutcome {
    pub log: ConvergenceLog,
    pub mesh: Mesh,
    pub eigen: EigenResult,
    pub indicators: IndicatorSet,
}

struct WarmStart {
    u: P1Function,
    lambda: f64,
    xi: PwConstVecField,
    nu: PwConstVecField,
}

pub fn run_afem(config: &AfemConfig) -> Result<AfemOutcome, AfemError> {
    config.validate()?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|source| IoError::Io { path: dir.display().to_string(), source })?;
    }
    let opts = config.iiss_options();
    let mut mesh = config.domain.initial_mesh(config.resolution)?;
    let mut log = ConvergenceLog::default();
    let mut warm: Option<WarmStart> = None;

    for k in 0.. {
        let t0 = Instant::now();
        let step = (|| -> Result<(EigenResult, IndicatorSet), SolveError> {
            let solver = PLaplaceSolver::new(&mesh, config.p)?;
            let (start, init) = match warm.take() {
                Some(w) if !config.cold_start => {
                    (IissStart::Guess { u: w.u, lambda: w.lambda }, DcInit::Fields { xi: w.xi, nu: w.nu })
                }
                _ => (IissStart::Torsion, DcInit::Random { seed: config.seed.wrapping_add(k as u64) }),
            };
            let eigen = iiss_with(&solver, &opts, start, init)?;
            let edges = edge_table(&mesh).map_err(FemError::from)?;
            let ind = estimate_all(&mesh, &edges, eigen.mu_rayleigh, &eigen.u_lp, config.p)?;
            Ok((eigen, ind))
        })();
        let (eigen, ind) = match step {
            Ok(v) => v,
            Err(source) => {
                log.stop_reason = Some(StopReason::SolverFailure(source.to_string()));
                write_partial_log(config, &log);
                return Err(AfemError::Solve { k, source, log });
            }
        };
        if !eigen.converged {
            warn!("loop {k}: inverse iteration hit max_m");
        }

        let mu = eigen.mu_rayleigh;
        let stop = match log.rows.last() {
            Some(prev) if (prev.mu - mu).abs() / prev.mu < config.eps_k => Some(StopReason::EpsK),
            _ if k >= config.max_loops => Some(StopReason::MaxLoops),
            _ => None,
        };
        let marked = match stop {
            Some(_) => Vec::new(),
            None => dorfler_mark(&ind, config.theta).map_err(AfemError::Config)?,
        };
        let row = LoopRecord {
            k,
            vertices: mesh.num_vertices(),
            elements: mesh.num_triangles(),
            mu,
            lambda_iiss: eigen.lambda_iiss,
            eta: ind.total_eta,
            iiss_iters: eigen.iiss_iterations,
            dc_iters: eigen.dc_iterations_total,
            marked: marked.len(),
            seconds: t0.elapsed().as_secs_f64(),
        };
        info!(
            "k = {k}: {} vertices, mu = {mu:.10}, eta = {:.4e}, {} marked, {:.2}s",
            row.vertices, row.eta, row.marked, row.seconds
        );
        log.rows.push(row);
        if let Some(dir) = &config.out_dir {
            io::write_vtk(&mesh, Some(&eigen.u_sup), &dir.join(format!("mesh_{k}.vtk")))?;
        }

        if let Some(reason) = stop {
            log.stop_reason = Some(reason);
            if let Some(dir) = &config.out_dir {
                io::write_convergence_csv(&log, &dir.join("convergence.csv"))?;
                io::write_vtk(&mesh, Some(&eigen.u_sup), &dir.join("eigenfunction.vtk"))?;
            }
            return Ok(AfemOutcome { log, mesh, eigen, indicators: ind });
        }

        let refinement = match mesh.refine_with_map(&marked) {
            Ok(r) => r,
            Err(source) => return Err(AfemError::Mesh { k, source, log }),
        };
        warm = Some(WarmStart {
            u: eigen.u_sup.prolongate(&refinement.midpoints),
            lambda: eigen.lambda_iiss,
            xi: eigen.xi.transfer(&refinement.origin),
            nu: eigen.nu.transfer(&refinement.origin),
        });
        mesh = refinement.mesh;
    }
    unreachable!("the loop returns once k reaches max_loops")
}

fn write_partial_log(config: &AfemConfig, log: &ConvergenceLog) {
    let Some(dir) = &config.out_dir else { return };
    if let Err(e) = io::write_convergence_csv(log, &dir.join("convergence.csv")) {
        warn!("writing partial log to {}: {e}", dir.display());
    }
}

/// Output paths written by [`run_afem`] into `dir`.
pub fn output_files(dir: &Path, loops: usize) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = (0..loops).map(|k| dir.join(format!("mesh_{k}.vtk"))).collect();
    files.push(dir.join("eigenfunction.vtk"));
    files.push(dir.join("convergence.csv"));
    files
}
