//! Normalized inverse iteration of sublinear supersolutions for the first
//! eigenpair of the p-Laplacian.
//!
//! Starting from the torsion function `-Delta_p u_0 = 1`, each step solves
//! `-Delta_p u_m = (u_{m-1} / ||u_{m-1}||_inf)^{p-1}` and sets
//! `lambda_m = ||u_m||_inf^{1-p}`, until the relative change of `lambda`
//! drops below `eps_m`.

use log::{debug, warn};

use crate::error::{FemError, SolveError};
use crate::fem::{P1Function, PwConstVecField, Source};
use crate::mesh::Mesh;
use crate::plap::{DcInit, DcOptions, PLaplaceSolver, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IissOptions {
    pub eps_m: f64,
    pub max_m: usize,
    pub dc: DcOptions,
    pub seed: u64,
}

impl Default for IissOptions {
    fn default() -> Self {
        IissOptions { eps_m: 1e-5, max_m: 200, dc: DcOptions::default(), seed: DEFAULT_SEED }
    }
}

/// Where the inverse iteration starts.
#[derive(Clone, Debug)]
pub enum IissStart {
    /// Solve the torsion problem first.
    Torsion,
    /// Skip the torsion solve and start from a nonnegative guess, rescaled so
    /// that its sup norm corresponds to `lambda`.
    Guess { u: P1Function, lambda: f64 },
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// `1 / ||u_m||_inf^{p-1}` at the last step.
    pub lambda_iiss: f64,
    /// Eigenfunction with unit sup norm.
    pub u_sup: P1Function,
    /// Eigenfunction with unit `L^p` norm.
    pub u_lp: P1Function,
    /// Rayleigh quotient of `u_lp`.
    pub mu_rayleigh: f64,
    pub iiss_iterations: usize,
    pub dc_iterations_total: usize,
    pub converged: bool,
    /// `lambda_0, lambda_1, ...`.
    pub lambda_history: Vec<f64>,
    /// Final `(xi, nu)` of the last inner solve, for warm starts.
    pub xi: PwConstVecField,
    pub nu: PwConstVecField,
}

/// Torsion function `-Delta_p u = 1`, `u = 0` on the boundary.
pub fn torsion(mesh: &Mesh, p: f64, eps_n: f64, seed: u64) -> Result<P1Function, SolveError> {
    let solver = PLaplaceSolver::new(mesh, p)?;
    let opts = DcOptions { eps_n, ..DcOptions::default() };
    let (state, report) = solver.solve(&Source::Constant(1.0), &opts, &DcInit::Random { seed }, None)?;
    if !report.converged {
        return Err(SolveError::Torsion(Box::new(SolveError::DcNotConverged {
            iterations: report.iterations,
            rel_change: report.rel_change,
        })));
    }
    Ok(state.u)
}

/// Cold-start inverse iteration on `mesh`.
pub fn iiss(mesh: &Mesh, p: f64, opts: &IissOptions) -> Result<EigenResult, SolveError> {
    let solver = PLaplaceSolver::new(mesh, p)?;
    iiss_with(&solver, opts, IissStart::Torsion, DcInit::Random { seed: opts.seed })
}

/// Inverse iteration on a prepared solver. `init` seeds the first inner
/// solve; later inner solves start from the previous one's fields.
pub fn iiss_with(
    solver: &PLaplaceSolver,
    opts: &IissOptions,
    start: IissStart,
    init: DcInit,
) -> Result<EigenResult, SolveError> {
    if !(opts.eps_m > 0.0) || opts.max_m == 0 {
        return Err(FemError::InvalidInput(format!(
            "need eps_M > 0 and max_m >= 1, got {} and {}",
            opts.eps_m, opts.max_m
        ))
        .into());
    }
    let p = solver.p();
    let space = solver.space();
    let mut init = init;
    let mut dc_total = 0;

    let mut u = match start {
        IissStart::Torsion => {
            let (state, report) = solver.solve(&Source::Constant(1.0), &opts.dc, &init, None)?;
            dc_total += report.iterations;
            if !report.converged {
                return Err(SolveError::Torsion(Box::new(SolveError::DcNotConverged {
                    iterations: report.iterations,
                    rel_change: report.rel_change,
                })));
            }
            init = state.init();
            state.u
        }
        IissStart::Guess { u, lambda } => {
            let s = u.sup_norm();
            if !(s > 0.0) || !(lambda > 0.0) {
                return Err(FemError::InvalidInput("initial guess must be nonzero with lambda > 0".into()).into());
            }
            u.scaled(lambda.powf(-1.0 / (p - 1.0)) / s)
        }
    };
    let mut lambda = u.sup_norm().powf(1.0 - p);
    let mut history = vec![lambda];
    let mut m = 0;
    let converged = loop {
        m += 1;
        let scale = u.sup_norm();
        let source = Source::PositivePower { u: &u, scale, exponent: p - 1.0 };
        let (state, report) = solver
            .solve(&source, &opts.dc, &init, Some(&u))
            .map_err(|e| SolveError::InverseIteration { step: m, lambda, source: Box::new(e) })?;
        dc_total += report.iterations;
        if !report.converged {
            return Err(SolveError::InverseIteration {
                step: m,
                lambda,
                source: Box::new(SolveError::DcNotConverged {
                    iterations: report.iterations,
                    rel_change: report.rel_change,
                }),
            });
        }
        init = state.init();
        u = state.u;
        let min = u.values().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * u.sup_norm() {
            debug!("inverse iteration {m}: negative undershoot {min:e}");
        }
        let next = u.sup_norm().powf(1.0 - p);
        let rel = (next - lambda).abs() / lambda.abs();
        lambda = next;
        history.push(lambda);
        debug!("inverse iteration {m}: lambda = {lambda}, rel change {rel:e}, dc sweeps {}", report.iterations);
        if rel < opts.eps_m {
            break true;
        }
        if m >= opts.max_m {
            warn!("inverse iteration stopped at max_m = {m} (rel change {rel:e})");
            break false;
        }
    };

    let u_sup = u.scaled(1.0 / u.sup_norm());
    let lp = space.lp_norm(&u_sup, p)?;
    let u_lp = u_sup.scaled(1.0 / lp);
    let mu_rayleigh = space.rayleigh(&u_lp, p)?;
    let (xi, nu) = match init {
        DcInit::Fields { xi, nu } => (xi, nu),
        DcInit::Random { .. } => unreachable!("fields are replaced after the first inner solve"),
    };
    Ok(EigenResult {
        lambda_iiss: lambda,
        u_sup,
        u_lp,
        mu_rayleigh,
        iiss_iterations: m,
        dc_iterations_total: dc_total,
        converged,
        lambda_history: history,
        xi,
        nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{lp_norm, rayleigh};
    use crate::mesh::generate_unit_square;

    #[test]
    fn single_interior_unknown_closed_form() {
        // V_h is spanned by the hat function of the centre vertex, so the
        // Rayleigh quotient of any nonzero member is K_cc / M_cc.
        let mesh = generate_unit_square(2);
        let c = mesh.vertices().iter().position(|v| *v == [0.5, 0.5]).unwrap();
        let mut k_cc = 0.0;
        let mut m_cc = 0.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let Some(i) = tri.iter().position(|&v| v == c) else { continue };
            let [a, b] = [mesh.vertices()[tri[(i + 1) % 3]], mesh.vertices()[tri[(i + 2) % 3]]];
            let opposite = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let area = mesh.area(t);
            // |grad phi| = |opposite edge| / (2 |T|); int phi^2 = |T| / 6.
            k_cc += area * (opposite / (2.0 * area)).powi(2);
            m_cc += area / 6.0;
        }
        assert!((k_cc - 4.0).abs() < 1e-14);
        let result = iiss(&mesh, 2.0, &IissOptions::default()).unwrap();
        assert!((result.mu_rayleigh - k_cc / m_cc).abs() < 1e-10 * k_cc / m_cc);
        assert!(result.converged);
    }

    #[test]
    fn result_invariants_p3() {
        let mesh = generate_unit_square(8);
        let r = iiss(&mesh, 3.0, &IissOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.u_sup.sup_norm() - 1.0).abs() < 1e-12);
        assert!((lp_norm(&mesh, &r.u_lp, 3.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(r.u_lp.values().iter().all(|&v| v >= -1e-10));
        let a = rayleigh(&mesh, &r.u_sup, 3.0).unwrap();
        assert!((a - r.mu_rayleigh).abs() < 1e-12 * a);
        assert_eq!(r.lambda_history.len(), r.iiss_iterations + 1);
    }

    #[test]
    fn square_p2_upper_bound_decreasing() {
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let r = iiss(&generate_unit_square(n), 2.0, &IissOptions::default()).unwrap();
            assert!(r.mu_rayleigh >= exact - 1e-9);
            assert!(r.mu_rayleigh < prev);
            prev = r.mu_rayleigh;
        }
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let mesh = generate_unit_square(10);
        let opts = IissOptions::default();
        let cold = iiss(&mesh, 1.5, &opts).unwrap();
        let solver = PLaplaceSolver::new(&mesh, 1.5).unwrap();
        let warm = iiss_with(
            &solver,
            &opts,
            IissStart::Guess { u: cold.u_sup.clone(), lambda: cold.lambda_iiss },
            DcInit::Fields { xi: cold.xi.clone(), nu: cold.nu.clone() },
        )
        .unwrap();
        assert!(warm.iiss_iterations < cold.iiss_iterations);
        assert!((warm.mu_rayleigh - cold.mu_rayleigh).abs() < 1e-4 * cold.mu_rayleigh);
    }

    #[test]
    fn rejects_bad_options() {
        let mesh = generate_unit_square(2);
        let opts = IissOptions { eps_m: 0.0, ..IissOptions::default() };
        assert!(iiss(&mesh, 2.0, &opts).is_err());
        assert!(iiss(&mesh, 1.0, &IissOptions::default()).is_err());
    }
}
