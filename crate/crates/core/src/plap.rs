//! Decomposition-coordination iteration for `-div(|grad u|^{p-2} grad u) = f`
//! with homogeneous Dirichlet data.
//!
//! Each sweep solves one Poisson problem with a flux correction, resolves the
//! auxiliary field `nu` pointwise from `|nu|^{p-2} nu + nu = xi + grad u`, and
//! updates the multiplier `xi <- xi + grad u - nu`. At a fixed point
//! `nu = grad u` and `xi = |grad u|^{p-2} grad u`.

use log::{debug, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FemError, SolveError};
use crate::fem::{DirichletSolver, P1Function, P1Space, PwConstVecField, Source};
use crate::mesh::Mesh;

/// Default seed for the random initial fields.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcOptions {
    /// Stop once the relative `L^2` change of `u` drops below this.
    pub eps_n: f64,
    pub max_iter: usize,
}

impl Default for DcOptions {
    fn default() -> Self {
        DcOptions { eps_n: 1e-5, max_iter: 500 }
    }
}

/// Initial `(xi_1, nu_0)`.
#[derive(Clone, Debug)]
pub enum DcInit {
    /// Every component drawn i.i.d. from `U(0, 0.5)` by a ChaCha8 generator
    /// seeded with `seed`: first both components of `xi` element by element,
    /// then those of `nu`.
    Random { seed: u64 },
    Fields { xi: PwConstVecField, nu: PwConstVecField },
}

impl DcInit {
    pub fn fields(&self, num_triangles: usize) -> (PwConstVecField, PwConstVecField) {
        match self {
            DcInit::Random { seed } => random_fields(num_triangles, *seed),
            DcInit::Fields { xi, nu } => (xi.clone(), nu.clone()),
        }
    }
}

pub fn random_fields(num_triangles: usize, seed: u64) -> (PwConstVecField, PwConstVecField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<[f64; 2]> {
        (0..num_triangles)
            .map(|_| [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)])
            .collect()
    };
    let xi = draw();
    let nu = draw();
    (PwConstVecField::from_values(xi), PwConstVecField::from_values(nu))
}

/// Iterate after the last sweep.
#[derive(Clone, Debug)]
pub struct DcState {
    pub u: P1Function,
    /// `xi_{n+1}`, ready to seed another solve.
    pub xi: PwConstVecField,
    /// `nu_n`.
    pub nu: PwConstVecField,
    pub n: usize,
    pub rel_change: f64,
}

impl DcState {
    pub fn init(&self) -> DcInit {
        DcInit::Fields { xi: self.xi.clone(), nu: self.nu.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcReport {
    pub iterations: usize,
    pub rel_change: f64,
    /// `||xi - |grad u|^{p-2} grad u||_{L^q}` after each sweep.
    pub consistency: Vec<f64>,
    pub converged: bool,
    pub cg_iterations: usize,
}

impl DcReport {
    pub fn consistency_residual(&self) -> f64 {
        self.consistency.last().copied().unwrap_or(f64::NAN)
    }
}

/// Nonnegative root `r` of `r^{p-1} + r = s`.
pub fn resolvent(s: f64, p: f64) -> Result<f64, FemError> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(FemError::InvalidInput(format!("resolvent needs s >= 0, got {s}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(FemError::InvalidInput(format!("resolvent needs p > 1, got {p}")));
    }
    Ok(resolvent_unchecked(s, p))
}

/// Safeguarded Newton iteration on `phi(r) = r^{p-1} + r - s` inside the
/// bracket `[0, min(s, s^{1/(p-1)})]`, falling back to bisection whenever a
/// Newton step leaves the bracket.
pub(crate) fn resolvent_unchecked(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return 0.5 * s;
    }
    let e = p - 1.0;
    let tol = 1e-15 * s.max(1.0);
    let mut lo = 0.0;
    let mut hi = s.min(s.powf(1.0 / e));
    // phi is convex for p > 2, so Newton from the right end is monotone; for
    // p < 2 the derivative is singular at 0 and the midpoint is safer.
    let mut r = if p > 2.0 { hi } else { 0.5 * hi };
    for _ in 0..200 {
        let re = r.powf(e);
        let phi = re + r - s;
        if phi.abs() <= tol {
            return r;
        }
        if phi > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let dphi = e * re / r + 1.0;
        let newton = r - phi / dphi;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == r || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        r = next;
    }
    r
}

/// `nu` parallel to `w` with `|nu|^{p-1} + |nu| = |w|`.
pub fn nu_update(w: &PwConstVecField, p: f64) -> Result<PwConstVecField, FemError> {
    resolvent(0.0, p)?;
    Ok(PwConstVecField::from_values(w.values().iter().map(|&v| nu_of(v, p)).collect()))
}

fn nu_of(w: [f64; 2], p: f64) -> [f64; 2] {
    let s = w[0].hypot(w[1]);
    if s == 0.0 {
        return [0.0, 0.0];
    }
    let k = resolvent_unchecked(s, p) / s;
    [k * w[0], k * w[1]]
}

/// `|g|^{p-2} g`, zero at `g = 0`.
pub fn flux(g: [f64; 2], p: f64) -> [f64; 2] {
    let s = g[0].hypot(g[1]);
    if s == 0.0 {
        return [0.0, 0.0];
    }
    let k = s.powf(p - 2.0);
    [k * g[0], k * g[1]]
}

/// Reusable p-Laplacian solver on a fixed mesh; the stiffness matrix and the
/// Dirichlet reduction are built once.
pub struct PLaplaceSolver<'m> {
    space: P1Space<'m>,
    dirichlet: DirichletSolver,
    p: f64,
}

impl<'m> PLaplaceSolver<'m> {
    pub fn new(mesh: &'m Mesh, p: f64) -> Result<Self, FemError> {
        resolvent(0.0, p)?;
        let space = P1Space::new(mesh)?;
        let k = space.stiffness();
        let dirichlet = DirichletSolver::new(&k, mesh.boundary())?;
        Ok(PLaplaceSolver { space, dirichlet, p })
    }

    pub fn space(&self) -> &P1Space<'m> {
        &self.space
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Runs the iteration. `guess` only seeds the linear solver; the
    /// iteration itself starts from `init`. Hitting `max_iter` is reported
    /// through `DcReport::converged`, not as an error.
    pub fn solve(
        &self,
        f: &Source,
        opts: &DcOptions,
        init: &DcInit,
        guess: Option<&P1Function>,
    ) -> Result<(DcState, DcReport), SolveError> {
        if !(opts.eps_n > 0.0) {
            return Err(FemError::InvalidInput(format!("eps_N must be positive, got {}", opts.eps_n)).into());
        }
        let mesh = self.space.mesh();
        let nt = mesh.num_triangles();
        let p = self.p;
        let q = p / (p - 1.0);
        let (mut xi, mut nu) = init.fields(nt);
        if xi.len() != nt || nu.len() != nt {
            return Err(FemError::InvalidInput("initial fields do not match the mesh".into()).into());
        }
        let load = self.space.rhs(f, None)?;

        let mut u_prev: Option<P1Function> = guess.cloned();
        let mut rel_change = f64::INFINITY;
        let mut report = DcReport {
            iterations: 0,
            rel_change,
            consistency: Vec::new(),
            converged: false,
            cg_iterations: 0,
        };
        let mut n = 0;
        let mut g = PwConstVecField::zeros(nt);
        loop {
            n += 1;
            for ((gt, x), v) in g.values_mut().iter_mut().zip(xi.values()).zip(nu.values()) {
                *gt = [x[0] - v[0], x[1] - v[1]];
            }
            let mut b = self.space.rhs(&Source::Constant(0.0), Some(&g))?;
            b.iter_mut().zip(&load).for_each(|(bi, li)| *bi += li);
            let (u, cg) = self.dirichlet.solve(&b, u_prev.as_ref())?;
            report.cg_iterations += cg.iterations;

            let grad_u = self.space.grad(&u);
            let mut residual = 0.0;
            for t in 0..nt {
                let du = grad_u.values()[t];
                let x = xi.values()[t];
                let w = [x[0] + du[0], x[1] + du[1]];
                let v = nu_of(w, p);
                nu.values_mut()[t] = v;
                let x_next = [w[0] - v[0], w[1] - v[1]];
                xi.values_mut()[t] = x_next;
                let s = flux(du, p);
                let d = [x_next[0] - s[0], x_next[1] - s[1]];
                residual += self.space.area(t) * d[0].hypot(d[1]).powf(q);
            }
            report.consistency.push(residual.powf(1.0 / q));

            if n >= 2 {
                let prev = u_prev.as_ref().expect("previous iterate exists after the first sweep");
                let diff = P1Function::from_values(
                    u.values().iter().zip(prev.values()).map(|(a, b)| a - b).collect(),
                );
                let base = self.space.l2_norm(prev);
                let change = self.space.l2_norm(&diff);
                rel_change = if base > 0.0 { change / base } else { change };
            }
            trace!("dc sweep {n}: rel change {rel_change:e}, cg {}", cg.iterations);
            u_prev = Some(u);

            let done = n >= 2 && rel_change < opts.eps_n;
            if done || n >= opts.max_iter {
                report.iterations = n;
                report.rel_change = rel_change;
                report.converged = done;
                if !done {
                    debug!("dc iteration stopped at max_iter = {n} with relative change {rel_change:e}");
                }
                let state = DcState {
                    u: u_prev.expect("at least one sweep"),
                    xi,
                    nu,
                    n,
                    rel_change,
                };
                return Ok((state, report));
            }
        }
    }
}

/// One-shot decomposition-coordination solve.
pub fn dc_solve(
    mesh: &Mesh,
    f: &Source,
    p: f64,
    opts: &DcOptions,
    init: &DcInit,
) -> Result<(P1Function, DcReport), SolveError> {
    let solver = PLaplaceSolver::new(mesh, p)?;
    let (state, report) = solver.solve(f, opts, init, None)?;
    Ok((state.u, report))
}
