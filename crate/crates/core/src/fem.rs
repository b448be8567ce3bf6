//! Continuous piecewise-linear finite elements on a [`Mesh`].

use crate::error::FemError;
use crate::linalg::{pcg, CgStats, SparseSymMatrix};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{QuadRule, DEGREE5};

/// Relative residual tolerance for every Dirichlet solve.
pub const LINEAR_RTOL: f64 = 1e-10;

/// Nodal coefficients of a continuous piecewise-linear function.
#[derive(Clone, Debug, PartialEq)]
pub struct P1Function {
    values: Vec<f64>,
}

impl P1Function {
    pub fn zeros(n: usize) -> Self {
        P1Function { values: vec![0.0; n] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        P1Function { values }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        P1Function { values: mesh.vertices().iter().map(|&x| f(x)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        P1Function { values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Largest nodal magnitude; exact `L^inf` norm for P1.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at barycentric coordinates `bary` of triangle `tri`.
    pub fn eval_bary(&self, tri: &[usize; 3], bary: &[f64; 3]) -> f64 {
        bary[0] * self.values[tri[0]] + bary[1] * self.values[tri[1]] + bary[2] * self.values[tri[2]]
    }

    /// Prolongation onto a refined mesh: coarse vertices keep their values,
    /// midpoints take the mean of their edge endpoints.
    pub fn prolongate(&self, midpoints: &[(usize, usize)]) -> Self {
        let mut values = self.values.clone();
        values.extend(midpoints.iter().map(|&(a, b)| 0.5 * (self.values[a] + self.values[b])));
        P1Function { values }
    }
}

/// One 2-vector per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct PwConstVecField {
    values: Vec<[f64; 2]>,
}

impl PwConstVecField {
    pub fn zeros(n: usize) -> Self {
        PwConstVecField { values: vec![[0.0; 2]; n] }
    }

    pub fn from_values(values: Vec<[f64; 2]>) -> Self {
        PwConstVecField { values }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Children inherit the value of the coarse element they lie in.
    pub fn transfer(&self, origin: &[usize]) -> Self {
        PwConstVecField { values: origin.iter().map(|&o| self.values[o]).collect() }
    }
}

/// Right-hand side data, evaluated at quadrature points.
pub enum Source<'a> {
    Constant(f64),
    Function(&'a dyn Fn(Point) -> f64),
    /// `(max(u, 0) / scale)^exponent` for a nodal function `u`.
    PositivePower {
        u: &'a P1Function,
        scale: f64,
        exponent: f64,
    },
}

impl Source<'_> {
    fn eval(&self, tri: &[usize; 3], bary: &[f64; 3], x: Point) -> f64 {
        match self {
            Source::Constant(c) => *c,
            Source::Function(f) => f(x),
            Source::PositivePower { u, scale, exponent } => {
                let v = u.eval_bary(tri, bary).max(0.0) / scale;
                if v == 0.0 {
                    0.0
                } else {
                    v.powf(*exponent)
                }
            }
        }
    }
}

/// Precomputed element geometry for the P1 space on one mesh.
pub struct P1Space<'m> {
    mesh: &'m Mesh,
    area: Vec<f64>,
    /// Gradients of the three barycentric coordinates per element.
    basis_grad: Vec<[[f64; 2]; 3]>,
}

impl<'m> P1Space<'m> {
    pub fn new(mesh: &'m Mesh) -> Result<Self, FemError> {
        let nt = mesh.num_triangles();
        let mut area = Vec::with_capacity(nt);
        let mut basis_grad = Vec::with_capacity(nt);
        for t in 0..nt {
            let [p0, p1, p2] = mesh.corners(t);
            let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
            if !(twice > 0.0) {
                return Err(crate::error::MeshError::Degenerate { triangle: t, area: 0.5 * twice }.into());
            }
            area.push(0.5 * twice);
            basis_grad.push([
                [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
                [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
                [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
            ]);
        }
        Ok(P1Space { mesh, area, basis_grad })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn area(&self, t: usize) -> f64 {
        self.area[t]
    }

    pub fn basis_grad(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.basis_grad[t]
    }

    fn check_len(&self, u: &P1Function) -> Result<(), FemError> {
        if u.len() != self.mesh.num_vertices() {
            return Err(FemError::InvalidInput(format!(
                "P1 function has {} coefficients, mesh has {} vertices",
                u.len(),
                self.mesh.num_vertices()
            )));
        }
        Ok(())
    }

    /// `K_ij = sum_T |T| grad phi_i . grad phi_j`.
    pub fn stiffness(&self) -> SparseSymMatrix {
        let mesh = self.mesh;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
        for tri in mesh.triangles() {
            for &i in tri {
                rows[i].extend_from_slice(tri);
            }
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let mut k = SparseSymMatrix::from_pattern(&rows);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = &self.basis_grad[t];
            for a in 0..3 {
                for b in 0..3 {
                    let v = self.area[t] * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    k.add(tri[a], tri[b], v);
                }
            }
        }
        k
    }

    /// `b_i = sum_T [ int_T f phi_i - |T| g_T . grad phi_i ]`.
    pub fn rhs(&self, f: &Source, g: Option<&PwConstVecField>) -> Result<Vec<f64>, FemError> {
        let mesh = self.mesh;
        if let Some(g) = g {
            if g.len() != mesh.num_triangles() {
                return Err(FemError::InvalidInput(format!(
                    "vector field has {} entries, mesh has {} triangles",
                    g.len(),
                    mesh.num_triangles()
                )));
            }
        }
        if let Source::PositivePower { u, scale, .. } = f {
            self.check_len(u)?;
            if !(*scale > 0.0) {
                return Err(FemError::InvalidInput(format!("source scale must be positive, got {scale}")));
            }
        }
        let mut b = vec![0.0; mesh.num_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let corners = mesh.corners(t);
            let area = self.area[t];
            let mut local = [0.0; 3];
            if !matches!(f, Source::Constant(c) if *c == 0.0) {
                for (l, w) in DEGREE5.iter() {
                    let x = bary_point(&corners, l);
                    let fv = f.eval(tri, l, x);
                    for i in 0..3 {
                        local[i] += w * fv * l[i];
                    }
                }
                local.iter_mut().for_each(|v| *v *= area);
            }
            if let Some(g) = g {
                let gt = g.values[t];
                let gr = &self.basis_grad[t];
                for i in 0..3 {
                    local[i] -= area * (gt[0] * gr[i][0] + gt[1] * gr[i][1]);
                }
            }
            for i in 0..3 {
                b[tri[i]] += local[i];
            }
        }
        Ok(b)
    }

    pub fn grad(&self, u: &P1Function) -> PwConstVecField {
        let values = self
            .mesh
            .triangles()
            .iter()
            .zip(&self.basis_grad)
            .map(|(tri, g)| {
                let mut d = [0.0; 2];
                for i in 0..3 {
                    let c = u.values[tri[i]];
                    d[0] += c * g[i][0];
                    d[1] += c * g[i][1];
                }
                d
            })
            .collect();
        PwConstVecField { values }
    }

    /// `int_T |u|^p` per element with the given rule.
    pub fn element_power_integral(&self, u: &P1Function, p: f64, t: usize, rule: &QuadRule) -> f64 {
        let tri = &self.mesh.triangles()[t];
        let s: f64 = rule.iter().map(|(l, w)| w * u.eval_bary(tri, l).abs().powf(p)).sum();
        self.area[t] * s
    }

    /// `||u||_{L^p}` with the degree-5 rule.
    pub fn lp_norm(&self, u: &P1Function, p: f64) -> Result<f64, FemError> {
        check_exponent(p)?;
        self.check_len(u)?;
        let s: f64 = (0..self.mesh.num_triangles())
            .map(|t| self.element_power_integral(u, p, t, &DEGREE5))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    pub fn l2_norm(&self, u: &P1Function) -> f64 {
        let s: f64 = (0..self.mesh.num_triangles())
            .map(|t| {
                let tri = &self.mesh.triangles()[t];
                let [a, b, c] = [u.values[tri[0]], u.values[tri[1]], u.values[tri[2]]];
                // Exact for P1: |T|/6 (a^2 + b^2 + c^2 + ab + bc + ca).
                self.area[t] / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a)
            })
            .sum();
        s.sqrt()
    }

    /// `int |grad u|^p`, exact for P1.
    pub fn w1p_seminorm_p(&self, u: &P1Function, p: f64) -> Result<f64, FemError> {
        check_exponent(p)?;
        self.check_len(u)?;
        let g = self.grad(u);
        Ok(g.values
            .iter()
            .zip(&self.area)
            .map(|(d, a)| a * d[0].hypot(d[1]).powf(p))
            .sum())
    }

    /// `int |grad u|^p / int |u|^p`.
    pub fn rayleigh(&self, u: &P1Function, p: f64) -> Result<f64, FemError> {
        let lp = self.lp_norm(u, p)?;
        if lp == 0.0 {
            return Err(FemError::ZeroFunction);
        }
        Ok(self.w1p_seminorm_p(u, p)? / lp.powf(p))
    }
}

fn check_exponent(p: f64) -> Result<(), FemError> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(FemError::InvalidInput(format!("exponent p must satisfy p > 1, got {p}")))
    }
}

pub(crate) fn bary_point(corners: &[Point; 3], l: &[f64; 3]) -> Point {
    [
        l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
        l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
    ]
}

/// Homogeneous Dirichlet problem reduced to the interior vertices.
pub struct DirichletSolver {
    free: Vec<usize>,
    reduced: SparseSymMatrix,
    n_full: usize,
}

impl DirichletSolver {
    pub fn new(k: &SparseSymMatrix, boundary: &[bool]) -> Result<Self, FemError> {
        if boundary.len() != k.dim() {
            return Err(FemError::InvalidInput(format!(
                "{} boundary flags for a {}x{} matrix",
                boundary.len(),
                k.dim(),
                k.dim()
            )));
        }
        let keep: Vec<bool> = boundary.iter().map(|b| !b).collect();
        let free = (0..k.dim()).filter(|&i| keep[i]).collect();
        Ok(DirichletSolver { free, reduced: k.restrict(&keep), n_full: k.dim() })
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Solves on interior unknowns; `guess` seeds conjugate gradients.
    pub fn solve(&self, b: &[f64], guess: Option<&P1Function>) -> Result<(P1Function, CgStats), FemError> {
        if b.len() != self.n_full {
            return Err(FemError::InvalidInput(format!(
                "right-hand side has {} entries, expected {}",
                b.len(),
                self.n_full
            )));
        }
        let rb: Vec<f64> = self.free.iter().map(|&i| b[i]).collect();
        let mut x: Vec<f64> = match guess {
            Some(g) if g.len() == self.n_full => self.free.iter().map(|&i| g.values[i]).collect(),
            _ => vec![0.0; self.free.len()],
        };
        let cap = (20 * self.free.len()).max(20);
        let stats = pcg(&self.reduced, &rb, &mut x, LINEAR_RTOL, cap)?;
        let mut u = vec![0.0; self.n_full];
        for (&i, v) in self.free.iter().zip(x) {
            u[i] = v;
        }
        Ok((P1Function { values: u }, stats))
    }
}

pub fn assemble_stiffness(mesh: &Mesh) -> Result<SparseSymMatrix, FemError> {
    Ok(P1Space::new(mesh)?.stiffness())
}

pub fn assemble_rhs(mesh: &Mesh, f: &Source, g: Option<&PwConstVecField>) -> Result<Vec<f64>, FemError> {
    P1Space::new(mesh)?.rhs(f, g)
}

/// `u = 0` on boundary vertices and `K u = b` on the interior ones.
pub fn solve_dirichlet(k: &SparseSymMatrix, b: &[f64], boundary: &[bool]) -> Result<P1Function, FemError> {
    DirichletSolver::new(k, boundary)?.solve(b, None).map(|(u, _)| u)
}

pub fn grad(mesh: &Mesh, u: &P1Function) -> Result<PwConstVecField, FemError> {
    let space = P1Space::new(mesh)?;
    space.check_len(u)?;
    Ok(space.grad(u))
}

pub fn lp_norm(mesh: &Mesh, u: &P1Function, p: f64) -> Result<f64, FemError> {
    P1Space::new(mesh)?.lp_norm(u, p)
}

pub fn sup_norm(u: &P1Function) -> f64 {
    u.sup_norm()
}

pub fn w1p_seminorm_p(mesh: &Mesh, u: &P1Function, p: f64) -> Result<f64, FemError> {
    P1Space::new(mesh)?.w1p_seminorm_p(u, p)
}

pub fn rayleigh(mesh: &Mesh, u: &P1Function, p: f64) -> Result<f64, FemError> {
    P1Space::new(mesh)?.rayleigh(u, p)
}
