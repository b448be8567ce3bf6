//! Residual error indicators and bulk (Dörfler) marking.
//!
//! For an element `T` and conjugate exponent `q = p/(p-1)`,
//!
//! ```text
//! eta_T^q = h_T^q ||mu |u|^{p-2} u||_{L^q(T)}^q + sum_{F in dT interior} h_F ||[sigma] . n_F||_{L^q(F)}^q
//! ```
//!
//! with `sigma = |grad u|^{p-2} grad u`. Since `(p-1) q = p`, the element term
//! equals `h_T^q mu^q int_T |u|^p`. The discrete flux is constant per element,
//! so each jump is constant along its edge and `||J||_{L^q(F)}^q = |J|^q |F|`.

use crate::edges::EdgeTable;
use crate::error::FemError;
use crate::fem::{P1Function, P1Space};
use crate::mesh::Mesh;
use crate::plap::flux;
use crate::quadrature::DEGREE5;

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorSet {
    /// `eta_T^q` per element.
    pub eta_q: Vec<f64>,
    /// `(sum_T eta_T^q)^{1/q}`.
    pub total_eta: f64,
    pub q: f64,
    pub mu: f64,
    /// Smallest index attaining the largest `eta_q`.
    pub argmax_element: usize,
}

impl IndicatorSet {
    pub fn from_values(eta_q: Vec<f64>, q: f64, mu: f64) -> Self {
        let sum: f64 = eta_q.iter().sum();
        let argmax_element = eta_q
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0;
        IndicatorSet { total_eta: sum.powf(1.0 / q), eta_q, q, mu, argmax_element }
    }

    /// Estimator restricted to a set of elements.
    pub fn partial_eta(&self, elements: &[usize]) -> f64 {
        elements.iter().map(|&t| self.eta_q[t]).sum::<f64>().powf(1.0 / self.q)
    }
}

/// Indicator evaluation on one mesh with per-element fluxes cached.
pub struct Estimator<'a> {
    space: P1Space<'a>,
    edges: &'a EdgeTable,
    flux: Vec<[f64; 2]>,
    p: f64,
    q: f64,
}

impl<'a> Estimator<'a> {
    pub fn new(mesh: &'a Mesh, edges: &'a EdgeTable, u: &P1Function, p: f64) -> Result<Self, FemError> {
        if !(p > 1.0) {
            return Err(FemError::InvalidInput(format!("exponent p must satisfy p > 1, got {p}")));
        }
        if u.len() != mesh.num_vertices() || edges.element_edges.len() != mesh.num_triangles() {
            return Err(FemError::InvalidInput("function or edge table does not match the mesh".into()));
        }
        let space = P1Space::new(mesh)?;
        let flux = space.grad(u).values().iter().map(|&g| flux(g, p)).collect();
        Ok(Estimator { space, edges, flux, p, q: p / (p - 1.0) })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `h_T^q mu^q int_T |u|^p`.
    pub fn residual_term(&self, u: &P1Function, mu: f64, t: usize) -> f64 {
        let area = self.space.area(t);
        let h_q = area.powf(0.5 * self.q);
        h_q * mu.abs().powf(self.q) * self.space.element_power_integral(u, self.p, t, &DEGREE5)
    }

    /// `h_F |[sigma] . n_F|^q |F|` for interior edge `e`.
    pub fn jump_term(&self, e: usize) -> f64 {
        let edge = &self.edges.interior[e];
        let a = self.flux[edge.plus];
        let b = self.flux[edge.minus];
        let jump = (a[0] - b[0]) * edge.normal[0] + (a[1] - b[1]) * edge.normal[1];
        edge.length * jump.abs().powf(self.q) * edge.length
    }

    pub fn element(&self, u: &P1Function, mu: f64, t: usize) -> f64 {
        let jumps: f64 = self.edges.element_edges[t].iter().flatten().map(|&e| self.jump_term(e)).sum();
        self.residual_term(u, mu, t) + jumps
    }

    pub fn all(&self, u: &P1Function, mu: f64) -> IndicatorSet {
        let jump: Vec<f64> = (0..self.edges.interior.len()).map(|e| self.jump_term(e)).collect();
        let eta_q = (0..self.space.mesh().num_triangles())
            .map(|t| {
                self.residual_term(u, mu, t)
                    + self.edges.element_edges[t].iter().flatten().map(|&e| jump[e]).sum::<f64>()
            })
            .collect();
        IndicatorSet::from_values(eta_q, self.q, mu)
    }
}

/// `eta_T^q` for one element.
pub fn element_indicator(
    mesh: &Mesh,
    edges: &EdgeTable,
    mu: f64,
    u: &P1Function,
    t: usize,
    p: f64,
) -> Result<f64, FemError> {
    if t >= mesh.num_triangles() {
        return Err(FemError::InvalidInput(format!("triangle {t} out of range")));
    }
    Ok(Estimator::new(mesh, edges, u, p)?.element(u, mu, t))
}

pub fn estimate_all(
    mesh: &Mesh,
    edges: &EdgeTable,
    mu: f64,
    u: &P1Function,
    p: f64,
) -> Result<IndicatorSet, FemError> {
    Ok(Estimator::new(mesh, edges, u, p)?.all(u, mu))
}

/// Smallest greedy set `M` (largest indicators first, ties by index) with
/// `sum_M eta_q >= theta^q sum eta_q`. Always contains the maximising
/// element. Returned in ascending index order.
pub fn dorfler_mark(ind: &IndicatorSet, theta: f64) -> Result<Vec<usize>, FemError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(FemError::InvalidInput(format!("theta must lie in (0, 1], got {theta}")));
    }
    if ind.eta_q.is_empty() {
        return Err(FemError::InvalidInput("no indicators to mark".into()));
    }
    let order = greedy_order(&ind.eta_q);
    let total: f64 = order.iter().map(|&t| ind.eta_q[t]).sum();
    if total == 0.0 {
        return Ok(vec![ind.argmax_element]);
    }
    let target = theta.powf(ind.q) * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for &t in &order {
        sum += ind.eta_q[t];
        marked.push(t);
        if sum >= target {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}

fn greedy_order(eta_q: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eta_q.len()).collect();
    order.sort_by(|&a, &b| eta_q[b].total_cmp(&eta_q[a]).then(a.cmp(&b)));
    order
}
