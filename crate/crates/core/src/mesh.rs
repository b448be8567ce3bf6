//! Conforming triangle meshes, structured generators and newest-vertex bisection.
//!
//! Triangles are stored counterclockwise as `[v0, v1, v2]`. The edge opposite
//! `v0` is the refinement edge: bisection splits it at its midpoint `m` and
//! produces the children `[m, v0, v1]` and `[m, v2, v0]`, so the newest vertex
//! of every child sits at local position 0 again.

use std::collections::HashMap;

use crate::error::MeshError;

pub type Point = [f64; 2];

/// How new boundary vertices are placed during refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryShape {
    /// Straight boundary segments; midpoints stay on the segment.
    Polygon,
    /// The unit circle centred at the origin; new boundary midpoints are
    /// projected radially onto it.
    UnitCircle,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    generation: Vec<u32>,
    parent: Vec<Option<usize>>,
    shape: BoundaryShape,
}

/// Result of one refinement step together with the data needed to transfer
/// fields from the coarse mesh.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: Mesh,
    /// Endpoints of the bisected edge for every new vertex, in creation order.
    /// Vertex `coarse.num_vertices() + i` is the midpoint of `midpoints[i]`.
    pub midpoints: Vec<(usize, usize)>,
    /// Index of the coarse element each fine element lies in.
    pub origin: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh with polygonal boundary from raw arrays.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Result<Self, MeshError> {
        Self::with_shape(vertices, triangles, boundary, BoundaryShape::Polygon)
    }

    pub fn with_shape(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        shape: BoundaryShape,
    ) -> Result<Self, MeshError> {
        if boundary.len() != vertices.len() {
            return Err(MeshError::LengthMismatch {
                what: "boundary flags",
                expected: vertices.len(),
                found: boundary.len(),
            });
        }
        let nt = triangles.len();
        let mesh = Mesh {
            vertices,
            triangles,
            boundary,
            generation: vec![0; nt],
            parent: vec![None; nt],
            shape,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::InvalidVertex { triangle: t, vertex: v });
                }
            }
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(MeshError::Degenerate { triangle: t, area });
            }
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    /// Coarse element a freshly bisected element came from; `None` for
    /// elements that were not touched by the most recent refinement.
    pub fn parent(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn shape(&self) -> BoundaryShape {
        self.shape
    }

    pub fn num_interior_vertices(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// `h_T = |T|^{1/2}`.
    pub fn h_t(&self, t: usize) -> f64 {
        self.area(t).sqrt()
    }

    /// Per-element sizes `h_T`.
    pub fn mesh_sizes(&self) -> Vec<f64> {
        (0..self.num_triangles()).map(|t| self.h_t(t)).collect()
    }

    /// Smallest interior angle (radians) over all triangles.
    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let p = self.corners(t);
                (0..3)
                    .map(|i| {
                        let o = p[i];
                        let u = sub(p[(i + 1) % 3], o);
                        let w = sub(p[(i + 2) % 3], o);
                        let cos = dot(u, w) / (norm(u) * norm(w));
                        cos.clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Centroid of triangle `t`.
    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Applies `map` to every vertex. Orientation must be preserved.
    pub fn transformed(&self, map: impl Fn(Point) -> Point) -> Result<Mesh, MeshError> {
        let mut out = self.clone();
        out.vertices.iter_mut().for_each(|v| *v = map(*v));
        out.shape = BoundaryShape::Polygon;
        out.validate()?;
        Ok(out)
    }

    /// Newest-vertex bisection of every marked triangle followed by
    /// conformity closure.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        self.refine_with_map(marked).map(|r| r.mesh)
    }

    /// Bisects every triangle once; nested meshes of a uniformly refined family.
    pub fn refine_uniform(&self) -> Mesh {
        let all: Vec<usize> = (0..self.num_triangles()).collect();
        self.refine(&all).expect("all indices are valid")
    }

    pub fn refine_with_map(&self, marked: &[usize]) -> Result<Refinement, MeshError> {
        if marked.is_empty() {
            return Err(MeshError::EmptyMarking);
        }
        let nt = self.num_triangles();
        if let Some(&bad) = marked.iter().find(|&&t| t >= nt) {
            return Err(MeshError::InvalidTriangle { triangle: bad, count: nt });
        }

        let topo = Topology::build(self)?;
        let ne = topo.edges.len();

        // Edge marking with closure: a triangle with any marked edge must
        // have its refinement edge marked as well.
        let mut edge_marked = vec![false; ne];
        let mut work: Vec<usize> = Vec::new();
        let mark_edge = |e: usize, marks: &mut Vec<bool>, work: &mut Vec<usize>| {
            if !marks[e] {
                marks[e] = true;
                work.extend(topo.edges[e].tris.iter().flatten().copied());
            }
        };
        for &t in marked {
            mark_edge(topo.tri_edges[t][0], &mut edge_marked, &mut work);
        }
        while let Some(t) = work.pop() {
            let [r, e1, e2] = topo.tri_edges[t];
            if !edge_marked[r] && (edge_marked[e1] || edge_marked[e2]) {
                mark_edge(r, &mut edge_marked, &mut work);
            }
        }

        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary.clone();
        let mut midpoint_of: HashMap<u64, usize> = HashMap::new();
        let mut midpoints = Vec::new();
        for (e, edge) in topo.edges.iter().enumerate() {
            if !edge_marked[e] {
                continue;
            }
            let [a, b] = edge.verts;
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let mut m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            let on_boundary = edge.tris[1].is_none();
            if on_boundary && self.shape == BoundaryShape::UnitCircle {
                let r = norm(m);
                m = [m[0] / r, m[1] / r];
            }
            midpoint_of.insert(edge_key(a, b), vertices.len());
            midpoints.push((a, b));
            vertices.push(m);
            boundary.push(on_boundary);
        }

        let mut triangles = Vec::with_capacity(nt + 2 * marked.len());
        let mut generation = Vec::with_capacity(triangles.capacity());
        let mut parent = Vec::with_capacity(triangles.capacity());
        let mut origin = Vec::with_capacity(triangles.capacity());
        for (t, &tri) in self.triangles.iter().enumerate() {
            let before = triangles.len();
            bisect(tri, &midpoint_of, 0, &mut |child, depth| {
                triangles.push(child);
                generation.push(self.generation[t] + depth);
                parent.push(if depth > 0 { Some(t) } else { None });
            });
            origin.extend(std::iter::repeat_n(t, triangles.len() - before));
        }

        let mesh = Mesh {
            vertices,
            triangles,
            boundary,
            generation,
            parent,
            shape: self.shape,
        };
        Ok(Refinement { mesh, midpoints, origin })
    }
}

fn bisect(
    tri: [usize; 3],
    midpoint_of: &HashMap<u64, usize>,
    depth: u32,
    emit: &mut impl FnMut([usize; 3], u32),
) {
    let [a, b, c] = tri;
    match midpoint_of.get(&edge_key(b, c)) {
        None => emit(tri, depth),
        Some(&m) => {
            bisect([m, a, b], midpoint_of, depth + 1, emit);
            bisect([m, c, a], midpoint_of, depth + 1, emit);
        }
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

/// Undirected edges with their adjacent triangles.
pub(crate) struct Topology {
    pub edges: Vec<TopoEdge>,
    /// Edge id opposite local vertex `i` of each triangle.
    pub tri_edges: Vec<[usize; 3]>,
}

pub(crate) struct TopoEdge {
    /// Endpoints as traversed by `tris[0]` (counterclockwise).
    pub verts: [usize; 2],
    pub tris: [Option<usize>; 2],
}

impl Topology {
    pub fn build(mesh: &Mesh) -> Result<Self, MeshError> {
        let nt = mesh.num_triangles();
        let mut lookup: HashMap<u64, usize> = HashMap::with_capacity(2 * nt);
        let mut edges: Vec<TopoEdge> = Vec::with_capacity(2 * nt);
        let mut tri_edges = vec![[0usize; 3]; nt];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = edge_key(a, b);
                let e = match lookup.get(&key) {
                    None => {
                        lookup.insert(key, edges.len());
                        edges.push(TopoEdge { verts: [a, b], tris: [Some(t), None] });
                        edges.len() - 1
                    }
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.tris[1].is_some() {
                            return Err(MeshError::NonConforming(format!(
                                "edge ({a}, {b}) is shared by more than two triangles"
                            )));
                        }
                        if edge.verts != [b, a] {
                            return Err(MeshError::NonConforming(format!(
                                "edge ({a}, {b}) has inconsistent orientation in triangle {t}"
                            )));
                        }
                        edge.tris[1] = Some(t);
                        e
                    }
                };
                tri_edges[t][i] = e;
            }
        }
        Ok(Topology { edges, tri_edges })
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Structured mesh of `(0,1)^2` with `n` cells per side.
pub fn generate_unit_square(n: usize) -> Mesh {
    assert!(n >= 1, "unit square needs at least one cell per side");
    structured_grid(n, 1, |_, _| true)
}

/// Structured mesh of `(0,2)^2 \ [1,2)^2` with `n` cells per unit length.
pub fn generate_lshape(n: usize) -> Mesh {
    assert!(n >= 1, "L-shape needs at least one cell per unit length");
    // Cell (i, j) is kept unless it lies in the removed upper-right quadrant.
    structured_grid(2 * n, 2, |i, j| !(i >= n && j >= n))
}

/// Grid of `cells x cells` squares over `(0, extent)^2`, keeping the cells for
/// which `keep(i, j)` holds. Each cell is split along its (0,0)-(1,1)
/// diagonal, which is the refinement edge of both halves.
fn structured_grid(cells: usize, extent: usize, keep: impl Fn(usize, usize) -> bool) -> Mesh {
    let h = extent as f64 / cells as f64;
    let side = cells + 1;
    let mut id = vec![usize::MAX; side * side];
    let mut used = vec![false; side * side];
    for j in 0..cells {
        for i in 0..cells {
            if keep(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[(j + dj) * side + i + di] = true;
                }
            }
        }
    }
    let mut vertices = Vec::new();
    for j in 0..side {
        for i in 0..side {
            if used[j * side + i] {
                id[j * side + i] = vertices.len();
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            if !keep(i, j) {
                continue;
            }
            let v00 = id[j * side + i];
            let v10 = id[j * side + i + 1];
            let v01 = id[(j + 1) * side + i];
            let v11 = id[(j + 1) * side + i + 1];
            triangles.push([v10, v11, v00]);
            triangles.push([v01, v00, v11]);
        }
    }
    let mut boundary = vec![false; vertices.len()];
    let mut mesh = Mesh {
        generation: vec![0; triangles.len()],
        parent: vec![None; triangles.len()],
        vertices,
        triangles,
        boundary: Vec::new(),
        shape: BoundaryShape::Polygon,
    };
    let topo = Topology::build(&mesh).expect("structured grid is conforming");
    for e in topo.edges.iter().filter(|e| e.tris[1].is_none()) {
        boundary[e.verts[0]] = true;
        boundary[e.verts[1]] = true;
    }
    mesh.boundary = boundary;
    mesh
}

/// Unit disk: a hexagonal fan uniformly bisected `levels` times, with
/// boundary vertices on the unit circle.
pub fn generate_disk(levels: usize) -> Mesh {
    let mut vertices = vec![[0.0, 0.0]];
    for k in 0..6 {
        let phi = k as f64 * std::f64::consts::PI / 3.0;
        vertices.push([phi.cos(), phi.sin()]);
    }
    let triangles: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    let mut boundary = vec![true; 7];
    boundary[0] = false;
    let mut mesh = Mesh::with_shape(vertices, triangles, boundary, BoundaryShape::UnitCircle)
        .expect("hexagon fan is valid");
    for _ in 0..levels {
        mesh = mesh.refine_uniform();
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_edges(mesh: &Mesh) -> usize {
        Topology::build(mesh).unwrap().edges.len()
    }

    #[test]
    fn square_counts() {
        for (n, nv, nt) in [(1, 4, 2), (2, 9, 8), (13, 196, 338)] {
            let m = generate_unit_square(n);
            assert_eq!((m.num_vertices(), m.num_triangles()), (nv, nt));
            assert!((m.total_area() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lshape_counts_and_area() {
        let m = generate_lshape(1);
        assert_eq!((m.num_vertices(), m.num_triangles()), (8, 6));
        let m = generate_lshape(2);
        assert_eq!((m.num_vertices(), m.num_triangles()), (21, 24));
        for n in 1..6 {
            assert!((generate_lshape(n).total_area() - 3.0).abs() < 1e-13);
        }
        // (0.5,0.5), (1,0.5), (1.5,0.5), (0.5,1), (0.5,1.5)
        let m = generate_lshape(2);
        assert_eq!(m.num_interior_vertices(), 5);
        let reentrant = m.vertices().iter().position(|p| *p == [1.0, 1.0]).unwrap();
        assert!(m.is_boundary(reentrant));
    }

    #[test]
    fn disk_hexagon() {
        let m = generate_disk(0);
        assert_eq!((m.num_vertices(), m.num_triangles()), (7, 6));
        for v in 1..7 {
            assert!((norm(m.vertices()[v]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disk_boundary_on_circle_and_area_increases() {
        let mut prev_area = 0.0;
        let mut prev_bnd = 0;
        for levels in 0..8 {
            let m = generate_disk(levels);
            let bnd: Vec<usize> = (0..m.num_vertices()).filter(|&v| m.is_boundary(v)).collect();
            for &v in &bnd {
                assert!((norm(m.vertices()[v]) - 1.0).abs() < 1e-12);
            }
            let area = m.total_area();
            assert!(area < std::f64::consts::PI);
            if bnd.len() > prev_bnd {
                assert!(area > prev_area);
            } else {
                assert_eq!(bnd.len(), prev_bnd);
                assert!((area - prev_area).abs() < 1e-14);
            }
            prev_area = area;
            prev_bnd = bnd.len();
        }
        // Boundary segments of a regular 6*2^j-gon.
        let m = generate_disk(6);
        let nb = m.boundary().iter().filter(|b| **b).count();
        assert_eq!(nb, 48);
        let inscribed = 0.5 * nb as f64 * (2.0 * std::f64::consts::PI / nb as f64).sin();
        assert!((m.total_area() - inscribed).abs() < 1e-12);
    }

    #[test]
    fn two_triangle_square_marks_both() {
        let m = generate_unit_square(1);
        let r = m.refine(&[0]).unwrap();
        assert_eq!((r.num_vertices(), r.num_triangles()), (5, 4));
        assert_eq!(r.vertices()[4], [0.5, 0.5]);
        assert!(!r.is_boundary(4));
    }

    #[test]
    fn uniform_refine_of_n2() {
        let m = generate_unit_square(2);
        let all: Vec<usize> = (0..8).collect();
        let r = m.refine(&all).unwrap();
        assert_eq!((r.num_triangles(), r.num_vertices()), (16, 13));
        let e = euler_edges(&r);
        assert_eq!(r.num_vertices() + r.num_triangles(), e + 1);
    }

    #[test]
    fn closure_propagates_across_refinement_edges() {
        // After one uniform refinement the refinement edges are the old legs;
        // marking an element whose leg is interior forces its neighbour too.
        let m = generate_unit_square(2).refine_uniform();
        let topo = Topology::build(&m).unwrap();
        let t = (0..m.num_triangles())
            .find(|&t| topo.edges[topo.tri_edges[t][0]].tris[1].is_some())
            .unwrap();
        let r = m.refine(&[t]).unwrap();
        Topology::build(&r).unwrap();
        assert!(r.num_triangles() >= m.num_triangles() + 2);
        assert!((r.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generation_and_parent_track_bisection_depth() {
        let m = generate_unit_square(3).refine_uniform();
        let r = m.refine_with_map(&[0, 7]).unwrap();
        for (t, parent) in r.mesh.parent().iter().enumerate() {
            let o = r.origin[t];
            let depth = r.mesh.generation()[t] - m.generation()[o];
            let ratio = m.area(o) / r.mesh.area(t);
            assert!((ratio - f64::from(1u32 << depth)).abs() < 1e-12);
            match parent {
                Some(p) => {
                    assert_eq!(*p, o);
                    assert!(depth >= 1);
                }
                None => assert_eq!(depth, 0),
            }
        }
        for &t in &[0, 7] {
            assert!(r.origin.iter().filter(|&&o| o == t).count() >= 2);
        }
    }

    #[test]
    fn refine_rejects_bad_input() {
        let m = generate_unit_square(1);
        assert!(matches!(m.refine(&[]), Err(MeshError::EmptyMarking)));
        assert!(matches!(m.refine(&[2]), Err(MeshError::InvalidTriangle { .. })));
    }

    #[test]
    fn nested_vertices_preserved() {
        let m = generate_lshape(2);
        let r = m.refine(&[3, 10]).unwrap();
        assert_eq!(&r.vertices()[..m.num_vertices()], m.vertices());
    }

    #[test]
    fn sizes() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![true; 3])
            .unwrap();
        assert!((m.h_t(0) - 0.5f64.sqrt()).abs() < 1e-15);
        let r = m.refine(&[0]).unwrap();
        for t in 0..2 {
            assert!((r.h_t(t) - m.h_t(0) / 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn min_angle_is_stable_under_uniform_refinement() {
        let mut m = generate_lshape(2);
        let initial = m.min_angle();
        for _ in 0..6 {
            m = m.refine_uniform();
            assert!(m.min_angle() >= initial - 1e-12);
        }
        let mut d = generate_disk(0);
        let mut history = Vec::new();
        for _ in 0..8 {
            d = d.refine_uniform();
            history.push(d.min_angle());
        }
        let floor = history[1];
        assert!(history[2..].iter().all(|&a| a >= floor * 0.5));
    }

    #[test]
    fn degenerate_rejected() {
        let err = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]], vec![true; 3]);
        assert!(matches!(err, Err(MeshError::Degenerate { .. })));
        let cw = Mesh::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]], vec![true; 3]);
        assert!(cw.is_err());
    }
}
