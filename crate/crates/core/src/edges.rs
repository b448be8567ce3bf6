//! Edge adjacency with fixed unit normals on interior edges.

use crate::error::MeshError;
use crate::mesh::{norm, sub, Mesh, Point, Topology};

#[derive(Clone, Debug)]
pub struct InteriorEdge {
    /// Endpoints in the counterclockwise order of `plus`.
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: usize,
    /// Unit normal pointing from `plus` into `minus`.
    pub normal: Point,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub triangle: usize,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct EdgeTable {
    pub interior: Vec<InteriorEdge>,
    pub boundary: Vec<BoundaryEdge>,
    /// Interior edge opposite local vertex `i` of each triangle, if any.
    pub element_edges: Vec<[Option<usize>; 3]>,
}

impl EdgeTable {
    /// `h_F = |F|` for each interior edge.
    pub fn interior_sizes(&self) -> Vec<f64> {
        self.interior.iter().map(|e| e.length).collect()
    }
}

/// Builds the edge table, failing on meshes with hanging nodes or edges
/// shared by more than two triangles.
pub fn edge_table(mesh: &Mesh) -> Result<EdgeTable, MeshError> {
    let topo = Topology::build(mesh)?;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut index = vec![None; topo.edges.len()];
    for (e, edge) in topo.edges.iter().enumerate() {
        let [a, b] = edge.verts;
        let d = sub(mesh.vertices()[b], mesh.vertices()[a]);
        let length = norm(d);
        match edge.tris {
            [Some(plus), Some(minus)] => {
                index[e] = Some(interior.len());
                // Outward normal of a counterclockwise triangle: rotate the
                // edge direction clockwise.
                interior.push(InteriorEdge {
                    vertices: [a, b],
                    plus,
                    minus,
                    normal: [d[1] / length, -d[0] / length],
                    length,
                });
            }
            [Some(t), None] => {
                if !mesh.is_boundary(a) || !mesh.is_boundary(b) {
                    let hanging = if mesh.is_boundary(a) { b } else { a };
                    return Err(MeshError::NonConforming(format!(
                        "edge ({a}, {b}) of triangle {t} has a single neighbour but vertex {hanging} is interior"
                    )));
                }
                boundary.push(BoundaryEdge { vertices: [a, b], triangle: t, length });
            }
            _ => unreachable!("every edge has a first triangle"),
        }
    }
    let element_edges = topo
        .tri_edges
        .iter()
        .map(|te| [index[te[0]], index[te[1]], index[te[2]]])
        .collect();
    Ok(EdgeTable { interior, boundary, element_edges })
}
