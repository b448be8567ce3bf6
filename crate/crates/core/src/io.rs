//! File formats: convergence CSV, legacy ASCII VTK and the plain-text mesh format.
//!
//! Mesh format:
//!
//! ```text
//! nv nt
//! x y b        (nv lines, b in {0, 1} marks boundary vertices)
//! i0 i1 i2     (nt lines, 0-based, refinement edge opposite i0)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::afem::{ConvergenceLog, LoopRecord};
use crate::error::IoError;
use crate::fem::P1Function;
use crate::mesh::Mesh;

pub const CSV_HEADER: &str = "k,vertices,elements,mu,lambda_iiss,eta,iiss_iters,dc_iters,marked,seconds";

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub fn convergence_csv(log: &ConvergenceLog) -> String {
    let mut s = String::with_capacity(64 * (log.rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &log.rows {
        // {:.16e} prints 17 significant digits, enough to round-trip binary64.
        writeln!(
            s,
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e}",
            r.k, r.vertices, r.elements, r.mu, r.lambda_iiss, r.eta, r.iiss_iters, r.dc_iters, r.marked, r.seconds
        )
        .expect("writing to a String cannot fail");
    }
    s
}

pub fn write_convergence_csv(log: &ConvergenceLog, path: &Path) -> Result<(), IoError> {
    write_file(path, &convergence_csv(log))
}

/// Parses the rows of a convergence CSV written by [`write_convergence_csv`].
pub fn read_convergence_csv(path: &Path) -> Result<Vec<LoopRecord>, IoError> {
    let text = read_file(path)?;
    let name = path.display().to_string();
    let err = |line: usize, message: String| IoError::Parse { path: name.clone(), line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(err(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(err(i + 1, format!("expected 10 fields, found {}", f.len())));
        }
        let int = |j: usize| f[j].parse::<usize>().map_err(|e| err(i + 1, format!("field {j}: {e}")));
        let real = |j: usize| f[j].parse::<f64>().map_err(|e| err(i + 1, format!("field {j}: {e}")));
        rows.push(LoopRecord {
            k: int(0)?,
            vertices: int(1)?,
            elements: int(2)?,
            mu: real(3)?,
            lambda_iiss: real(4)?,
            eta: real(5)?,
            iiss_iters: int(6)?,
            dc_iters: int(7)?,
            marked: int(8)?,
            seconds: real(9)?,
        });
    }
    Ok(rows)
}

/// Legacy ASCII VTK unstructured grid of triangles, with an optional nodal
/// scalar field named `u`.
pub fn vtk_string(mesh: &Mesh, u: Option<&P1Function>) -> String {
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    let mut s = String::with_capacity(40 * (nv + nt) + 256);
    s.push_str("# vtk DataFile Version 3.0\nplafem\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if let Some(u) = u {
        let _ = writeln!(s, "POINT_DATA {nv}\nSCALARS u double 1\nLOOKUP_TABLE default");
        for v in u.values() {
            let _ = writeln!(s, "{v}");
        }
    }
    s
}

pub fn write_vtk(mesh: &Mesh, u: Option<&P1Function>, path: &Path) -> Result<(), IoError> {
    if let Some(u) = u {
        if u.len() != mesh.num_vertices() {
            return Err(IoError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("field has {} values for {} points", u.len(), mesh.num_vertices()),
            });
        }
    }
    write_file(path, &vtk_string(mesh, u))
}

pub fn mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", mesh.num_vertices(), mesh.num_triangles());
    for (v, b) in mesh.vertices().iter().zip(mesh.boundary()) {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], u8::from(*b));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    write_file(path, &mesh_string(mesh))
}

pub fn load_mesh(path: &Path) -> Result<Mesh, IoError> {
    parse_mesh(&read_file(path)?, &path.display().to_string())
}

pub fn parse_mesh(text: &str, name: &str) -> Result<Mesh, IoError> {
    let err = |line: usize, message: String| IoError::Parse { path: name.to_string(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<(usize, Vec<&str>), IoError> {
        lines
            .next()
            .map(|(n, l)| (n, l.split_whitespace().collect()))
            .ok_or_else(|| err(text.lines().count() + 1, format!("unexpected end of file, expected {what}")))
    };
    let (n, head) = next("header `nv nt`")?;
    if head.len() != 2 {
        return Err(err(n, "header must be `nv nt`".into()));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|e| err(n, format!("bad count `{s}`: {e}")));
    let (nv, nt) = (count(head[0])?, count(head[1])?);

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for i in 0..nv {
        let (n, f) = next(&format!("vertex {i}"))?;
        if f.len() != 3 {
            return Err(err(n, format!("vertex line needs `x y b`, found {} fields", f.len())));
        }
        let coord = |s: &str| s.parse::<f64>().map_err(|e| err(n, format!("bad coordinate `{s}`: {e}")));
        vertices.push([coord(f[0])?, coord(f[1])?]);
        boundary.push(match f[2] {
            "0" => false,
            "1" => true,
            other => return Err(err(n, format!("boundary flag must be 0 or 1, found `{other}`"))),
        });
    }
    let mut triangles = Vec::with_capacity(nt);
    for i in 0..nt {
        let (n, f) = next(&format!("triangle {i}"))?;
        if f.len() != 3 {
            return Err(err(n, format!("triangle line needs 3 indices, found {}", f.len())));
        }
        let mut tri = [0usize; 3];
        for (slot, s) in tri.iter_mut().zip(&f) {
            if s.starts_with('-') {
                return Err(err(n, format!("negative vertex index `{s}`")));
            }
            *slot = s.parse::<usize>().map_err(|e| err(n, format!("bad vertex index `{s}`: {e}")))?;
            if *slot >= nv {
                return Err(err(n, format!("vertex index {slot} out of range (nv = {nv})")));
            }
        }
        triangles.push(tri);
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "trailing content after the last triangle".into()));
    }
    Ok(Mesh::new(vertices, triangles, boundary)?)
}
