use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {vertex}, which does not exist")]
    InvalidVertex { triangle: usize, vertex: usize },
    #[error("triangle index {triangle} out of range (mesh has {count} triangles)")]
    InvalidTriangle { triangle: usize, count: usize },
    #[error("triangle {triangle} is degenerate or clockwise (signed area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("refinement requires at least one marked triangle")]
    EmptyMarking,
}

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("Rayleigh quotient undefined for the zero function")]
    ZeroFunction,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("decomposition-coordination did not converge in {iterations} iterations (relative change {rel_change:e})")]
    DcNotConverged { iterations: usize, rel_change: f64 },
    #[error("inverse iteration step {step} (lambda = {lambda}) failed: {source}")]
    InverseIteration {
        step: usize,
        lambda: f64,
        #[source]
        source: Box<SolveError>,
    },
    #[error("torsion solve failed: {0}")]
    Torsion(#[source] Box<SolveError>),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
