//! Adaptive P1 finite elements for the first eigenpair of the Dirichlet
//! p-Laplacian on planar polygonal domains and the unit disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afem;
pub mod edges;
pub mod eigen;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod plap;
pub mod quadrature;

pub use afem::{run_afem, AfemConfig, AfemError, AfemOutcome, ConvergenceLog, Domain, LoopRecord, StopReason};
pub use eigen::{iiss, torsion, EigenResult, IissOptions};
pub use error::{FemError, IoError, MeshError, SolveError};
pub use fem::{P1Function, P1Space, PwConstVecField, Source};
pub use linalg::SparseSymMatrix;
pub use mesh::{generate_disk, generate_lshape, generate_unit_square, BoundaryShape, Mesh};
pub use plap::{dc_solve, resolvent, DcOptions, PLaplaceSolver};
