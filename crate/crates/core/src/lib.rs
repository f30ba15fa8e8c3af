//! Multiple critical points of the one-dimensional ferronematic energy.
//!
//! The crate discretises the coupled nematic/magnetic energy on `[-1, 1]` with
//! piecewise-linear elements and provides Newton and deflated Newton solvers,
//! Hessian-based stability classification, natural-parameter continuation in
//! the elastic constant, the bulk critical-point landscape, the degenerate
//! metric of the sharp-interface limit and the classical asymptotic profiles.

pub mod asymptotics;
pub mod banded;
pub mod bulk;
pub mod continuation;
pub mod deflation;
pub mod discretization;
pub mod error;
pub mod gamma;
pub mod io;
pub mod newton;
pub mod params;
pub mod stability;

pub use banded::BandMatrix;
pub use bulk::{BulkCriticalPoint, BulkMinimumInfo, Parity};
pub use discretization::{FieldState, Mesh, OrState, Problem, System};
pub use error::{Error, Result};
pub use newton::{SolveOptions, SolveReport};
pub use params::ModelParams;
