//! Structured matrix recovery from noisy linear measurements with the
//! generalized Dantzig selector, for any unitarily invariant norm built from
//! a symmetric gauge, together with the geometric measures (restricted
//! compatibility, cone and ball Gaussian widths) that predict recovery error.

pub mod error;
pub mod gauge;
pub mod geometry;
pub mod measure;
pub mod solver;
pub mod spectral;
pub mod util;

pub use error::{GdsError, Result};
pub use gauge::{rho, Gauge, GaugeConstants, GaugeDescriptor, GaugeKind, Rho};
pub use measure::{observe, Ensemble, EnsembleKind, MeasurementSet, Noise};
pub use solver::{check_solution, solve, GdsProblem, GdsSolution, IterationLogRow, SolverOptions};
pub use spectral::{singular_values, spectral_owl_norm, SpectralNorm, SubspaceDecomposition};
