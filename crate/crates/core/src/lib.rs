//! Scattering matrices, phase-shift spectra and billiard dynamics for smooth
//! strictly convex planar obstacles.
//!
//! The geometric, dynamical and dense linear algebra layers are generic over
//! [`Real`] (`f32` or `f64`). Special functions, boundary-integral scattering
//! and spectral statistics are double precision only; their accuracy
//! contracts are stated in `f64` terms. The aliases below fix the common
//! double precision instantiation.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod scalar;
pub mod scattering;
pub mod specfun;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use scalar::Real;

pub type ConvexObstacle = geometry::ConvexObstacle<f64>;
pub type PhaseRay = geometry::PhaseRay<f64>;
pub type Vec2 = geometry::Vec2<f64>;
pub type ChordHit = geometry::ChordHit<f64>;
pub type BoundaryState = dynamics::BoundaryState<f64>;
pub type ComplexMatrix = linalg::ComplexMatrix<f64>;
pub type EigenResult = linalg::EigenResult<f64>;

pub use scattering::{FarFieldKernel, Provenance, ScatteringOperator};
pub use spectra::PhaseShiftSet;
