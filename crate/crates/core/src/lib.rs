//! Transform pairs for Laplace boundary value problems on simply-connected
//! and punctured Lipschitz planar domains, built from the Szego kernel and a
//! conformal map to the unit disc.
//!
//! The crate provides:
//! - the forward transform rho(k) (a boundary integral) and the inverse
//!   transform over the three spectral contours L1, L2, L3 ([`transform`]),
//! - Cauchy and Szego kernels, including punctured variants ([`kernels`]),
//! - conformal maps: the unit disc, ellipse interiors via Jacobi elliptic
//!   functions, and numerically solved Schwarz-Christoffel maps for
//!   quadrilaterals ([`conformal`]),
//! - global-relation collocation solvers for boundary unknowns
//!   ([`grsolver`]),
//! - end-to-end solvers for a mixed BVP on an ellipse and a point vortex in
//!   a concave quadrilateral ([`apps`]).

pub mod apps;
pub mod conformal;
pub mod error;
pub mod geometry;
pub mod grsolver;
pub mod kernels;
pub mod specfun;
pub mod transform;

pub use error::{Error, Result};
