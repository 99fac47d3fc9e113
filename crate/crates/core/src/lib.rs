//! Random-subspace Frank-Wolfe.
//!
//! Each iteration draws a Haar-distributed `d`-dimensional subspace and solves
//! the linear minimization problem exactly over the affine section
//! `C ∩ (x_k + range(P_k^T))` instead of over all of `C`.
//!
//! - [`stiefel`]: Haar frames and the project/lift maps.
//! - [`ratios`]: section-efficiency ratios and Monte Carlo estimators.
//! - [`geometry`]: feasible sets and their geometry constants.
//! - [`oracles`]: full-space and section linear minimization oracles.
//! - [`solver`]: RSFW, full Frank-Wolfe and finite-sum stochastic RSFW.
//! - [`curvature`]: compressed-Hessian step sizes and spectral diagnostics.
//! - [`experiments`]: synthetic problem generators.

pub mod curvature;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod oracles;
pub mod problem;
pub mod ratios;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod stiefel;

pub use error::{Result, RsfwError};
pub use geometry::{Ball, ConvexBody, Ellipsoid, FeasibleSet, GeometryConstants, GraphQuartic, SimplexPolytope};
pub use linalg::{Matrix, Vector};
pub use oracles::{SectionOracle, SectionResult};
pub use problem::{FiniteSum, Objective};
pub use solver::{RunTrace, SolverConfig, StepRule};
pub use stiefel::{sample_stiefel, StiefelFrame};
