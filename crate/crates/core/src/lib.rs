//! Spectra and integrated density of states (IDS) of finite-difference
//! Laplacians on randomly perforated boxes.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: boxes, obstacle shapes, disorder models (site percolation,
//!   Poisson, periodic), their realizations and rasterized masks.
//! - [`operators`]: Dirichlet/Neumann/mixed Laplacians on the retained cells
//!   and the finite-potential comparison operator.
//! - [`spectra`]: eigenvalue counting by Sylvester inertia and low eigenpairs.
//! - [`ids`]: ensemble IDS with Dirichlet-Neumann bracketing, analytic lower
//!   bounds and exponent fits.
//! - [`certify`]: variational lower bounds on eigenvalue counts from
//!   near-orthonormal trial families, and the odd-cosine family.
//! - [`cli`]: the `perforated` command-line front end.

pub mod certify;
pub mod cli;
pub mod geometry;
pub mod ids;
pub mod operators;
pub mod rng;
pub mod spectra;

pub use certify::{Certificate, TrialFamily};
pub use geometry::{BoxSpec, CellGrid, DisorderModel, ObstacleMask, ObstacleShape, Realization};
pub use ids::{EnsembleSpec, FitResult, IdsCurve};
pub use operators::{Boundary, BoundaryCondition, PotentialOperator, SparseSymmetricOperator};
pub use spectra::{CountMethod, CountResult, EigenPair};
