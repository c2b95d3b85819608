//! Numerical laboratory for flat Sinai billiards.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds the table (flat torus or rectangle minus circular
//!   obstacles) and its arclength boundary atlas.
//! * [`billiard`] traces the broken geodesic flow, the boundary billiard map,
//!   Jacobi fields along orbits and the Monte Carlo dynamical diagnostics.
//! * [`eigensolver`] discretizes the Dirichlet/Neumann Laplacian on a masked
//!   grid, computes the lowest eigenpairs by shift-invert block Lanczos with
//!   spectrum slicing, and extracts boundary Cauchy data.
//! * [`nodal`] counts nodal domains, boundary sign changes and builds the
//!   embedded nodal graph with its Euler bookkeeping.
//! * [`spectral`] folds eigenpair ensembles into Kuznecov sums, boundary Weyl
//!   and quantum-ergodic averages, sign-change certificates and density-one
//!   subsequence extraction.

pub mod billiard;
pub mod eigensolver;
pub mod error;
pub mod geometry;
pub mod nodal;
pub mod numeric;
pub mod spectral;

pub use billiard::{JacobiState, Mat2, PhasePoint};
pub use eigensolver::{BoundaryTrace, EigenPair, Grid, Spectrum};
pub use error::{Error, Result};
pub use geometry::{Base, BoundaryCondition, Obstacle, SurfaceDraft, SurfaceSpec, Vec2};
pub use nodal::{NodalGraph, NodalReport, SignField};
pub use spectral::{SpectralEnsemble, TestFunction};
