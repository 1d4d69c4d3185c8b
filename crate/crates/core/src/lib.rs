//! Partial balayage of charge distributions on discretized compact and
//! bounded Riemannian manifolds.
//!
//! The crate discretizes a manifold into nodes with lumped volume weights
//! and a finite-volume stiffness operator, represents signed measures as
//! nodal mass vectors, and computes the sweeping operation
//! `Bal(sigma, lambda)` by solving the associated linear complementarity
//! problem. On top of that sit the applications: harmonic and geodesic
//! balls, Laplacian growth, weighted equilibrium measures, quadrature
//! inequalities, and radial free-boundary experiments in Euclidean balls
//! with Dirichlet or Neumann outer boundaries.
//!
//! See `README.md` for the CLI (`balayage run` / `balayage verify`) and the
//! Python extension module.

pub mod apps;
pub mod balayage;
pub mod charge;
pub mod error;
pub mod grid;
pub mod greens;
pub mod obstacle;
pub mod radial;
pub mod scenario;
pub mod sparse;

pub mod acceptance;

pub use error::{Error, Result};

/// Version string embedded in every summary file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
