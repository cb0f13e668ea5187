//! Quantum eigenfunctions of integrable two-dimensional Hamiltonians built
//! from one-dimensional problems on the caustic of a classical trajectory
//! family.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`dynamics`] integrates a trajectory and its Jacobi fields from a vertex
//!    on the equipotential and records caustic touch points;
//!    [`caustic`] clusters them into four fitted arcs.
//! 2. [`arc1d`] solves the Schrödinger, WKB and quantum Hamilton–Jacobi
//!    problems along each arc and searches vertex and energy until all four
//!    arc solutions are regular.
//! 3. [`field2d`] uses the arc solutions as Dirichlet data inside and outside
//!    the caustic.
//!
//! [`oracle`] diagonalizes the Hamiltonian in an oscillator basis for
//! independent reference values.

pub mod arc1d;
pub mod caustic;
pub mod dynamics;
pub mod field2d;
pub mod io;
pub mod numeric;
pub mod oracle;
pub mod potential;

pub use potential::{Model, PhaseState, Point2, PotentialError};
