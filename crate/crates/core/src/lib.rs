//! Quantum-graph Hamiltonians with general self-adjoint vertex couplings.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every numerical
//! piece of the laboratory:
//!
//! * [`graph`]: metric graphs, edge dressings (vector potential, piecewise
//!   constant scalar potential, interior δ points) and validated
//!   [`graph::GraphHamiltonian`] values.
//! * [`coupling`]: the three interconvertible forms of a vertex coupling
//!   (KS pair `(A, B)`, unitary `U`, ST-form) and vertex scattering matrices.
//! * [`schrodinger`]: transfer matrices, secular systems, eigenvalues, bound
//!   states, global S-matrices and a finite-difference discretization with
//!   resolvent-distance estimation.
//! * [`builders`]: the approximating families (scaled potentials,
//!   Cheon–Shigehara, the magnetic general-vertex construction, fat-graph
//!   lift parameters).
//! * [`sweep`]: observables, error metrics and log-log rate fits.
//! * [`fatgraph`]: 2D Neumann Laplacians on fat stars and the graph to
//!   manifold identification map.
//!
//! IO, file formats, parallel sweep execution and the command line live in the
//! companion `qgraph` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod builders;
pub mod coupling;
pub mod error;
pub mod fatgraph;
pub mod graph;
pub mod linalg;
pub mod schrodinger;
pub mod sparse;
pub mod sweep;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
