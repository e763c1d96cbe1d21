//! Schrödinger operators `−(d/dx − iA)² + V` on metric graphs, with
//! `ℏ = 2m = 1` so that energies are `k²`.

mod fd;
mod secular;
mod spectrum;
pub mod transfer;

pub use fd::{discretize, discretize_pair, resolvent_distance, resolvent_norm, DiscretizedOperator, NormEstimate};
pub use secular::SecularSystem;
pub use spectrum::{
    bound_states, eigenfunction, eigenvalues, global_smatrix, ground_state, lowest_energies, BoundState, BoundStates,
    Eigenfunction, Eigenvalue, RootOptions,
};
pub use transfer::edge_transfer;
