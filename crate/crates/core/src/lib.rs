//! Exact computations on the special-vertex graph of the affine building of
//! `Sp_n` over `F_q((t))`: lattice model, finite symplectic geometry, graph
//! balls, and spectral-radius checks.

pub mod coeffs;
pub mod error;
pub mod fq_symplectic;
pub mod graph;
pub mod lattices;
pub mod spectral;

pub use error::{Error, Result};
