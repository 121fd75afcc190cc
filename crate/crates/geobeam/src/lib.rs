//! Geodesic-tube covers of cosphere fibers, self-looping classification under
//! the Hamiltonian flow, and sup-norm bound certificates, with exact
//! combinatorial oracles on model manifolds.

pub mod bound;
pub mod cli;
pub mod config;
pub mod conjugate;
pub mod cover;
pub mod error;
pub mod flow;
pub mod looping;
pub mod manifold;
pub mod svg;

pub use error::{GeobeamError, Result};
