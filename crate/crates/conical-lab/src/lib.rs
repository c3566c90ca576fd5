//! Computational hyperbolic geometry for conical limit sets.
//!
//! The crate works in the Poincaré ball `B^{m+1}` and the upper half-space
//! `H^{m+1}`. Boundary sets are probed numerically: conical limit sets are
//! estimated from finite point data, Möbius sequences are classified
//! pointwise on the boundary, and the countable-set rank machinery runs on
//! truncated oracles.

pub mod constructions;
pub mod contfrac;
pub mod countable;
pub mod divergence;
pub mod fmt;
mod error;
pub mod geometry;
pub mod limits;
pub mod mobius;
pub mod sampling;
pub mod suites;
pub(crate) mod vecops;

pub use error::{Error, Result};
