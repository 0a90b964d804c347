//! Bulk topological invariants, half-space flat bands and harmonic-analysis
//! numerics for tight-binding models on Z^d.

pub mod error;
pub mod halfspace;
pub mod index;
pub mod harmonic;
pub mod invariants;
pub mod lattice;
pub mod linalg;
pub mod spectral;

pub use error::{Error, Result};
