//! Feynman path integrals on compact Lie groups with bi-invariant metrics,
//! computed on finite-energy subspaces through Gaussian matrix integrals,
//! Chernoff products and Dyson series.

pub mod algebra;
pub mod cartan;
pub mod chernoff;
pub mod error;
pub mod linalg;
pub mod oscillatory;
pub mod propagator;
mod precise;
pub mod representation;

pub use error::{Error, Result};
