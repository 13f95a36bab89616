//! Finite-precision algebra for multivariate Robba rings: Gauss norms, Frobenius
//! lifts and their group actions, Witt vectors, projector descent, slopes of
//! φ-modules and ramification data of APF towers.

pub mod actions;
pub mod apf;
pub mod config;
pub mod descent;
pub mod error;
pub mod scalars;
pub mod series;
pub mod slopes;
pub mod status;
pub mod suite;
pub mod witt;

pub use error::{Error, Result};
