//! Generalized ground-state functional theories on finite-dimensional Hilbert spaces.

pub mod abelian;
pub mod bosonic;
pub mod boundary;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod liegroup;
pub mod linalg;
pub mod search;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
