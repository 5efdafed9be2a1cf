//! Numerical checks for positive mass theorems on initial data sets whose
//! boundary is a noncompact hyperplane.

pub mod charges;
pub mod clifford;
pub mod config;
pub mod constraints;
pub mod dirac;
pub mod error;
pub mod extrapolate;
pub mod families;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod jet;
pub mod mots;
pub mod quadrature;
pub mod runner;

pub use error::{Error, Result};
