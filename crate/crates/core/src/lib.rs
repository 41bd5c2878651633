//! Finite-difference toolkit for the Robin Laplacian on truncated half-spaces
//! with complex boundary coupling.
//!
//! The modules follow the data flow: [`grid`] and [`boundary_data`] describe
//! the discretization, [`operator`] assembles the sparse matrix, [`spectral`]
//! and [`resolvent`] solve with it, [`hypotheses`] evaluates the conditions on
//! `alpha`, [`multipliers`] checks the integral identities and inequalities,
//! and [`cli`] drives everything from a config file.

pub mod boundary_data;
pub mod cli;
pub mod error;
pub mod grid;
pub mod hypotheses;
pub mod linalg;
pub mod multipliers;
pub mod operator;
pub mod resolvent;
pub mod spectral;
pub(crate) mod stencil;

pub use error::{Error, Result};
pub use stencil::Closure;
