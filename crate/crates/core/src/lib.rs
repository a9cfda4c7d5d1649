//! Nash equilibria, strong-monotonicity certificates and equilibrium
//! sensitivity for constrained network aggregative games.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod game;
pub mod linalg;
pub mod monotonicity;
pub mod qp;
pub mod quadratic;
pub mod routing;
pub mod sensitivity;
pub mod solver;

pub use error::{Error, Result};
