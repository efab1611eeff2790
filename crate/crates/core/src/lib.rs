//! Solitary waves of the nonlinear Dirac equation with F(s) = |s|^θ.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod contraction;
pub mod diagnostics;
pub mod error;
pub mod ground_state;
mod ivp;
pub mod linear_operator;
pub mod nonlinearity;
pub mod radial;
pub mod shooting;
pub mod stencil;

pub use error::{Error, Result};
