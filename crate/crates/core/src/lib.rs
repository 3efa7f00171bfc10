//! Closed-form and iterative solvers for matrix design problems with
//! diagonal-structure and constant-modulus constraints.

pub mod baselines;
pub mod cm_solvers;
pub mod derivatives;
pub mod diag_solvers;
pub mod error;
pub mod numkernel;
pub mod par;
pub mod report;

pub use error::{Error, Result};
