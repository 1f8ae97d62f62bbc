//! Nonlocal operators with measurable coefficients: jump kernels, symbols,
//! periodic solvers and numerical checks of their a priori estimates.

pub mod error;
pub mod fieldops;
pub mod hypothesis;
pub mod kernel;
pub mod operator;
pub mod quad;
pub mod solver;
pub mod symbol;
pub mod verify;

pub use error::{Error, Result};
