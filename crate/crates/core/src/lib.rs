//! Exact formal exponential maps on ℤ-graded manifolds.

#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod cli;
pub mod connection;
pub mod derivation;
pub mod error;
pub mod fexp;
pub mod qp;
pub mod random;
pub mod report;
pub mod resolution;
pub mod session;

pub use error::{Error, Result};
