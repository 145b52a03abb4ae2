//! Two-dimensional P1 finite elements for the scalar Tresca friction
//! problem, its energy shape gradient, and a volume-constrained shape
//! optimization loop, with finite-difference verification of every
//! derivative formula the crate implements.
//!
//! Start with the runnable examples (`cargo run --example solve_tresca`)
//! or the `tresca-shape` binary for the subcommand interface.

pub mod error;
pub mod fem;
pub mod mesh;
pub mod sparse;
pub mod optimize;
pub mod shape;
pub mod vi;

pub use error::{Error, Result};
