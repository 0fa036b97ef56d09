//! Variational solvers and conservation-law verification on flat and
//! hyperbolic grids.

pub mod calculus;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod jet;
pub mod noether;
pub mod potential;
pub mod variational;

pub use error::{Error, Result};
