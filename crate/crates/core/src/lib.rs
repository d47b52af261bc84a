//! Numerical toolkit for parabolic equations whose diffusion degenerates on
//! the boundary part `x_N = 0`, with weight `A = diag(1, …, 1, x_N^α)`.

pub mod carleman;
pub mod discretize;
pub mod evolution;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod observability;
pub mod rng;
pub mod shape_design;
pub mod spectral;

pub use error::{Error, Result};
