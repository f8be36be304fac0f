//! Harmonic analysis on complex spheres and the complex intersection,
//! projection and centroid body operators built on it.

pub mod error;
pub mod specialfn;
pub mod spheregrid;
pub mod harmonics;
pub mod bodies;
pub mod operators;
pub mod geometry;
pub mod experiments;

pub use error::{Error, Result};
pub use num_complex::Complex64;
