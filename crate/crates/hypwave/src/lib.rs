//! Spectral simulator and verification harness for radial wave/Klein-Gordon
//! equations on real hyperbolic space H^n.

pub mod cli;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod lorentz;
pub mod params;
pub mod propagator;
pub mod scattering;
pub mod solver;
pub mod special;
pub mod transform;

pub use error::{Error, Result};
