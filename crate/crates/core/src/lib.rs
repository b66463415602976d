//! Thermal-light ghost imaging and Hanbury Brown-Twiss simulator.
//!
//! The pipeline runs from stochastic source synthesis ([`field`]) through
//! paraxial optics ([`optics`]), photodetection with timing jitter
//! ([`detection`]) and coincidence electronics to g2 estimation
//! ([`correlation`]). [`scenarios`] wires these into the two bench
//! experiments, [`config`] and [`app`] provide the command line surface.

pub mod app;
pub mod config;
pub mod correlation;
pub mod detection;
pub mod error;
pub mod field;
pub mod optics;
pub mod rng;
pub mod scenarios;
pub mod selftest;

pub use error::{Error, Result};
