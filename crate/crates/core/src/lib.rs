//! Estimating persistence diagrams of piecewise-constant signals observed in
//! Gaussian white noise.
//!
//! Per-cube integrals of the observation are turned into a rough sublevel
//! estimator, thickened at two radii, and the image persistence of the
//! resulting nested pair of filtrations is reported as the estimate.

pub mod bench;
pub mod bottleneck;
pub mod complex;
pub mod diagram;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod gf2;
pub mod grid;
pub mod image;
pub mod observation;
pub mod signal;

pub use error::{Error, Result};
