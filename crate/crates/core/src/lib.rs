//! Estimation over convex bodies through Kolmogorov-width SDP relaxations.
//!
//! The crate provides gauge-based convex bodies, exact capped-simplex and
//! spectahedron projections, quadratic-form maximization oracles, the width
//! SDP solver, the three iterative estimators (sequence model, robust mean,
//! regression) and a Monte Carlo harness with reference oracles.

pub mod caps_proj;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod qfm;
pub mod rng;
pub mod width_sdp;

pub use error::{Error, Result};
