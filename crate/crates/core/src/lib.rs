//! Gridless two-dimensional line-spectral estimation.
//!
//! Recovers K-sparse 2D harmonic components from partially observed or noisy
//! data matrices by matrix atomic norm minimization (MANM) solved as a
//! structure-exploiting semidefinite program, with frequency extraction,
//! dual-certificate verification, and vectorized/gridded baselines.

pub mod bench;
pub mod extract;
pub mod gridded;
pub mod linalg;
pub mod manm;
pub mod model;
pub mod rng;
pub mod sdp;
pub mod vanm;
