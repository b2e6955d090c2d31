//! Lyapunov spectra of volume-preserving flows and a local rotation
//! perturbation that shifts the central exponent.
//!
//! The crate is organised around a suspension of a hyperbolic toral
//! automorphism crossed with an irrational rotation, which has a dominated
//! normal splitting with a one-dimensional central direction. Generic analytic
//! fields are supported for the frame, spectrum and flowbox machinery.

pub mod comparison;
pub mod domination;
pub mod error;
pub mod experiment;
pub mod flowbox;
pub mod linalg;
pub mod model;
pub mod perturbation;
pub mod poincare;
pub mod spectrum;

pub use error::{Error, Result};
