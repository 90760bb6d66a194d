//! Fourier-side solver and diagnostics for the one-dimensional dissipative
//! Maxwell model
//!
//! ```text
//! d/dt f^(xi, t) = f^(p xi, t) f^(q xi, t) - f^(xi, t)
//! ```
//!
//! together with its self-similar rescaling, stationary profiles, probability
//! metrics and velocity-space reconstructions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod lyapunov;
pub mod metrics;
pub mod moments;
pub mod params;
pub mod physical;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use params::{classify, MixingParams, Regime, RegimeReport};
pub use spectral::{FrequencyGrid, NormalizationReport, SpectralState, StateKind};

pub use num_complex::Complex64;
