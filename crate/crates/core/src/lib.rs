//! Explicit Gaussian strong-approximation coupling for partial sums of
//! weakly dependent sequences, specialised to the stationary Markov chain
//! driven by the Perron–Frobenius kernel of an intermittent
//! (Pomeau–Manneville type) interval map.
//!
//! The crate is `no_std` and only needs `alloc`. Modules:
//!
//! - [`dynamics`]: the map `T_γ`, Ulam approximation of its invariant
//!   density, invariant sampling and the time-reversed Markov chain.
//! - [`observables`]: piecewise-monotone observables and tail functions.
//! - [`quantmix`]: quantile / mixing-rate calculus (`α⁻¹`, `R`, `M_{p,α}`,
//!   `Λ_{p,α}`, truncated `M_{3,α}`) and an empirical `α` estimator.
//! - [`gaussian`]: `Φ`, `Φ⁻¹`, inverse-CDF sampling, quantile-based `W₂`.
//! - [`coupling`]: dyadic blocks, conditional quantile transform, Gaussian
//!   bridge splitting and discrepancy measurement.
//! - [`diagnostics`]: variance estimators and empirical checks of the
//!   appendix inequalities.
//! - [`rng`]: counter-keyed random streams.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coupling;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod gaussian;
mod math;
pub mod observables;
mod par;
pub mod quantmix;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
