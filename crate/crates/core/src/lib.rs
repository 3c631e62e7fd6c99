//! Finite-blocklength rate analysis for a two-user Gaussian broadcast channel
//! in which the two receivers operate under different blocklength constraints.
//!
//! The stronger receiver (user 2) must decode after `n2` channel uses while the
//! weaker receiver (user 1) may listen for the full frame of `n1 >= n2` uses.
//! Superposition coding lets user 2 cancel the interfering user-1 codeword
//! before decoding its own message, but classical successive interference
//! cancellation would require user 2 to observe all `n1` symbols. The central
//! object of this crate is the early-decoding bound: the number of symbols
//! `n_tilde <= n1` after which user 2 can already decode the user-1 codeword
//! reliably, so that cancellation fits inside user 2's own deadline.
//!
//! Modules:
//!
//! - [`math`]: Gaussian tail utilities and the normal-approximation rate
//!   `R(n, snr, eps) = C(snr) - sqrt(V(snr)/n) * Qinv(eps)` with all logs in
//!   base 2.
//! - [`ed`]: the early-decoding symbol-count bound, its asymptotic limit, and
//!   a computable dependence-testing error bound that certifies it.
//! - [`region`]: rate pairs achievable by early decoding, by time-sharing
//!   NOMA variants, and by treating interference as noise, under individual
//!   or sum power constraints.
//! - [`optimize`]: deterministic grid solvers that maximize weighted sum
//!   rates over error-probability splits and power allocations.
//! - [`montecarlo`]: reproducible link-level simulation of the threshold
//!   decoders used by the analysis.

// Published coefficient tables and pinned reference values keep every digit
// of their source even where f64 rounds earlier.
#![allow(clippy::excessive_precision)]
// Guards of the form `!(x > 0.0)` are deliberate: the negation rejects NaN,
// which `x <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ed;
pub mod math;
pub mod montecarlo;
pub mod optimize;
pub mod region;

use thiserror::Error;

/// Errors reported by domain validation and resource guards.
///
/// Infeasibility of a rate target or of a solver grid is not an error: the
/// region and optimizer types carry explicit feasibility markers instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A probability parameter was outside the open interval (0, 1).
    #[error("probability {value} is outside the open interval (0, 1)")]
    InvalidProbability { value: f64 },

    /// A signal-to-noise ratio or channel gain was negative or non-finite.
    #[error("SNR or gain {value} must be finite and non-negative")]
    InvalidSnr { value: f64 },

    /// A structural parameter combination violated its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A simulation request exceeded the floating-point operation guard.
    #[error("simulation size {ops} exceeds the resource guard {limit}")]
    GuardExceeded { ops: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
