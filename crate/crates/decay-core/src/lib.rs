//! Time evolution of unstable quantum states: survival amplitudes from
//! spectral densities, one-dimensional and n-dimensional effective
//! Hamiltonians, crossover times, and long-time asymptotics.
//!
//! Modules:
//! - [`spectral`]: spectral densities (Breit-Wigner and friends)
//! - [`amplitude`]: survival amplitude `a(t)` by direct and
//!   contour-rotated quadrature
//! - [`heff1d`]: the scalar effective Hamiltonian `h(t) = i adot / a`,
//!   transition times, asymptotic fits
//! - [`subspace`]: block reduction of finite models, eigenprojectors,
//!   self-energies, the first-order potential and its long-time limit
//! - [`exact`]: exact finite-model evolution and approximation error
//!   tables
//! - [`cli`]: the command layer behind the `decay` binary

pub mod amplitude;
pub mod cli;
pub mod error;
pub mod exact;
pub mod heff1d;
pub mod linalg;
pub mod quad;
pub mod spectral;
pub mod subspace;

pub use error::{Error, Result};

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two grid points");
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive; requires `lo > 0`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two grid points");
    assert!(lo > 0.0 && hi > lo, "need 0 < lo < hi");
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (llo + (lhi - llo) * k as f64 / (n - 1) as f64).exp())
        .collect()
}
