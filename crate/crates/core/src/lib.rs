//! Numerical laboratory for a two-dimensional anisotropic harmonic oscillator
//! perturbed by randomly scattered Gaussian bumps.
//!
//! The crate computes low-lying eigenstates of
//!
//! ```text
//! H = -1/2 ∇² + 1/2 (ωx² x² + ωy² y²) + V_imp,     V_imp = M Σᵢ exp(-|r - rᵢ|²/2σ²)
//! ```
//!
//! in Hartree atomic units (ħ = m = 1) and quantifies how strongly individual
//! eigenstates localize along classical Lissajous orbits of the unperturbed
//! oscillator.
//!
//! Module layout follows the pipeline:
//!
//! * [`lattice`]   — periodic-box grid, fields, spectral kinetic operator
//! * [`potential`] — harmonic confinement and the seeded bump realization
//! * [`itp`]       — imaginary-time propagation eigensolver for an orthonormal ensemble
//! * [`oracle`]    — analytic Hermite-Gaussian modes and truncated-basis diagonalization
//! * [`classical`] — Lissajous orbit generation and string/loop classification
//! * [`analysis`]  — density of states, α localization measure, scar detection and scans

pub mod analysis;
pub mod classical;
pub mod fft;
pub mod hermite;
pub mod itp;
pub mod lattice;
mod linalg;
pub mod oracle;
pub mod potential;

use thiserror::Error;

/// Errors shared across the solver and analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state ensemble is rank deficient (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },
    #[error("mode ({n},{m}) is not resolvable on this grid (wavelength {lambda:.3e} < 4h)")]
    UnresolvableMode { n: usize, m: usize, lambda: f64 },
    #[error("truncated basis has {size} modes, exceeding the supported maximum {max}")]
    BasisTooLarge { size: usize, max: usize },
    #[error("frequency multipliers ({p},{q}) are not coprime; reduce the fraction first")]
    NotCoprime { p: u32, q: u32 },
    #[error("propagation step rejected: dtau * max(V) = {0:.3e} would underflow the ensemble")]
    StepRejected(f64),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
