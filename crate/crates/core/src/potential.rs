//! Total potential assembly: anisotropic harmonic confinement plus a seeded
//! random realization of Gaussian bumps.
//!
//! Confinement frequencies are ωx = p·ω₀ and ωy = q·ω₀. Deviation scans set
//! the ratio ωx/ωy directly through `ratio_override`, holding ωy = q·ω₀ fixed.
//! Bumps are scattered as a spatial Poisson process of the configured mean
//! density over the axis-aligned rectangle bounding the classical ellipse at
//! `scatter_energy`; the generator is ChaCha8 seeded from the config, so a
//! seed plus a config reproduces a realization bit-for-bit.

use crate::lattice::{GridSpec, ScalarField};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

/// Full width at half maximum of the default bump profile (a.u. of length).
pub const DEFAULT_BUMP_FWHM: f64 = 0.235;
/// Default bump amplitude (a.u. of energy).
pub const DEFAULT_BUMP_AMPLITUDE: f64 = 4.0;
/// Default mean bump density (bumps per unit area).
pub const DEFAULT_BUMP_DENSITY: f64 = 2.0;

/// Converts a Gaussian full width at half maximum to the σ of exp(-r²/2σ²).
pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * 2.0f64.ln()).sqrt())
}

/// Confinement anisotropy and bump-realization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConfig {
    /// Frequency multiplier for x: ωx = p·ω₀ (unless overridden).
    pub p: u32,
    /// Frequency multiplier for y: ωy = q·ω₀.
    pub q: u32,
    /// Base frequency ω₀ (a.u.), 1 by convention.
    pub omega0: f64,
    /// When set, fixes ωx/ωy to this value with ωy = q·ω₀ held fixed,
    /// e.g. p/q + δ in a deviation scan.
    pub ratio_override: Option<f64>,
    /// Bump amplitude M ≥ 0.
    pub amplitude: f64,
    /// Bump width σ > 0 of exp(-|r-rᵢ|²/2σ²).
    pub sigma: f64,
    /// Mean bump density per unit area.
    pub density: f64,
    /// Seed for the bump realization.
    pub seed: u64,
    /// Energy defining the classical ellipse whose bounding rectangle is
    /// populated with bumps.
    pub scatter_energy: f64,
    /// Draw exactly round(density·area) bumps instead of a Poisson count.
    pub fixed_count: bool,
}

impl PotentialConfig {
    pub fn new(p: u32, q: u32) -> Self {
        PotentialConfig {
            p,
            q,
            omega0: 1.0,
            ratio_override: None,
            amplitude: DEFAULT_BUMP_AMPLITUDE,
            sigma: sigma_from_fwhm(DEFAULT_BUMP_FWHM),
            density: DEFAULT_BUMP_DENSITY,
            seed: 0,
            scatter_energy: 100.0,
            fixed_count: false,
        }
    }

    pub fn with_fwhm(mut self, fwhm: f64) -> Self {
        self.sigma = sigma_from_fwhm(fwhm);
        self
    }

    pub fn omega_x(&self) -> f64 {
        match self.ratio_override {
            Some(r) => r * self.omega_y(),
            None => self.p as f64 * self.omega0,
        }
    }

    pub fn omega_y(&self) -> f64 {
        self.q as f64 * self.omega0
    }

    /// Area of the classical ellipse ½(ωx²x² + ωy²y²) ≤ e: 2πe/(ωx·ωy).
    pub fn ellipse_area(&self, e: f64) -> f64 {
        2.0 * std::f64::consts::PI * e / (self.omega_x() * self.omega_y())
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.q < 1 {
            return Err(Error::InvalidConfig(format!("p, q must be ≥ 1, got ({}, {})", self.p, self.q)));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidConfig(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if let Some(r) = self.ratio_override {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig(format!("ratio_override must be positive, got {r}")));
            }
        }
        if self.amplitude < 0.0 {
            return Err(Error::InvalidConfig(format!("bump amplitude must be ≥ 0, got {}", self.amplitude)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("bump width must be positive, got {}", self.sigma)));
        }
        if self.density < 0.0 {
            return Err(Error::InvalidConfig(format!("bump density must be ≥ 0, got {}", self.density)));
        }
        Ok(())
    }
}

/// One realization of scattered bumps. Immutable after creation.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSet {
    pub positions: Vec<(f64, f64)>,
    pub amplitude: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl BumpSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Exact superposition M Σᵢ exp(-|r-rᵢ|²/2σ²) at an arbitrary point.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        self.amplitude
            * self
                .positions
                .iter()
                .map(|&(bx, by)| {
                    let (dx, dy) = (x - bx, y - by);
                    (-(dx * dx + dy * dy) * inv).exp()
                })
                .sum::<f64>()
    }

    /// CSV serialization with columns index, x, y.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,x,y")?;
        for (i, (x, y)) in self.positions.iter().enumerate() {
            writeln!(w, "{i},{x},{y}")?;
        }
        Ok(())
    }
}

/// Harmonic confinement ½(ωx²x² + ωy²y²) sampled on the grid.
pub fn harmonic_potential(grid: &GridSpec, cfg: &PotentialConfig) -> ScalarField {
    let (wx2, wy2) = (cfg.omega_x().powi(2), cfg.omega_y().powi(2));
    ScalarField::from_fn(*grid, |x, y| 0.5 * (wx2 * x * x + wy2 * y * y))
}

/// Draw a bump realization for the config's scatter region.
///
/// The count is Poisson(density·area) of the bounding rectangle of the
/// classical ellipse at `scatter_energy` (or exactly round(density·area) with
/// `fixed_count`); positions are uniform over that rectangle. Bumps landing
/// outside the ellipse are harmless: the states of interest decay there.
pub fn scatter_bumps(cfg: &PotentialConfig) -> BumpSet {
    let half_x = (2.0 * cfg.scatter_energy).sqrt() / cfg.omega_x();
    let half_y = (2.0 * cfg.scatter_energy).sqrt() / cfg.omega_y();
    let area = 4.0 * half_x * half_y;
    let mean = cfg.density * area;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = if mean <= 0.0 {
        0
    } else if cfg.fixed_count {
        mean.round() as usize
    } else {
        Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize
    };

    let positions = (0..count)
        .map(|_| {
            let x = (2.0 * rng.random::<f64>() - 1.0) * half_x;
            let y = (2.0 * rng.random::<f64>() - 1.0) * half_y;
            (x, y)
        })
        .collect();
    BumpSet { positions, amplitude: cfg.amplitude, sigma: cfg.sigma, seed: cfg.seed }
}

/// Bump field on the grid; exact superposition over every bump, parallel over
/// grid rows with a fixed per-node summation order.
pub fn evaluate_bumps(grid: &GridSpec, bumps: &BumpSet) -> ScalarField {
    let mut field = ScalarField::zeros(*grid);
    let nx = grid.points_x;
    let inv = 1.0 / (2.0 * bumps.sigma * bumps.sigma);
    let amp = bumps.amplitude;
    field
        .values
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(iy, row)| {
            let y = grid.y(iy);
            for (ix, v) in row.iter_mut().enumerate() {
                let x = grid.x(ix);
                let mut sum = 0.0;
                for &(bx, by) in &bumps.positions {
                    let (dx, dy) = (x - bx, y - by);
                    sum += (-(dx * dx + dy * dy) * inv).exp();
                }
                *v = amp * sum;
            }
        });
    field
}

/// Confinement plus bumps; returns the realization for reporting and overlays.
pub fn total_potential(grid: &GridSpec, cfg: &PotentialConfig) -> (ScalarField, BumpSet) {
    let bumps = scatter_bumps(cfg);
    let field = total_potential_with(grid, cfg, &bumps);
    (field, bumps)
}

/// Total potential with an existing bump realization (deviation scans reuse
/// one realization while the confinement ratio changes).
pub fn total_potential_with(grid: &GridSpec, cfg: &PotentialConfig, bumps: &BumpSet) -> ScalarField {
    let mut field = harmonic_potential(grid, cfg);
    if bumps.amplitude != 0.0 && !bumps.is_empty() {
        let imp = evaluate_bumps(grid, bumps);
        for (v, b) in field.values.iter_mut().zip(imp.values.iter()) {
            *v += b;
        }
    }
    field
}
