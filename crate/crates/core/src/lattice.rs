//! Core discretization types: a uniform periodic box, real scalar fields,
//! complex state functions, and the spectral kinetic operator.
//!
//! The computational domain is the square-ish box [-Lx, Lx] × [-Ly, Ly] with
//! periodic wraparound. Harmonic confinement makes every state of interest
//! decay exponentially well before the boundary, so the periodic box behaves
//! like open space while still admitting an exact Fourier representation of
//! -∇²/2. Fields are stored row-major with x fastest: index = iy·nx + ix.

use crate::fft::{frequencies, Fft2};
use crate::{Error, Result};
use num_complex::Complex64;

/// Half the wavefunction-amplitude decades required between the box boundary
/// and the interior maximum; see [`StateFunction::boundary_decay_ratio`].
pub const BOUNDARY_DECAY_LIMIT: f64 = 1e-6;

/// Uniform periodic grid on [-Lx, Lx] × [-Ly, Ly].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width of the box along x (a.u. of length).
    pub extent_x: f64,
    /// Half-width of the box along y.
    pub extent_y: f64,
    /// Number of nodes along x; even, at least 8.
    pub points_x: usize,
    /// Number of nodes along y; even, at least 8.
    pub points_y: usize,
}

impl GridSpec {
    pub fn new(extent_x: f64, extent_y: f64, points_x: usize, points_y: usize) -> Result<Self> {
        for (n, axis) in [(points_x, "x"), (points_y, "y")] {
            if n < 8 {
                return Err(Error::InvalidGrid(format!("points_{axis} = {n} < 8")));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "points_{axis} = {n} must be even for the symmetric frequency layout"
                )));
            }
        }
        if !(extent_x > 0.0) || !(extent_y > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive, got ({extent_x}, {extent_y})"
            )));
        }
        Ok(GridSpec { extent_x, extent_y, points_x, points_y })
    }

    /// Square box [-L, L]² with n × n nodes; node coordinates x_i = -L + i·(2L/n).
    pub fn square(l: f64, n: usize) -> Result<Self> {
        GridSpec::new(l, l, n, n)
    }

    pub fn len(&self) -> usize {
        self.points_x * self.points_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid spacing along x: h = 2L/n.
    pub fn spacing_x(&self) -> f64 {
        2.0 * self.extent_x / self.points_x as f64
    }

    pub fn spacing_y(&self) -> f64 {
        2.0 * self.extent_y / self.points_y as f64
    }

    /// Area element h_x · h_y of the discrete measure.
    pub fn cell_area(&self) -> f64 {
        self.spacing_x() * self.spacing_y()
    }

    pub fn x(&self, ix: usize) -> f64 {
        -self.extent_x + ix as f64 * self.spacing_x()
    }

    pub fn y(&self, iy: usize) -> f64 {
        -self.extent_y + iy as f64 * self.spacing_y()
    }

    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.points_x + ix
    }
}

/// Square grid per the default box convention; see [`GridSpec::square`].
pub fn make_grid(l: f64, n: usize) -> Result<GridSpec> {
    GridSpec::square(l, n)
}

/// Pick a box and resolution that confine states up to `e_max`.
///
/// The half-width is the smallest L ≥ 1.2·√(2·e_max)/ω_min whose WKB tunneling
/// action from the classical turning point to the boundary exceeds ln(1e7), so
/// the boundary amplitude of the highest targeted state sits safely below the
/// 1e-6 decay invariant. The spacing resolves both the local de Broglie
/// wavelength (h ≤ λ_min/4) and, when given, the bump width (h ≤ σ/2); node
/// counts round up to even numbers with prime factors ≤ 7 to keep the FFT fast.
pub fn auto_grid(omega_x: f64, omega_y: f64, e_max: f64, bump_sigma: Option<f64>) -> Result<GridSpec> {
    if !(omega_x > 0.0 && omega_y > 0.0 && e_max > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "auto_grid needs positive frequencies and energy, got ({omega_x}, {omega_y}, {e_max})"
        )));
    }
    let omega_min = omega_x.min(omega_y);
    let turning = (2.0 * e_max).sqrt() / omega_min;
    let action_target = (1e7f64).ln() * omega_min / e_max;
    let c = turning_margin(action_target).max(1.2);
    let l = c * turning;

    let lambda_min = 2.0 * std::f64::consts::PI / (2.0 * e_max).sqrt();
    let mut h = lambda_min / 4.0;
    if let Some(sigma) = bump_sigma {
        h = h.min(sigma / 2.0);
    }
    let n = fft_friendly(((2.0 * l / h).ceil() as usize).max(8));
    GridSpec::square(l, n)
}

/// Smallest c > 1 with c√(c²-1) - acosh(c) ≥ target (WKB barrier action per
/// unit E/ω for a box at c turning-point radii).
fn turning_margin(target: f64) -> f64 {
    let g = |c: f64| {
        let s = (c * c - 1.0).sqrt();
        c * s - (c + s).ln()
    };
    let (mut lo, mut hi) = (1.0 + 1e-9, 2.0);
    while g(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Round up to an even number whose prime factors are all ≤ 7.
pub fn fft_friendly(n: usize) -> usize {
    let smooth = |mut v: usize| {
        for p in [2, 3, 5, 7] {
            while v % p == 0 {
                v /= p;
            }
        }
        v == 1
    };
    let mut n = n.max(8);
    if n % 2 == 1 {
        n += 1;
    }
    while !smooth(n) {
        n += 2;
    }
    n
}

/// Real-valued samples on a grid (potential energies, densities).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.points_y {
            let y = grid.y(iy);
            for ix in 0..grid.points_x {
                values.push(f(grid.x(ix), y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.idx(ix, iy)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete integral Σ f_i · h_x h_y.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }
}

/// Complex wavefunction samples on a grid, normalized to Σ|ψ|²·hxhy = 1
/// after any normalization-preserving operation.
#[derive(Debug, Clone)]
pub struct StateFunction {
    pub grid: GridSpec,
    pub amplitudes: Vec<Complex64>,
    /// Rayleigh quotient ⟨ψ|H|ψ⟩ once solved.
    pub energy: Option<f64>,
}

impl StateFunction {
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let mut amplitudes = Vec::with_capacity(grid.len());
        for iy in 0..grid.points_y {
            let y = grid.y(iy);
            for ix in 0..grid.points_x {
                amplitudes.push(f(grid.x(ix), y));
            }
        }
        StateFunction { grid, amplitudes, energy: None }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        StateFunction { grid, amplitudes: vec![Complex64::default(); grid.len()], energy: None }
    }

    /// Discrete norm² Σ|ψ|²·hxhy.
    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amplitudes {
                *a *= inv;
            }
        }
    }

    /// |ψ|² as a scalar field.
    pub fn density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    /// max |ψ| on the outermost grid ring divided by max |ψ| overall.
    /// Confinement must keep this below [`BOUNDARY_DECAY_LIMIT`] for the
    /// periodic box to act as open space.
    pub fn boundary_decay_ratio(&self) -> f64 {
        let (nx, ny) = (self.grid.points_x, self.grid.points_y);
        let mut boundary: f64 = 0.0;
        let mut all: f64 = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let (ix, iy) = (i % nx, i / nx);
            let mag = a.norm_sqr();
            all = all.max(mag);
            if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                boundary = boundary.max(mag);
            }
        }
        if all == 0.0 {
            return 0.0;
        }
        (boundary / all).sqrt()
    }
}

/// Discrete inner product ⟨a|b⟩ = Σ conj(aᵢ)·bᵢ·hxhy.
pub fn inner_product(a: &StateFunction, b: &StateFunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let sum: Complex64 = a
        .amplitudes
        .iter()
        .zip(b.amplitudes.iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(sum * a.grid.cell_area())
}

/// Kinetic multipliers k²/2 in FFT bin order for a grid.
pub(crate) fn kinetic_multipliers(grid: &GridSpec) -> Vec<f64> {
    let kx = frequencies(grid.points_x, 2.0 * grid.extent_x);
    let ky = frequencies(grid.points_y, 2.0 * grid.extent_y);
    let mut mult = Vec::with_capacity(grid.len());
    for fy in &ky {
        for fx in &kx {
            mult.push(0.5 * (fx * fx + fy * fy));
        }
    }
    mult
}

/// Apply -∇²/2 through the Fourier spectral representation on the periodic box.
///
/// Emits a warning-level diagnostic when the input violates the boundary-decay
/// invariant; the result is still produced but untrustworthy in that case.
pub fn kinetic_apply(psi: &StateFunction) -> StateFunction {
    let ratio = psi.boundary_decay_ratio();
    if ratio > BOUNDARY_DECAY_LIMIT {
        log::warn!(
            "kinetic_apply: boundary decay ratio {ratio:.3e} exceeds {BOUNDARY_DECAY_LIMIT:.0e}; \
             periodic wraparound may contaminate the result"
        );
    }
    let mut fft = Fft2::new(psi.grid.points_x, psi.grid.points_y);
    let mult = kinetic_multipliers(&psi.grid);
    let mut data = psi.amplitudes.clone();
    fft.forward(&mut data);
    for (v, m) in data.iter_mut().zip(mult.iter()) {
        *v *= *m;
    }
    fft.inverse(&mut data);
    StateFunction { grid: psi.grid, amplitudes: data, energy: None }
}
