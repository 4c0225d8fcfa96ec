//! Analytic solutions of the unperturbed oscillator and an independent
//! truncated-basis diagonalization of the perturbed Hamiltonian.
//!
//! Unperturbed eigenstates are the Hermite-Gaussian modes
//!
//! ```text
//! Ψ_{n,m}(x,y) = N H_n(√ωx x) H_m(√ωy y) e^{-(ωx x² + ωy y²)/2},
//! E_{n,m}     = ωx(n + 1/2) + ωy(m + 1/2),
//! ```
//!
//! which also serve as the basis for diagonalizing confinement + bumps
//! exactly within an energy cutoff. Bump matrix elements separate into 1D
//! Gauss-Hermite quadratures that are exact at the combined polynomial
//! degree, so the only truncation error is the basis cutoff itself. This
//! route shares nothing with the grid propagator, which makes it the referee
//! for the ITP solver at small scale.

use crate::hermite::{hermite_functions, GaussHermite};
use crate::lattice::{GridSpec, StateFunction};
use crate::potential::{BumpSet, PotentialConfig};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// Maximum truncated-basis size accepted by [`diagonalize_truncated`].
pub const MAX_BASIS: usize = 4000;

/// Hermite orders (n, m) of a mode in x and y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HgIndex {
    pub n: usize,
    pub m: usize,
}

impl HgIndex {
    pub fn new(n: usize, m: usize) -> Self {
        HgIndex { n, m }
    }
}

/// E = ωx(n + 1/2) + ωy(m + 1/2).
pub fn unperturbed_energy(idx: HgIndex, cfg: &PotentialConfig) -> f64 {
    cfg.omega_x() * (idx.n as f64 + 0.5) + cfg.omega_y() * (idx.m as f64 + 0.5)
}

/// Sampled, discretely renormalized Hermite-Gaussian mode.
///
/// Fails when the mode's local wavelength 2π/√(2E_axis) drops below four grid
/// spacings on either axis.
pub fn hg_mode(idx: HgIndex, grid: &GridSpec, cfg: &PotentialConfig) -> Result<StateFunction> {
    let (wx, wy) = (cfg.omega_x(), cfg.omega_y());
    for (order, omega, h) in [(idx.n, wx, grid.spacing_x()), (idx.m, wy, grid.spacing_y())] {
        let e_axis = omega * (order as f64 + 0.5);
        let lambda = 2.0 * std::f64::consts::PI / (2.0 * e_axis).sqrt();
        if lambda < 4.0 * h {
            return Err(Error::UnresolvableMode { n: idx.n, m: idx.m, lambda });
        }
    }

    // separable evaluation: one pass of the recurrence per axis
    let mut fx = vec![0.0; grid.points_x];
    let mut buf = vec![0.0; idx.n + 1];
    for (ix, v) in fx.iter_mut().enumerate() {
        hermite_functions(idx.n, wx.sqrt() * grid.x(ix), &mut buf);
        *v = wx.powf(0.25) * buf[idx.n];
    }
    let mut fy = vec![0.0; grid.points_y];
    let mut buf = vec![0.0; idx.m + 1];
    for (iy, v) in fy.iter_mut().enumerate() {
        hermite_functions(idx.m, wy.sqrt() * grid.y(iy), &mut buf);
        *v = wy.powf(0.25) * buf[idx.m];
    }

    let mut amplitudes = Vec::with_capacity(grid.len());
    for vy in &fy {
        for vx in &fx {
            amplitudes.push(Complex64::new(vx * vy, 0.0));
        }
    }
    let mut state = StateFunction { grid: *grid, amplitudes, energy: Some(unperturbed_energy(idx, cfg)) };
    state.normalize();
    Ok(state)
}

/// All modes with energy ≤ `e_cut`, ascending by energy (ties keep the
/// m-major generation order, i.e. ascending m).
pub fn enumerate_modes(e_cut: f64, cfg: &PotentialConfig) -> Vec<HgIndex> {
    let (wx, wy) = (cfg.omega_x(), cfg.omega_y());
    let mut modes = Vec::new();
    let mut m = 0usize;
    while wy * (m as f64 + 0.5) + wx * 0.5 <= e_cut {
        let mut n = 0usize;
        while wx * (n as f64 + 0.5) + wy * (m as f64 + 0.5) <= e_cut {
            modes.push(HgIndex::new(n, m));
            n += 1;
        }
        m += 1;
    }
    modes.sort_by(|a, b| {
        unperturbed_energy(*a, cfg)
            .partial_cmp(&unperturbed_energy(*b, cfg))
            .expect("finite energies")
    });
    modes
}

/// The k lowest modes in energy order, growing the cutoff as needed.
pub fn lowest_modes(k: usize, cfg: &PotentialConfig) -> Vec<HgIndex> {
    let mut e_cut = cfg.omega_x() * 0.5 + cfg.omega_y() * 0.5 + cfg.omega_x().max(cfg.omega_y());
    loop {
        let modes = enumerate_modes(e_cut, cfg);
        if modes.len() >= k {
            return modes[..k].to_vec();
        }
        e_cut *= 1.5;
    }
}

/// Unperturbed energy of the k-th state (1-based), a cheap target-energy
/// estimate for sizing grids and cutoffs.
pub fn kth_energy(k: usize, cfg: &PotentialConfig) -> f64 {
    let modes = lowest_modes(k.max(1), cfg);
    unperturbed_energy(modes[modes.len() - 1], cfg)
}

/// 1D overlap ∫ φ_a(x;ω) φ_b(x;ω) e^{-(x-c)²/2σ²} dx by Gauss-Hermite
/// quadrature after completing the square of the combined Gaussian.
///
/// With α = ω + 1/(2σ²) and nodes xᵢ = μ + uᵢ/√α, the quadrature sum
/// (1/√α)·Σ tᵢ·g(xᵢ) is exact for the polynomial part of degree a+b as long
/// as the rule has at least (a+b)/2 + 1 points. Every factor of g is O(1), so
/// the evaluation never leaves the representable range even for bumps far
/// from the origin or orders in the hundreds.
fn overlap_1d(
    a: usize,
    b: usize,
    omega: f64,
    center: f64,
    sigma: f64,
    rule: &GaussHermite,
    buf: &mut [f64],
) -> f64 {
    let alpha = omega + 1.0 / (2.0 * sigma * sigma);
    let mu = center / (2.0 * alpha * sigma * sigma);
    let sqrt_alpha = alpha.sqrt();
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let n_max = a.max(b);
    let mut acc = 0.0;
    for (&u, &t) in rule.nodes.iter().zip(rule.total_weights.iter()) {
        let x = mu + u / sqrt_alpha;
        hermite_functions(n_max, omega.sqrt() * x, buf);
        let d = x - center;
        acc += t * buf[a] * buf[b] * (-d * d * inv2s2).exp();
    }
    acc * omega.sqrt() / sqrt_alpha
}

/// ⟨Ψ_a| M exp(-|r-r₀|²/2σ²) |Ψ_b⟩, separable into x and y factors.
pub fn bump_matrix_element(
    a: HgIndex,
    b: HgIndex,
    position: (f64, f64),
    sigma: f64,
    amplitude: f64,
    cfg: &PotentialConfig,
) -> Result<f64> {
    if amplitude == 0.0 {
        return Ok(0.0);
    }
    let rule_x = GaussHermite::new((a.n + b.n) / 2 + 2)?;
    let rule_y = GaussHermite::new((a.m + b.m) / 2 + 2)?;
    let mut buf = vec![0.0; a.n.max(b.n).max(a.m).max(b.m) + 1];
    let ix = overlap_1d(a.n, b.n, cfg.omega_x(), position.0, sigma, &rule_x, &mut buf);
    let iy = overlap_1d(a.m, b.m, cfg.omega_y(), position.1, sigma, &rule_y, &mut buf);
    Ok(amplitude * ix * iy)
}

/// Eigenpairs of the perturbed Hamiltonian in the truncated Hermite-Gaussian
/// basis: energies ascending plus real coefficient vectors over the basis.
#[derive(Debug, Clone)]
pub struct BasisSolution {
    pub modes: Vec<HgIndex>,
    pub energies: Vec<f64>,
    /// Row-major (state, mode) coefficient matrix; orthonormal rows.
    pub coefficients: Vec<f64>,
}

impl BasisSolution {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn coefficient(&self, state: usize, mode: usize) -> f64 {
        self.coefficients[state * self.modes.len() + mode]
    }

    /// Superpose the basis modes onto a grid for state `state`.
    pub fn synthesize(&self, state: usize, grid: &GridSpec, cfg: &PotentialConfig) -> Result<StateFunction> {
        let mut out = StateFunction::zeros(*grid);
        for (j, idx) in self.modes.iter().enumerate() {
            let c = self.coefficient(state, j);
            if c.abs() < 1e-14 {
                continue;
            }
            let mode = hg_mode(*idx, grid, cfg)?;
            for (o, m) in out.amplitudes.iter_mut().zip(mode.amplitudes.iter()) {
                *o += c * m;
            }
        }
        out.energy = Some(self.energies[state]);
        out.normalize();
        Ok(out)
    }

    /// CSV with columns state, n, m, coefficient.
    pub fn write_coefficients_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "state,n,m,coefficient")?;
        for s in 0..self.len() {
            for (j, idx) in self.modes.iter().enumerate() {
                writeln!(w, "{s},{},{},{}", idx.n, idx.m, self.coefficient(s, j))?;
            }
        }
        Ok(())
    }
}

/// Dense symmetric H_ab = δ_ab·E_a + Σ_bumps ⟨a|V_bump|b⟩ over the modes below
/// `e_cut`, diagonalized with ascending eigenvalues.
///
/// Low-lying eigenvalues are trustworthy up to roughly `e_cut` minus a few
/// level spacings; callers wanting the first k states should leave a buffer
/// above the k-th unperturbed energy (8·ω₀ by default elsewhere).
pub fn diagonalize_truncated(e_cut: f64, bumps: &BumpSet, cfg: &PotentialConfig) -> Result<BasisSolution> {
    let modes = enumerate_modes(e_cut, cfg);
    if modes.is_empty() {
        return Err(Error::InvalidConfig(format!("energy cutoff {e_cut} lies below the ground state")));
    }
    if modes.len() > MAX_BASIS {
        return Err(Error::BasisTooLarge { size: modes.len(), max: MAX_BASIS });
    }
    let b = modes.len();
    let n_max = modes.iter().map(|i| i.n).max().unwrap();
    let m_max = modes.iter().map(|i| i.m).max().unwrap();

    // Per bump, tabulate the 1D overlap factors for every order pair once;
    // one quadrature rule exact for the largest pair covers all of them.
    let rule_x = GaussHermite::new(n_max + 2)?;
    let rule_y = GaussHermite::new(m_max + 2)?;
    let mut h = vec![0.0f64; b * b];
    for (a, idx) in modes.iter().enumerate() {
        h[a * b + a] = unperturbed_energy(*idx, cfg);
    }

    if bumps.amplitude != 0.0 && !bumps.is_empty() {
        let tables: Vec<(Vec<f64>, Vec<f64>)> = bumps
            .positions
            .par_iter()
            .map(|&(bx, by)| {
                let mut buf = vec![0.0; n_max.max(m_max) + 1];
                let tx = overlap_table(n_max, cfg.omega_x(), bx, bumps.sigma, &rule_x, &mut buf);
                let ty = overlap_table(m_max, cfg.omega_y(), by, bumps.sigma, &rule_y, &mut buf);
                (tx, ty)
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..b)
            .into_par_iter()
            .map(|a| {
                let ia = modes[a];
                let mut row = vec![0.0; b];
                for (bj, ib) in modes.iter().enumerate().skip(a) {
                    let mut acc = 0.0;
                    for (tx, ty) in &tables {
                        acc += tx[ia.n * (n_max + 1) + ib.n] * ty[ia.m * (m_max + 1) + ib.m];
                    }
                    row[bj] = bumps.amplitude * acc;
                }
                row
            })
            .collect();
        for a in 0..b {
            for bj in a..b {
                h[a * b + bj] += rows[a][bj];
                if bj != a {
                    h[bj * b + a] = h[a * b + bj];
                }
            }
        }
    }

    let mat = nalgebra::DMatrix::from_row_slice(b, b, &h);
    let eigen = nalgebra::SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| eigen.eigenvalues[i].partial_cmp(&eigen.eigenvalues[j]).expect("finite"));

    let mut energies = Vec::with_capacity(b);
    let mut coefficients = vec![0.0; b * b];
    for (s, &col) in order.iter().enumerate() {
        energies.push(eigen.eigenvalues[col]);
        let v = eigen.eigenvectors.column(col);
        // deterministic sign: largest-magnitude component positive
        let lead = (0..b)
            .max_by(|&i, &j| v[i].abs().partial_cmp(&v[j].abs()).expect("finite"))
            .unwrap();
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..b {
            coefficients[s * b + j] = sign * v[j];
        }
    }
    Ok(BasisSolution { modes, energies, coefficients })
}

/// Symmetric (order+1)² table of 1D overlaps for one bump and one axis.
fn overlap_table(
    order_max: usize,
    omega: f64,
    center: f64,
    sigma: f64,
    rule: &GaussHermite,
    buf: &mut [f64],
) -> Vec<f64> {
    let alpha = omega + 1.0 / (2.0 * sigma * sigma);
    let mu = center / (2.0 * alpha * sigma * sigma);
    let sqrt_alpha = alpha.sqrt();
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let w = order_max + 1;

    // values of every order at every node, then weighted outer products
    let mut node_vals = vec![0.0; rule.len() * w];
    let mut weights = vec![0.0; rule.len()];
    for (i, (&u, &t)) in rule.nodes.iter().zip(rule.total_weights.iter()).enumerate() {
        let x = mu + u / sqrt_alpha;
        hermite_functions(order_max, omega.sqrt() * x, buf);
        node_vals[i * w..(i + 1) * w].copy_from_slice(&buf[..w]);
        let d = x - center;
        weights[i] = t * (-d * d * inv2s2).exp();
    }
    let scale = omega.sqrt() / sqrt_alpha;
    let mut table = vec![0.0; w * w];
    for na in 0..w {
        for nb in na..w {
            let mut acc = 0.0;
            for i in 0..rule.len() {
                acc += weights[i] * node_vals[i * w + na] * node_vals[i * w + nb];
            }
            let v = scale * acc;
            table[na * w + nb] = v;
            table[nb * w + na] = v;
        }
    }
    table
}
