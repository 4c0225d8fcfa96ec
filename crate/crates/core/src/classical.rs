//! Classical Lissajous orbits of the unperturbed anisotropic oscillator.
//!
//! Closed orbits exist only at commensurable frequencies ωx/ωy = p/q with p, q
//! coprime; one period T = 2π/ω₀ then closes the curve after p oscillations in
//! x and q in y. The family at fixed energy is parameterized by the energy
//! fraction η carried by the x mode and the relative phase φ:
//!
//! ```text
//! x(t) = A cos(p ω₀ t + φ),  A = √(2ηE)/ωx
//! y(t) = B cos(q ω₀ t),      B = √(2(1-η)E)/ωy
//! ```
//!
//! Degenerate members retrace themselves and look like open strings; the rest
//! are closed loops. The distinction is made operationally: a curve whose
//! first half-period traces the same point set as its second half-period is a
//! string.

use crate::{Error, Result};

/// Base frequency ω₀; unity by convention throughout.
pub const OMEGA0: f64 = 1.0;

/// Geometric class of a Lissajous orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitKind {
    /// Self-retracing degenerate curve (open string).
    String,
    /// Non-degenerate closed curve.
    Loop,
}

impl std::fmt::Display for OrbitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrbitKind::String => write!(f, "string"),
            OrbitKind::Loop => write!(f, "loop"),
        }
    }
}

/// A sampled closed orbit of the unperturbed oscillator.
#[derive(Debug, Clone)]
pub struct LissajousOrbit {
    pub p: u32,
    pub q: u32,
    pub energy: f64,
    /// Energy fraction in the x mode, 0 < η < 1.
    pub eta: f64,
    /// Relative phase in radians.
    pub phi: f64,
    /// Polyline over one period, closed implicitly (last → first).
    pub samples: Vec<(f64, f64)>,
    pub kind: OrbitKind,
}

impl LissajousOrbit {
    pub fn amplitude_x(&self) -> f64 {
        (2.0 * self.eta * self.energy).sqrt() / (self.p as f64 * OMEGA0)
    }

    pub fn amplitude_y(&self) -> f64 {
        (2.0 * (1.0 - self.eta) * self.energy).sqrt() / (self.q as f64 * OMEGA0)
    }

    /// Analytic position at time t.
    pub fn position(&self, t: f64) -> (f64, f64) {
        (
            self.amplitude_x() * (self.p as f64 * OMEGA0 * t + self.phi).cos(),
            self.amplitude_y() * (self.q as f64 * OMEGA0 * t).cos(),
        )
    }

    /// Analytic velocity at time t.
    pub fn velocity(&self, t: f64) -> (f64, f64) {
        let (wx, wy) = (self.p as f64 * OMEGA0, self.q as f64 * OMEGA0);
        (
            -self.amplitude_x() * wx * (wx * t + self.phi).sin(),
            -self.amplitude_y() * wy * (wy * t).sin(),
        )
    }

    /// CSV polyline with columns t, x, y.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y")?;
        let period = 2.0 * std::f64::consts::PI / OMEGA0;
        let n = self.samples.len();
        for (i, (x, y)) in self.samples.iter().enumerate() {
            let t = period * i as f64 / n as f64;
            writeln!(w, "{t},{x},{y}")?;
        }
        Ok(())
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Sample one closed orbit; rejects non-coprime (p,q) with a pointer to the
/// reduced fraction.
pub fn make_orbit(p: u32, q: u32, energy: f64, eta: f64, phi: f64, samples_per_period: usize) -> Result<LissajousOrbit> {
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(Error::NotCoprime { p, q });
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidConfig(format!("eta must lie in (0,1), got {eta}")));
    }
    if !(energy > 0.0) {
        return Err(Error::InvalidConfig(format!("orbit energy must be positive, got {energy}")));
    }
    let min_samples = 64 * p.max(q) as usize;
    if samples_per_period < min_samples {
        return Err(Error::InvalidConfig(format!(
            "samples_per_period {samples_per_period} < 64·max(p,q) = {min_samples}"
        )));
    }
    let mut orbit = LissajousOrbit {
        p,
        q,
        energy,
        eta,
        phi,
        samples: Vec::with_capacity(samples_per_period),
        kind: OrbitKind::Loop,
    };
    let period = 2.0 * std::f64::consts::PI / OMEGA0;
    for i in 0..samples_per_period {
        let t = period * i as f64 / samples_per_period as f64;
        orbit.samples.push(orbit.position(t));
    }
    orbit.kind = classify_kind(&orbit);
    Ok(orbit)
}

/// Point-set retracing test: `String` when the half-period point sets agree
/// within 1e-6·√(2E) symmetric Hausdorff distance, `Loop` otherwise.
///
/// Each half includes both of its endpoint samples (t = 0, T/2, T≡0), so a
/// self-retracing curve matches exactly rather than up to one sample spacing
/// at the turning points.
pub fn classify_kind(orbit: &LissajousOrbit) -> OrbitKind {
    let n = orbit.samples.len();
    let half = n / 2;
    let mut first: Vec<(f64, f64)> = orbit.samples[..=half].to_vec();
    let mut second: Vec<(f64, f64)> = orbit.samples[half..].to_vec();
    second.push(orbit.samples[0]);
    first.shrink_to_fit();
    second.shrink_to_fit();
    let tol = 1e-6 * (2.0 * orbit.energy).sqrt();
    let d = hausdorff(&first, &second).max(hausdorff(&second, &first));
    if d < tol {
        OrbitKind::String
    } else {
        OrbitKind::Loop
    }
}

/// Template bank over η ∈ (0,1) and φ ∈ [0,2π): η_i = (i+1)/(nη+1),
/// φ_j = 2πj/nφ. A single-member family sits at η = 1/2, φ = 0.
pub fn orbit_family(p: u32, q: u32, energy: f64, n_eta: usize, n_phi: usize, samples_per_period: usize) -> Result<Vec<LissajousOrbit>> {
    if n_eta < 1 || n_phi < 1 {
        return Err(Error::InvalidConfig("family needs n_eta, n_phi ≥ 1".into()));
    }
    let mut family = Vec::with_capacity(n_eta * n_phi);
    for i in 0..n_eta {
        let eta = (i as f64 + 1.0) / (n_eta as f64 + 1.0);
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            family.push(make_orbit(p, q, energy, eta, phi, samples_per_period)?);
        }
    }
    Ok(family)
}

/// Distance from a point to a closed polyline (nearest segment projection).
pub fn point_to_polyline(pt: (f64, f64), poly: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        best = best.min(point_to_segment(pt, a, b));
        if best == 0.0 {
            return 0.0;
        }
    }
    best
}

fn point_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ax, ay) = a;
    let (dx, dy) = (b.0 - ax, b.1 - ay);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.0 - ax) * dx + (p.1 - ay) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// max over points of `from` of the distance to the polyline `to` (open
/// polylines here: half-period arcs, so no closing segment).
fn hausdorff(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &pt in from {
        let mut best = f64::INFINITY;
        for w in to.windows(2) {
            best = best.min(point_to_segment(pt, w[0], w[1]));
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}
