//! Quantitative post-processing: density of states, the α localization
//! measure, tube-overlap scar detection against orbit template banks, the
//! scarred-fraction census, and deviation scans.
//!
//! The scar detector is an enhancement ratio: for a template orbit, the
//! probability P caught inside a tube of width w around its polyline
//! (restricted to the classically allowed ellipse of the state's energy) is
//! divided by the area fraction f of that tube. A featureless state gives
//! s = P/f ≈ 1; density concentrated along the orbit drives s well above 1.
//! The default tube width is the local de Broglie wavelength 2π/√(2E), the
//! natural transverse scale of a scar.

use crate::classical::{orbit_family, LissajousOrbit, OrbitKind};
use crate::itp::{solve, ItpConfig};
use crate::lattice::{GridSpec, StateFunction};
use crate::potential::{total_potential_with, PotentialConfig};
use crate::{Error, Result};
use rayon::prelude::*;

/// Smoothed level density with a Gaussian energy window.
#[derive(Debug, Clone)]
pub struct DosCurve {
    pub energies: Vec<f64>,
    pub dos: Vec<f64>,
    pub window: f64,
}

impl DosCurve {
    /// Trapezoid integral over the sampled range; equals the number of levels
    /// well inside the range up to window tails.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.energies.len() {
            acc += 0.5 * (self.dos[i] + self.dos[i - 1]) * (self.energies[i] - self.energies[i - 1]);
        }
        acc
    }

    /// CSV with columns energy, dos.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "energy,dos")?;
        for (e, d) in self.energies.iter().zip(self.dos.iter()) {
            writeln!(w, "{e},{d}")?;
        }
        Ok(())
    }
}

/// Uniformly spaced energy axis.
pub fn energy_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// D(E) = Σₙ (2πσ²)^{-1/2} exp(-(E-Eₙ)²/2σ²) on the sample axis.
pub fn dos(levels: &[f64], window: f64, samples: &[f64]) -> DosCurve {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * window);
    let inv = 1.0 / (2.0 * window * window);
    let dos_values = samples
        .iter()
        .map(|&e| {
            levels
                .iter()
                .map(|&l| {
                    let d = e - l;
                    norm * (-d * d * inv).exp()
                })
                .sum()
        })
        .collect();
    DosCurve { energies: samples.to_vec(), dos: dos_values, window }
}

/// One DOS curve per frequency ratio; the level provider maps a ratio
/// ωx/ωy to its spectrum (analytic enumeration or solved eigenvalues).
pub fn dos_ratio_scan(
    ratios: &[f64],
    mut levels_for_ratio: impl FnMut(f64) -> Vec<f64>,
    window: f64,
    samples: &[f64],
) -> Vec<DosCurve> {
    ratios.iter().map(|&r| dos(&levels_for_ratio(r), window, samples)).collect()
}

/// Largest number of levels that fit inside one sliding window; the
/// degeneracy weight visible at a given energy resolution.
pub fn max_cluster_multiplicity(levels: &[f64], window: f64) -> usize {
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] - sorted[lo] > window {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

/// α = Z·∫|ψ|⁴ with Z = 2πE/(ωx·ωy), the classical ellipse area at the
/// state's energy. A density spread uniformly over the ellipse gives exactly
/// 1; localization drives α upward.
pub fn alpha_value(psi: &StateFunction, energy: f64, cfg: &PotentialConfig) -> f64 {
    let z = cfg.ellipse_area(energy);
    let quartic: f64 = psi.amplitudes.iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>()
        * psi.grid.cell_area();
    z * quartic
}

/// Detector parameters for the scar census.
#[derive(Debug, Clone)]
pub struct ScarParams {
    /// Tube width; defaults to the local de Broglie wavelength per state.
    pub tube_width: Option<f64>,
    /// s at or above this flags a state as strongly scarred.
    pub threshold: f64,
    pub eta_count: usize,
    pub phi_count: usize,
    /// Samples per orbit period (floored at 64·max(p,q) internally).
    pub samples_per_period: usize,
}

impl Default for ScarParams {
    fn default() -> Self {
        ScarParams { tube_width: None, threshold: 2.0, eta_count: 9, phi_count: 32, samples_per_period: 256 }
    }
}

/// 2π/√(2E): the local wavelength at energy E, the natural scar width.
pub fn default_tube_width(energy: f64) -> f64 {
    2.0 * std::f64::consts::PI / (2.0 * energy).sqrt()
}

/// Outcome of matching one state against a template bank.
#[derive(Debug, Clone)]
pub struct ScarMeasurement {
    /// Best enhancement ratio over the bank; 1 means featureless.
    pub s: f64,
    /// Index of the winning template, None when every template was skipped.
    pub best: Option<usize>,
}

/// Tube-overlap enhancement s = max over templates of P_tube/f_tube.
///
/// P_tube integrates |ψ|² over nodes within w/2 of the template polyline and
/// inside the classical ellipse at `energy`; f_tube is that tube's share of
/// the ellipse nodes. Templates whose tube would leave the grid are skipped
/// with a debug diagnostic.
pub fn scar_measure(
    psi: &StateFunction,
    energy: f64,
    cfg: &PotentialConfig,
    templates: &[LissajousOrbit],
    tube_width: f64,
) -> ScarMeasurement {
    let grid = &psi.grid;
    let density: Vec<f64> = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    measure_with_density(&density, grid, energy, cfg, templates, tube_width)
}

fn measure_with_density(
    density: &[f64],
    grid: &GridSpec,
    energy: f64,
    cfg: &PotentialConfig,
    templates: &[LissajousOrbit],
    tube_width: f64,
) -> ScarMeasurement {
    let (wx2, wy2) = (cfg.omega_x().powi(2), cfg.omega_y().powi(2));
    let (nx, ny) = (grid.points_x, grid.points_y);
    let (hx, hy) = (grid.spacing_x(), grid.spacing_y());
    let half_w = 0.5 * tube_width;

    let mut count_ellipse = 0usize;
    for iy in 0..ny {
        let y = grid.y(iy);
        for ix in 0..nx {
            let x = grid.x(ix);
            if 0.5 * (wx2 * x * x + wy2 * y * y) <= energy {
                count_ellipse += 1;
            }
        }
    }
    if count_ellipse == 0 {
        return ScarMeasurement { s: 0.0, best: None };
    }

    let mut stamp = vec![u32::MAX; grid.len()];
    let mut best = ScarMeasurement { s: 0.0, best: None };
    for (t_idx, orbit) in templates.iter().enumerate() {
        // tube must stay inside the box
        if orbit.amplitude_x() + half_w > grid.extent_x - hx
            || orbit.amplitude_y() + half_w > grid.extent_y - hy
        {
            log::debug!(
                "scar template ({},{}) eta={:.3} phi={:.3} exits the grid; skipped",
                orbit.p, orbit.q, orbit.eta, orbit.phi
            );
            continue;
        }
        let mark = t_idx as u32;
        let mut p_tube = 0.0;
        let mut count_tube = 0usize;
        let n_samples = orbit.samples.len();
        for si in 0..n_samples {
            let a = orbit.samples[si];
            let b = orbit.samples[(si + 1) % n_samples];
            let min_x = a.0.min(b.0) - half_w;
            let max_x = a.0.max(b.0) + half_w;
            let min_y = a.1.min(b.1) - half_w;
            let max_y = a.1.max(b.1) + half_w;
            let ix_lo = (((min_x + grid.extent_x) / hx).floor().max(0.0)) as usize;
            let ix_hi = ((((max_x + grid.extent_x) / hx).ceil()) as usize).min(nx - 1);
            let iy_lo = (((min_y + grid.extent_y) / hy).floor().max(0.0)) as usize;
            let iy_hi = ((((max_y + grid.extent_y) / hy).ceil()) as usize).min(ny - 1);
            for iy in iy_lo..=iy_hi {
                let y = grid.y(iy);
                for ix in ix_lo..=ix_hi {
                    let i = iy * nx + ix;
                    if stamp[i] == mark {
                        continue;
                    }
                    let x = grid.x(ix);
                    if segment_dist_sq((x, y), a, b) <= half_w * half_w
                        && 0.5 * (wx2 * x * x + wy2 * y * y) <= energy
                    {
                        stamp[i] = mark;
                        count_tube += 1;
                        p_tube += density[i];
                    }
                }
            }
        }
        if count_tube == 0 {
            continue;
        }
        let p = p_tube * grid.cell_area();
        let f = count_tube as f64 / count_ellipse as f64;
        let s = p / f;
        if best.best.is_none() || s > best.s {
            best = ScarMeasurement { s, best: Some(t_idx) };
        }
    }
    best
}

fn segment_dist_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - cx).powi(2) + (p.1 - cy).powi(2)
}

/// Per-state scar verdict.
#[derive(Debug, Clone)]
pub struct ScarReport {
    pub index: usize,
    pub energy: f64,
    pub alpha: f64,
    /// Best enhancement ratio; None when no template applied.
    pub s: Option<f64>,
    /// Best-fit orbit parameters (p, q, η, φ).
    pub orbit: Option<(u32, u32, f64, f64)>,
    pub kind: Option<OrbitKind>,
    pub strongly_scarred: bool,
}

impl ScarReport {
    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            Some(OrbitKind::String) => "string",
            Some(OrbitKind::Loop) => "loop",
            None => "none",
        }
    }
}

/// CSV with columns index, energy, alpha, s, p, q, eta, phi, kind, flag.
pub fn write_scar_reports_csv<W: std::io::Write>(reports: &[ScarReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "index,energy,alpha,s,p,q,eta,phi,kind,flag")?;
    for r in reports {
        let (s, p, q, eta, phi) = match (r.s, r.orbit) {
            (Some(s), Some((p, q, eta, phi))) => {
                (s.to_string(), p.to_string(), q.to_string(), eta.to_string(), phi.to_string())
            }
            (Some(s), None) => (s.to_string(), String::new(), String::new(), String::new(), String::new()),
            _ => (String::new(), String::new(), String::new(), String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index, r.energy, r.alpha, s, p, q, eta, phi, r.kind_label(),
            if r.strongly_scarred { 1 } else { 0 }
        )?;
    }
    Ok(())
}

/// Match every state against template banks for each candidate (p,q) and
/// report the scarred fraction. States need their energies set.
pub fn scar_survey(
    states: &[StateFunction],
    cfg: &PotentialConfig,
    candidates: &[(u32, u32)],
    params: &ScarParams,
) -> Result<(Vec<ScarReport>, f64)> {
    let reports: Result<Vec<ScarReport>> = states
        .par_iter()
        .enumerate()
        .map(|(index, psi)| {
            let energy = psi.energy.ok_or_else(|| {
                Error::InvalidConfig(format!("state {index} has no energy; solve before surveying"))
            })?;
            let density: Vec<f64> = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
            let w = params.tube_width.unwrap_or_else(|| default_tube_width(energy));
            let mut bank: Vec<LissajousOrbit> = Vec::new();
            for &(p, q) in candidates {
                let spp = params.samples_per_period.max(64 * p.max(q) as usize);
                bank.extend(orbit_family(p, q, energy, params.eta_count, params.phi_count, spp)?);
            }
            let alpha = alpha_value(psi, energy, cfg);
            let m = measure_with_density(&density, &psi.grid, energy, cfg, &bank, w);
            let report = match m.best {
                Some(idx) => {
                    let orbit = &bank[idx];
                    ScarReport {
                        index,
                        energy,
                        alpha,
                        s: Some(m.s),
                        orbit: Some((orbit.p, orbit.q, orbit.eta, orbit.phi)),
                        kind: Some(orbit.kind),
                        strongly_scarred: m.s >= params.threshold,
                    }
                }
                None => ScarReport {
                    index,
                    energy,
                    alpha,
                    s: None,
                    orbit: None,
                    kind: None,
                    strongly_scarred: false,
                },
            };
            Ok(report)
        })
        .collect();
    let reports = reports?;
    let scarred = reports.iter().filter(|r| r.strongly_scarred).count();
    let fraction = if reports.is_empty() { 0.0 } else { scarred as f64 / reports.len() as f64 };
    Ok((reports, fraction))
}

/// One row of a deviation scan.
#[derive(Debug, Clone)]
pub struct DeviationRow {
    pub delta: f64,
    /// α̃(δ)/α̃(0): normalized mean α of the selected looplike scars, 1 at
    /// δ = 0 and shrinking as scarring weakens off commensurability.
    pub alpha_ratio: f64,
    /// Number of states passing the scar threshold.
    pub scar_count: usize,
    /// Fewer than the requested loops were found; the mean covers what exists.
    pub flagged: bool,
}

/// CSV with columns delta, alpha_ratio, scar_count, flagged.
pub fn write_deviation_csv<W: std::io::Write>(rows: &[DeviationRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "delta,alpha_ratio,scar_count,flagged")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.delta, r.alpha_ratio, r.scar_count, if r.flagged { 1 } else { 0 })?;
    }
    Ok(())
}

/// Solve the perturbed system at ωx/ωy = p/q + δ for each δ (one shared bump
/// realization), detect scars against the commensurable (p,q) templates, and
/// average the α of the `n_scars` strongest looplike scars.
///
/// The δ list must contain 0; every ratio is normalized by the δ = 0 mean.
pub fn deviation_scan(
    grid: &GridSpec,
    base: &PotentialConfig,
    itp: &ItpConfig,
    deltas: &[f64],
    n_scars: usize,
    params: &ScarParams,
) -> Result<Vec<DeviationRow>> {
    if !deltas.iter().any(|&d| d == 0.0) {
        return Err(Error::InvalidConfig("deviation scan needs δ = 0 in the list".into()));
    }
    let bumps = crate::potential::scatter_bumps(base);
    let base_ratio = base.p as f64 / base.q as f64;
    let candidates = [(base.p, base.q)];

    let mut means = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut cfg = base.clone();
        cfg.ratio_override = Some(base_ratio + delta);
        let v = total_potential_with(grid, &cfg, &bumps);
        let solution = solve(&v, &cfg, itp)?;
        let (reports, _) = scar_survey(&solution.states, &cfg, &candidates, params)?;
        let scar_count = reports.iter().filter(|r| r.strongly_scarred).count();
        let mut loops: Vec<&ScarReport> = reports
            .iter()
            .filter(|r| r.strongly_scarred && r.kind == Some(OrbitKind::Loop))
            .collect();
        loops.sort_by(|a, b| b.s.partial_cmp(&a.s).expect("finite s"));
        let take = loops.len().min(n_scars);
        let flagged = take < n_scars;
        let mean_alpha = if take == 0 {
            f64::NAN
        } else {
            loops[..take].iter().map(|r| r.alpha).sum::<f64>() / take as f64
        };
        log::info!(
            "deviation delta={delta:+.4}: scars={scar_count} loops={} mean_alpha={mean_alpha:.4}",
            loops.len()
        );
        means.push((delta, mean_alpha, scar_count, flagged));
    }

    let alpha0 = means
        .iter()
        .find(|(d, ..)| *d == 0.0)
        .map(|(_, a, ..)| *a)
        .expect("delta 0 present");
    Ok(means
        .into_iter()
        .map(|(delta, alpha, scar_count, flagged)| DeviationRow {
            delta,
            alpha_ratio: if alpha0.is_finite() && alpha0 > 0.0 { alpha / alpha0 } else { f64::NAN },
            scar_count,
            flagged,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::make_orbit;
    use crate::lattice::make_grid;
    use crate::oracle::{enumerate_modes, hg_mode, unperturbed_energy, HgIndex};
    use num_complex::Complex64;

    #[test]
    fn dos_single_level_peak_height() {
        let samples = energy_axis(1.0, 2.0, 2001);
        let curve = dos(&[1.5], 0.001, &samples);
        let peak = curve.dos.iter().cloned().fold(0.0, f64::max);
        // (2π)^{-1/2}/0.001 = 398.942...
        assert!((peak - 398.9422804014327).abs() < 0.1, "peak {peak}");
        assert!((curve.integral() - 1.0).abs() < 0.01);
    }

    #[test]
    fn dos_empty_is_zero() {
        let samples = energy_axis(0.0, 1.0, 11);
        let curve = dos(&[], 0.001, &samples);
        assert!(curve.dos.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn dos_isotropic_degeneracy_areas() {
        // levels E = n+1 carry weight n+1; integrate each peak separately
        let cfg = PotentialConfig::new(1, 1);
        let levels: Vec<f64> = enumerate_modes(10.0, &cfg)
            .iter()
            .map(|i| unperturbed_energy(*i, &cfg))
            .collect();
        let window = 0.01;
        for n in 1..=5usize {
            let e = n as f64;
            let samples = energy_axis(e - 0.2, e + 0.2, 4001);
            let curve = dos(&levels, window, &samples);
            assert!((curve.integral() - n as f64).abs() < 0.01 * n as f64, "level {e}");
        }
    }

    #[test]
    fn dos_linearity() {
        let samples = energy_axis(0.0, 5.0, 501);
        let (a, b) = (vec![1.0, 2.5], vec![3.3]);
        let both: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
        let ca = dos(&a, 0.05, &samples);
        let cb = dos(&b, 0.05, &samples);
        let cab = dos(&both, 0.05, &samples);
        for i in 0..samples.len() {
            assert!((cab.dos[i] - ca.dos[i] - cb.dos[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cluster_multiplicity_detects_degeneracy() {
        let cfg = PotentialConfig::new(1, 2);
        let below_20: Vec<f64> = enumerate_modes(20.0, &cfg)
            .iter()
            .map(|i| unperturbed_energy(*i, &cfg))
            .collect();
        // commensurable 1:2 has up to 10-fold clusters below E = 20
        assert!(max_cluster_multiplicity(&below_20, 0.001) >= 3);

        // a slightly detuned ratio splits every cluster beyond the window
        let mut detuned = cfg.clone();
        detuned.ratio_override = Some(0.497);
        let split: Vec<f64> = enumerate_modes(20.0, &detuned)
            .iter()
            .map(|i| unperturbed_energy(*i, &detuned))
            .collect();
        assert_eq!(max_cluster_multiplicity(&split, 0.001), 1);
    }

    #[test]
    fn ratio_scan_produces_one_curve_per_ratio() {
        let base = PotentialConfig::new(1, 2);
        let samples = energy_axis(0.0, 8.0, 801);
        let curves = dos_ratio_scan(
            &[0.5, 0.497],
            |ratio| {
                let mut cfg = base.clone();
                cfg.ratio_override = Some(ratio);
                enumerate_modes(8.0, &cfg)
                    .iter()
                    .map(|i| unperturbed_energy(*i, &cfg))
                    .collect()
            },
            0.001,
            &samples,
        );
        assert_eq!(curves.len(), 2);
        // the commensurable ratio concentrates weight: higher peak DOS
        let peak = |c: &DosCurve| c.dos.iter().cloned().fold(0.0, f64::max);
        assert!(peak(&curves[0]) > 2.0 * peak(&curves[1]));
    }

    #[test]
    fn deviation_csv_format() {
        let rows = vec![DeviationRow { delta: 0.0, alpha_ratio: 1.0, scar_count: 4, flagged: false }];
        let mut out = Vec::new();
        write_deviation_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "delta,alpha_ratio,scar_count,flagged\n0,1,4,0\n");
    }

    #[test]
    fn ratio_scan_peaks_at_rational_ratios() {
        let base = PotentialConfig::new(1, 2);
        let weight = |ratio: f64| {
            let mut cfg = base.clone();
            cfg.ratio_override = Some(ratio);
            let levels: Vec<f64> = enumerate_modes(20.0, &cfg)
                .iter()
                .map(|i| unperturbed_energy(*i, &cfg))
                .collect();
            max_cluster_multiplicity(&levels, 0.001)
        };
        for r in [0.5, 1.0 / 3.0, 2.0 / 3.0] {
            assert!(weight(r) > weight(r + 0.003), "ratio {r}");
            assert!(weight(r) > weight(r - 0.003), "ratio {r}");
        }
    }

    #[test]
    fn alpha_of_sampled_ground_states() {
        // isotropic: α = 1; (1,2): α = 3/(2√2)
        let iso = PotentialConfig::new(1, 1);
        let g = make_grid(8.0, 96).unwrap();
        let psi = hg_mode(HgIndex::new(0, 0), &g, &iso).unwrap();
        let a = alpha_value(&psi, 1.0, &iso);
        assert!((a - 1.0).abs() < 0.01, "iso alpha {a}");

        let aniso = PotentialConfig::new(1, 2);
        let psi = hg_mode(HgIndex::new(0, 0), &g, &aniso).unwrap();
        let a = alpha_value(&psi, 1.5, &aniso);
        let expect = 3.0 / (2.0 * std::f64::consts::SQRT_2);
        assert!((a - expect).abs() < 0.01 * expect, "aniso alpha {a} vs {expect}");
    }

    fn uniform_ellipse_state(grid: GridSpec, cfg: &PotentialConfig, energy: f64) -> StateFunction {
        let (wx2, wy2) = (cfg.omega_x().powi(2), cfg.omega_y().powi(2));
        let mut s = StateFunction::from_fn(grid, |x, y| {
            if 0.5 * (wx2 * x * x + wy2 * y * y) <= energy {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        });
        s.normalize();
        s.energy = Some(energy);
        s
    }

    #[test]
    fn alpha_of_uniform_ellipse_density() {
        let cfg = PotentialConfig::new(1, 1);
        let g = make_grid(6.0, 240).unwrap();
        let e = 8.0;
        let s = uniform_ellipse_state(g, &cfg, e);
        let a = alpha_value(&s, e, &cfg);
        assert!((a - 1.0).abs() < 0.02, "uniform alpha {a}");
    }

    #[test]
    fn alpha_recompute_bit_identical_and_phase_invariant() {
        let cfg = PotentialConfig::new(1, 2);
        let g = make_grid(8.0, 64).unwrap();
        let psi = hg_mode(HgIndex::new(2, 1), &g, &cfg).unwrap();
        let e = unperturbed_energy(HgIndex::new(2, 1), &cfg);
        let a1 = alpha_value(&psi, e, &cfg);
        let a2 = alpha_value(&psi, e, &cfg);
        assert_eq!(a1.to_bits(), a2.to_bits());

        let phase = Complex64::from_polar(1.0, 1.234);
        let mut rotated = psi.clone();
        for v in rotated.amplitudes.iter_mut() {
            *v *= phase;
        }
        let a3 = alpha_value(&rotated, e, &cfg);
        assert!((a1 - a3).abs() < 1e-12 * a1);
    }

    #[test]
    fn alpha_disjoint_mixture_identity() {
        // equal mixture of disjoint-support states: α = ¼(α₁+α₂) at shared Z
        let cfg = PotentialConfig::new(1, 1);
        let g = make_grid(6.0, 80).unwrap();
        let e = 1.0;
        let mut left = StateFunction::from_fn(g, |x, y| {
            if x < -0.5 {
                Complex64::new((-(x + 2.0).powi(2) - y * y).exp(), 0.0)
            } else {
                Complex64::default()
            }
        });
        left.normalize();
        let mut right = StateFunction::from_fn(g, |x, y| {
            if x > 0.5 {
                Complex64::new((-0.5 * (x - 2.0).powi(2) - 0.8 * y * y).exp(), 0.0)
            } else {
                Complex64::default()
            }
        });
        right.normalize();
        let mut mix = StateFunction::zeros(g);
        for ((m, a), b) in mix
            .amplitudes
            .iter_mut()
            .zip(left.amplitudes.iter())
            .zip(right.amplitudes.iter())
        {
            *m = (a + b) / std::f64::consts::SQRT_2;
        }
        let (a1, a2, am) = (
            alpha_value(&left, e, &cfg),
            alpha_value(&right, e, &cfg),
            alpha_value(&mix, e, &cfg),
        );
        assert!((am - 0.25 * (a1 + a2)).abs() < 1e-10 * (a1 + a2));
    }

    #[test]
    fn scar_measure_uniform_density_gives_one() {
        let cfg = PotentialConfig::new(1, 1);
        let g = make_grid(6.0, 240).unwrap();
        let e = 8.0;
        let s = uniform_ellipse_state(g, &cfg, e);
        // a circle orbit comfortably inside the ellipse
        let orbit = make_orbit(1, 1, 0.3 * e, 0.5, std::f64::consts::FRAC_PI_2, 256).unwrap();
        let m = scar_measure(&s, e, &cfg, &[orbit], 0.5);
        assert!(m.best.is_some());
        assert!((m.s - 1.0).abs() < 0.05, "uniform s = {}", m.s);
    }

    #[test]
    fn scar_measure_concentrated_density_is_inverse_fraction() {
        // density living exactly on the tube nodes: s = 1/f
        let cfg = PotentialConfig::new(1, 1);
        let g = make_grid(6.0, 200).unwrap();
        let e = 8.0;
        let orbit = make_orbit(1, 1, 0.4 * e, 0.5, std::f64::consts::FRAC_PI_2, 256).unwrap();
        let w = 0.4;
        // build the tube indicator as the density
        let mut s = StateFunction::from_fn(g, |x, y| {
            let inside_ellipse = 0.5 * (x * x + y * y) <= e;
            let mut on_tube = false;
            if inside_ellipse {
                let n = orbit.samples.len();
                for i in 0..n {
                    if segment_dist_sq((x, y), orbit.samples[i], orbit.samples[(i + 1) % n])
                        <= 0.25 * w * w
                    {
                        on_tube = true;
                        break;
                    }
                }
            }
            if on_tube { Complex64::new(1.0, 0.0) } else { Complex64::default() }
        });
        s.normalize();
        let m = scar_measure(&s, e, &cfg, &[orbit], w);
        // measured f from node counts must invert exactly: P = 1
        let n_tube = s.amplitudes.iter().filter(|a| a.norm_sqr() > 0.0).count();
        let n_ellipse = {
            let mut c = 0;
            for iy in 0..g.points_y {
                for ix in 0..g.points_x {
                    let (x, y) = (g.x(ix), g.y(iy));
                    if 0.5 * (x * x + y * y) <= e {
                        c += 1;
                    }
                }
            }
            c
        };
        let expect = n_ellipse as f64 / n_tube as f64;
        assert!((m.s - expect).abs() < 1e-9 * expect, "s {} vs {expect}", m.s);
        assert!(m.s > 5.0);
    }

    #[test]
    fn scar_measure_skips_templates_outside_grid() {
        let cfg = PotentialConfig::new(1, 1);
        let g = make_grid(3.0, 64).unwrap();
        let e = 8.0; // ellipse radius 4 > box 3
        let s = uniform_ellipse_state(g, &cfg, 2.0);
        let big = make_orbit(1, 1, e, 0.5, std::f64::consts::FRAC_PI_2, 128).unwrap();
        let m = scar_measure(&s, 2.0, &cfg, &[big], 0.3);
        assert!(m.best.is_none());
    }

    #[test]
    fn scar_measure_reflection_symmetry() {
        // |HG(2,1)|² is even in x; templates mirrored by φ → φ+π must score
        // identically
        let cfg = PotentialConfig::new(1, 2);
        let g = make_grid(8.0, 120).unwrap();
        let psi = hg_mode(HgIndex::new(2, 1), &g, &cfg).unwrap();
        let e = unperturbed_energy(HgIndex::new(2, 1), &cfg);
        let w = default_tube_width(e);
        let phi = 1.1;
        let a = make_orbit(1, 2, e, 0.5, phi, 256).unwrap();
        let b = make_orbit(1, 2, e, 0.5, phi + std::f64::consts::PI, 256).unwrap();
        let sa = scar_measure(&psi, e, &cfg, &[a], w);
        let sb = scar_measure(&psi, e, &cfg, &[b], w);
        assert!((sa.s - sb.s).abs() < 1e-8, "{} vs {}", sa.s, sb.s);
    }

    #[test]
    fn tube_partition_probability_bounded() {
        // disjoint concentric circular tubes never capture more than the
        // whole state
        let cfg = PotentialConfig::new(1, 1);
        let g = make_grid(6.0, 160).unwrap();
        let e = 8.0;
        let psi = {
            let mut s = hg_mode(HgIndex::new(3, 2), &g, &cfg).unwrap();
            s.energy = Some(6.0);
            s
        };
        let w = 0.25;
        let mut total = 0.0;
        for radius in [0.8f64, 1.4, 2.0, 2.6, 3.2] {
            // direct tube probability for each disjoint annulus
            let mut p = 0.0;
            for iy in 0..g.points_y {
                for ix in 0..g.points_x {
                    let (x, y) = (g.x(ix), g.y(iy));
                    let r = (x * x + y * y).sqrt();
                    if (r - radius).abs() <= 0.5 * w && 0.5 * (x * x + y * y) <= e {
                        p += psi.amplitudes[g.idx(ix, iy)].norm_sqr();
                    }
                }
            }
            total += p * g.cell_area();
        }
        assert!(total <= 1.0 + 1e-9, "captured {total}");
    }

    #[test]
    fn survey_flags_concentrated_state_not_hg_modes() {
        let cfg = PotentialConfig::new(1, 2);
        let g = make_grid(8.0, 120).unwrap();
        // featureless-side control: unperturbed modes retain rectangular
        // symmetry and score below a generous threshold
        let mut states = Vec::new();
        for idx in [HgIndex::new(2, 1), HgIndex::new(3, 1)] {
            let mut m = hg_mode(idx, &g, &cfg).unwrap();
            m.energy = Some(unperturbed_energy(idx, &cfg));
            states.push(m);
        }
        let params = ScarParams { threshold: 4.0, eta_count: 3, phi_count: 8, ..Default::default() };
        let (reports, fraction) = scar_survey(&states, &cfg, &[(1, 2)], &params).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.s.is_some()));
        assert_eq!(fraction, 0.0);

        // infinite threshold: nothing flagged
        let strict = ScarParams { threshold: f64::INFINITY, ..params.clone() };
        let (_, f0) = scar_survey(&states, &cfg, &[(1, 2)], &strict).unwrap();
        assert_eq!(f0, 0.0);
    }

    #[test]
    fn survey_empty_candidates_reports_alpha_only() {
        let cfg = PotentialConfig::new(1, 2);
        let g = make_grid(8.0, 64).unwrap();
        let mut m = hg_mode(HgIndex::new(1, 0), &g, &cfg).unwrap();
        m.energy = Some(2.5);
        let (reports, fraction) = scar_survey(&[m], &cfg, &[], &ScarParams::default()).unwrap();
        assert_eq!(fraction, 0.0);
        assert!(reports[0].s.is_none());
        assert!(reports[0].alpha > 0.0);
        assert_eq!(reports[0].kind_label(), "none");
        let mut csv = Vec::new();
        write_scar_reports_csv(&reports, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",,,,,none,0"));
    }

    #[test]
    fn deviation_scan_requires_zero_and_normalizes() {
        // tiny scan exercising the plumbing; physics-scale behavior is the
        // acceptance suite's job
        let mut base = PotentialConfig::new(1, 2);
        base.amplitude = 1.0;
        base.sigma = 0.4;
        base.density = 0.15;
        base.scatter_energy = 6.0;
        base.seed = 5;
        let grid = crate::lattice::auto_grid(1.0, 2.0, 9.0, Some(base.sigma)).unwrap();
        let mut itp = ItpConfig::new(6);
        itp.tolerance = 1e-6;
        itp.dtau_min = 2e-3;
        let params = ScarParams { threshold: 1.05, eta_count: 3, phi_count: 8, ..Default::default() };

        assert!(deviation_scan(&grid, &base, &itp, &[0.01], 2, &params).is_err());

        let rows = deviation_scan(&grid, &base, &itp, &[0.0, 0.005], 2, &params).unwrap();
        assert_eq!(rows.len(), 2);
        let zero = rows.iter().find(|r| r.delta == 0.0).unwrap();
        assert!((zero.alpha_ratio - 1.0).abs() < 1e-12);
    }
}
