//! Run configuration: one flat TOML file covering confinement, bumps, grid,
//! solver, and analysis parameters.
//!
//! Every key has a default, so a minimal file like
//!
//! ```toml
//! p = 1
//! q = 2
//! states = 50
//! ```
//!
//! is a complete run. Optional keys (`grid_points`, `scatter_energy`, ...)
//! are derived from the targeted spectrum when absent: the box is sized so
//! the highest requested state decays below 1e-6 at the boundary, and the
//! spacing resolves both the bump width and the local wavelength. The full
//! effective configuration is echoed into the run metadata, and re-running
//! that echo reproduces the outputs bit-for-bit.

use crate::{CliError, CliResult};
use scarlab::analysis::ScarParams;
use scarlab::itp::ItpConfig;
use scarlab::lattice::{auto_grid, fft_friendly, GridSpec};
use scarlab::oracle;
use scarlab::potential::{sigma_from_fwhm, PotentialConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // confinement
    pub p: u32,
    pub q: u32,
    pub omega0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_override: Option<f64>,

    // bump realization
    pub bump_amplitude: f64,
    pub bump_fwhm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bump_sigma: Option<f64>,
    pub bump_density: f64,
    pub fixed_bump_count: bool,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatter_energy: Option<f64>,

    // grid (derived from the spectrum when absent)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Energy headroom above the highest targeted unperturbed level when
    /// sizing the box and scatter region.
    pub energy_margin: f64,

    // solver
    pub states: usize,
    pub extra_states: usize,
    pub dtau_initial: f64,
    pub dtau_min: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub random_init: bool,

    // analysis
    pub candidates: Vec<(u32, u32)>,
    pub scar_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tube_width: Option<f64>,
    pub eta_count: usize,
    pub phi_count: usize,
    pub samples_per_period: usize,
    pub dos_window: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_analyzed: Option<usize>,
    pub deviation_scars: usize,

    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: 1,
            q: 2,
            omega0: 1.0,
            ratio_override: None,
            bump_amplitude: 4.0,
            bump_fwhm: 0.235,
            bump_sigma: None,
            bump_density: 2.0,
            fixed_bump_count: false,
            seed: 0,
            scatter_energy: None,
            grid_half_width: None,
            grid_points: None,
            energy_margin: 6.0,
            states: 50,
            extra_states: 0,
            dtau_initial: 0.03,
            dtau_min: 1e-3,
            tolerance: 1e-8,
            max_iterations: 5000,
            random_init: false,
            candidates: vec![(1, 2)],
            scar_threshold: 2.0,
            tube_width: None,
            eta_count: 9,
            phi_count: 32,
            samples_per_period: 256,
            dos_window: 0.001,
            max_analyzed: None,
            deviation_scars: 8,
            output_dir: "out".to_string(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sigma(&self) -> f64 {
        self.bump_sigma.unwrap_or_else(|| sigma_from_fwhm(self.bump_fwhm))
    }

    /// Unperturbed energy of the highest propagated state plus headroom;
    /// sizes the box, the scatter region, and basis cutoffs.
    pub fn target_energy(&self) -> f64 {
        let mut base = PotentialConfig::new(self.p, self.q);
        base.omega0 = self.omega0;
        base.ratio_override = self.ratio_override;
        oracle::kth_energy(self.states + self.extra_states, &base) + self.energy_margin
    }

    pub fn potential_config(&self) -> CliResult<PotentialConfig> {
        let mut cfg = PotentialConfig::new(self.p, self.q);
        cfg.omega0 = self.omega0;
        cfg.ratio_override = self.ratio_override;
        cfg.amplitude = self.bump_amplitude;
        cfg.sigma = self.sigma();
        cfg.density = self.bump_density;
        cfg.seed = self.seed;
        cfg.fixed_count = self.fixed_bump_count;
        cfg.scatter_energy = self.scatter_energy.unwrap_or_else(|| self.target_energy());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> CliResult<GridSpec> {
        let cfg = self.potential_config()?;
        let resolve = (self.bump_amplitude > 0.0 && self.bump_density > 0.0).then(|| self.sigma());
        let grid = match (self.grid_half_width, self.grid_points) {
            (Some(l), Some(n)) => GridSpec::square(l, n)?,
            (None, None) => auto_grid(cfg.omega_x(), cfg.omega_y(), self.target_energy(), resolve)?,
            (Some(l), None) => {
                let auto = auto_grid(cfg.omega_x(), cfg.omega_y(), self.target_energy(), resolve)?;
                let h = auto.spacing_x().min(auto.spacing_y());
                GridSpec::square(l, fft_friendly((2.0 * l / h).ceil() as usize))?
            }
            (None, Some(n)) => {
                let auto = auto_grid(cfg.omega_x(), cfg.omega_y(), self.target_energy(), resolve)?;
                GridSpec::square(auto.extent_x, n)?
            }
        };
        Ok(grid)
    }

    pub fn itp_config(&self) -> ItpConfig {
        let mut itp = ItpConfig::new(self.states);
        itp.extra_states = self.extra_states;
        itp.dtau_initial = self.dtau_initial;
        itp.dtau_min = self.dtau_min;
        itp.tolerance = self.tolerance;
        itp.max_iterations = self.max_iterations;
        itp.seed = self.seed;
        itp.random_init = self.random_init;
        itp
    }

    pub fn scar_params(&self) -> ScarParams {
        ScarParams {
            tube_width: self.tube_width,
            threshold: self.scar_threshold,
            eta_count: self.eta_count,
            phi_count: self.phi_count,
            samples_per_period: self.samples_per_period,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml("p = 1\nq = 2\nstates = 10\n").unwrap();
        assert_eq!(cfg.states, 10);
        assert_eq!(cfg.bump_amplitude, 4.0);
        assert!((cfg.sigma() - 0.09979538).abs() < 1e-7);
    }

    #[test]
    fn roundtrip_lossless() {
        let mut cfg = RunConfig::default();
        cfg.ratio_override = Some(0.502);
        cfg.grid_points = Some(128);
        cfg.candidates = vec![(1, 2), (2, 3)];
        cfg.tolerance = 3.5e-7;
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        // and the echo of the echo is identical text
        assert_eq!(text, back.to_toml());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("nonsense_key = 3\n").is_err());
    }

    #[test]
    fn grid_auto_resolves_bumps() {
        let mut cfg = RunConfig::default();
        cfg.states = 10;
        let g = cfg.grid().unwrap();
        assert!(g.spacing_x() <= cfg.sigma() / 2.0);

        // without bumps the spacing only tracks the wavelength
        cfg.bump_amplitude = 0.0;
        let g0 = cfg.grid().unwrap();
        assert!(g0.points_x < g.points_x);
    }

    #[test]
    fn explicit_grid_respected() {
        let mut cfg = RunConfig::default();
        cfg.grid_half_width = Some(9.0);
        cfg.grid_points = Some(144);
        let g = cfg.grid().unwrap();
        assert_eq!((g.extent_x, g.points_x), (9.0, 144));
    }

    #[test]
    fn scatter_energy_defaults_to_target() {
        let mut cfg = RunConfig::default();
        cfg.states = 20;
        let pot = cfg.potential_config().unwrap();
        assert_eq!(pot.scatter_energy, cfg.target_energy());
        cfg.scatter_energy = Some(55.0);
        assert_eq!(cfg.potential_config().unwrap().scatter_energy, 55.0);
    }
}
