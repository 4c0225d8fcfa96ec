//! The solve / analyze / scan / export pipelines.
//!
//! Every command writes into the config's output directory with atomic
//! file placement (temp + rename), so concurrent scan points never clobber
//! each other. A solve leaves behind:
//!
//! * `states.qlsc`    — the wavefunction archive
//! * `bumps.csv`      — the bump realization (index, x, y)
//! * `run.toml`       — config echo plus seed, timings, residuals
//!
//! Analyze adds `scars.csv`, `dos.csv`, and for every flagged state a 16-bit
//! binary PGM of |ψ|² (`state_NNNN.pgm`, maximum gray level at the density
//! peak) with the best-fit orbit polyline in `overlay_NNNN.csv`.

use crate::archive::{write_archive, ArchiveReader};
use crate::config::RunConfig;
use crate::CliResult;
use scarlab::analysis::{
    self, deviation_scan, dos, energy_axis, max_cluster_multiplicity, scar_survey, DeviationRow,
    ScarReport,
};
use scarlab::classical::make_orbit;
use scarlab::itp::{solve, EigenSolution};
use scarlab::lattice::StateFunction;
use scarlab::oracle;
use scarlab::potential::{scatter_bumps, total_potential_with, BumpSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct SolveOutput {
    pub archive_path: PathBuf,
    pub metadata_path: PathBuf,
    pub bumps_path: PathBuf,
    pub energies: Vec<f64>,
    pub all_converged: bool,
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<SolveOutput> {
    let out_dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out_dir)?;
    let pot = cfg.potential_config()?;
    let grid = cfg.grid()?;
    let itp = cfg.itp_config();

    let bumps = scatter_bumps(&pot);
    let bumps_path = out_dir.join("bumps.csv");
    write_atomic(&bumps_path, |w| bumps.write_csv(w))?;

    log::info!(
        "solve: grid {}x{} on [-{:.3},{:.3}]², {} bumps, k={}+{}",
        grid.points_x, grid.points_y, grid.extent_x, grid.extent_x,
        bumps.len(), itp.k, itp.extra_states
    );
    let start = Instant::now();
    let v = total_potential_with(&grid, &pot, &bumps);
    let solution = solve(&v, &pot, &itp)?;
    let elapsed = start.elapsed().as_secs_f64();

    let archive_path = out_dir.join("states.qlsc");
    write_archive(&archive_path, &solution.states)?;

    let metadata_path = out_dir.join("run.toml");
    let meta = render_metadata(cfg, &solution, &bumps, elapsed);
    write_atomic(&metadata_path, |w| w.write_all(meta.as_bytes()))?;

    Ok(SolveOutput {
        archive_path,
        metadata_path,
        bumps_path,
        energies: solution.energies(),
        all_converged: solution.all_converged(),
    })
}

fn render_metadata(cfg: &RunConfig, sol: &EigenSolution, bumps: &BumpSet, elapsed: f64) -> String {
    let worst_residual = sol.residuals.iter().cloned().fold(0.0, f64::max);
    let mut meta = String::new();
    meta.push_str("[run]\n");
    meta.push_str(&format!("seed = {}\n", cfg.seed));
    meta.push_str(&format!("elapsed_seconds = {elapsed}\n"));
    meta.push_str(&format!("iterations = {}\n", sol.iterations));
    meta.push_str(&format!("bump_count = {}\n", bumps.len()));
    meta.push_str(&format!("all_converged = {}\n", sol.all_converged()));
    meta.push_str(&format!("worst_residual = {worst_residual}\n"));
    meta.push_str(&format!("energies = {:?}\n", sol.energies()));
    meta.push_str(&format!("residuals = {:?}\n", sol.residuals));
    meta.push_str("\n[config]\n");
    meta.push_str(&cfg.to_toml());
    meta
}

pub struct AnalyzeOutput {
    pub reports: Vec<ScarReport>,
    pub scarred_fraction: f64,
    pub scars_path: PathBuf,
    pub dos_path: PathBuf,
    pub image_paths: Vec<PathBuf>,
}

pub fn cmd_analyze(archive: &Path, cfg: &RunConfig) -> CliResult<AnalyzeOutput> {
    let out_dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out_dir)?;
    let pot = cfg.potential_config()?;
    let mut reader = ArchiveReader::open(archive)?;
    let keep = cfg.max_analyzed.unwrap_or(usize::MAX).min(reader.header().state_count());
    let states: Vec<StateFunction> = (0..keep)
        .map(|i| reader.read_state(i))
        .collect::<CliResult<_>>()?;

    let (reports, fraction) = scar_survey(&states, &pot, &cfg.candidates, &cfg.scar_params())?;
    let scars_path = out_dir.join("scars.csv");
    write_atomic(&scars_path, |w| analysis::write_scar_reports_csv(&reports, w))?;

    let energies: Vec<f64> = reader.header().energies[..keep].to_vec();
    let (lo, hi) = (
        energies.iter().cloned().fold(f64::INFINITY, f64::min) - 20.0 * cfg.dos_window,
        energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 20.0 * cfg.dos_window,
    );
    let samples = energy_axis(lo, hi, 4001);
    let curve = dos(&energies, cfg.dos_window, &samples);
    let dos_path = out_dir.join("dos.csv");
    write_atomic(&dos_path, |w| curve.write_csv(w))?;

    let mut image_paths = Vec::new();
    for report in reports.iter().filter(|r| r.strongly_scarred) {
        let psi = &states[report.index];
        let pgm = out_dir.join(format!("state_{:04}.pgm", report.index));
        write_atomic(&pgm, |w| write_density_pgm(psi, w))?;
        if let Some((p, q, eta, phi)) = report.orbit {
            let spp = cfg.samples_per_period.max(64 * p.max(q) as usize);
            let orbit = make_orbit(p, q, report.energy, eta, phi, spp)?;
            let overlay = out_dir.join(format!("overlay_{:04}.csv", report.index));
            write_atomic(&overlay, |w| orbit.write_csv(w))?;
        }
        image_paths.push(pgm);
    }
    log::info!(
        "analyze: {} states, scarred fraction {:.3}, {} images",
        reports.len(), fraction, image_paths.len()
    );
    Ok(AnalyzeOutput { reports, scarred_fraction: fraction, scars_path, dos_path, image_paths })
}

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples per the netpbm
/// spec) of |ψ|², gray level 65535 at the density peak, rows in grid order.
pub fn write_density_pgm<W: Write>(psi: &StateFunction, mut w: W) -> std::io::Result<()> {
    let density = psi.density();
    let peak = density.values.iter().cloned().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    writeln!(w, "P5")?;
    writeln!(w, "{} {}", psi.grid.points_x, psi.grid.points_y)?;
    writeln!(w, "65535")?;
    let mut row = Vec::with_capacity(psi.grid.points_x * 2);
    for iy in 0..psi.grid.points_y {
        row.clear();
        for ix in 0..psi.grid.points_x {
            let level = (density.at(ix, iy) * scale).round() as u16;
            row.extend_from_slice(&level.to_be_bytes());
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub enum ScanSpec {
    /// Frequency ratios ωx/ωy; `analytic` uses the unperturbed enumeration
    /// instead of per-ratio solves.
    Ratios { ratios: Vec<f64>, analytic: bool },
    /// Deviations δ around the base p/q with one shared bump realization.
    Deltas(Vec<f64>),
}

pub struct ScanOutput {
    pub table_path: PathBuf,
    pub deviation_rows: Vec<DeviationRow>,
    pub failures: usize,
}

pub fn cmd_scan(cfg: &RunConfig, spec: &ScanSpec) -> CliResult<ScanOutput> {
    let out_dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out_dir)?;
    match spec {
        ScanSpec::Ratios { ratios, analytic } => scan_ratios(cfg, ratios, *analytic, out_dir),
        ScanSpec::Deltas(deltas) => scan_deltas(cfg, deltas, out_dir),
    }
}

fn scan_ratios(cfg: &RunConfig, ratios: &[f64], analytic: bool, out_dir: &Path) -> CliResult<ScanOutput> {
    let e_max = cfg.target_energy();
    let samples = energy_axis(0.0, e_max, 2001);
    let mut rows: Vec<(f64, Option<(analysis::DosCurve, usize)>)> = Vec::new();
    let mut failures = 0;
    for &ratio in ratios {
        let mut point = cfg.clone();
        point.ratio_override = Some(ratio);
        let result = if analytic {
            point.potential_config().map(|pot| {
                let levels: Vec<f64> = oracle::enumerate_modes(e_max, &pot)
                    .iter()
                    .map(|i| oracle::unperturbed_energy(*i, &pot))
                    .collect();
                (dos(&levels, cfg.dos_window, &samples), max_cluster_multiplicity(&levels, cfg.dos_window))
            })
        } else {
            solve_levels(&point).map(|levels| {
                (dos(&levels, cfg.dos_window, &samples), max_cluster_multiplicity(&levels, cfg.dos_window))
            })
        };
        match result {
            Ok(pair) => rows.push((ratio, Some(pair))),
            Err(e) => {
                log::warn!("scan point ratio={ratio} failed: {e}");
                failures += 1;
                rows.push((ratio, None));
            }
        }
    }

    let table_path = out_dir.join("dos_scan.csv");
    write_atomic(&table_path, |w| {
        writeln!(w, "ratio,energy,dos")?;
        for (ratio, point) in &rows {
            if let Some((curve, _)) = point {
                for (e, d) in curve.energies.iter().zip(curve.dos.iter()) {
                    writeln!(w, "{ratio},{e},{d}")?;
                }
            }
        }
        Ok(())
    })?;
    let weights_path = out_dir.join("dos_weights.csv");
    write_atomic(&weights_path, |w| {
        writeln!(w, "ratio,max_multiplicity,status")?;
        for (ratio, point) in &rows {
            match point {
                Some((_, weight)) => writeln!(w, "{ratio},{weight},ok")?,
                None => writeln!(w, "{ratio},,failed")?,
            }
        }
        Ok(())
    })?;
    Ok(ScanOutput { table_path, deviation_rows: Vec::new(), failures })
}

fn solve_levels(cfg: &RunConfig) -> CliResult<Vec<f64>> {
    let pot = cfg.potential_config()?;
    let grid = cfg.grid()?;
    let bumps = scatter_bumps(&pot);
    let v = total_potential_with(&grid, &pot, &bumps);
    let sol = solve(&v, &pot, &cfg.itp_config())?;
    Ok(sol.energies())
}

fn scan_deltas(cfg: &RunConfig, deltas: &[f64], out_dir: &Path) -> CliResult<ScanOutput> {
    let pot = cfg.potential_config()?;
    let grid = cfg.grid()?;
    let rows = deviation_scan(
        &grid,
        &pot,
        &cfg.itp_config(),
        deltas,
        cfg.deviation_scars,
        &cfg.scar_params(),
    )?;
    let table_path = out_dir.join("deviation.csv");
    write_atomic(&table_path, |w| analysis::write_deviation_csv(&rows, w))?;
    Ok(ScanOutput { table_path, deviation_rows: rows, failures: 0 })
}

pub struct ExportOutput {
    pub image_paths: Vec<PathBuf>,
    pub energies_path: PathBuf,
}

/// Dump density images and the energy table for selected states (all states
/// when `indices` is empty).
pub fn cmd_export(archive: &Path, indices: &[usize], out_dir: &Path) -> CliResult<ExportOutput> {
    std::fs::create_dir_all(out_dir)?;
    let mut reader = ArchiveReader::open(archive)?;
    let all: Vec<usize> = if indices.is_empty() {
        (0..reader.header().state_count()).collect()
    } else {
        indices.to_vec()
    };
    let energies_path = out_dir.join("energies.csv");
    let header_energies = reader.header().energies.clone();
    write_atomic(&energies_path, |w| {
        writeln!(w, "index,energy")?;
        for (i, e) in header_energies.iter().enumerate() {
            writeln!(w, "{i},{e}")?;
        }
        Ok(())
    })?;
    let mut image_paths = Vec::new();
    for &i in &all {
        let psi = reader.read_state(i)?;
        let path = out_dir.join(format!("state_{i:04}.pgm"));
        write_atomic(&path, |w| write_density_pgm(&psi, w))?;
        image_paths.push(path);
    }
    Ok(ExportOutput { image_paths, energies_path })
}

/// Write through a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp.{}", std::process::id()));
    let tmp = path.with_file_name(name);
    {
        let file = std::fs::File::create(&tmp)?;
        let mut w = std::io::BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use scarlab::lattice::make_grid;

    #[test]
    fn pgm_header_and_peak_level() {
        let grid = make_grid(4.0, 8).unwrap();
        let mut psi = StateFunction::from_fn(grid, |x, y| {
            num_complex::Complex64::new((-(x * x + y * y)).exp(), 0.0)
        });
        psi.normalize();
        let mut bytes = Vec::new();
        write_density_pgm(&psi, &mut bytes).unwrap();
        let header = b"P5\n8 8\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let pixels = &bytes[header.len()..];
        assert_eq!(pixels.len(), 8 * 8 * 2);
        // peak level present exactly once at the grid center region
        let levels: Vec<u16> = pixels
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(levels.iter().cloned().max().unwrap(), 65535);
        let peak_idx = levels.iter().position(|&l| l == 65535).unwrap();
        // nearest-to-origin node of an 8-point axis is index 4
        assert_eq!(peak_idx, 4 * 8 + 4);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, |w| writeln!(w, "a,b")).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() != "x.csv")
            .collect();
        assert!(leftovers.is_empty());
    }
}
