//! End-to-end checks of the scarlab binary: exit codes, reproducibility of
//! archives, and the solve → analyze → export pipeline on a small run.

use std::path::{Path, PathBuf};
use std::process::Command;

fn scarlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scarlab"));
    c.env("SCARLAB_THREADS", "1").env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"
p = 1
q = 2
states = 6
bump_amplitude = 1.5
bump_sigma = 0.35
bump_fwhm = 0.824
bump_density = 0.2
scatter_energy = 6.0
seed = 7
tolerance = 1e-6
dtau_min = 2e-3
energy_margin = 3.0
eta_count = 3
phi_count = 8
scar_threshold = 1.5
"#;

#[test]
fn missing_config_is_usage_error() {
    let out = scarlab()
        .args(["solve", "--config", "/nonexistent/nope.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_flags_are_usage_error() {
    let out = scarlab().args(["solve"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = scarlab().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unconverged_solve_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!("{SMALL_RUN}\nmax_iterations = 2\noutput_dir = \"{}\"\n", dir.path().join("o").display()),
    );
    let out = scarlab()
        .args(["solve", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    // partial outputs still written
    assert!(dir.path().join("o/states.qlsc").exists());
    assert!(dir.path().join("o/run.toml").exists());
}

#[test]
fn solve_analyze_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let config = write_config(dir.path(), &format!("{SMALL_RUN}\noutput_dir = \"{}\"\n", out_a.display()));

    let out = scarlab().args(["solve", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let archive = out_a.join("states.qlsc");
    assert!(archive.exists());
    assert!(out_a.join("bumps.csv").exists());

    // metadata echoes a reloadable config identical to the effective one
    let meta = std::fs::read_to_string(out_a.join("run.toml")).unwrap();
    let echo = meta.split("[config]").nth(1).unwrap();
    let reparsed = scarlab_cli::config::RunConfig::from_toml(echo).unwrap();
    assert_eq!(reparsed.states, 6);
    assert_eq!(reparsed.seed, 7);

    // M = 0 sanity lives in the acceptance suite; here check analyze output shape
    let out = scarlab()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--archive")
        .arg(&archive)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let scars = std::fs::read_to_string(out_a.join("scars.csv")).unwrap();
    assert!(scars.starts_with("index,energy,alpha,s,p,q,eta,phi,kind,flag"));
    assert_eq!(scars.lines().count(), 7); // header + 6 states
    assert!(out_a.join("dos.csv").exists());

    let out = scarlab()
        .args(["export", "--archive"])
        .arg(&archive)
        .args(["--states", "0,2", "--output-dir"])
        .arg(out_a.join("img").as_os_str())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_a.join("img/state_0000.pgm").exists());
    assert!(out_a.join("img/state_0002.pgm").exists());
    assert!(out_a.join("img/energies.csv").exists());
    let pgm = std::fs::read(out_a.join("img/state_0000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut archives = Vec::new();
    for run in ["r1", "r2"] {
        let out_dir = dir.path().join(run);
        let config = write_config(
            &dir.path().join(format!("{run}.toml.d")).parent().unwrap().to_path_buf(),
            &format!("{SMALL_RUN}\noutput_dir = \"{}\"\n", out_dir.display()),
        );
        let out = scarlab().args(["solve", "--config"]).arg(&config).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        archives.push(std::fs::read(out_dir.join("states.qlsc")).unwrap());
    }
    assert_eq!(archives[0], archives[1]);
}

#[test]
fn scan_requires_exactly_one_spec() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_RUN);
    let out = scarlab().args(["scan", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analytic_ratio_scan_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("scan");
    let config = write_config(
        dir.path(),
        &format!("{SMALL_RUN}\noutput_dir = \"{}\"\n", out_dir.display()),
    );
    let out = scarlab()
        .args(["scan", "--config"])
        .arg(&config)
        .args(["--ratios", "0.5,0.497", "--analytic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let weights = std::fs::read_to_string(out_dir.join("dos_weights.csv")).unwrap();
    let lines: Vec<&str> = weights.lines().collect();
    assert_eq!(lines[0], "ratio,max_multiplicity,status");
    // commensurable ratio clusters, detuned one does not
    let w_half: usize = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let w_det: usize = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(w_half > w_det, "{w_half} vs {w_det}");
    assert!(out_dir.join("dos_scan.csv").exists());
}

#[test]
fn golden_archive_reads_and_rewrites_identically() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden.qlsc");
    let bytes = std::fs::read(&golden).unwrap();
    let mut reader = scarlab_cli::archive::ArchiveReader::open(&golden).unwrap();
    let header = reader.header().clone();
    assert_eq!(header.grid.points_x, 8);
    assert_eq!(header.grid.extent_x, 3.0);
    assert_eq!(header.energies, vec![1.25, 1.75]);
    let states = reader.read_all().unwrap();
    // spot value: state 1 at node (0,0) is 0.5·x + 0.125 with x = -3
    assert_eq!(states[1].amplitudes[0].re, 0.5 * -3.0 + 0.125);

    let dir = tempfile::tempdir().unwrap();
    let rewritten = dir.path().join("golden2.qlsc");
    scarlab_cli::archive::write_archive(&rewritten, &states).unwrap();
    assert_eq!(bytes, std::fs::read(&rewritten).unwrap());
}
