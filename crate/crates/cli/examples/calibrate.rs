// scratch calibration harness for acceptance-scale runs
use scarlab::analysis::{deviation_scan, ScarParams};
use scarlab::itp::ItpConfig;
use scarlab::lattice::GridSpec;
use scarlab::oracle;
use scarlab::potential::PotentialConfig;
use std::time::Instant;

fn main() {
    env_logger::init();
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(96);
    let mut pot = PotentialConfig::new(1, 2);
    let extra = 6;
    let target = oracle::kth_energy(k + extra, &pot) + 6.0;
    pot.scatter_energy = target;
    pot.seed = 1;
    let auto = scarlab::lattice::auto_grid(1.0, 2.0, target, None).unwrap();
    let grid = GridSpec::square(auto.extent_x, 320).unwrap();
    eprintln!("k={k}+{extra} target={target:.2} L={:.2} n=320 h={:.4}", grid.extent_x, grid.spacing_x());

    let mut itp = ItpConfig::new(k);
    itp.extra_states = extra;
    itp.tolerance = 1e-5;
    itp.dtau_initial = 0.1;
    itp.dtau_min = 2e-3;
    let params = ScarParams::default();
    let deltas = [0.0, -0.005, 0.005, -0.01, 0.01, -0.002, 0.002];
    let t = Instant::now();
    let rows = deviation_scan(&grid, &pot, &itp, &deltas, 5, &params).unwrap();
    eprintln!("scan: {:.0}s", t.elapsed().as_secs_f64());
    for r in &rows {
        eprintln!("delta={:+.3}: ratio={:.4} count={} flagged={}", r.delta, r.alpha_ratio, r.scar_count, r.flagged);
    }
}
