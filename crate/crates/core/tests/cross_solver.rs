//! Cross-validation of the two independent solution routes: grid-based
//! imaginary-time propagation against truncated Hermite-Gaussian
//! diagonalization. They share no numerics beyond a dense eigensolver, so
//! agreement pins the physics of both.

use scarlab::itp::{solve, ItpConfig};
use scarlab::lattice::auto_grid;
use scarlab::oracle::diagonalize_truncated;
use scarlab::potential::{total_potential_with, BumpSet, PotentialConfig};

#[test]
fn itp_matches_truncated_diagonalization_with_bumps() {
    // five fixed bumps, (1,2) confinement; wide bumps keep the grid small so
    // the check stays fast, while the acceptance suite runs the production
    // bump width
    let mut cfg = PotentialConfig::new(1, 2);
    cfg.amplitude = 4.0;
    cfg.sigma = 0.3;
    let bumps = BumpSet {
        positions: vec![(0.8, -0.3), (-1.1, 0.6), (1.9, 0.9), (-0.4, -1.2), (0.2, 1.4)],
        amplitude: cfg.amplitude,
        sigma: cfg.sigma,
        seed: 0,
    };

    let k = 4;
    let grid = auto_grid(cfg.omega_x(), cfg.omega_y(), 7.0, Some(cfg.sigma)).unwrap();
    let v = total_potential_with(&grid, &cfg, &bumps);

    let mut itp_cfg = ItpConfig::new(k);
    itp_cfg.extra_states = 3;
    itp_cfg.tolerance = 1e-9;
    let grid_solution = solve(&v, &cfg, &itp_cfg).unwrap();
    assert!(grid_solution.all_converged());

    // wide bumps couple broadly: the cutoff sits well above the target states
    let basis_solution = diagonalize_truncated(26.0, &bumps, &cfg).unwrap();

    for (i, (itp_e, oracle_e)) in grid_solution
        .energies()
        .iter()
        .zip(basis_solution.energies.iter())
        .enumerate()
    {
        assert!(
            (itp_e - oracle_e).abs() < 1e-3,
            "state {i}: itp {itp_e} vs basis {oracle_e}"
        );
    }

    // the bumps lift every energy above the unperturbed spectrum
    let unperturbed = [1.5, 2.5, 3.5, 3.5];
    for (e, u) in grid_solution.energies().iter().zip(unperturbed.iter()) {
        assert!(e > u, "{e} not above {u}");
    }
}

#[test]
fn itp_matches_oracle_from_random_init() {
    // initialization robustness: seeded-noise start converges to the same
    // spectrum as the Hermite-Gaussian start
    let mut cfg = PotentialConfig::new(1, 2);
    cfg.amplitude = 2.0;
    cfg.sigma = 0.35;
    let bumps = BumpSet {
        positions: vec![(0.5, 0.2), (-0.9, -0.4)],
        amplitude: cfg.amplitude,
        sigma: cfg.sigma,
        seed: 0,
    };
    let grid = auto_grid(cfg.omega_x(), cfg.omega_y(), 6.5, Some(cfg.sigma)).unwrap();
    let v = total_potential_with(&grid, &cfg, &bumps);

    let mut hg = ItpConfig::new(3);
    hg.extra_states = 2;
    let a = solve(&v, &cfg, &hg).unwrap();

    let mut noise = hg.clone();
    noise.random_init = true;
    noise.seed = 17;
    noise.max_iterations = 20000;
    let b = solve(&v, &cfg, &noise).unwrap();

    for (x, y) in a.energies().iter().zip(b.energies().iter()) {
        assert!((x - y).abs() < 5e-4, "{x} vs {y}");
    }
}
