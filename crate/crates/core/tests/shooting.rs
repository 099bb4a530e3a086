use std::sync::OnceLock;

use robin_lab::radial::solve_radial_from;
use robin_lab::*;

fn profile() -> &'static ShootingProfile {
    static P: OnceLock<ShootingProfile> = OnceLock::new();
    P.get_or_init(|| integrate_profile(6.0, 3, &ProfileConfig::default()).unwrap())
}

#[test]
fn rescaled_profile_starts_at_delta_to_the_a() {
    let res = find_delta_hat_on(profile(), 0.2, 512).unwrap();
    let u0 = res.solution.values[0];
    assert!((u0 - res.delta_hat.powf(profile().a())).abs() <= 1e-12 * u0);
    assert!((res.solution.values[512] - res.boundary_value).abs() <= 1e-12 * u0);
    assert!(res.solution.values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn bracket_straddles_the_root() {
    let beta = 0.2;
    let res = find_delta_hat(profile(), beta).unwrap();
    let (lo, hi) = res.bracket;
    assert!(lo < res.delta_hat && res.delta_hat < hi);
    assert!(robin_mismatch(profile(), lo, beta) > 0.0);
    assert!(robin_mismatch(profile(), hi, beta) < 0.0);
    assert!(res.residual <= 1e-10);
}

#[test]
fn roots_exist_inside_the_window() {
    for probe in scan_window(profile(), &[0.05, 0.5, 0.9]) {
        assert!(probe.sign_change, "{probe:?}");
        assert!((probe.beta - probe.fraction * 0.4).abs() < 1e-15);
    }
}

#[test]
fn newton_on_the_grid_stays_near_the_shooting_solution() {
    let res = find_delta_hat_on(profile(), 0.2, 1024).unwrap();
    let grid = res.solution.grid;
    let fd = solve_radial_from(
        6.0,
        0.2,
        3,
        grid,
        res.solution.values.clone(),
        &NewtonConfig::default(),
    )
    .unwrap();
    let top = res.sup_norm();
    let diff = fd
        .values
        .iter()
        .zip(&res.solution.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff <= 1e-4 * top, "{diff:e}");
}
