//! Fixtures shared by the benchmarks.

use robin_lab::{integrate_profile, triangulate, Domain, Mesh, ProfileConfig, ShootingProfile};

/// Unit disk triangulated at mesh size `h`.
pub fn disk_mesh(h: f64) -> Mesh {
    triangulate(&Domain::disk(1.0).expect("unit disk"), h).expect("disk mesh")
}

/// Entire profile for N = 3, p = 6 with the default integration settings.
pub fn supercritical_profile() -> ShootingProfile {
    integrate_profile(6.0, 3, &ProfileConfig::default()).expect("profile")
}
