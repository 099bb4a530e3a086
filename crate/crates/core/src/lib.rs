//! Numerical laboratory for the semilinear Robin problem
//!
//! ```text
//! −Δu = u^p  in Ω,    ∂u/∂ν + βu = 0  on ∂Ω,
//! ```
//!
//! with the linear case p = 1 replaced by the first Robin eigenvalue problem.
//! The crate provides radial finite differences on balls, P1 finite elements
//! on triangulated planar domains, the shooting construction of supercritical
//! radial solutions from the entire slow-decay profile, and a harness that
//! sweeps β → 0 and checks the auxiliary quantities c_β, d_β and v_β against
//! the leading-order laws.

pub mod fem;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod newton;
pub mod ode;
pub mod radial;
pub mod shooting;

pub use fem::{
    assemble, rayleigh_quotient, solve_eigen, solve_eigen_system, solve_semilinear,
    solve_semilinear_system, FemSystem, Field,
};
pub use geometry::{
    load_mesh, make_domain, mesh_measures, save_mesh, triangulate, Domain, DomainKind,
    GeometryError, Mesh,
};
pub use harness::{
    check_asymptotic_constant, compute_record, default_betas, fit_power_law, log_spaced,
    record_invariants, run_sweep, smallest_decade, sweep_invariants, sweep_to_csv, Backend,
    ConstantRatio, HarnessError, InvariantCheck, Measures, PowerLawFit, Problem, RecordField,
    SolutionView, SweepOptions, SweepRecord, SweepRow,
};
pub use newton::{NewtonConfig, SolveError};
pub use radial::{radial_residual, solve_radial, solve_radial_eigen, RadialGrid, RadialSolution};
pub use shooting::{
    find_delta_hat, find_delta_hat_on, integrate_profile, robin_mismatch, scan_window,
    ProfileConfig, ShootError, ShootResult, ShootingProfile, WindowProbe,
};

/// Formats a float so that it parses back to the same value.
///
/// Plain decimal notation for moderate magnitudes, scientific otherwise.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::format_float;

    #[test]
    fn float_formatting_round_trips() {
        for x in [
            0.0,
            1.0,
            -2.5,
            1e-300,
            0.1 + 0.2,
            123456.789,
            6.02e23,
            -1e-7,
        ] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.25), "0.25");
    }
}
