//! Damped Newton iteration shared by the radial and finite element solvers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton iteration did not converge after {iterations} iterations (scaled residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("p = 1 is the linear eigenvalue problem; use the eigen solver")]
    PEqualsOne,
    #[error("iteration converged to a sign-changing root (minimum nodal value {min:e})")]
    NonpositiveSolution { min: f64 },
    #[error("inverse iteration did not converge after {iterations} iterations (relative change {change:e})")]
    EigenNoConvergence { iterations: usize, change: f64 },
    #[error("the quotient is undefined for the zero field")]
    ZeroField,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// Bound on the max-norm of the row-relative residual.
    pub tolerance: f64,
    pub max_halvings: usize,
    /// Floor applied to the base of u^p so negative iterates stay admissible.
    pub positivity_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iterations: 100,
            tolerance: 1e-12,
            max_halvings: 30,
            positivity_floor: 1e-300,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(SolveError::InvalidParameter(
                "Newton tolerance must be positive and max iterations at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_exponent(p: f64, beta: f64) -> Result<(), SolveError> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(SolveError::InvalidParameter(format!(
            "exponent p must be >= 0, got {p}"
        )));
    }
    if p == 1.0 {
        return Err(SolveError::PEqualsOne);
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(SolveError::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// u₊^p with the base clamped at `floor`; p = 0 gives 1 identically.
pub(crate) fn power(u: f64, p: f64, floor: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        u.max(floor).powf(p)
    }
}

/// d/du of u^p, evaluated at max(u, jac_floor).
pub(crate) fn power_derivative(u: f64, p: f64, jac_floor: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * u.max(jac_floor).powf(p - 1.0)
    }
}

/// Jacobian floor ε_jac = 1e-12 ‖u‖∞, kept strictly positive.
pub(crate) fn jacobian_floor(u: &[f64]) -> f64 {
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (1e-12 * sup).max(f64::MIN_POSITIVE)
}

/// Constant initial guess (β|∂Ω|/|Ω|)^{1/(p−1)}.
pub fn constant_guess(p: f64, beta: f64, volume: f64, boundary: f64) -> f64 {
    (beta * boundary / volume).powf(1.0 / (p - 1.0))
}

/// Continuation in β: at most this many halvings to find a starting β, then
/// steps of 2^{1/4} back up.
pub(crate) const CONTINUATION_HALVINGS: usize = 12;
pub(crate) const CONTINUATION_STEP: f64 = 1.189_207_115_002_721;

/// Scales the torsion function w to t·w with t = max(w)^{p/(1−p)}, which for
/// 0 < p < 1 satisfies −Δ(tw) = t ≥ (tw)^p.
pub(crate) fn supersolution(torsion: &[f64], p: f64) -> Vec<f64> {
    let top = torsion.iter().copied().fold(0.0, f64::max);
    let t = top.powf(p / (1.0 - p));
    torsion.iter().map(|w| t * w).collect()
}

pub(crate) trait NewtonSystem {
    fn residual(&self, u: &[f64]) -> Vec<f64>;
    fn scaled_norm(&self, u: &[f64], residual: &[f64]) -> f64;
    /// Returns δ solving J(u) δ = −residual.
    fn newton_step(&self, u: &[f64], residual: &[f64]) -> Result<Vec<f64>, SolveError>;
}

pub(crate) struct NewtonOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

const POLISH_STEPS: usize = 2;

fn axpy(u: &[f64], lambda: f64, delta: &[f64]) -> Vec<f64> {
    u.iter().zip(delta).map(|(a, d)| a + lambda * d).collect()
}

/// Backtracking Newton on the scaled residual max-norm.
///
/// A step of length λ is accepted when the new residual, scaled with the row
/// weights of the current iterate, is below (1 − 10⁻⁴ λ) times the old norm,
/// and, from a positive iterate, only if it stays positive. After convergence
/// a full Newton step is taken up to twice, each kept while the residual stays
/// below the tolerance.
pub(crate) fn damped_newton<S: NewtonSystem>(
    system: &S,
    initial: Vec<f64>,
    config: &NewtonConfig,
) -> Result<NewtonOutcome, SolveError> {
    config.validate()?;
    let mut u = initial;
    let mut r = system.residual(&u);
    let mut norm = system.scaled_norm(&u, &r);
    let mut iterations = 0;
    while !(norm <= config.tolerance) {
        if iterations == config.max_iterations || !norm.is_finite() {
            return Err(SolveError::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        let delta = system.newton_step(&u, &r)?;
        let positive = u.iter().all(|&v| v > 0.0);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=config.max_halvings {
            let trial = axpy(&u, lambda, &delta);
            if positive && trial.iter().any(|&v| !(v > 0.0)) {
                lambda *= 0.5;
                continue;
            }
            let tr = system.residual(&trial);
            // row scales frozen at u, so the Newton direction is a descent direction
            let merit = system.scaled_norm(&u, &tr);
            if merit.is_finite() && merit < (1.0 - 1e-4 * lambda) * norm {
                norm = system.scaled_norm(&trial, &tr);
                u = trial;
                r = tr;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        iterations += 1;
        if !accepted {
            return Err(SolveError::NoConvergence {
                iterations,
                residual: norm,
            });
        }
    }

    // The scaled norm sits at its roundoff floor long before the residual
    // integrated against the quadrature does, so polish unconditionally.
    for _ in 0..POLISH_STEPS {
        let Ok(delta) = system.newton_step(&u, &r) else {
            break;
        };
        let trial = axpy(&u, 1.0, &delta);
        let tr = system.residual(&trial);
        let tn = system.scaled_norm(&trial, &tr);
        if !(tn <= config.tolerance.max(norm)) {
            break;
        }
        u = trial;
        r = tr;
        norm = tn;
        iterations += 1;
    }
    Ok(NewtonOutcome {
        values: u,
        iterations,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_conventions() {
        assert_eq!(power(-3.0, 0.0, 1e-300), 1.0);
        assert_eq!(power(-3.0, 2.0, 1e-300), 0.0);
        assert!((power(4.0, 0.5, 1e-300) - 2.0).abs() < 1e-15);
        assert_eq!(power_derivative(5.0, 0.0, 1e-12), 0.0);
        assert!((power_derivative(4.0, 0.5, 1e-12) - 0.25).abs() < 1e-15);
        // the floor caps the sublinear derivative blow-up
        assert!(power_derivative(0.0, 0.5, 1e-12).is_finite());
    }

    #[test]
    fn exponent_checks() {
        assert!(matches!(
            check_exponent(1.0, 0.1),
            Err(SolveError::PEqualsOne)
        ));
        assert!(check_exponent(-0.5, 0.1).is_err());
        assert!(check_exponent(2.0, 0.0).is_err());
        assert!(check_exponent(2.0, 0.1).is_ok());
    }

    #[test]
    fn constant_guess_for_torsion_is_d_beta() {
        // p = 0: |Ω| / (β |∂Ω|)
        let g = constant_guess(0.0, 0.1, std::f64::consts::PI, 2.0 * std::f64::consts::PI);
        assert!((g - 5.0).abs() < 1e-12);
    }

    struct Scalar;
    impl NewtonSystem for Scalar {
        fn residual(&self, u: &[f64]) -> Vec<f64> {
            vec![u[0] * u[0] - 2.0]
        }
        fn scaled_norm(&self, u: &[f64], r: &[f64]) -> f64 {
            r[0].abs() / (u[0] * u[0] + 2.0)
        }
        fn newton_step(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>, SolveError> {
            Ok(vec![-r[0] / (2.0 * u[0])])
        }
    }

    #[test]
    fn scalar_newton_converges() {
        let out = damped_newton(&Scalar, vec![10.0], &NewtonConfig::default()).unwrap();
        assert!((out.values[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(out.residual <= 1e-12);
    }
}
