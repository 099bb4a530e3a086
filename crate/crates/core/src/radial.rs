//! Finite differences for radial solutions on the ball B_R ⊂ R^N.
//!
//! The radial equation −u″ − (N−1)/r u′ = u^p is discretized on a uniform
//! grid r_i = iR/M. At the origin the symmetry ghost node u₋₁ = u₁ is used
//! with Δu(0) = N u″(0). The Robin condition u′(R) + βu(R) = 0 eliminates the
//! ghost node u_{M+1} = u_{M−1} − 2hβu_M, and the resulting boundary row is
//! multiplied by h/2 so that every row has O(h²) truncation error.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::format_float;
use crate::geometry::unit_sphere_area;
use crate::linalg::solve_tridiagonal;
use crate::newton::{
    check_exponent, constant_guess, damped_newton, jacobian_floor, power, power_derivative,
    supersolution, NewtonConfig, NewtonSystem, SolveError, CONTINUATION_HALVINGS,
    CONTINUATION_STEP,
};

pub const MIN_INTERVALS: usize = 16;
pub const DEFAULT_INTERVALS: usize = 2048;

const EIGEN_MAX_ITERATIONS: usize = 1000;
const EIGEN_TOLERANCE: f64 = 1e-12;
const EIGEN_POLISH_ITERATIONS: usize = 20;
const EIGENVECTOR_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radius: f64,
    intervals: usize,
}

impl RadialGrid {
    pub fn new(radius: f64, intervals: usize) -> Result<Self, SolveError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(SolveError::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if intervals < MIN_INTERVALS {
            return Err(SolveError::InvalidParameter(format!(
                "need at least {MIN_INTERVALS} intervals, got {intervals}"
            )));
        }
        Ok(RadialGrid { radius, intervals })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn spacing(&self) -> f64 {
        self.radius / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.radius
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|i| self.node(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Summation-by-parts quadrature of the discrete radial operator.
    ///
    /// The weights μ make diag(μ)A symmetric, so μᵀ(Au) telescopes to the
    /// boundary flux β|∂Ω|u(R) for every grid function u. They are scaled so
    /// that the boundary measure equals |S^{N−1}|R^{N−1}; in the interior they
    /// agree with the trapezoid weights |S^{N−1}| r_i^{N−1} h to O(h²).
    pub fn quadrature(&self, dim: usize) -> RadialQuadrature {
        let m = self.intervals;
        let h = self.spacing();
        let n1 = dim as f64 - 1.0;
        let upper = |i: usize| -> f64 {
            if i == 0 {
                -2.0 * dim as f64 / (h * h)
            } else {
                -(1.0 / (h * h) + n1 / (2.0 * h * self.node(i)))
            }
        };
        let lower = |i: usize| -> f64 {
            if i == m {
                -2.0 / (h * h)
            } else {
                -(1.0 / (h * h) - n1 / (2.0 * h * self.node(i)))
            }
        };
        let boundary = unit_sphere_area(dim) * self.radius.powi(dim as i32 - 1);
        let flux_factor = 2.0 / h + n1 / self.radius;
        let mut mu = vec![0.0; m + 1];
        mu[m] = boundary / flux_factor;
        for i in (0..m).rev() {
            mu[i] = mu[i + 1] * lower(i + 1) / upper(i);
        }
        RadialQuadrature {
            volume_weights: mu,
            boundary_measure: boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialQuadrature {
    pub volume_weights: Vec<f64>,
    pub boundary_measure: f64,
}

impl RadialQuadrature {
    pub fn volume(&self) -> f64 {
        self.volume_weights.iter().sum()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.volume_weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Tridiagonal linear part plus the per-row factor multiplying the source.
struct RadialOperator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    /// Exact row sums sub + diag + sup; zero except in the Robin row.
    row_sum: Vec<f64>,
    source_scale: Vec<f64>,
}

impl RadialOperator {
    fn new(grid: &RadialGrid, dim: usize, beta: f64) -> Self {
        let m = grid.intervals;
        let h = grid.spacing();
        let n1 = dim as f64 - 1.0;
        let mut sub = vec![0.0; m + 1];
        let mut diag = vec![0.0; m + 1];
        let mut sup = vec![0.0; m + 1];
        let mut source_scale = vec![1.0; m + 1];
        diag[0] = 2.0 * dim as f64 / (h * h);
        sup[0] = -diag[0];
        for i in 1..m {
            let c = n1 / (2.0 * h * grid.node(i));
            sub[i] = -(1.0 / (h * h) - c);
            diag[i] = 2.0 / (h * h);
            sup[i] = -(1.0 / (h * h) + c);
        }
        // ghost-eliminated Robin row, scaled by h/2
        sub[m] = -1.0 / h;
        diag[m] = 1.0 / h + beta + n1 * beta * h / (2.0 * grid.radius);
        source_scale[m] = 0.5 * h;
        let mut row_sum = vec![0.0; m + 1];
        row_sum[m] = beta + n1 * beta * h / (2.0 * grid.radius);
        RadialOperator {
            sub,
            diag,
            sup,
            row_sum,
            source_scale,
        }
    }

    /// A u in difference form, so that the O(u/h²) products never cancel.
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut s = self.row_sum[i] * u[i];
                if i > 0 {
                    s += self.sub[i] * (u[i - 1] - u[i]);
                }
                if i + 1 < n {
                    s += self.sup[i] * (u[i + 1] - u[i]);
                }
                s
            })
            .collect()
    }

    fn abs_apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut s = (self.diag[i] * u[i]).abs();
                if i > 0 {
                    s += (self.sub[i] * u[i - 1]).abs();
                }
                if i + 1 < n {
                    s += (self.sup[i] * u[i + 1]).abs();
                }
                s
            })
            .collect()
    }
}

/// Discrete residual of the radial problem.
///
/// Entry 0 is the origin row, entries 1..M−1 the centered interior stencil,
/// entry M the ghost-eliminated Robin row scaled by h/2. Negative values of u
/// enter u^p through the clamp u₊ = max(u, 10⁻³⁰⁰).
pub fn radial_residual(grid: &RadialGrid, u: &[f64], p: f64, beta: f64, dim: usize) -> Vec<f64> {
    let op = RadialOperator::new(grid, dim, beta);
    residual_with(&op, u, p, NewtonConfig::default().positivity_floor)
}

fn residual_with(op: &RadialOperator, u: &[f64], p: f64, floor: f64) -> Vec<f64> {
    let au = op.apply(u);
    au.iter()
        .zip(u)
        .zip(&op.source_scale)
        .map(|((a, &ui), s)| a - s * power(ui, p, floor))
        .collect()
}

/// u′(R) + βu(R) with the one-sided second-order difference for u′(R).
pub fn robin_defect(grid: &RadialGrid, u: &[f64], beta: f64) -> f64 {
    let m = grid.intervals;
    let h = grid.spacing();
    let du = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h);
    du + beta * u[m]
}

struct RadialSystem<'a> {
    op: &'a RadialOperator,
    p: f64,
    floor: f64,
}

impl NewtonSystem for RadialSystem<'_> {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        residual_with(self.op, u, self.p, self.floor)
    }

    fn scaled_norm(&self, u: &[f64], residual: &[f64]) -> f64 {
        let scale = self.op.abs_apply(u);
        residual
            .iter()
            .zip(&scale)
            .zip(u.iter().zip(&self.op.source_scale))
            .map(|((r, a), (&ui, s))| {
                let w = a + s * power(ui, self.p, self.floor).abs();
                if w > 0.0 {
                    r.abs() / w
                } else {
                    r.abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn newton_step(&self, u: &[f64], residual: &[f64]) -> Result<Vec<f64>, SolveError> {
        let eps = jacobian_floor(u);
        let diag: Vec<f64> = self
            .op
            .diag
            .iter()
            .zip(u.iter().zip(&self.op.source_scale))
            .map(|(d, (&ui, s))| d - s * power_derivative(ui, self.p, eps))
            .collect();
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        Ok(solve_tridiagonal(&self.op.sub, &diag, &self.op.sup, &rhs)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub grid: RadialGrid,
    pub dim: usize,
    pub p: f64,
    pub beta: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Scaled residual max-norm at exit (relative change of λ for eigen solves).
    pub residual: f64,
    /// u′(R) + βu(R).
    pub bc_residual: f64,
    /// Constant initial value used by Newton; `None` for warm starts and eigen solves.
    pub initial_guess: Option<f64>,
}

impl RadialSolution {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `r,u`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,u\n");
        for (i, u) in self.values.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{}",
                format_float(self.grid.node(i)),
                format_float(*u)
            );
        }
        out
    }
}

fn check_dim(dim: usize) -> Result<(), SolveError> {
    if dim < 2 {
        return Err(SolveError::InvalidParameter(format!(
            "dimension must be >= 2, got {dim}"
        )));
    }
    Ok(())
}

/// Solves the radial problem from the constant guess (β N / R)^{1/(p−1)}.
///
/// For 0 < p < 1, if Newton fails from the constant guess it is restarted from
/// the supersolution t·w built on the torsion function w; `initial_guess` is
/// then `None`. For p > 1 a failure is retried by continuation in β from a
/// smaller β where the constant guess converges, also with `initial_guess: None`.
pub fn solve_radial(
    p: f64,
    beta: f64,
    dim: usize,
    radius: f64,
    intervals: usize,
    config: &NewtonConfig,
) -> Result<RadialSolution, SolveError> {
    check_exponent(p, beta)?;
    let grid = RadialGrid::new(radius, intervals)?;
    let guess = constant_guess(p, beta, radius, dim as f64);
    match solve_radial_from(p, beta, dim, grid, vec![guess; grid.len()], config) {
        Ok(mut sol) => {
            sol.initial_guess = Some(guess);
            Ok(sol)
        }
        Err(SolveError::NoConvergence { .. } | SolveError::NonpositiveSolution { .. })
            if p > 0.0 && p < 1.0 =>
        {
            let torsion = solve_radial_from(0.0, beta, dim, grid, vec![1.0; grid.len()], config)?;
            let start = supersolution(&torsion.values, p);
            solve_radial_from(p, beta, dim, grid, start, config)
        }
        Err(e @ (SolveError::NoConvergence { .. } | SolveError::NonpositiveSolution { .. }))
            if p > 1.0 =>
        {
            continue_in_beta(p, beta, dim, grid, config).ok_or(e)
        }
        Err(e) => Err(e),
    }
}

/// Halves β until Newton converges from the constant guess, then walks back up
/// to β in steps of 2^{1/4}, warm-starting each solve from the previous one.
fn continue_in_beta(
    p: f64,
    beta: f64,
    dim: usize,
    grid: RadialGrid,
    config: &NewtonConfig,
) -> Option<RadialSolution> {
    let mut low = beta;
    let mut sol = None;
    for _ in 0..CONTINUATION_HALVINGS {
        low *= 0.5;
        let guess = constant_guess(p, low, grid.radius, dim as f64);
        if let Ok(s) = solve_radial_from(p, low, dim, grid, vec![guess; grid.len()], config) {
            sol = Some(s);
            break;
        }
    }
    let mut sol = sol?;
    while sol.beta < beta {
        let next = (sol.beta * CONTINUATION_STEP).min(beta);
        sol = solve_radial_from(p, next, dim, grid, sol.values, config).ok()?;
    }
    Some(sol)
}

/// Solves the radial problem from a given initial grid function.
pub fn solve_radial_from(
    p: f64,
    beta: f64,
    dim: usize,
    grid: RadialGrid,
    initial: Vec<f64>,
    config: &NewtonConfig,
) -> Result<RadialSolution, SolveError> {
    check_exponent(p, beta)?;
    check_dim(dim)?;
    if initial.len() != grid.len() {
        return Err(SolveError::InvalidParameter(format!(
            "initial guess has {} entries, grid has {}",
            initial.len(),
            grid.len()
        )));
    }
    let op = RadialOperator::new(&grid, dim, beta);
    let system = RadialSystem {
        op: &op,
        p,
        floor: config.positivity_floor,
    };
    let out = damped_newton(&system, initial, config)?;
    let min = out.values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(SolveError::NonpositiveSolution { min });
    }
    let bc_residual = robin_defect(&grid, &out.values, beta);
    Ok(RadialSolution {
        grid,
        dim,
        p,
        beta,
        values: out.values,
        iterations: out.iterations,
        residual: out.residual,
        bc_residual,
        initial_guess: None,
    })
}

/// First Robin eigenpair of the radial operator by inverse power iteration.
///
/// The eigenfunction is positive and normalized to sup-norm 1; the eigenvalue
/// is the Rayleigh quotient in the summation-by-parts inner product.
pub fn solve_radial_eigen(
    dim: usize,
    radius: f64,
    beta: f64,
    intervals: usize,
) -> Result<(f64, RadialSolution), SolveError> {
    check_dim(dim)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(SolveError::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let grid = RadialGrid::new(radius, intervals)?;
    let mut op = RadialOperator::new(&grid, dim, beta);
    // eigenproblem on the unscaled rows: A u = λ u
    let m = grid.intervals;
    let scale = 1.0 / op.source_scale[m];
    op.sub[m] *= scale;
    op.diag[m] *= scale;
    op.row_sum[m] *= scale;
    op.source_scale[m] = 1.0;
    let weights = grid.quadrature(dim).volume_weights;

    let rayleigh = |x: &[f64]| -> f64 {
        let ax = op.apply(x);
        let num: f64 = weights
            .iter()
            .zip(x.iter().zip(&ax))
            .map(|(w, (a, b))| w * a * b)
            .sum();
        let den: f64 = weights.iter().zip(x).map(|(w, a)| w * a * a).sum();
        num / den
    };

    let mut x = vec![1.0; grid.len()];
    let mut lambda = rayleigh(&x);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < EIGEN_MAX_ITERATIONS {
        let y = solve_tridiagonal(&op.sub, &op.diag, &op.sup, &x)?;
        let peak = y
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        x = y.iter().map(|v| v / peak).collect();
        let next = rayleigh(&x);
        change = (next - lambda).abs() / next.abs();
        lambda = next;
        iterations += 1;
        if change <= EIGEN_TOLERANCE {
            break;
        }
    }
    if change > EIGEN_TOLERANCE {
        return Err(SolveError::EigenNoConvergence { iterations, change });
    }
    // the quotient converges twice as fast as the vector
    for _ in 0..EIGEN_POLISH_ITERATIONS {
        let y = solve_tridiagonal(&op.sub, &op.diag, &op.sup, &x)?;
        let peak = y
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let next: Vec<f64> = y.iter().map(|v| v / peak).collect();
        let moved = next
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = next;
        lambda = rayleigh(&x);
        iterations += 1;
        if moved <= EIGENVECTOR_TOLERANCE {
            break;
        }
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(SolveError::NonpositiveSolution { min });
    }
    let bc_residual = robin_defect(&grid, &x, beta);
    Ok((
        lambda,
        RadialSolution {
            grid,
            dim,
            p: 1.0,
            beta,
            values: x,
            iterations,
            residual: change,
            bc_residual,
            initial_guess: None,
        },
    ))
}
