//! Piecewise-linear finite elements for the Robin problem on planar meshes.
//!
//! The weak form ∫∇u·∇v + β∫_{∂Ω}uv = ∫u^p v is discretized with the P1
//! stiffness K, the lumped domain mass M and the lumped boundary mass B.
//! Lumping makes 𝟙 an exact test function, so β𝟙ᵀBu = 𝟙ᵀM u^p holds for
//! every discrete solution.

use std::fmt::Write as _;

use crate::format_float;
use crate::geometry::{GeometryError, Mesh};
use crate::linalg::{minres, norm_inf, pcg, CsrMatrix, LinalgError};
use crate::newton::{
    check_exponent, constant_guess, damped_newton, jacobian_floor, power, power_derivative,
    supersolution, NewtonConfig, NewtonSystem, SolveError, CONTINUATION_HALVINGS,
    CONTINUATION_STEP,
};

/// Relative tolerance for the inner Krylov solves.
pub const LINEAR_TOLERANCE: f64 = 1e-12;
const EIGEN_MAX_ITERATIONS: usize = 500;
const EIGEN_TOLERANCE: f64 = 1e-12;
const EIGEN_POLISH_ITERATIONS: usize = 20;
const EIGENVECTOR_TOLERANCE: f64 = 1e-14;

/// Assembled operators for one mesh and one β.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub beta: f64,
    /// P1 stiffness K.
    pub stiffness: CsrMatrix,
    /// K + βB.
    pub operator: CsrMatrix,
    /// Lumped domain mass (diagonal of M).
    pub mass: Vec<f64>,
    /// Lumped boundary mass (diagonal of B).
    pub boundary_mass: Vec<f64>,
}

impl FemSystem {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn volume(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.boundary_mass.iter().sum()
    }

    /// Same mesh, different β.
    pub fn with_beta(&self, beta: f64) -> FemSystem {
        let shift: Vec<f64> = self.boundary_mass.iter().map(|b| beta * b).collect();
        FemSystem {
            beta,
            stiffness: self.stiffness.clone(),
            operator: self.stiffness.add_diagonal(&shift),
            mass: self.mass.clone(),
            boundary_mass: self.boundary_mass.clone(),
        }
    }

    /// (K + βB)u with the stiffness part in difference form Σ_j K_ij (u_j − u_i),
    /// exact for constants since the rows of K sum to zero.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|i| {
                let ui = u[i];
                let flux: f64 = self.stiffness.row(i).map(|(j, k)| k * (u[j] - ui)).sum();
                flux + self.beta * self.boundary_mass[i] * ui
            })
            .collect()
    }

    /// F(u) = (K + βB)u − M u₊^p.
    pub fn residual(&self, u: &[f64], p: f64, floor: f64) -> Vec<f64> {
        let au = self.apply(u);
        au.iter()
            .zip(u.iter().zip(&self.mass))
            .map(|(a, (&ui, m))| a - m * power(ui, p, floor))
            .collect()
    }
}

/// Assembles K + βB, M and B (lumped) on a mesh.
pub fn assemble(mesh: &Mesh, beta: f64) -> Result<FemSystem, SolveError> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(SolveError::InvalidParameter(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let n = mesh.num_nodes();
    let nodes = mesh.nodes();
    let min_area = 1e-14 * mesh.bounding_box_area();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    let mut mass = vec![0.0; n];
    for (t, (tri, &area)) in mesh.triangles().iter().zip(mesh.areas()).enumerate() {
        if area <= min_area {
            return Err(GeometryError::InvariantViolation(format!(
                "triangle {t} is degenerate (area {area:e})"
            ))
            .into());
        }
        let p: [[f64; 2]; 3] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        let mut b = [0.0; 3];
        let mut c = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            b[i] = p[j][1] - p[k][1];
            c[i] = p[k][0] - p[j][0];
        }
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
            }
            mass[tri[i]] += area / 3.0;
        }
    }
    let mut boundary_mass = vec![0.0; n];
    for (&[i, j], &len) in mesh.boundary_edges().iter().zip(mesh.edge_lengths()) {
        boundary_mass[i] += 0.5 * len;
        boundary_mass[j] += 0.5 * len;
    }
    let stiffness = CsrMatrix::from_triplets(n, &triplets);
    let shift: Vec<f64> = boundary_mass.iter().map(|b| beta * b).collect();
    let operator = stiffness.add_diagonal(&shift);
    Ok(FemSystem {
        beta,
        stiffness,
        operator,
        mass,
        boundary_mass,
    })
}

/// Nodal solution on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub p: f64,
    pub beta: f64,
    pub residual: f64,
    pub iterations: usize,
    pub initial_guess: Option<f64>,
}

impl Field {
    pub fn sup_norm(&self) -> f64 {
        norm_inf(&self.values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `node_index,x,y,u`.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut out = String::from("node_index,x,y,u\n");
        for (i, (p, u)) in mesh.nodes().iter().zip(&self.values).enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{}",
                format_float(p[0]),
                format_float(p[1]),
                format_float(*u)
            );
        }
        out
    }
}

fn krylov_solve(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    indefinite: bool,
) -> Result<(), SolveError> {
    let max_iter = (20 * a.dim()).max(2000);
    if !indefinite {
        match pcg(a, b, x, LINEAR_TOLERANCE, max_iter) {
            Ok(_) => return Ok(()),
            Err(LinalgError::Breakdown(_)) => x.iter_mut().for_each(|v| *v = 0.0),
            Err(e) => return Err(e.into()),
        }
    }
    minres(a, b, x, LINEAR_TOLERANCE, max_iter)?;
    Ok(())
}

struct FemNewton<'a> {
    system: &'a FemSystem,
    p: f64,
    floor: f64,
}

impl NewtonSystem for FemNewton<'_> {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        self.system.residual(u, self.p, self.floor)
    }

    fn scaled_norm(&self, u: &[f64], residual: &[f64]) -> f64 {
        let scale = self.system.operator.abs_mul_vec(u);
        residual
            .iter()
            .zip(&scale)
            .zip(u.iter().zip(&self.system.mass))
            .map(|((r, a), (&ui, m))| {
                let w = a + m * power(ui, self.p, self.floor);
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
        let shift: Vec<f64> = u
            .iter()
            .zip(&self.system.mass)
            .map(|(&ui, m)| -m * power_derivative(ui, self.p, eps))
            .collect();
        let jacobian = self.system.operator.add_diagonal(&shift);
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; u.len()];
        // for p > 1 the Jacobian has a negative direction near the constants
        krylov_solve(&jacobian, &rhs, &mut delta, self.p > 1.0)?;
        Ok(delta)
    }
}

/// Damped Newton for (K + βB)u = M u₊^p from the constant guess
/// (β|∂Ω|/|Ω|)^{1/(p−1)} computed with the discrete measures.
pub fn solve_semilinear(
    mesh: &Mesh,
    p: f64,
    beta: f64,
    config: &NewtonConfig,
) -> Result<Field, SolveError> {
    check_exponent(p, beta)?;
    let system = assemble(mesh, beta)?;
    solve_semilinear_system(&system, p, None, config)
}

/// Newton on an assembled system; `initial` overrides the constant guess.
///
/// Without `initial` and for 0 < p < 1, a failure from the constant guess is
/// retried from the torsion supersolution, reported as `initial_guess: None`.
/// For p > 1 it is retried by continuation in β, as in the radial solver.
pub fn solve_semilinear_system(
    system: &FemSystem,
    p: f64,
    initial: Option<Vec<f64>>,
    config: &NewtonConfig,
) -> Result<Field, SolveError> {
    let beta = system.beta;
    check_exponent(p, beta)?;
    let initial_guess_free = initial.is_none();
    let fallback = initial_guess_free && p > 0.0 && p < 1.0;
    let (start, guess) = match initial {
        Some(v) => {
            if v.len() != system.dim() {
                return Err(SolveError::InvalidParameter(format!(
                    "initial guess has {} entries, mesh has {}",
                    v.len(),
                    system.dim()
                )));
            }
            (v, None)
        }
        None => {
            let g = constant_guess(p, beta, system.volume(), system.boundary_measure());
            (vec![g; system.dim()], Some(g))
        }
    };
    let newton = FemNewton {
        system,
        p,
        floor: config.positivity_floor,
    };
    let attempt = damped_newton(&newton, start, config).and_then(|out| {
        let min = out.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            Ok(out)
        } else {
            Err(SolveError::NonpositiveSolution { min })
        }
    });
    let (out, guess) = match attempt {
        Ok(out) => (out, guess),
        Err(SolveError::NoConvergence { .. } | SolveError::NonpositiveSolution { .. })
            if fallback =>
        {
            let torsion = solve_semilinear_system(system, 0.0, None, config)?;
            let start = supersolution(&torsion.values, p);
            let out = damped_newton(&newton, start, config)?;
            (out, None)
        }
        Err(e @ (SolveError::NoConvergence { .. } | SolveError::NonpositiveSolution { .. }))
            if initial_guess_free && p > 1.0 =>
        {
            let field = continue_in_beta(system, p, config).ok_or(e)?;
            return Ok(field);
        }
        Err(e) => return Err(e),
    };
    Ok(Field {
        values: out.values,
        p,
        beta,
        residual: out.residual,
        iterations: out.iterations,
        initial_guess: guess,
    })
}

/// Halves β until the constant guess converges, then walks back up to β in
/// steps of 2^{1/4}, warm-starting each solve from the previous one.
fn continue_in_beta(system: &FemSystem, p: f64, config: &NewtonConfig) -> Option<Field> {
    let mut low = system.beta;
    let mut field = None;
    for _ in 0..CONTINUATION_HALVINGS {
        low *= 0.5;
        let guess = constant_guess(p, low, system.volume(), system.boundary_measure());
        let shifted = system.with_beta(low);
        if let Ok(f) = solve_semilinear_system(&shifted, p, Some(vec![guess; system.dim()]), config)
        {
            field = Some(f);
            break;
        }
    }
    let mut field = field?;
    while field.beta < system.beta {
        let next = (field.beta * CONTINUATION_STEP).min(system.beta);
        let shifted = system.with_beta(next);
        field = solve_semilinear_system(&shifted, p, Some(field.values), config).ok()?;
    }
    Some(field)
}

/// Smallest eigenpair of (K + βB)x = λMx by inverse power iteration.
///
/// β = 0 is accepted: the iteration is then shifted by M and returns the
/// constant Neumann eigenfunction with λ = 0.
pub fn solve_eigen(mesh: &Mesh, beta: f64) -> Result<(f64, Field), SolveError> {
    let system = assemble(mesh, beta)?;
    solve_eigen_system(&system)
}

pub fn solve_eigen_system(system: &FemSystem) -> Result<(f64, Field), SolveError> {
    let beta = system.beta;
    let shift = if beta == 0.0 { 1.0 } else { 0.0 };
    let shifted = if shift > 0.0 {
        let d: Vec<f64> = system.mass.iter().map(|m| shift * m).collect();
        system.operator.add_diagonal(&d)
    } else {
        system.operator.clone()
    };
    let rayleigh = |x: &[f64]| -> f64 {
        let ax = system.apply(x);
        let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&system.mass).map(|(a, m)| m * a * a).sum();
        num / den
    };

    let n = system.dim();
    let mut x = vec![1.0; n];
    let mut lambda = rayleigh(&x);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let inverse_step = |x: &[f64], lambda: f64| -> Result<Vec<f64>, SolveError> {
        let rhs: Vec<f64> = x.iter().zip(&system.mass).map(|(a, m)| a * m).collect();
        // warm start from the previous direction scaled by 1/(λ + σ)
        let mut y: Vec<f64> = x.iter().map(|v| v / (lambda + shift).max(1e-300)).collect();
        krylov_solve(&shifted, &rhs, &mut y, false)?;
        let peak = y
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if peak == 0.0 {
            return Err(SolveError::ZeroField);
        }
        Ok(y.iter().map(|v| v / peak).collect())
    };
    while iterations < EIGEN_MAX_ITERATIONS {
        x = inverse_step(&x, lambda)?;
        let next = rayleigh(&x);
        let delta = (next - lambda).abs();
        change = if next != 0.0 {
            delta / next.abs()
        } else {
            delta
        };
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
        let next = inverse_step(&x, lambda)?;
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
    Ok((
        lambda,
        Field {
            values: x,
            p: 1.0,
            beta,
            residual: change,
            iterations,
            initial_guess: None,
        },
    ))
}

/// Evaluates the quotient (uᵀKu + βuᵀBu) / (Σ M_ii |u_i|^{p+1})^{2/(p+1)}.
pub fn rayleigh_quotient(system: &FemSystem, values: &[f64], p: f64) -> Result<f64, SolveError> {
    if values.iter().all(|&v| v == 0.0) {
        return Err(SolveError::ZeroField);
    }
    let au = system.apply(values);
    let energy: f64 = values.iter().zip(&au).map(|(a, b)| a * b).sum();
    let norm: f64 = values
        .iter()
        .zip(&system.mass)
        .map(|(u, m)| m * u.abs().powf(p + 1.0))
        .sum();
    Ok(energy / norm.powf(2.0 / (p + 1.0)))
}
