//! β-sweeps, auxiliary quantities and power-law fits.
//!
//! For a solution u of the Robin problem the harness evaluates
//!
//! ```text
//! c_β = ∫_Ω u^p,   d_β = c_β / (β|∂Ω|),   v = u − d_β,   v̂ = v / d_β,
//! ```
//!
//! with the quadrature that belongs to the discretization, so that the flux
//! balance β∫_{∂Ω}u = c_β is exact up to the solver residual. For the
//! eigenproblem the source is λu and c_β = λ∫_Ω u.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{solve_eigen_system, solve_semilinear_system, FemSystem, Field};
use crate::format_float;
use crate::geometry::{unit_sphere_area, Mesh};
use crate::newton::{NewtonConfig, SolveError};
use crate::radial::{
    solve_radial, solve_radial_eigen, solve_radial_from, RadialGrid, RadialSolution,
};
use crate::shooting::{find_delta_hat_on, ShootResult, ShootingProfile};

/// Relative slack on the one-sided measure bounds.
pub const BOUND_SLACK: f64 = 1e-8;
/// Relative tolerance of the flux balance β∫_{∂Ω}u = ∫_Ω u^p.
pub const FLUX_TOLERANCE: f64 = 1e-10;
/// |∫_{∂Ω} v| is compared against this factor times |∂Ω|·‖u‖_∞.
pub const BOUNDARY_MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid beta list: {0}")]
    InvalidBetaList(String),
    #[error("power-law fit needs at least {needed} successful records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("unknown record field '{0}'")]
    UnknownField(String),
    #[error("failed to build the worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Radial,
    Fem,
    Shoot,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "radial" => Ok(Backend::Radial),
            "fem" => Ok(Backend::Fem),
            "shoot" => Ok(Backend::Shoot),
            _ => Err(format!(
                "unknown backend '{s}' (expected radial, fem or shoot)"
            )),
        }
    }
}

/// Discrete volume and boundary measure of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub volume: f64,
    pub boundary: f64,
}

impl Measures {
    /// |Ω| / |∂Ω|.
    pub fn ratio(&self) -> f64 {
        self.volume / self.boundary
    }
}

/// A solution together with what is needed to integrate over Ω and ∂Ω.
#[derive(Debug, Clone, Copy)]
pub enum SolutionView<'a> {
    Radial {
        solution: &'a RadialSolution,
        lambda: Option<f64>,
    },
    Fem {
        mesh: &'a Mesh,
        system: &'a FemSystem,
        field: &'a Field,
        lambda: Option<f64>,
    },
    Shoot(&'a ShootResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub p: f64,
    pub sup_norm: f64,
    pub c_beta: f64,
    pub d_beta: f64,
    /// ‖u/d_β − 1‖_∞.
    pub sup_vhat: f64,
    /// min(u − d_β) over interior nodes.
    pub min_v: f64,
    /// ∫_{∂Ω}(u − d_β).
    pub boundary_mean_v: f64,
    pub lambda: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub volume: f64,
    pub boundary_measure: f64,
    /// Smallest nodal value of u.
    pub min_value: f64,
    /// |β∫_{∂Ω}u − c_β| / max(β∫_{∂Ω}u, c_β).
    pub flux_defect: f64,
}

impl SweepRecord {
    pub fn measures(&self) -> Measures {
        Measures {
            volume: self.volume,
            boundary: self.boundary_measure,
        }
    }
}

struct Quadrature {
    source: f64,
    boundary_integral: f64,
    measures: Measures,
    /// (value, is_interior) per node.
    nodes: Vec<(f64, bool)>,
}

fn radial_quadrature(sol: &RadialSolution, lambda: Option<f64>) -> Quadrature {
    let q = sol.grid.quadrature(sol.dim);
    let m = sol.grid.intervals();
    let source = match lambda {
        Some(l) => l * q.integrate(&sol.values),
        None => {
            let up: Vec<f64> = sol.values.iter().map(|u| u.max(0.0).powf(sol.p)).collect();
            q.integrate(&up)
        }
    };
    Quadrature {
        source,
        boundary_integral: q.boundary_measure * sol.values[m],
        measures: Measures {
            volume: q.volume(),
            boundary: q.boundary_measure,
        },
        nodes: sol
            .values
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, i < m))
            .collect(),
    }
}

fn fem_quadrature(
    mesh: &Mesh,
    system: &FemSystem,
    field: &Field,
    lambda: Option<f64>,
) -> Quadrature {
    let u = &field.values;
    let source: f64 = match lambda {
        Some(l) => l * system.mass.iter().zip(u).map(|(m, u)| m * u).sum::<f64>(),
        None => system
            .mass
            .iter()
            .zip(u)
            .map(|(m, u)| m * u.max(0.0).powf(field.p))
            .sum(),
    };
    let boundary_integral = system.boundary_mass.iter().zip(u).map(|(b, u)| b * u).sum();
    let on_boundary = mesh.boundary_nodes();
    Quadrature {
        source,
        boundary_integral,
        measures: Measures {
            volume: system.volume(),
            boundary: system.boundary_measure(),
        },
        nodes: u.iter().zip(on_boundary).map(|(&u, b)| (u, !b)).collect(),
    }
}

fn shoot_quadrature(res: &ShootResult) -> Quadrature {
    let area = unit_sphere_area(res.dim);
    let m = res.solution.grid.intervals();
    Quadrature {
        source: res.source_integral,
        boundary_integral: area * res.boundary_value,
        measures: Measures {
            volume: area / res.dim as f64,
            boundary: area,
        },
        nodes: res
            .solution
            .values
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, i < m))
            .collect(),
    }
}

/// Evaluates the auxiliary quantities of one accepted solution.
pub fn compute_record(view: SolutionView<'_>) -> SweepRecord {
    let (quad, p, beta, lambda, iterations, residual) = match view {
        SolutionView::Radial { solution, lambda } => (
            radial_quadrature(solution, lambda),
            solution.p,
            solution.beta,
            lambda,
            solution.iterations,
            solution.residual,
        ),
        SolutionView::Fem {
            mesh,
            system,
            field,
            lambda,
        } => (
            fem_quadrature(mesh, system, field, lambda),
            field.p,
            field.beta,
            lambda,
            field.iterations,
            field.residual,
        ),
        SolutionView::Shoot(res) => (
            shoot_quadrature(res),
            res.p,
            res.beta,
            None,
            0,
            res.residual,
        ),
    };
    let c_beta = quad.source;
    let d_beta = c_beta / (beta * quad.measures.boundary);
    let mut sup_norm = 0.0f64;
    let mut sup_vhat = 0.0f64;
    let mut min_v = f64::INFINITY;
    let mut min_value = f64::INFINITY;
    for &(u, interior) in &quad.nodes {
        sup_norm = sup_norm.max(u.abs());
        sup_vhat = sup_vhat.max((u / d_beta - 1.0).abs());
        min_value = min_value.min(u);
        if interior {
            min_v = min_v.min(u - d_beta);
        }
    }
    let flux = beta * quad.boundary_integral;
    SweepRecord {
        beta,
        p,
        sup_norm,
        c_beta,
        d_beta,
        sup_vhat,
        min_v,
        boundary_mean_v: quad.boundary_integral - d_beta * quad.measures.boundary,
        lambda,
        iterations,
        residual,
        volume: quad.measures.volume,
        boundary_measure: quad.measures.boundary,
        min_value,
        flux_defect: (flux - c_beta).abs() / flux.abs().max(c_beta.abs()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SweepRow {
    Ok(SweepRecord),
    Failed { beta: f64, error: String },
}

impl SweepRow {
    pub fn beta(&self) -> f64 {
        match self {
            SweepRow::Ok(r) => r.beta,
            SweepRow::Failed { beta, .. } => *beta,
        }
    }

    pub fn record(&self) -> Option<&SweepRecord> {
        match self {
            SweepRow::Ok(r) => Some(r),
            SweepRow::Failed { .. } => None,
        }
    }
}

/// Geometry and discretization of a sweep.
#[derive(Debug, Clone, Copy)]
pub enum Problem<'a> {
    /// Radial finite differences on the ball of the given radius.
    Ball {
        dim: usize,
        radius: f64,
        intervals: usize,
    },
    /// P1 elements on a planar mesh.
    Mesh(&'a Mesh),
    /// Rescaled entire profile on the unit ball.
    Shoot {
        profile: &'a ShootingProfile,
        intervals: usize,
    },
}

impl Problem<'_> {
    pub fn backend(&self) -> Backend {
        match self {
            Problem::Ball { .. } => Backend::Radial,
            Problem::Mesh(_) => Backend::Fem,
            Problem::Shoot { .. } => Backend::Shoot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub newton: NewtonConfig,
    /// Warm-start each β from the previous accepted solution.
    pub continuation: bool,
    /// Worker threads for independent solves; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            newton: NewtonConfig::default(),
            continuation: false,
            jobs: 1,
        }
    }
}

/// `count` log-spaced values from `first` down to `last`, both included.
pub fn log_spaced(first: f64, last: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![first];
    }
    let (a, b) = (first.log10(), last.log10());
    (0..count)
        .map(|k| match k {
            0 => first,
            k if k + 1 == count => last,
            k => 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64),
        })
        .collect()
}

/// Eight log-spaced values from 1e−1 down to 1e−3.
pub fn default_betas() -> Vec<f64> {
    log_spaced(1e-1, 1e-3, 8)
}

fn validate_betas(problem: &Problem<'_>, betas: &[f64]) -> Result<(), HarnessError> {
    if betas.is_empty() {
        return Err(HarnessError::InvalidBetaList("empty".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
        return Err(HarnessError::InvalidBetaList(format!(
            "{b} is not in (0, inf)"
        )));
    }
    if betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(HarnessError::InvalidBetaList(
            "values must be strictly decreasing".into(),
        ));
    }
    if let Problem::Shoot { profile, .. } = problem {
        let a = profile.a();
        if betas[0] >= a {
            return Err(HarnessError::InvalidBetaList(format!(
                "shooting needs every beta < 2/(p-1) = {a}, got {}",
                betas[0]
            )));
        }
    }
    Ok(())
}

enum Warm {
    None,
    Values(Vec<f64>),
}

struct Solved {
    record: SweepRecord,
    values: Vec<f64>,
}

fn solve_one(
    problem: &Problem<'_>,
    base: Option<&FemSystem>,
    p: f64,
    beta: f64,
    warm: &Warm,
    newton: &NewtonConfig,
) -> Result<Solved, String> {
    let err = |e: SolveError| e.to_string();
    match problem {
        Problem::Ball {
            dim,
            radius,
            intervals,
        } => {
            let (solution, lambda) = if p == 1.0 {
                let (l, s) = solve_radial_eigen(*dim, *radius, beta, *intervals).map_err(err)?;
                (s, Some(l))
            } else if let Warm::Values(v) = warm {
                let grid = RadialGrid::new(*radius, *intervals).map_err(err)?;
                let s = solve_radial_from(p, beta, *dim, grid, v.clone(), newton).map_err(err)?;
                (s, None)
            } else {
                (
                    solve_radial(p, beta, *dim, *radius, *intervals, newton).map_err(err)?,
                    None,
                )
            };
            let record = compute_record(SolutionView::Radial {
                solution: &solution,
                lambda,
            });
            Ok(Solved {
                record,
                values: solution.values,
            })
        }
        Problem::Mesh(mesh) => {
            let system = base.expect("assembled base system").with_beta(beta);
            let (field, lambda) = if p == 1.0 {
                let (l, f) = solve_eigen_system(&system).map_err(err)?;
                (f, Some(l))
            } else {
                let init = match warm {
                    Warm::Values(v) => Some(v.clone()),
                    Warm::None => None,
                };
                (
                    solve_semilinear_system(&system, p, init, newton).map_err(err)?,
                    None,
                )
            };
            let record = compute_record(SolutionView::Fem {
                mesh,
                system: &system,
                field: &field,
                lambda,
            });
            Ok(Solved {
                record,
                values: field.values,
            })
        }
        Problem::Shoot { profile, intervals } => {
            let res = find_delta_hat_on(profile, beta, *intervals).map_err(|e| e.to_string())?;
            Ok(Solved {
                record: compute_record(SolutionView::Shoot(&res)),
                values: Vec::new(),
            })
        }
    }
}

/// Solves for every β and returns one row per β in the given order.
///
/// p = 1 selects the eigenproblem. The shooting backend takes p from the
/// profile. Failures are recorded in their row and do not stop the sweep.
pub fn run_sweep(
    problem: &Problem<'_>,
    p: f64,
    betas: &[f64],
    options: &SweepOptions,
) -> Result<Vec<SweepRow>, HarnessError> {
    validate_betas(problem, betas)?;
    let p = match problem {
        Problem::Shoot { profile, .. } => profile.p(),
        _ => p,
    };
    let base = match problem {
        Problem::Mesh(mesh) => match crate::fem::assemble(mesh, 0.0) {
            Ok(s) => Some(s),
            Err(e) => {
                return Ok(betas
                    .iter()
                    .map(|&beta| SweepRow::Failed {
                        beta,
                        error: e.to_string(),
                    })
                    .collect())
            }
        },
        _ => None,
    };
    let to_row = |beta: f64, r: Result<Solved, String>| match r {
        Ok(s) => SweepRow::Ok(s.record),
        Err(error) => SweepRow::Failed { beta, error },
    };

    if options.continuation && p != 1.0 && problem.backend() != Backend::Shoot {
        let mut warm = Warm::None;
        let mut rows = Vec::with_capacity(betas.len());
        for &beta in betas {
            let result = solve_one(problem, base.as_ref(), p, beta, &warm, &options.newton);
            warm = match &result {
                Ok(s) => Warm::Values(s.values.clone()),
                Err(_) => Warm::None,
            };
            rows.push(to_row(beta, result));
        }
        return Ok(rows);
    }

    let solve = |beta: f64| {
        to_row(
            beta,
            solve_one(
                problem,
                base.as_ref(),
                p,
                beta,
                &Warm::None,
                &options.newton,
            ),
        )
    };
    if options.jobs == 1 {
        return Ok(betas.iter().map(|&b| solve(b)).collect());
    }
    let run = || betas.par_iter().map(|&b| solve(b)).collect::<Vec<_>>();
    if options.jobs == 0 {
        return Ok(run());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(run))
}

/// CSV header of a sweep table.
pub const SWEEP_CSV_HEADER: &str =
    "beta,sup_norm,c_beta,d_beta,sup_vhat,min_v,boundary_mean_v,lambda,iters,residual,status";

/// Renders rows as CSV; absent values are left empty.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        match row {
            SweepRow::Ok(r) => {
                let lambda = r.lambda.map(format_float).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},ok",
                    format_float(r.beta),
                    format_float(r.sup_norm),
                    format_float(r.c_beta),
                    format_float(r.d_beta),
                    format_float(r.sup_vhat),
                    format_float(r.min_v),
                    format_float(r.boundary_mean_v),
                    lambda,
                    r.iterations,
                    format_float(r.residual),
                );
            }
            SweepRow::Failed { beta, .. } => {
                let _ = writeln!(out, "{},,,,,,,,,,failed", format_float(*beta));
            }
        }
    }
    out
}

/// Quantities a power law can be fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordField {
    SupNorm,
    CBeta,
    DBeta,
    SupVhat,
    Lambda,
}

impl RecordField {
    pub fn name(self) -> &'static str {
        match self {
            RecordField::SupNorm => "sup_norm",
            RecordField::CBeta => "c_beta",
            RecordField::DBeta => "d_beta",
            RecordField::SupVhat => "sup_vhat",
            RecordField::Lambda => "lambda",
        }
    }

    pub fn get(self, r: &SweepRecord) -> Option<f64> {
        match self {
            RecordField::SupNorm => Some(r.sup_norm),
            RecordField::CBeta => Some(r.c_beta),
            RecordField::DBeta => Some(r.d_beta),
            RecordField::SupVhat => Some(r.sup_vhat),
            RecordField::Lambda => r.lambda,
        }
    }
}

impl FromStr for RecordField {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            RecordField::SupNorm,
            RecordField::CBeta,
            RecordField::DBeta,
            RecordField::SupVhat,
            RecordField::Lambda,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| HarnessError::UnknownField(s.to_string()))
    }
}

/// field ≈ constant · β^slope by least squares in log–log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub field: String,
    pub slope: f64,
    #[serde(skip)]
    pub intercept: f64,
    /// exp(intercept).
    pub constant: f64,
    pub r2: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Ordinary least squares of log(field) on log β over the successful rows
/// with a positive value of `field`.
pub fn fit_power_law(rows: &[SweepRow], field: RecordField) -> Result<PowerLawFit, HarnessError> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(SweepRow::record)
        .filter_map(|r| field.get(r).filter(|v| *v > 0.0).map(|v| (r.beta, v)))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(HarnessError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(b, _)| b.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let betas = pts.iter().map(|(b, _)| *b);
    Ok(PowerLawFit {
        field: field.name().to_string(),
        slope,
        intercept,
        constant: intercept.exp(),
        r2,
        beta_min: betas.clone().fold(f64::INFINITY, f64::min),
        beta_max: betas.fold(0.0, f64::max),
        n_points: pts.len(),
    })
}

/// Rows with β within one decade of the smallest successful β.
pub fn smallest_decade(rows: &[SweepRow]) -> Vec<SweepRow> {
    let lo = rows
        .iter()
        .filter_map(SweepRow::record)
        .map(|r| r.beta)
        .fold(f64::INFINITY, f64::min);
    rows.iter()
        .filter(|r| r.beta() <= 10.0 * lo * (1.0 + 1e-12))
        .cloned()
        .collect()
}

/// Observed over predicted leading-order value for one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantRatio {
    pub beta: f64,
    pub observed: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Leading-order prediction for ‖u_β‖_∞ (p ≠ 1) or λ/β (p = 1).
pub fn leading_order(p: f64, beta: f64, m: &Measures) -> f64 {
    if p < 1.0 {
        (m.ratio() / beta).powf(1.0 / (1.0 - p))
    } else if p > 1.0 {
        (beta / m.ratio()).powf(1.0 / (p - 1.0))
    } else {
        1.0 / m.ratio()
    }
}

/// Ratio table against the leading-order law; the last row is the headline.
pub fn check_asymptotic_constant(
    rows: &[SweepRow],
    p: f64,
    measures: &Measures,
) -> Vec<ConstantRatio> {
    rows.iter()
        .filter_map(SweepRow::record)
        .filter_map(|r| {
            let observed = if p == 1.0 {
                r.lambda? / r.beta
            } else {
                r.sup_norm
            };
            let predicted = leading_order(p, r.beta, measures);
            Some(ConstantRatio {
                beta: r.beta,
                observed,
                predicted,
                ratio: observed / predicted,
            })
        })
        .collect()
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub beta: Option<f64>,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

fn check(name: &str, beta: Option<f64>, value: f64, bound: f64, passed: bool) -> InvariantCheck {
    InvariantCheck {
        name: name.to_string(),
        beta,
        value,
        bound,
        passed,
    }
}

/// Positivity of v, zero boundary mean, flux balance and the measure bound
/// on d_β (on λ for p = 1).
pub fn record_invariants(r: &SweepRecord) -> Vec<InvariantCheck> {
    let b = Some(r.beta);
    let m = r.measures();
    let mean_bound = BOUNDARY_MEAN_TOLERANCE * r.boundary_measure * r.sup_norm;
    let mut out = vec![
        check("interior_v_positive", b, r.min_v, 0.0, r.min_v > 0.0),
        check(
            "boundary_mean_v",
            b,
            r.boundary_mean_v.abs(),
            mean_bound,
            r.boundary_mean_v.abs() <= mean_bound,
        ),
        check(
            "flux_identity",
            b,
            r.flux_defect,
            FLUX_TOLERANCE,
            r.flux_defect <= FLUX_TOLERANCE,
        ),
    ];
    let p = r.p;
    if p == 1.0 {
        let lambda = r.lambda.unwrap_or(f64::NAN);
        let bound = r.beta / m.ratio();
        out.push(check(
            "eigenvalue_upper_bound",
            b,
            lambda,
            bound,
            lambda <= bound,
        ));
    } else if p < 1.0 {
        let bound = leading_order(p, r.beta, &m) * (1.0 - BOUND_SLACK);
        out.push(check(
            "d_beta_lower_bound",
            b,
            r.d_beta,
            bound,
            r.d_beta >= bound,
        ));
    } else {
        let bound = leading_order(p, r.beta, &m) * (1.0 + BOUND_SLACK);
        out.push(check(
            "d_beta_upper_bound",
            b,
            r.d_beta,
            bound,
            r.d_beta <= bound,
        ));
    }
    out
}

/// Per-record invariants plus the monotonicity of v̂ (and of ‖u‖_∞ for p > 1)
/// along decreasing β. For p = 1 the eigenfunction is sup-normalized and
/// λ/β must increase instead.
pub fn sweep_invariants(rows: &[SweepRow]) -> Vec<InvariantCheck> {
    let records: Vec<&SweepRecord> = rows.iter().filter_map(SweepRow::record).collect();
    let mut out: Vec<InvariantCheck> = records.iter().flat_map(|r| record_invariants(r)).collect();
    out.push(check(
        "no_failed_rows",
        None,
        (rows.len() - records.len()) as f64,
        0.0,
        records.len() == rows.len(),
    ));
    for w in records.windows(2) {
        let (prev, next) = (w[0], w[1]);
        let b = Some(next.beta);
        out.push(check(
            "sup_vhat_decreasing",
            b,
            next.sup_vhat,
            prev.sup_vhat,
            next.sup_vhat < prev.sup_vhat,
        ));
        if next.p > 1.0 {
            out.push(check(
                "sup_norm_decreasing",
                b,
                next.sup_norm,
                prev.sup_norm,
                next.sup_norm < prev.sup_norm,
            ));
        }
        if let (Some(lp), Some(ln)) = (prev.lambda, next.lambda) {
            out.push(check(
                "lambda_over_beta_increasing",
                b,
                ln / next.beta,
                lp / prev.beta,
                ln / next.beta > lp / prev.beta,
            ));
        }
    }
    out
}

/// Largest observed ‖v̂‖_∞ over a sweep (the uniform bound is not numeric in
/// the theory; this is only reported).
pub fn observed_vhat_bound(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter_map(SweepRow::record)
        .map(|r| r.sup_vhat)
        .reduce(f64::max)
}

/// Two-sided torsion bounds in terms of λ = λ_{1,β}:
/// λ⁻¹ ≤ ‖u‖_∞ ≤ 6Nλ⁻¹ log(2¹¹·3√3·N(1 + β⁻¹√λ)).
pub fn torsion_bounds(lambda: f64, beta: f64, dim: usize) -> (f64, f64) {
    let n = dim as f64;
    let upper =
        6.0 * n / lambda * (2048.0 * 3.0 * 3f64.sqrt() * n * (1.0 + lambda.sqrt() / beta)).ln();
    (1.0 / lambda, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn synthetic(betas: &[f64], f: impl Fn(f64) -> f64) -> Vec<SweepRow> {
        betas
            .iter()
            .map(|&beta| {
                SweepRow::Ok(SweepRecord {
                    beta,
                    p: 0.5,
                    sup_norm: f(beta),
                    c_beta: 1.0,
                    d_beta: 1.0,
                    sup_vhat: 0.0,
                    min_v: 1.0,
                    boundary_mean_v: 0.0,
                    lambda: None,
                    iterations: 1,
                    residual: 0.0,
                    volume: PI,
                    boundary_measure: 2.0 * PI,
                    min_value: 1.0,
                    flux_defect: 0.0,
                })
            })
            .collect()
    }

    #[test]
    fn exact_power_law_fit() {
        let rows = synthetic(&default_betas(), |b| 7.0 * b.powf(-2.0));
        let fit = fit_power_law(&rows, RecordField::SupNorm).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.constant - 7.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_points, 8);
        let json = serde_json::to_value(&fit).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 7);
    }

    #[test]
    fn fit_needs_four_points() {
        let mut rows = synthetic(&[1e-1, 1e-2, 1e-3], |b| b);
        assert!(matches!(
            fit_power_law(&rows, RecordField::SupNorm),
            Err(HarnessError::InsufficientData { needed: 4, got: 3 })
        ));
        rows.push(SweepRow::Failed {
            beta: 1e-4,
            error: "x".into(),
        });
        assert!(fit_power_law(&rows, RecordField::SupNorm).is_err());
    }

    #[test]
    fn default_sweep_and_smallest_decade() {
        let betas = default_betas();
        assert_eq!(betas.len(), 8);
        assert_eq!(betas[0], 1e-1);
        assert_eq!(betas[7], 1e-3);
        let rows = synthetic(&betas, |b| b);
        assert_eq!(smallest_decade(&rows).len(), 4);
    }

    #[test]
    fn torsion_record_on_disk() {
        let sol = solve_radial(0.0, 0.1, 2, 1.0, 512, &NewtonConfig::default()).unwrap();
        let r = compute_record(SolutionView::Radial {
            solution: &sol,
            lambda: None,
        });
        assert!((r.c_beta - PI).abs() < 1e-12);
        assert!((r.d_beta - 5.0).abs() < 1e-12);
        assert!(r.min_v > 0.0);
        assert!(
            record_invariants(&r).iter().all(|c| c.passed),
            "{:?}",
            record_invariants(&r)
        );
        let table = check_asymptotic_constant(&[SweepRow::Ok(r.clone())], 0.0, &r.measures());
        assert!((table[0].ratio - 1.05).abs() < 1e-9);
    }

    #[test]
    fn beta_list_validation() {
        let problem = Problem::Ball {
            dim: 2,
            radius: 1.0,
            intervals: 64,
        };
        let o = SweepOptions::default();
        assert!(run_sweep(&problem, 0.5, &[1e-2, 1e-1], &o).is_err());
        assert!(run_sweep(&problem, 0.5, &[1e-1, -1.0], &o).is_err());
        assert!(run_sweep(&problem, 0.5, &[], &o).is_err());
    }

    #[test]
    fn parallel_and_continuation_agree() {
        let problem = Problem::Ball {
            dim: 2,
            radius: 1.0,
            intervals: 128,
        };
        let betas = log_spaced(1e-1, 1e-2, 4);
        let serial = run_sweep(&problem, 3.0, &betas, &SweepOptions::default()).unwrap();
        let par = run_sweep(
            &problem,
            3.0,
            &betas,
            &SweepOptions {
                jobs: 3,
                ..SweepOptions::default()
            },
        )
        .unwrap();
        assert_eq!(serial, par);
        let cont = run_sweep(
            &problem,
            3.0,
            &betas,
            &SweepOptions {
                continuation: true,
                ..SweepOptions::default()
            },
        )
        .unwrap();
        for (a, b) in serial.iter().zip(&cont) {
            let (a, b) = (a.record().unwrap(), b.record().unwrap());
            assert!((a.sup_norm - b.sup_norm).abs() <= 1e-9 * a.sup_norm);
        }
    }

    #[test]
    fn csv_marks_failures() {
        let mut rows = synthetic(&[0.5], |b| b);
        rows.push(SweepRow::Failed {
            beta: 0.25,
            error: "boom".into(),
        });
        let csv = sweep_to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert!(lines[1].ends_with(",ok"));
        assert!(lines[1].contains(",,"), "empty lambda column");
        assert_eq!(lines[2], "0.25,,,,,,,,,,failed");
    }

    #[test]
    fn record_field_names() {
        for name in ["sup_norm", "c_beta", "d_beta", "sup_vhat", "lambda"] {
            assert_eq!(name.parse::<RecordField>().unwrap().name(), name);
        }
        assert!("nope".parse::<RecordField>().is_err());
    }

    #[test]
    fn torsion_bounds_are_ordered() {
        let (lo, hi) = torsion_bounds(0.002, 1e-3, 2);
        assert!(lo < hi);
    }
}
