//! Supercritical radial solutions on the unit ball by rescaling the entire
//! slow-decay solution of −ΔU = U^p in R^N.
//!
//! The profile U(0) = 1, U′(0) = 0 is integrated in Emden–Fowler variables
//! s = ln r, v = r^a U, z = r^{a+1} U′ with a = 2/(p−1):
//!
//! ```text
//! v′ = z + a v,   z′ = −(N−2−a) z − v^p,
//! ```
//!
//! which is autonomous and has the stable focus v = b^{1/(p−1)}, z = −a v
//! with b = a(N−2−a). Carrying r^{a+1}U′ directly avoids the cancellation
//! in dv/ds − a v that would otherwise destroy U′ near the origin.
//!
//! For δ > 0 the rescaled U_δ(r) = δ^a U(δr) solves the same equation and
//! U_δ′(1) + βU_δ(1) = δ^a h(δ) with h(δ) = δU′(δ) + βU(δ).

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::format_float;
use crate::geometry::unit_sphere_area;
use crate::newton::SolveError;
use crate::ode::{integrate, Control, OdeError, Tolerances};
use crate::radial::{radial_residual, RadialGrid, RadialSolution, DEFAULT_INTERVALS};

/// Relative tolerance on both tail limits at r_max.
pub const TAIL_TOLERANCE: f64 = 0.01;
const BRACKET_START: (f64, f64) = (1e-3, 1e3);
const BRACKET_LIMIT: (f64, f64) = (1e-9, 1e9);
const SCAN_PER_DECADE: usize = 20;

#[derive(Debug, Error)]
pub enum ShootError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("profile crossed zero near r = {r:e}; the exponent must exceed (N+2)/(N-2)")]
    ProfileCrossedZero { r: f64 },
    #[error(
        "tail not converged at r_max = {r_max:e}: r^a U / L = {value_ratio}, \
         -r^(a+1) U' / (a L) = {slope_ratio}; increase r_max"
    )]
    TailNotConverged {
        r_max: f64,
        value_ratio: f64,
        slope_ratio: f64,
    },
    #[error("beta = {beta} is outside the existence window 0 < beta < 2/(p-1) = {limit}")]
    OutsideExistenceWindow { beta: f64, limit: f64 },
    #[error("no sign change of the Robin mismatch over [{lo:e}, {hi:e}]; sampled (delta, h): {samples:?}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        samples: Vec<(f64, f64)>,
    },
    #[error("bisection stalled at delta = {delta} with mismatch {mismatch:e}")]
    RootNotResolved { delta: f64, mismatch: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        // the tail is a damped spiral in ln r; 1e24 is where both limits settle to 1%
        ProfileConfig {
            r_min: 1e-4,
            r_max: 1e24,
            rtol: 1e-12,
            atol: 1e-14,
        }
    }
}

impl ProfileConfig {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            ..Tolerances::default()
        }
    }
}

/// Entire radial solution with U(0) = 1, stored at the accepted integrator nodes.
#[derive(Debug, Clone)]
pub struct ShootingProfile {
    p: f64,
    dim: usize,
    a: f64,
    b: f64,
    limit: f64,
    config: ProfileConfig,
    /// (s, v, z) at each accepted step.
    samples: Vec<[f64; 3]>,
}

fn check_profile_parameters(p: f64, dim: usize) -> Result<(), ShootError> {
    if dim < 3 {
        return Err(ShootError::InvalidParameter(format!(
            "the slow-decay profile needs N >= 3, got {dim}"
        )));
    }
    let critical = (dim as f64 + 2.0) / (dim as f64 - 2.0);
    if !(p > critical) || !p.is_finite() {
        return Err(ShootError::InvalidParameter(format!(
            "p must exceed (N+2)/(N-2) = {critical} for N = {dim}, got {p}"
        )));
    }
    Ok(())
}

/// Integrates the profile from the origin series at r_min out to r_max and
/// checks both tail limits there.
pub fn integrate_profile(
    p: f64,
    dim: usize,
    config: &ProfileConfig,
) -> Result<ShootingProfile, ShootError> {
    check_profile_parameters(p, dim)?;
    if !(config.r_min > 0.0 && config.r_max > config.r_min) || !config.r_max.is_finite() {
        return Err(ShootError::InvalidParameter(format!(
            "need 0 < r_min < r_max, got r_min = {}, r_max = {}",
            config.r_min, config.r_max
        )));
    }
    if !(config.rtol > 0.0 && config.atol > 0.0) {
        return Err(ShootError::InvalidParameter(
            "ODE tolerances must be positive".into(),
        ));
    }
    let n = dim as f64;
    let a = 2.0 / (p - 1.0);
    let b = a * (n - 2.0 - a);
    let mut profile = ShootingProfile {
        p,
        dim,
        a,
        b,
        limit: b.powf(1.0 / (p - 1.0)),
        config: *config,
        samples: Vec::new(),
    };

    let r0 = config.r_min;
    let (u0, du0) = origin_series(p, n, r0);
    let v0 = r0.powf(a) * u0;
    let z0 = r0.powf(a + 1.0) * du0;
    let rhs = profile.rhs();
    let mut crossed = None;
    let samples = &mut profile.samples;
    integrate(
        &rhs,
        r0.ln(),
        [v0, z0],
        config.r_max.ln(),
        &config.tolerances(),
        |s, y| {
            if y[0] <= 0.0 {
                crossed = Some(s.exp());
                return Control::Stop;
            }
            samples.push([s, y[0], y[1]]);
            Control::Continue
        },
    )?;
    if let Some(r) = crossed {
        return Err(ShootError::ProfileCrossedZero { r });
    }

    let (value_ratio, slope_ratio) = profile.tail_ratios(config.r_max);
    if (value_ratio - 1.0).abs() > TAIL_TOLERANCE || (slope_ratio - 1.0).abs() > TAIL_TOLERANCE {
        return Err(ShootError::TailNotConverged {
            r_max: config.r_max,
            value_ratio,
            slope_ratio,
        });
    }
    Ok(profile)
}

/// U and U′ from the degree-4 expansion at the origin.
fn origin_series(p: f64, n: f64, r: f64) -> (f64, f64) {
    let c4 = p / (8.0 * n * (n + 2.0));
    let r2 = r * r;
    (
        1.0 - r2 / (2.0 * n) + c4 * r2 * r2,
        -r / n + 4.0 * c4 * r2 * r,
    )
}

/// Degree-6 expansion; its truncation error is below 1e−17 for r ≤ 1e−2
/// and any exponent of interest.
fn origin_series6(p: f64, n: f64, r: f64) -> (f64, f64) {
    let c2 = -1.0 / (2.0 * n);
    let c4 = p / (8.0 * n * (n + 2.0));
    let c6 = -(p * c4 + 0.5 * p * (p - 1.0) * c2 * c2) / (6.0 * (n + 4.0));
    let r2 = r * r;
    (
        1.0 + r2 * (c2 + r2 * (c4 + r2 * c6)),
        r * (2.0 * c2 + r2 * (4.0 * c4 + 6.0 * c6 * r2)),
    )
}

/// Radius below which the sweep in `eval_sorted` uses the degree-6 series.
const SERIES_RADIUS: f64 = 1e-2;

impl ShootingProfile {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// a = 2/(p−1).
    pub fn a(&self) -> f64 {
        self.a
    }

    /// b = a(N−2−a).
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Tail constant b^{1/(p−1)} = lim r^a U(r).
    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn config(&self) -> &ProfileConfig {
        &self.config
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    /// Stored nodes as (r, U, U′).
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.samples.iter().map(|&[s, v, z]| {
            let (u, du) = self.to_physical(s, v, z);
            (s.exp(), u, du)
        })
    }

    fn rhs(&self) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
        let (a, p) = (self.a, self.p);
        let damping = self.dim as f64 - 2.0 - a;
        move |_s, y| [y[1] + a * y[0], -damping * y[1] - y[0].max(0.0).powf(p)]
    }

    fn to_physical(&self, s: f64, v: f64, z: f64) -> (f64, f64) {
        let u = (-self.a * s).exp() * v;
        let du = (-(self.a + 1.0) * s).exp() * z;
        (u, du)
    }

    /// Phase variables (v, z) at s = ln r inside the sampled range.
    fn phase_at(&self, s: f64) -> [f64; 2] {
        let k = self
            .samples
            .partition_point(|x| x[0] <= s)
            .saturating_sub(1);
        let [s0, v0, z0] = self.samples[k];
        if s <= s0 {
            return [v0, z0];
        }
        let rhs = self.rhs();
        // restarting from a stored node keeps the integration tolerance
        let (_, y) = integrate(&rhs, s0, [v0, z0], s, &self.config.tolerances(), |_, _| {
            Control::Continue
        })
        .expect("re-integration inside the sampled range");
        y
    }

    /// (U(r), U′(r)) for r ≥ 0.
    ///
    /// Uses the origin series below max(r_min, 1e−2), where it is exact to
    /// roundoff, and the tail law above r_max.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let n = self.dim as f64;
        if r <= 0.0 {
            return (1.0, 0.0);
        }
        if r < self.config.r_min || r <= SERIES_RADIUS {
            return origin_series6(self.p, n, r);
        }
        if r > self.config.r_max {
            let u = self.limit * r.powf(-self.a);
            return (u, -self.a * u / r);
        }
        let s = r.ln();
        let [v, z] = self.phase_at(s);
        self.to_physical(s, v, z)
    }

    /// (U, U′) at ascending radii along one continuous integration.
    ///
    /// Unlike repeated [`eval`](Self::eval) calls, the integration error varies
    /// smoothly from point to point, which matters when the values are
    /// differenced on a fine grid.
    pub fn eval_sorted(&self, radii: &[f64]) -> Vec<(f64, f64)> {
        debug_assert!(radii.windows(2).all(|w| w[0] <= w[1]));
        let rhs = self.rhs();
        let tol = self.config.tolerances();
        let n = self.dim as f64;
        // start from the series where it is exact to roundoff: integration
        // error that builds up right after r_min has large curvature in r
        let r0 = SERIES_RADIUS.clamp(self.config.r_min, self.config.r_max);
        let (u0, du0) = origin_series6(self.p, n, r0);
        let mut y = [r0.powf(self.a) * u0, r0.powf(self.a + 1.0) * du0];
        let mut s = r0.ln();
        radii
            .iter()
            .map(|&r| {
                if r <= r0 {
                    return if r <= 0.0 {
                        (1.0, 0.0)
                    } else {
                        origin_series6(self.p, n, r)
                    };
                }
                if r > self.config.r_max {
                    return self.eval(r);
                }
                let target = r.ln();
                if target > s {
                    let (_, next) = integrate(&rhs, s, y, target, &tol, |_, _| Control::Continue)
                        .expect("integration inside the sampled range");
                    s = target;
                    y = next;
                }
                self.to_physical(target, y[0], y[1])
            })
            .collect()
    }

    /// (r^a U / L, −r^{a+1} U′ / (a L)); both tend to 1.
    pub fn tail_ratios(&self, r: f64) -> (f64, f64) {
        let (u, du) = self.eval(r);
        let ra = r.powf(self.a);
        (ra * u / self.limit, -ra * r * du / (self.a * self.limit))
    }

    /// CSV `r,U,dU` on a log-spaced grid from r_min to r_max.
    pub fn to_csv(&self, points_per_decade: usize) -> String {
        let lo = self.config.r_min.log10();
        let hi = self.config.r_max.log10();
        let count = ((hi - lo) * points_per_decade.max(1) as f64).ceil() as usize;
        let mut out = String::from("r,U,dU\n");
        for k in 0..=count {
            let r = if k == count {
                self.config.r_max
            } else {
                10f64.powf(lo + (hi - lo) * k as f64 / count as f64)
            };
            let (u, du) = self.eval(r);
            let _ = writeln!(
                out,
                "{},{},{}",
                format_float(r),
                format_float(u),
                format_float(du)
            );
        }
        out
    }
}

/// h(δ) = δU′(δ) + βU(δ); U_δ′(1) + βU_δ(1) = δ^a h(δ).
pub fn robin_mismatch(profile: &ShootingProfile, delta: f64, beta: f64) -> f64 {
    let (u, du) = profile.eval(delta);
    delta * du + beta * u
}

/// Outcome of the root search in δ, with the rescaled solution on [0, 1].
#[derive(Debug, Clone)]
pub struct ShootResult {
    pub p: f64,
    pub dim: usize,
    pub beta: f64,
    pub delta_hat: f64,
    /// |U_δ̂′(1) + β U_δ̂(1)|.
    pub residual: f64,
    /// Bracket [δ_lo, δ_hi] with h(δ_lo) > 0 > h(δ_hi) after expansion.
    pub bracket: (f64, f64),
    /// ∫_B u^p by composite Gauss–Legendre quadrature on the profile.
    pub source_integral: f64,
    /// u(1).
    pub boundary_value: f64,
    /// u sampled on the radial grid; `residual` holds the max-norm of the
    /// finite-difference residual and `bc_residual` the exact Robin defect.
    pub solution: RadialSolution,
}

#[derive(Serialize)]
struct ShootSummary {
    p: f64,
    #[serde(rename = "N")]
    dim: usize,
    beta: f64,
    delta_hat: f64,
    residual: f64,
    sup_norm: f64,
}

impl ShootResult {
    pub fn sup_norm(&self) -> f64 {
        self.solution.sup_norm()
    }

    /// `{p, N, beta, delta_hat, residual, sup_norm}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ShootSummary {
            p: self.p,
            dim: self.dim,
            beta: self.beta,
            delta_hat: self.delta_hat,
            residual: self.residual,
            sup_norm: self.sup_norm(),
        })
        .expect("plain struct serializes")
    }
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (l, u) = (lo.ln(), hi.ln());
    let count = (((u - l) / std::f64::consts::LN_10) * per_decade as f64)
        .ceil()
        .max(1.0) as usize;
    (0..=count)
        .map(|k| {
            if k == count {
                hi
            } else {
                (l + (u - l) * k as f64 / count as f64).exp()
            }
        })
        .collect()
}

/// Locates δ̂ with the default radial grid.
pub fn find_delta_hat(profile: &ShootingProfile, beta: f64) -> Result<ShootResult, ShootError> {
    find_delta_hat_on(profile, beta, DEFAULT_INTERVALS)
}

/// Locates the smallest root δ̂ of h(·) for 0 < β < 2/(p−1) and samples
/// u(r) = δ̂^a U(δ̂r) on a grid with `intervals` cells.
pub fn find_delta_hat_on(
    profile: &ShootingProfile,
    beta: f64,
    intervals: usize,
) -> Result<ShootResult, ShootError> {
    let a = profile.a;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(ShootError::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if beta >= a {
        return Err(ShootError::OutsideExistenceWindow { beta, limit: a });
    }
    let h = |d: f64| robin_mismatch(profile, d, beta);

    let (mut lo, mut hi) = BRACKET_START;
    let mut samples = Vec::new();
    loop {
        let (hl, hh) = (h(lo), h(hi));
        samples.push((lo, hl));
        samples.push((hi, hh));
        if hl > 0.0 && hh < 0.0 {
            break;
        }
        if lo <= BRACKET_LIMIT.0 && hi >= BRACKET_LIMIT.1 {
            samples.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Err(ShootError::NoSignChange { lo, hi, samples });
        }
        lo = (lo / 10.0).max(BRACKET_LIMIT.0);
        hi = (hi * 10.0).min(BRACKET_LIMIT.1);
    }
    let bracket = (lo, hi);

    // narrow to the first sign change so that δ̂ is continuous in β
    let grid = log_grid(lo, hi, SCAN_PER_DECADE);
    let mut left = (lo, h(lo));
    for &d in &grid[1..] {
        let hd = h(d);
        if hd <= 0.0 {
            if hd == 0.0 {
                left = (d, hd);
            }
            hi = d;
            break;
        }
        left = (d, hd);
    }
    lo = left.0;
    let (mut h_lo, mut h_hi) = (left.1, h(hi));
    if h_lo == 0.0 {
        hi = lo;
        h_hi = 0.0;
    }
    while h_lo != 0.0 && h_hi != 0.0 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let hm = h(mid);
        if hm > 0.0 {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
            h_hi = hm;
        }
    }
    let (delta, mismatch) = if h_lo.abs() <= h_hi.abs() {
        (lo, h_lo)
    } else {
        (hi, h_hi)
    };
    if mismatch.abs() > 1e-12 * beta.max(1.0) {
        return Err(ShootError::RootNotResolved { delta, mismatch });
    }
    assemble(profile, beta, delta, bracket, intervals)
}

fn assemble(
    profile: &ShootingProfile,
    beta: f64,
    delta: f64,
    bracket: (f64, f64),
    intervals: usize,
) -> Result<ShootResult, ShootError> {
    let a = profile.a;
    let p = profile.p;
    let dim = profile.dim;
    let scale = delta.powf(a);
    let grid = RadialGrid::new(1.0, intervals)?;
    let scaled: Vec<f64> = grid.nodes().iter().map(|&r| delta * r).collect();
    let values: Vec<f64> = profile
        .eval_sorted(&scaled)
        .iter()
        .map(|(u, _)| scale * u)
        .collect();
    let (u1, du1) = profile.eval(delta);
    let boundary_value = scale * u1;
    let robin = scale * (delta * du1 + beta * u1);
    let fd = radial_residual(&grid, &values, p, beta, dim);
    let fd_norm = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let n = dim as f64;
    let source_integral = unit_sphere_area(dim)
        * ball_quadrature(delta, |r| {
            r.powf(n - 1.0) * (scale * profile.eval(delta * r).0).powf(p)
        });

    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(SolveError::NonpositiveSolution { min }.into());
    }
    Ok(ShootResult {
        p,
        dim,
        beta,
        delta_hat: delta,
        residual: robin.abs(),
        bracket,
        source_integral,
        boundary_value,
        solution: RadialSolution {
            grid,
            dim,
            p,
            beta,
            values,
            iterations: 0,
            residual: fd_norm,
            bc_residual: robin,
            initial_guess: None,
        },
    })
}

/// ∫_0^1 f(r) dr with 16-point Gauss–Legendre panels graded towards the
/// origin on the length scale 1/δ.
fn ball_quadrature(delta: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(16);
    let inner = 1e-2 * (1.0 / delta).min(1.0);
    let mut breaks = vec![0.0];
    breaks.extend(log_grid(inner, 1.0, 8));
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (l, r) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (l + r), 0.5 * (r - l));
        total += half
            * x.iter()
                .zip(&w)
                .map(|(xi, wi)| wi * f(mid + half * xi))
                .sum::<f64>();
    }
    total
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Result of probing one β against the default bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowProbe {
    pub beta: f64,
    /// β / (2/(p−1)).
    pub fraction: f64,
    pub sign_change: bool,
}

/// Samples h on the full bracket [1e−9, 1e9] for β = fraction·2/(p−1) and
/// records whether it changes sign. Diagnostic only: a sign change past the
/// window edge says nothing about existence, nor does its absence.
pub fn scan_window(profile: &ShootingProfile, fractions: &[f64]) -> Vec<WindowProbe> {
    let grid = log_grid(BRACKET_LIMIT.0, BRACKET_LIMIT.1, SCAN_PER_DECADE);
    fractions
        .iter()
        .map(|&fraction| {
            let beta = fraction * profile.a;
            let first = robin_mismatch(profile, grid[0], beta).signum();
            let sign_change = grid
                .iter()
                .any(|&d| robin_mismatch(profile, d, beta).signum() != first);
            WindowProbe {
                beta,
                fraction,
                sign_change,
            }
        })
        .collect()
}
