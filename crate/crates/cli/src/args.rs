//! Command-line grammar and validation into a resolved [`RunConfig`].

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use robin_lab::{log_spaced, NewtonConfig, ProfileConfig, RecordField};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "robin-lab",
    version,
    about = "Solvers and β-sweeps for −Δu = u^p with ∂u/∂ν + βu = 0",
    after_help = "Exit status: 0 on success, 1 on solver or I/O failure, 2 on usage errors.\n\
                  Relative --out paths and default artifact names are placed in $ROBIN_LAB_OUT_DIR when it is set."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Solve the semilinear problem for one β.
    Solve(SolveArgs),
    /// First Robin eigenpair for one β, or a sweep with --betas.
    Eigen(EigenArgs),
    /// Supercritical radial solution on the unit ball by rescaling the entire profile.
    Shoot(ShootArgs),
    /// Solve along a decreasing list of β and optionally fit a power law.
    Sweep(SweepArgs),
    /// Run a sweep and check the invariants of every solution.
    CheckInvariants(CheckArgs),
    /// Triangulate a planar domain and write the mesh file.
    Mesh(MeshArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainChoice {
    Ball,
    Disk,
    Rectangle,
    Annulus,
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Radial,
    Fem,
    Shoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    #[arg(long, value_enum, default_value = "ball")]
    pub domain: DomainChoice,
    /// Space dimension of a ball.
    #[arg(long = "N", default_value_t = 2)]
    pub dim: usize,
    /// Radius of a ball or disk, outer radius of an annulus.
    #[arg(long = "R", default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub height: f64,
    /// Inner radius of an annulus.
    #[arg(long, default_value_t = 0.5)]
    pub inner: f64,
    /// Mesh file, required with --domain mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscretizationArgs {
    /// Defaults to radial on balls and fem on everything else.
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Radial grid intervals.
    #[arg(long = "M", default_value_t = 2048)]
    pub intervals: usize,
    /// Target mesh size for generated meshes.
    #[arg(long, default_value_t = 0.02)]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct NewtonArgs {
    /// Bound on the scaled Newton residual.
    #[arg(long, default_value = "1e-12")]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[arg(long, default_value = "1e-12")]
    pub rtol: f64,
    #[arg(long, default_value = "1e-14")]
    pub atol: f64,
    /// Outer radius of the profile integration.
    #[arg(long, default_value = "1e24")]
    pub r_max: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Leave out the timestamp so identical runs give identical bytes.
    #[arg(long)]
    pub no_meta: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub disc: DiscretizationArgs,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub beta: f64,
    #[command(flatten)]
    pub newton: NewtonArgs,
    #[command(flatten)]
    pub ode: OdeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub disc: DiscretizationArgs,
    #[arg(long, required_unless_present = "betas", conflicts_with = "betas")]
    pub beta: Option<f64>,
    /// `a:b:Klog` or a comma-separated decreasing list.
    #[arg(long)]
    pub betas: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ShootArgs {
    #[arg(long = "N", default_value_t = 3)]
    pub dim: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub beta: f64,
    /// Intervals of the radial grid the solution is sampled on.
    #[arg(long = "M", default_value_t = 2048)]
    pub intervals: usize,
    #[command(flatten)]
    pub ode: OdeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub disc: DiscretizationArgs,
    #[arg(long)]
    pub p: f64,
    /// `a:b:Klog` or a comma-separated decreasing list.
    #[arg(long, default_value = "1e-1:1e-3:8log")]
    pub betas: String,
    /// Fit field ≈ C β^s: sup_norm, c_beta, d_beta, sup_vhat or lambda.
    #[arg(long)]
    pub fit: Option<String>,
    /// Fit over every successful row instead of the smallest decade.
    #[arg(long, requires = "fit")]
    pub fit_all_rows: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Start each β from the previous solution.
    #[arg(long)]
    pub continuation: bool,
    #[command(flatten)]
    pub newton: NewtonArgs,
    #[command(flatten)]
    pub ode: OdeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub disc: DiscretizationArgs,
    #[arg(long, required_unless_present = "eigen")]
    pub p: Option<f64>,
    /// Check an eigenvalue sweep instead of a semilinear one.
    #[arg(long, conflicts_with = "p")]
    pub eigen: bool,
    #[arg(long, default_value = "1e-1:1e-3:8log")]
    pub betas: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub continuation: bool,
    #[command(flatten)]
    pub newton: NewtonArgs,
    #[command(flatten)]
    pub ode: OdeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long, value_enum, default_value = "disk")]
    pub domain: DomainChoice,
    #[arg(long = "R", default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub height: f64,
    #[arg(long, default_value_t = 0.5)]
    pub inner: f64,
    #[arg(long, default_value_t = 0.02)]
    pub h: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_meta: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Eigen,
    Shoot,
    Sweep,
    CheckInvariants,
    Mesh,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Eigen => "eigen",
            Command::Shoot => "shoot",
            Command::Sweep => "sweep",
            Command::CheckInvariants => "check-invariants",
            Command::Mesh => "mesh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Ball {
        #[serde(rename = "N")]
        dim: usize,
        #[serde(rename = "R")]
        radius: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
    },
    Annulus {
        inner: f64,
        outer: f64,
    },
    Mesh {
        path: PathBuf,
    },
}

impl DomainSpec {
    fn is_ball(&self) -> bool {
        matches!(self, DomainSpec::Ball { .. })
    }

    fn is_planar(&self) -> bool {
        match self {
            DomainSpec::Ball { dim, .. } => *dim == 2,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discretization {
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

/// Everything a run depends on. Embedded verbatim in every artifact; the
/// output location is kept out so that artifacts compare across directories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendChoice>,
    pub discretization: Discretization,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode: Option<ProfileConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<RecordField>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub fit_all_rows: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuation: Option<bool>,
    pub format: Format,
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub meta: bool,
}

type Usage = clap::Error;

fn usage(kind: ErrorKind, message: impl std::fmt::Display) -> Usage {
    Cli::command().error(kind, message)
}

fn invalid(message: impl std::fmt::Display) -> Usage {
    usage(ErrorKind::ValueValidation, message)
}

fn conflict(message: impl std::fmt::Display) -> Usage {
    usage(ErrorKind::ArgumentConflict, message)
}

fn positive(flag: &str, value: f64) -> Result<(), Usage> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{flag} must be positive and finite, got {value}"
        )))
    }
}

/// Parses `a:b:Klog` (K log-spaced values from a down to b) or `x,y,z`.
pub fn parse_betas(text: &str) -> Result<Vec<f64>, String> {
    let betas = if let Some((range, count)) = text.rsplit_once(':') {
        let (first, last) = range
            .split_once(':')
            .ok_or_else(|| format!("expected a:b:Klog, got '{text}'"))?;
        let count = count
            .strip_suffix("log")
            .ok_or_else(|| format!("expected a:b:Klog, got '{text}'"))?;
        let first: f64 = first
            .trim()
            .parse()
            .map_err(|_| format!("bad number '{first}'"))?;
        let last: f64 = last
            .trim()
            .parse()
            .map_err(|_| format!("bad number '{last}'"))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("bad count '{count}'"))?;
        if count < 2 || !(first > last) || !(last > 0.0) || !first.is_finite() {
            return Err(format!("a:b:Klog needs a > b > 0 and K >= 2, got '{text}'"));
        }
        log_spaced(first, last, count)
    } else {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number '{s}'"))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
        return Err(format!("every beta must be in (0, inf), got {b}"));
    }
    if betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err("betas must be strictly decreasing".into());
    }
    Ok(betas)
}

fn domain_spec(d: &DomainArgs) -> Result<DomainSpec, Usage> {
    Ok(match d.domain {
        DomainChoice::Ball | DomainChoice::Disk => {
            positive("--R", d.radius)?;
            let dim = if d.domain == DomainChoice::Disk {
                2
            } else {
                d.dim
            };
            if dim < 2 {
                return Err(invalid(format!("--N must be at least 2, got {dim}")));
            }
            if d.domain == DomainChoice::Disk && d.dim != 2 {
                return Err(conflict(format!(
                    "--domain disk is two-dimensional, got --N {}",
                    d.dim
                )));
            }
            DomainSpec::Ball {
                dim,
                radius: d.radius,
            }
        }
        DomainChoice::Rectangle => {
            positive("--width", d.width)?;
            positive("--height", d.height)?;
            DomainSpec::Rectangle {
                width: d.width,
                height: d.height,
            }
        }
        DomainChoice::Annulus => {
            positive("--inner", d.inner)?;
            positive("--R", d.radius)?;
            if d.inner >= d.radius {
                return Err(conflict(format!(
                    "annulus needs --inner < --R, got {} and {}",
                    d.inner, d.radius
                )));
            }
            DomainSpec::Annulus {
                inner: d.inner,
                outer: d.radius,
            }
        }
        DomainChoice::Mesh => DomainSpec::Mesh {
            path: d.mesh.clone().ok_or_else(|| {
                usage(
                    ErrorKind::MissingRequiredArgument,
                    "--domain mesh requires --mesh <path>",
                )
            })?,
        },
    })
    .and_then(|spec| {
        if d.mesh.is_some() && !matches!(spec, DomainSpec::Mesh { .. }) {
            Err(conflict("--mesh is only used with --domain mesh"))
        } else {
            Ok(spec)
        }
    })
}

fn resolve_backend(
    domain: &DomainSpec,
    requested: Option<BackendChoice>,
) -> Result<BackendChoice, Usage> {
    let backend = requested.unwrap_or(if domain.is_ball() {
        BackendChoice::Radial
    } else {
        BackendChoice::Fem
    });
    match backend {
        BackendChoice::Radial if !domain.is_ball() => {
            Err(conflict("--backend radial needs --domain ball or disk"))
        }
        BackendChoice::Fem if !domain.is_planar() => Err(conflict(
            "--backend fem needs a planar domain (ball with --N 2)",
        )),
        BackendChoice::Shoot => match domain {
            DomainSpec::Ball { radius, .. } if *radius == 1.0 => Ok(backend),
            _ => Err(conflict(
                "--backend shoot works on the unit ball (--domain ball --R 1)",
            )),
        },
        _ => Ok(backend),
    }
}

fn discretization(
    backend: BackendChoice,
    disc: &DiscretizationArgs,
    domain: &DomainSpec,
) -> Result<Discretization, Usage> {
    Ok(match backend {
        BackendChoice::Radial | BackendChoice::Shoot => {
            if disc.intervals < 4 {
                return Err(invalid(format!(
                    "--M must be at least 4, got {}",
                    disc.intervals
                )));
            }
            Discretization {
                intervals: Some(disc.intervals),
                h: None,
            }
        }
        BackendChoice::Fem => {
            let h = if matches!(domain, DomainSpec::Mesh { .. }) {
                None
            } else {
                positive("--h", disc.h)?;
                Some(disc.h)
            };
            Discretization { intervals: None, h }
        }
    })
}

fn check_exponent(p: f64) -> Result<(), Usage> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(invalid(format!("--p must be >= 0, got {p}")));
    }
    if p == 1.0 {
        return Err(conflict(
            "p = 1 is the linear eigenvalue problem; use the `eigen` command",
        ));
    }
    Ok(())
}

/// Rejects shooting parameters outside the supercritical window.
fn check_shoot(dim: usize, p: f64, betas: &[f64]) -> Result<(), Usage> {
    if dim < 3 {
        return Err(conflict(format!("shooting needs --N >= 3, got {dim}")));
    }
    let critical = (dim as f64 + 2.0) / (dim as f64 - 2.0);
    if !(p > critical) {
        return Err(conflict(format!(
            "shooting needs p > (N+2)/(N-2) = {critical} for N = {dim}, got {p}"
        )));
    }
    let a = 2.0 / (p - 1.0);
    if let Some(b) = betas.iter().find(|b| **b >= a) {
        return Err(conflict(format!(
            "shooting needs beta < 2/(p-1) = {a}, got {b}"
        )));
    }
    Ok(())
}

fn newton_config(n: &NewtonArgs) -> Result<NewtonConfig, Usage> {
    positive("--tol", n.tol)?;
    if n.max_iter == 0 {
        return Err(invalid("--max-iter must be at least 1"));
    }
    Ok(NewtonConfig {
        max_iterations: n.max_iter,
        tolerance: n.tol,
        ..NewtonConfig::default()
    })
}

fn ode_config(o: &OdeArgs) -> Result<ProfileConfig, Usage> {
    positive("--rtol", o.rtol)?;
    positive("--atol", o.atol)?;
    let config = ProfileConfig {
        rtol: o.rtol,
        atol: o.atol,
        r_max: o.r_max,
        ..ProfileConfig::default()
    };
    if !(o.r_max > config.r_min) || !o.r_max.is_finite() {
        return Err(invalid(format!(
            "--r-max must exceed {}, got {}",
            config.r_min, o.r_max
        )));
    }
    Ok(config)
}

fn betas_flag(text: &str) -> Result<Vec<f64>, Usage> {
    parse_betas(text).map_err(|e| invalid(format!("--betas: {e}")))
}

struct Common {
    domain: DomainSpec,
    backend: BackendChoice,
    discretization: Discretization,
}

fn common(domain: &DomainArgs, disc: &DiscretizationArgs) -> Result<Common, Usage> {
    let domain = domain_spec(domain)?;
    let backend = resolve_backend(&domain, disc.backend)?;
    let discretization = discretization(backend, disc, &domain)?;
    Ok(Common {
        domain,
        backend,
        discretization,
    })
}

fn base(command: Command, format: Format, output: &OutputArgs) -> RunConfig {
    RunConfig {
        command,
        domain: DomainSpec::Ball {
            dim: 2,
            radius: 1.0,
        },
        backend: None,
        discretization: Discretization {
            intervals: None,
            h: None,
        },
        p: None,
        beta: None,
        betas: None,
        newton: None,
        ode: None,
        fit: None,
        fit_all_rows: false,
        continuation: None,
        format: output.format.unwrap_or(format),
        jobs: 1,
        out: output.out.clone(),
        meta: !output.no_meta,
    }
}

impl Cmd {
    /// Validates every flag combination before anything is computed.
    pub fn resolve(&self) -> Result<RunConfig, Usage> {
        match self {
            Cmd::Solve(a) => {
                check_exponent(a.p)?;
                positive("--beta", a.beta)?;
                let c = common(&a.domain, &a.disc)?;
                let mut cfg = base(Command::Solve, Format::Csv, &a.output);
                if c.backend == BackendChoice::Shoot {
                    let DomainSpec::Ball { dim, .. } = c.domain else {
                        unreachable!()
                    };
                    check_shoot(dim, a.p, &[a.beta])?;
                    cfg.ode = Some(ode_config(&a.ode)?);
                } else {
                    cfg.newton = Some(newton_config(&a.newton)?);
                }
                cfg.domain = c.domain;
                cfg.backend = Some(c.backend);
                cfg.discretization = c.discretization;
                cfg.p = Some(a.p);
                cfg.beta = Some(a.beta);
                Ok(cfg)
            }
            Cmd::Eigen(a) => {
                let c = common(&a.domain, &a.disc)?;
                if c.backend == BackendChoice::Shoot {
                    return Err(conflict("the eigenproblem has no shooting backend"));
                }
                let sweep = a.betas.is_some();
                let mut cfg = base(
                    Command::Eigen,
                    if sweep { Format::Csv } else { Format::Json },
                    &a.output,
                );
                if let Some(b) = a.beta {
                    positive("--beta", b)?;
                    cfg.beta = Some(b);
                }
                if let Some(list) = &a.betas {
                    cfg.betas = Some(betas_flag(list)?);
                    cfg.jobs = a.jobs.unwrap_or(1);
                } else if a.jobs.is_some() {
                    return Err(conflict("--jobs applies only with --betas"));
                }
                cfg.domain = c.domain;
                cfg.backend = Some(c.backend);
                cfg.discretization = c.discretization;
                cfg.p = Some(1.0);
                Ok(cfg)
            }
            Cmd::Shoot(a) => {
                positive("--beta", a.beta)?;
                check_shoot(a.dim, a.p, &[a.beta])?;
                if a.intervals < 4 {
                    return Err(invalid(format!(
                        "--M must be at least 4, got {}",
                        a.intervals
                    )));
                }
                let mut cfg = base(Command::Shoot, Format::Json, &a.output);
                cfg.domain = DomainSpec::Ball {
                    dim: a.dim,
                    radius: 1.0,
                };
                cfg.backend = Some(BackendChoice::Shoot);
                cfg.discretization = Discretization {
                    intervals: Some(a.intervals),
                    h: None,
                };
                cfg.p = Some(a.p);
                cfg.beta = Some(a.beta);
                cfg.ode = Some(ode_config(&a.ode)?);
                Ok(cfg)
            }
            Cmd::Sweep(a) => {
                check_exponent(a.p)?;
                let betas = betas_flag(&a.betas)?;
                let c = common(&a.domain, &a.disc)?;
                let mut cfg = base(Command::Sweep, Format::Csv, &a.output);
                if c.backend == BackendChoice::Shoot {
                    let DomainSpec::Ball { dim, .. } = c.domain else {
                        unreachable!()
                    };
                    check_shoot(dim, a.p, &betas)?;
                    if a.continuation {
                        return Err(conflict(
                            "--continuation does not apply to the shooting backend",
                        ));
                    }
                    cfg.ode = Some(ode_config(&a.ode)?);
                } else {
                    cfg.newton = Some(newton_config(&a.newton)?);
                    cfg.continuation = Some(a.continuation);
                }
                if let Some(f) = &a.fit {
                    let field: RecordField =
                        f.parse().map_err(|e| invalid(format!("--fit: {e}")))?;
                    if field == RecordField::Lambda {
                        return Err(conflict(
                            "--fit lambda needs an eigenvalue sweep (`eigen --betas`)",
                        ));
                    }
                    cfg.fit = Some(field);
                    cfg.fit_all_rows = a.fit_all_rows;
                }
                cfg.domain = c.domain;
                cfg.backend = Some(c.backend);
                cfg.discretization = c.discretization;
                cfg.p = Some(a.p);
                cfg.betas = Some(betas);
                cfg.jobs = a.jobs;
                Ok(cfg)
            }
            Cmd::CheckInvariants(a) => {
                let p = match a.p {
                    Some(p) => {
                        check_exponent(p)?;
                        p
                    }
                    None => 1.0,
                };
                let betas = betas_flag(&a.betas)?;
                let c = common(&a.domain, &a.disc)?;
                let mut cfg = base(Command::CheckInvariants, Format::Json, &a.output);
                if c.backend == BackendChoice::Shoot {
                    let DomainSpec::Ball { dim, .. } = c.domain else {
                        unreachable!()
                    };
                    if a.eigen {
                        return Err(conflict("the eigenproblem has no shooting backend"));
                    }
                    check_shoot(dim, p, &betas)?;
                    cfg.ode = Some(ode_config(&a.ode)?);
                } else if !a.eigen {
                    cfg.newton = Some(newton_config(&a.newton)?);
                    cfg.continuation = Some(a.continuation);
                }
                cfg.domain = c.domain;
                cfg.backend = Some(c.backend);
                cfg.discretization = c.discretization;
                cfg.p = Some(p);
                cfg.betas = Some(betas);
                cfg.jobs = a.jobs;
                Ok(cfg)
            }
            Cmd::Mesh(a) => {
                let domain = match a.domain {
                    DomainChoice::Disk => {
                        positive("--R", a.radius)?;
                        DomainSpec::Ball {
                            dim: 2,
                            radius: a.radius,
                        }
                    }
                    DomainChoice::Rectangle => {
                        positive("--width", a.width)?;
                        positive("--height", a.height)?;
                        DomainSpec::Rectangle {
                            width: a.width,
                            height: a.height,
                        }
                    }
                    DomainChoice::Annulus => {
                        positive("--inner", a.inner)?;
                        positive("--R", a.radius)?;
                        if a.inner >= a.radius {
                            return Err(conflict("annulus needs --inner < --R"));
                        }
                        DomainSpec::Annulus {
                            inner: a.inner,
                            outer: a.radius,
                        }
                    }
                    DomainChoice::Ball | DomainChoice::Mesh => {
                        return Err(invalid(
                            "mesh generation supports disk, rectangle and annulus",
                        ))
                    }
                };
                positive("--h", a.h)?;
                Ok(RunConfig {
                    domain,
                    discretization: Discretization {
                        intervals: None,
                        h: Some(a.h),
                    },
                    out: a.out.clone(),
                    meta: !a.no_meta,
                    ..base(
                        Command::Mesh,
                        Format::Csv,
                        &OutputArgs {
                            out: None,
                            format: None,
                            no_meta: false,
                        },
                    )
                })
            }
        }
    }
}
