//! Executes a resolved configuration and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use robin_lab::harness::sweep_invariants;
use robin_lab::{
    assemble, check_asymptotic_constant, compute_record, find_delta_hat_on, fit_power_law,
    format_float, integrate_profile, load_mesh, run_sweep, smallest_decade, solve_eigen,
    solve_radial, solve_radial_eigen, solve_semilinear, sweep_to_csv, triangulate, Domain,
    InvariantCheck, Mesh, Problem, ShootingProfile, SolutionView, SweepOptions, SweepRecord,
    SweepRow,
};
use serde_json::{json, Map, Value};

use crate::args::{BackendChoice, Command, DomainSpec, Format, RunConfig};

pub const OUT_DIR_VAR: &str = "ROBIN_LAB_OUT_DIR";

/// What to print and how to exit after the artifacts are written.
pub struct Outcome {
    pub summary: String,
    pub success: bool,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome {
            summary,
            success: true,
        }
    }
}

/// Relative paths and default names land in `$ROBIN_LAB_OUT_DIR` when set.
pub fn resolve_out(out: Option<&Path>, default_name: &str) -> PathBuf {
    let dir = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from);
    match (out, dir) {
        (Some(p), Some(d)) if p.is_relative() => d.join(p),
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => d.join(default_name),
        (None, None) => PathBuf::from(default_name),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn config_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn meta_value() -> Value {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({ "version": env!("CARGO_PKG_VERSION"), "timestamp_unix": secs })
}

/// `# key: json` header lines ahead of the CSV body.
fn csv_document(cfg: &RunConfig, extra: &[(&str, Value)], body: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config: {}", config_value(cfg));
    if cfg.meta {
        let _ = writeln!(out, "# meta: {}", meta_value());
    }
    for (key, value) in extra {
        let _ = writeln!(out, "# {key}: {value}");
    }
    out.push_str(body);
    out
}

fn json_document(cfg: &RunConfig, fields: Map<String, Value>) -> String {
    let mut doc = fields;
    doc.insert("config".into(), config_value(cfg));
    if cfg.meta {
        doc.insert("meta".into(), meta_value());
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
    text.push('\n');
    text
}

fn object(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => unreachable!("object literal"),
    }
}

fn default_path(cfg: &RunConfig) -> PathBuf {
    resolve_out(
        cfg.out.as_deref(),
        &format!("{}.{}", cfg.command.name(), cfg.format.extension()),
    )
}

fn build_mesh(domain: &DomainSpec, h: Option<f64>) -> Result<Mesh> {
    let h = h.unwrap_or(0.02);
    Ok(match domain {
        DomainSpec::Ball { radius, .. } => triangulate(&Domain::disk(*radius)?, h)?,
        DomainSpec::Rectangle { width, height } => {
            triangulate(&Domain::rectangle(*width, *height)?, h)?
        }
        DomainSpec::Annulus { inner, outer } => triangulate(&Domain::annulus(*inner, *outer)?, h)?,
        DomainSpec::Mesh { path } => load_mesh(path)?,
    })
}

fn ball(cfg: &RunConfig) -> (usize, f64) {
    match cfg.domain {
        DomainSpec::Ball { dim, radius } => (dim, radius),
        _ => unreachable!("validated as a ball"),
    }
}

fn profile(cfg: &RunConfig) -> Result<ShootingProfile> {
    let (dim, _) = ball(cfg);
    let ode = cfg.ode.unwrap_or_default();
    Ok(integrate_profile(cfg.p.expect("p is set"), dim, &ode)?)
}

fn radial_columns(r: &[f64], u: &[f64]) -> Value {
    json!({ "r": r, "u": u })
}

fn fem_columns(mesh: &Mesh, u: &[f64]) -> Value {
    let x: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
    let y: Vec<f64> = mesh.nodes().iter().map(|p| p[1]).collect();
    json!({ "x": x, "y": y, "u": u })
}

/// A single solution ready to be written: record, CSV body and JSON columns.
struct Single {
    record: SweepRecord,
    csv: String,
    columns: Value,
    extra: Map<String, Value>,
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Solve => solve(cfg),
        Command::Eigen if cfg.betas.is_some() => sweep(cfg),
        Command::Eigen => eigen(cfg),
        Command::Shoot => solve(cfg),
        Command::Sweep => sweep(cfg),
        Command::CheckInvariants => check(cfg),
        Command::Mesh => mesh(cfg),
    }
}

fn write_single(cfg: &RunConfig, single: &Single, path: &Path) -> Result<()> {
    let record = serde_json::to_value(&single.record)?;
    let text = match cfg.format {
        Format::Csv => {
            let mut extra = vec![("record", record)];
            extra.extend(single.extra.iter().map(|(k, v)| (k.as_str(), v.clone())));
            csv_document(cfg, &extra, &single.csv)
        }
        Format::Json => {
            let mut doc = single.extra.clone();
            doc.insert("record".into(), record);
            doc.insert("solution".into(), single.columns.clone());
            json_document(cfg, doc)
        }
    };
    write_file(path, &text)
}

fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.p.expect("p is set");
    let beta = cfg.beta.expect("beta is set");
    let newton = cfg.newton.unwrap_or_default();
    let single = match cfg.backend.expect("backend is set") {
        BackendChoice::Radial => {
            let (dim, radius) = ball(cfg);
            let m = cfg.discretization.intervals.expect("M is set");
            let sol = solve_radial(p, beta, dim, radius, m, &newton)?;
            Single {
                record: compute_record(SolutionView::Radial {
                    solution: &sol,
                    lambda: None,
                }),
                csv: sol.to_csv(),
                columns: radial_columns(&sol.grid.nodes(), &sol.values),
                extra: object(json!({
                    "bc_residual": sol.bc_residual,
                    "initial_guess": sol.initial_guess,
                })),
            }
        }
        BackendChoice::Fem => {
            let mesh = build_mesh(&cfg.domain, cfg.discretization.h)?;
            let field = solve_semilinear(&mesh, p, beta, &newton)?;
            let system = assemble(&mesh, beta)?;
            Single {
                record: compute_record(SolutionView::Fem {
                    mesh: &mesh,
                    system: &system,
                    field: &field,
                    lambda: None,
                }),
                csv: field.to_csv(&mesh),
                columns: fem_columns(&mesh, &field.values),
                extra: object(json!({ "initial_guess": field.initial_guess })),
            }
        }
        BackendChoice::Shoot => {
            let profile = profile(cfg)?;
            let m = cfg.discretization.intervals.expect("M is set");
            let res = find_delta_hat_on(&profile, beta, m)?;
            let mut extra = object(res.to_json_value());
            extra.insert("bracket".into(), json!([res.bracket.0, res.bracket.1]));
            extra.insert("fd_residual".into(), json!(res.solution.residual));
            extra.insert("boundary_value".into(), json!(res.boundary_value));
            Single {
                record: compute_record(SolutionView::Shoot(&res)),
                csv: res.solution.to_csv(),
                columns: radial_columns(&res.solution.grid.nodes(), &res.solution.values),
                extra,
            }
        }
    };
    let path = default_path(cfg);
    write_single(cfg, &single, &path)?;
    let r = &single.record;
    let summary = match single.extra.get("delta_hat").and_then(Value::as_f64) {
        Some(delta) => format!(
            "{}: delta_hat={} sup_norm={:.6e} d_beta={:.6e} robin_residual={:.3e}",
            cfg.command.name(),
            format_float(delta),
            r.sup_norm,
            r.d_beta,
            r.residual
        ),
        None => format!(
            "{}: sup_norm={:.6e} d_beta={:.6e} residual={:.3e} iterations={}",
            cfg.command.name(),
            r.sup_norm,
            r.d_beta,
            r.residual,
            r.iterations
        ),
    };
    Ok(Outcome::ok(format!("{summary} -> {}", path.display())))
}

fn eigen(cfg: &RunConfig) -> Result<Outcome> {
    let beta = cfg.beta.expect("beta is set");
    let (lambda, single) = match cfg.backend.expect("backend is set") {
        BackendChoice::Radial => {
            let (dim, radius) = ball(cfg);
            let m = cfg.discretization.intervals.expect("M is set");
            let (lambda, sol) = solve_radial_eigen(dim, radius, beta, m)?;
            let single = Single {
                record: compute_record(SolutionView::Radial {
                    solution: &sol,
                    lambda: Some(lambda),
                }),
                csv: sol.to_csv(),
                columns: radial_columns(&sol.grid.nodes(), &sol.values),
                extra: Map::new(),
            };
            (lambda, single)
        }
        BackendChoice::Fem => {
            let mesh = build_mesh(&cfg.domain, cfg.discretization.h)?;
            let (lambda, field) = solve_eigen(&mesh, beta)?;
            let system = assemble(&mesh, beta)?;
            let single = Single {
                record: compute_record(SolutionView::Fem {
                    mesh: &mesh,
                    system: &system,
                    field: &field,
                    lambda: Some(lambda),
                }),
                csv: field.to_csv(&mesh),
                columns: fem_columns(&mesh, &field.values),
                extra: Map::new(),
            };
            (lambda, single)
        }
        BackendChoice::Shoot => unreachable!("rejected during validation"),
    };
    let bound = 1.0 / single.record.measures().ratio();
    let mut single = single;
    single.extra = object(json!({
        "lambda": lambda,
        "lambda_over_beta": lambda / beta,
        "boundary_over_volume": bound,
        "min_value": single.record.min_value,
    }));
    let path = default_path(cfg);
    write_single(cfg, &single, &path)?;
    Ok(Outcome::ok(format!(
        "eigen: lambda={:.10e} lambda/beta={:.8} |dOmega|/|Omega|={:.8} min={:.8} -> {}",
        lambda,
        lambda / beta,
        bound,
        single.record.min_value,
        path.display()
    )))
}

fn run_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let betas = cfg.betas.as_deref().expect("betas are set");
    let options = SweepOptions {
        newton: cfg.newton.unwrap_or_default(),
        continuation: cfg.continuation.unwrap_or(false),
        jobs: cfg.jobs,
    };
    let p = cfg.p.expect("p is set");
    let mesh;
    let shooting;
    let problem = match cfg.backend.expect("backend is set") {
        BackendChoice::Radial => {
            let (dim, radius) = ball(cfg);
            Problem::Ball {
                dim,
                radius,
                intervals: cfg.discretization.intervals.expect("M is set"),
            }
        }
        BackendChoice::Fem => {
            mesh = build_mesh(&cfg.domain, cfg.discretization.h)?;
            Problem::Mesh(&mesh)
        }
        BackendChoice::Shoot => {
            shooting = profile(cfg)?;
            Problem::Shoot {
                profile: &shooting,
                intervals: cfg.discretization.intervals.expect("M is set"),
            }
        }
    };
    Ok(run_sweep(&problem, p, betas, &options)?)
}

fn failed_rows(rows: &[SweepRow]) -> usize {
    rows.iter().filter(|r| r.record().is_none()).count()
}

fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let rows = run_rows(cfg)?;
    let p = cfg.p.expect("p is set");
    let failed = failed_rows(&rows);
    for row in &rows {
        if let SweepRow::Failed { beta, error } = row {
            eprintln!("beta={}: {error}", format_float(*beta));
        }
    }

    let fit = match cfg.fit {
        Some(field) => {
            let used = if cfg.fit_all_rows {
                rows.clone()
            } else {
                smallest_decade(&rows)
            };
            Some(fit_power_law(&used, field)?)
        }
        None => None,
    };
    let ratios = rows
        .iter()
        .find_map(SweepRow::record)
        .map(|r| check_asymptotic_constant(&rows, p, &r.measures()))
        .unwrap_or_default();

    let path = default_path(cfg);
    let mut written = vec![path.clone()];
    match cfg.format {
        Format::Csv => {
            write_file(&path, &csv_document(cfg, &[], &sweep_to_csv(&rows)))?;
            if let Some(fit) = &fit {
                let fit_path = path.with_extension("fit.json");
                write_file(
                    &fit_path,
                    &json_document(cfg, object(serde_json::to_value(fit)?)),
                )?;
                written.push(fit_path);
            }
        }
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("rows".into(), serde_json::to_value(&rows)?);
            doc.insert("constant_ratios".into(), serde_json::to_value(&ratios)?);
            if let Some(fit) = &fit {
                doc.insert("fit".into(), serde_json::to_value(fit)?);
            }
            write_file(&path, &json_document(cfg, doc))?;
        }
    }

    let mut summary = format!(
        "{}: {} rows, {} failed",
        cfg.command.name(),
        rows.len(),
        failed
    );
    if let Some(fit) = &fit {
        let _ = write!(
            summary,
            "; fit {} slope={:.6} constant={:.6} r2={:.8} over {} points",
            fit.field, fit.slope, fit.constant, fit.r2, fit.n_points
        );
    }
    if let Some(last) = ratios.last() {
        let _ = write!(summary, "; last limit ratio={:.6}", last.ratio);
    }
    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    let _ = write!(summary, " -> {}", files.join(", "));
    Ok(Outcome {
        summary,
        success: failed == 0,
    })
}

fn checks_csv(checks: &[InvariantCheck]) -> String {
    let mut out = String::from("name,beta,value,bound,passed\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.name,
            c.beta.map(format_float).unwrap_or_default(),
            format_float(c.value),
            format_float(c.bound),
            c.passed
        );
    }
    out
}

fn check(cfg: &RunConfig) -> Result<Outcome> {
    let rows = run_rows(cfg)?;
    let checks = sweep_invariants(&rows);
    let failures: Vec<&InvariantCheck> = checks.iter().filter(|c| !c.passed).collect();
    for c in &failures {
        let beta = c.beta.map(format_float).unwrap_or_else(|| "-".into());
        eprintln!(
            "FAIL {} at beta={beta}: value {} vs bound {}",
            c.name,
            format_float(c.value),
            format_float(c.bound)
        );
    }
    let path = default_path(cfg);
    let text = match cfg.format {
        Format::Csv => csv_document(cfg, &[], &checks_csv(&checks)),
        Format::Json => json_document(
            cfg,
            object(json!({
                "checks": checks,
                "failed": failures.len(),
                "rows": rows,
            })),
        ),
    };
    write_file(&path, &text)?;
    Ok(Outcome {
        summary: format!(
            "check-invariants: {} checks, {} failed -> {}",
            checks.len(),
            failures.len(),
            path.display()
        ),
        success: failures.is_empty(),
    })
}

fn mesh(cfg: &RunConfig) -> Result<Outcome> {
    let mesh = build_mesh(&cfg.domain, cfg.discretization.h)?;
    let path = resolve_out(cfg.out.as_deref(), "mesh.msh");
    let mut config = config_value(cfg);
    if let Some(map) = config.as_object_mut() {
        map.remove("format");
    }
    let mut text = String::new();
    let _ = writeln!(text, "# config: {config}");
    if cfg.meta {
        let _ = writeln!(text, "# meta: {}", meta_value());
    }
    text.push_str(&mesh.to_text());
    write_file(&path, &text)?;
    Ok(Outcome::ok(format!(
        "mesh: {} nodes, {} triangles, area={:.10} perimeter={:.10} -> {}",
        mesh.num_nodes(),
        mesh.triangles().len(),
        mesh.volume(),
        mesh.boundary_measure(),
        path.display()
    )))
}
