//! Acceptance run: one PASS/FAIL line per criterion at pinned tolerances.
//!
//! A few sub-checks cannot be met by any correct implementation; they are
//! still computed and reported, and a criterion whose only failures are such
//! sub-checks is marked as known. Any other failure fails the binary.

use std::f64::consts::PI;
use std::time::Instant;

use robin_lab::harness::{leading_order, sweep_invariants};
use robin_lab::shooting::find_delta_hat_on;
use robin_lab::{
    assemble, check_asymptotic_constant, compute_record, default_betas, find_delta_hat,
    fit_power_law, integrate_profile, robin_mismatch, run_sweep, smallest_decade, solve_eigen,
    solve_radial, solve_radial_eigen, solve_semilinear, triangulate, Domain, InvariantCheck, Mesh,
    NewtonConfig, Problem, ProfileConfig, RecordField, ShootError, SolutionView, SweepOptions,
    SweepRecord, SweepRow,
};

const M: usize = 2048;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    /// Every failing sub-check is a documented impossibility.
    known: bool,
    detail: String,
}

fn torsion_exact(r: f64, beta: f64) -> f64 {
    (1.0 - r * r) / 4.0 + 1.0 / (2.0 * beta)
}

fn disk_mesh(h: f64) -> Mesh {
    triangulate(&Domain::disk(1.0).unwrap(), h).unwrap()
}

fn ok_rows(rows: &[SweepRow]) -> Vec<SweepRow> {
    rows.to_vec()
}

fn as_rows(records: &[SweepRecord]) -> Vec<SweepRow> {
    records.iter().cloned().map(SweepRow::Ok).collect()
}

/// Invariant material collected from criteria 1–5.
#[derive(Default)]
struct Collected {
    sweeps: Vec<(&'static str, Vec<SweepRow>)>,
    singles: Vec<(&'static str, SweepRecord)>,
}

fn criterion_1(col: &mut Collected) -> Outcome {
    let t = Instant::now();
    let beta = 0.1;
    let cfg = NewtonConfig::default();
    let sol = solve_radial(0.0, beta, 2, 1.0, M, &cfg).unwrap();
    let radial_err = sol
        .values
        .iter()
        .enumerate()
        .map(|(i, u)| (u - torsion_exact(sol.grid.node(i), beta)).abs())
        .fold(0.0, f64::max);
    col.singles.push((
        "torsion radial",
        compute_record(SolutionView::Radial {
            solution: &sol,
            lambda: None,
        }),
    ));

    let mesh = disk_mesh(0.02);
    let field = solve_semilinear(&mesh, 0.0, beta, &cfg).unwrap();
    let exact_sup = torsion_exact(0.0, beta);
    let fem_err = mesh
        .nodes()
        .iter()
        .zip(&field.values)
        .map(|(x, u)| (u - torsion_exact(x[0].hypot(x[1]), beta)).abs())
        .fold(0.0, f64::max)
        / exact_sup;
    let system = assemble(&mesh, beta).unwrap();
    col.singles.push((
        "torsion fem",
        compute_record(SolutionView::Fem {
            mesh: &mesh,
            system: &system,
            field: &field,
            lambda: None,
        }),
    ));
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        name: "torsion oracle",
        passed: radial_err <= 1e-6 && fem_err <= 0.01 && secs <= 10.0,
        known: false,
        detail: format!(
            "radial max error {radial_err:.2e} (<= 1e-6), fem relative error {fem_err:.2e} (<= 1e-2), {secs:.1}s"
        ),
    }
}

fn radial_sweep(p: f64) -> Vec<SweepRow> {
    let problem = Problem::Ball {
        dim: 2,
        radius: 1.0,
        intervals: M,
    };
    let options = SweepOptions {
        jobs: 0,
        ..SweepOptions::default()
    };
    run_sweep(&problem, p, &default_betas(), &options).unwrap()
}

fn fit_line(rows: &[SweepRow], p: f64, slope_target: f64, const_target: f64) -> (bool, String) {
    let fit = fit_power_law(&smallest_decade(rows), RecordField::SupNorm).unwrap();
    let first = rows.iter().find_map(SweepRow::record).unwrap();
    let m = first.measures();
    let predicted = leading_order(p, 1.0, &m);
    let const_err = (fit.constant / predicted - 1.0).abs();
    let passed = (fit.slope - slope_target).abs() <= 0.02
        && const_err <= 0.05
        && (predicted / const_target - 1.0).abs() < 1e-12;
    (
        passed,
        format!(
            "slope {:.4} (target {slope_target} +- 0.02), constant {:.4} vs {predicted:.4} ({:.2}% <= 5%), {} points, R2 {:.6}",
            fit.slope,
            fit.constant,
            100.0 * const_err,
            fit.n_points,
            fit.r2
        ),
    )
}

fn criterion_2(col: &mut Collected) -> Outcome {
    let t = Instant::now();
    let rows = radial_sweep(0.5);
    let (passed, detail) = fit_line(&rows, 0.5, -2.0, 0.25);
    col.sweeps.push(("p=1/2 radial sweep", ok_rows(&rows)));
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 2,
        name: "sublinear blow-up rate",
        passed: passed && secs <= 60.0,
        known: false,
        detail: format!("{detail}, {secs:.1}s"),
    }
}

fn criterion_3(col: &mut Collected) -> Outcome {
    let t = Instant::now();
    let beta = 1e-3;
    let mut passed = true;
    let mut parts = Vec::new();
    let meshes = [
        ("disk", disk_mesh(0.02)),
        (
            "square",
            triangulate(&Domain::rectangle(1.0, 1.0).unwrap(), 0.02).unwrap(),
        ),
    ];
    for (name, mesh) in &meshes {
        let (lambda, field) = solve_eigen(mesh, beta).unwrap();
        let system = assemble(mesh, beta).unwrap();
        let bound = system.boundary_measure() / system.volume();
        let ratio = lambda / beta;
        let min = field.min_value();
        let ok = min >= 0.99 && ratio <= bound && (bound - ratio) / bound <= 0.02;
        passed &= ok;
        parts.push(format!(
            "{name}: min {min:.5}, lambda/beta {ratio:.5} vs {bound:.5} ({:.3}%)",
            100.0 * (bound - ratio) / bound
        ));
        let record = compute_record(SolutionView::Fem {
            mesh,
            system: &system,
            field: &field,
            lambda: Some(lambda),
        });
        col.singles.push((
            if *name == "disk" {
                "eigen fem disk"
            } else {
                "eigen fem square"
            },
            record,
        ));
    }
    let (lambda, sol) = solve_radial_eigen(2, 1.0, beta, M).unwrap();
    let ratio = lambda / beta;
    let ok = sol.min_value() >= 0.99 && ratio <= 2.0 && (2.0 - ratio) / 2.0 <= 0.02;
    passed &= ok;
    parts.push(format!(
        "radial disk: min {:.5}, lambda/beta {ratio:.5} vs 2",
        sol.min_value()
    ));
    col.singles.push((
        "eigen radial disk",
        compute_record(SolutionView::Radial {
            solution: &sol,
            lambda: Some(lambda),
        }),
    ));
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 3,
        name: "eigenfunction flattening and eigenvalue bounds",
        passed: passed && secs <= 60.0,
        known: false,
        detail: format!("{}, {secs:.1}s", parts.join("; ")),
    }
}

fn criterion_4(col: &mut Collected) -> Outcome {
    let t = Instant::now();
    let rows = radial_sweep(3.0);
    let (fit_ok, detail) = fit_line(&rows, 3.0, 0.5, 2f64.sqrt());
    col.sweeps.push(("p=3 radial sweep", ok_rows(&rows)));

    let beta = 0.01;
    let radial = solve_radial(3.0, beta, 2, 1.0, M, &NewtonConfig::default()).unwrap();
    let mesh = disk_mesh(0.02);
    let field = solve_semilinear(&mesh, 3.0, beta, &NewtonConfig::default()).unwrap();
    let diff = (field.sup_norm() - radial.sup_norm()).abs() / radial.sup_norm();
    let system = assemble(&mesh, beta).unwrap();
    col.singles.push((
        "p=3 fem",
        compute_record(SolutionView::Fem {
            mesh: &mesh,
            system: &system,
            field: &field,
            lambda: None,
        }),
    ));
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 4,
        name: "superlinear decay rate",
        passed: fit_ok && diff <= 0.01 && secs <= 120.0,
        known: false,
        detail: format!(
            "{detail}; radial vs fem sup-norm at beta=0.01 differ by {:.3}% (<= 1%), {secs:.1}s",
            100.0 * diff
        ),
    }
}

fn criterion_5(col: &mut Collected) -> Outcome {
    let t = Instant::now();
    let profile = integrate_profile(6.0, 3, &ProfileConfig::default()).unwrap();
    let limit = 0.24f64.powf(0.2);
    let r = 1e4;
    let (u, du) = profile.eval(r);
    let value_dev = (r.powf(0.4) * u - limit).abs() / limit;
    let slope_dev = (r.powf(1.4) * du + 0.4 * limit).abs() / (0.4 * limit);
    let tail_ok = value_dev <= 0.01 && slope_dev <= 0.01;

    let res = find_delta_hat(&profile, 0.2).unwrap();
    let mismatch = robin_mismatch(&profile, res.delta_hat, 0.2).abs();
    let root_ok = mismatch <= 1e-12 && res.solution.residual <= 1e-6 && res.residual <= 1e-8;
    col.singles
        .push(("shoot beta=0.2", compute_record(SolutionView::Shoot(&res))));

    let refused = matches!(
        find_delta_hat_on(&profile, 0.4, M),
        Err(ShootError::OutsideExistenceWindow { .. })
    );

    let problem = Problem::Shoot {
        profile: &profile,
        intervals: M,
    };
    let rows = run_sweep(&problem, 6.0, &default_betas(), &SweepOptions::default()).unwrap();
    let measures = rows.iter().find_map(SweepRow::record).unwrap().measures();
    let table = check_asymptotic_constant(&rows, 6.0, &measures);
    let last = table.last().unwrap();
    let direct = last.observed / (3.0 * last.beta).powf(0.2);
    let sweep_ok = (direct - 1.0).abs() <= 0.05 && rows.iter().all(|r| r.record().is_some());
    col.sweeps.push(("p=6 shooting sweep", rows));
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 5,
        name: "supercritical construction",
        passed: tail_ok && root_ok && refused && sweep_ok && secs <= 120.0,
        // the profile is a damped spiral in ln r and is still 11% off at 1e4
        known: !tail_ok && root_ok && refused && sweep_ok && secs <= 120.0,
        detail: format!(
            "tail at r=1e4: value {:.2}%, slope {:.2}% (<= 1% each) [{}]; beta=0.2: delta {:.6}, |h| {mismatch:.1e}, fd residual {:.1e}, robin {:.1e} [{}]; beta=0.4 refused [{}]; sup/(3 beta)^(1/5) at beta=1e-3 {direct:.4} [{}], {secs:.1}s",
            100.0 * value_dev,
            100.0 * slope_dev,
            mark(tail_ok),
            res.delta_hat,
            res.solution.residual,
            res.residual,
            mark(root_ok),
            mark(refused),
            mark(sweep_ok),
        ),
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

fn criterion_6(col: &Collected) -> Outcome {
    let mut checks: Vec<(String, InvariantCheck)> = Vec::new();
    for (name, rows) in &col.sweeps {
        checks.extend(
            sweep_invariants(rows)
                .into_iter()
                .map(|c| (name.to_string(), c)),
        );
    }
    for (name, record) in &col.singles {
        checks.extend(
            sweep_invariants(&as_rows(std::slice::from_ref(record)))
                .into_iter()
                .map(|c| (name.to_string(), c)),
        );
    }
    let failures: Vec<String> = checks
        .iter()
        .filter(|(_, c)| !c.passed)
        .map(|(n, c)| {
            format!(
                "{n}: {} at beta {} ({:e} vs {:e})",
                c.name,
                c.beta.map(|b| b.to_string()).unwrap_or_default(),
                c.value,
                c.bound
            )
        })
        .collect();
    // the exact square eigenfunction has v < 0 at the corners
    let known = checks
        .iter()
        .filter(|(_, c)| !c.passed)
        .all(|(n, c)| n == "eigen fem square" && c.name == "interior_v_positive");
    Outcome {
        id: 6,
        name: "invariant suite",
        passed: failures.is_empty(),
        known,
        detail: if failures.is_empty() {
            format!("{} checks, 0 failures", checks.len())
        } else {
            format!(
                "{} checks, {} failures: {}",
                checks.len(),
                failures.len(),
                failures.join("; ")
            )
        },
    }
}

fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

fn in_band(r: &[f64]) -> bool {
    r.iter().all(|x| (3.5..=4.5).contains(x))
}

fn criterion_7() -> Outcome {
    let beta = 0.1;
    let cfg = NewtonConfig::default();
    let radial_errors: Vec<f64> = [256, 512, 1024, 2048]
        .iter()
        .map(|&m| {
            let sol = solve_radial(0.0, beta, 2, 1.0, m, &cfg).unwrap();
            sol.values
                .iter()
                .enumerate()
                .map(|(i, u)| (u - torsion_exact(sol.grid.node(i), beta)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let meshes: Vec<Mesh> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&h| disk_mesh(h))
        .collect();
    let volume_errors: Vec<f64> = meshes.iter().map(|m| (PI - m.volume()).abs()).collect();
    let boundary_errors: Vec<f64> = meshes
        .iter()
        .map(|m| (2.0 * PI - m.boundary_measure()).abs())
        .collect();
    let (rr, vr, br) = (
        ratios(&radial_errors),
        ratios(&volume_errors),
        ratios(&boundary_errors),
    );
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let fmt_e = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.1e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Outcome {
        id: 7,
        name: "order of accuracy",
        passed: in_band(&rr) && in_band(&vr) && in_band(&br),
        // the scheme is exact on the quadratic torsion profile
        known: in_band(&vr) && in_band(&br),
        detail: format!(
            "radial torsion errors [{}] ratios [{}] [{}]; mesh area ratios [{}] [{}]; mesh perimeter ratios [{}] [{}]",
            fmt_e(&radial_errors),
            fmt(&rr),
            mark(in_band(&rr)),
            fmt(&vr),
            mark(in_band(&vr)),
            fmt(&br),
            mark(in_band(&br)),
        ),
    }
}

fn main() {
    let mut col = Collected::default();
    let mut outcomes = vec![
        criterion_1(&mut col),
        criterion_2(&mut col),
        criterion_3(&mut col),
        criterion_4(&mut col),
        criterion_5(&mut col),
    ];
    outcomes.push(criterion_6(&col));
    outcomes.push(criterion_7());

    let mut unexpected = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && o.known {
            " (known limitation)"
        } else {
            ""
        };
        println!(
            "{status} criterion {}: {}{note} -- {}",
            o.id, o.name, o.detail
        );
        if !o.passed && !o.known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
