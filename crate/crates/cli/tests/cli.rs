use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn robin_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robin-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("ROBIN_LAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Data lines of a CSV artifact, after the `#` header lines.
fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn radial_torsion_solve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = robin_lab(
        dir.path(),
        &[
            "solve",
            "--p",
            "0",
            "--beta",
            "0.1",
            "--M",
            "256",
            "--out",
            "torsion.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).starts_with("solve: sup_norm=5.25"),
        "{}",
        stdout(&o)
    );
    let text = std::fs::read_to_string(dir.path().join("torsion.csv")).unwrap();
    let config_line = text.lines().next().unwrap();
    let config: Value =
        serde_json::from_str(config_line.strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(config["command"], "solve");
    assert_eq!(config["p"], 0.0);
    let rows = csv_rows(&dir.path().join("torsion.csv"));
    assert_eq!(rows[0], "r,u");
    assert_eq!(rows.len(), 258);
    let first: Vec<f64> = rows[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert!((first[1] - 5.25).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let window = robin_lab(
        dir.path(),
        &["shoot", "--N", "3", "--p", "6", "--beta", "0.5"],
    );
    assert_eq!(window.status.code(), Some(2));
    assert!(stderr(&window).contains("2/(p-1)"));

    let linear = robin_lab(dir.path(), &["solve", "--p", "1", "--beta", "0.1"]);
    assert_eq!(linear.status.code(), Some(2));
    assert!(stderr(&linear).contains("eigen"));

    let unknown = robin_lab(dir.path(), &["sweep", "--p", "3", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));

    let subcritical = robin_lab(
        dir.path(),
        &[
            "solve",
            "--N",
            "3",
            "--p",
            "4",
            "--beta",
            "0.1",
            "--backend",
            "shoot",
        ],
    );
    assert_eq!(subcritical.status.code(), Some(2));
    // nothing is written when validation fails
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_mesh_is_a_runtime_failure_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = robin_lab(
        dir.path(),
        &[
            "eigen",
            "--domain",
            "mesh",
            "--mesh",
            "nowhere.msh",
            "--beta",
            "1e-3",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.msh"), "{}", stderr(&o));
}

#[test]
fn sweep_with_fit_recovers_the_superlinear_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = robin_lab(
        dir.path(),
        &[
            "sweep",
            "--domain",
            "ball",
            "--N",
            "2",
            "--R",
            "1",
            "--p",
            "3",
            "--betas",
            "1e-1:1e-3:8log",
            "--backend",
            "radial",
            "--M",
            "512",
            "--fit",
            "sup_norm",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(
        rows[0],
        "beta,sup_norm,c_beta,d_beta,sup_vhat,min_v,boundary_mean_v,lambda,iters,residual,status"
    );
    assert_eq!(rows.len(), 9);
    assert!(rows[1..].iter().all(|r| r.ends_with(",ok")));
    let fit = read_json(&dir.path().join("sweep.fit.json"));
    for key in [
        "field", "slope", "constant", "r2", "beta_min", "beta_max", "n_points",
    ] {
        assert!(fit.get(key).is_some(), "missing {key}");
    }
    assert!((fit["slope"].as_f64().unwrap() - 0.5).abs() < 0.02);
    assert_eq!(fit["config"]["betas"].as_array().unwrap().len(), 8);
}

#[test]
fn no_meta_runs_are_byte_identical_and_jobs_keep_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "sweep",
        "--p",
        "0.5",
        "--M",
        "256",
        "--betas",
        "1e-1:1e-2:6log",
        "--no-meta",
    ];
    let serial = [&base[..], &["--out", "a.csv"]].concat();
    let parallel = [&base[..], &["--out", "b.csv", "--jobs", "4"]].concat();
    assert!(robin_lab(dir.path(), &serial).status.success());
    assert!(robin_lab(dir.path(), &parallel).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains("timestamp"));
    let betas: Vec<f64> = csv_rows(&dir.path().join("a.csv"))[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(betas.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn meta_carries_a_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let o = robin_lab(dir.path(), &["eigen", "--beta", "0.01", "--M", "128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("eigen.json"));
    assert!(doc["meta"]["timestamp_unix"].as_u64().unwrap() > 0);
    assert_eq!(doc["config"]["command"], "eigen");
}

#[test]
fn out_dir_variable_redirects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("artifacts");
    let o = Command::new(env!("CARGO_BIN_EXE_robin-lab"))
        .args([
            "solve", "--p", "3", "--beta", "0.1", "--M", "64", "--format", "json",
        ])
        .current_dir(dir.path())
        .env("ROBIN_LAB_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&target.join("solve.json"));
    assert_eq!(doc["solution"]["u"].as_array().unwrap().len(), 65);
    assert!(doc["record"]["flux_defect"].as_f64().unwrap() < 1e-10);
}

#[test]
fn mesh_then_eigen_on_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let m = robin_lab(
        dir.path(),
        &[
            "mesh",
            "--domain",
            "rectangle",
            "--h",
            "0.05",
            "--out",
            "square.msh",
        ],
    );
    assert!(m.status.success(), "{}", stderr(&m));
    let text = std::fs::read_to_string(dir.path().join("square.msh")).unwrap();
    assert!(text.starts_with("# config: "));
    let mesh = robin_lab::Mesh::parse(&text).unwrap();
    assert!((mesh.volume() - 1.0).abs() < 1e-12);

    let e = robin_lab(
        dir.path(),
        &[
            "eigen",
            "--domain",
            "mesh",
            "--mesh",
            "square.msh",
            "--beta",
            "1e-3",
        ],
    );
    assert!(e.status.success(), "{}", stderr(&e));
    let doc = read_json(&dir.path().join("eigen.json"));
    let ratio = doc["lambda_over_beta"].as_f64().unwrap();
    assert!(ratio <= 4.0 && ratio > 3.9, "{ratio}");
    assert!((doc["lambda"].as_f64().unwrap() / 1e-3 - ratio).abs() < 1e-12);
}

#[test]
fn shoot_reports_delta_hat() {
    let dir = tempfile::tempdir().unwrap();
    let o = robin_lab(
        dir.path(),
        &[
            "shoot", "--N", "3", "--p", "6", "--beta", "0.2", "--M", "256",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("delta_hat=0.9012"), "{}", stdout(&o));
    let doc = read_json(&dir.path().join("shoot.json"));
    for key in ["p", "N", "beta", "delta_hat", "residual", "sup_norm"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(doc["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn failed_invariants_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // the square's eigenfunction dips below its boundary mean at the corners
    let o = robin_lab(
        dir.path(),
        &[
            "check-invariants",
            "--eigen",
            "--domain",
            "rectangle",
            "--h",
            "0.05",
            "--betas",
            "1e-1:1e-2:4log",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("interior_v_positive"));
    let doc = read_json(&dir.path().join("check-invariants.json"));
    assert!(doc["failed"].as_u64().unwrap() > 0);

    let ok = robin_lab(
        dir.path(),
        &[
            "check-invariants",
            "--p",
            "3",
            "--M",
            "256",
            "--format",
            "csv",
        ],
    );
    assert!(ok.status.success(), "{}", stderr(&ok));
    let rows = csv_rows(&dir.path().join("check-invariants.csv"));
    assert_eq!(rows[0], "name,beta,value,bound,passed");
    assert!(rows[1..].iter().all(|r| r.ends_with(",true")));
}
