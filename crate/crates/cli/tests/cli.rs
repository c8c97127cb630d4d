use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use replicator_core::io::{read_density, write_payoff};
use replicator_core::{tabulate, GameSpec, Grid, Quadrature};

fn replicator(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_replicator"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "jsonl")))
        .collect();
    files.sort();
    files
}

#[test]
fn steady_investment_is_uniform_and_converged() {
    let tmp = TempDir::new().unwrap();
    let o = replicator(&["steady", "--game", "investment", "--beta", "30", "--output", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for agent in ["p1", "p2"] {
        let f = fs::File::open(tmp.path().join(format!("steady_investment_30_uniform_{agent}.csv"))).unwrap();
        let d = read_density(f, Quadrature::Simpson).unwrap();
        assert!(d.values().iter().all(|p| (p - 1.0).abs() < 1e-9));
    }
    let m = manifest(tmp.path());
    assert_eq!(m["converged"], Value::Bool(true));
    assert_eq!(m["seed"], 0);
    assert_eq!(m["grid"]["size"], 201);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"]["beta"], 30.0);
    // Nothing staged is left behind.
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 4);
}

fn scan_rows(path: &Path) -> Vec<(f64, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut cols = l.split(',');
            let beta = cols.next().unwrap().parse().unwrap();
            (beta, cols.next().unwrap().to_string())
        })
        .collect()
}

#[test]
fn scan_splits_into_asymmetric_branches_above_threshold() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("a");
    let o = replicator(&[
        "scan", "--game", "bilinear", "--a", "-1", "--b", "0.1", "--beta-min", "1", "--beta-max", "60", "--jobs", "4",
        "--output", &out_arg(&dir),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = dir.join("scan_bilinear_1-60.csv");
    let rows = scan_rows(&csv);
    let asym: Vec<f64> = rows.iter().filter(|r| r.1.starts_with("asymmetric")).map(|r| r.0).collect();
    let first = asym.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(first > 10.0 && first <= 20.0, "split at {first}");
    for beta in (1..=60).map(f64::from) {
        let n_sym = rows.iter().filter(|r| r.0 == beta && r.1 == "symmetric").count();
        assert_eq!(n_sym, 1, "beta {beta}");
        let n_asym = asym.iter().filter(|b| **b == beta).count();
        assert_eq!(n_asym, if beta >= first { 2 } else { 0 }, "beta {beta}");
    }

    let serial = tmp.path().join("b");
    let o = replicator(&[
        "scan", "--game", "bilinear", "--a", "-1", "--b", "0.1", "--beta-min", "1", "--beta-max", "60", "--jobs", "1",
        "--output", &out_arg(&serial),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&csv).unwrap(), fs::read(serial.join("scan_bilinear_1-60.csv")).unwrap());
}

#[test]
fn evolve_with_oversized_step_fails_with_integration_error() {
    let tmp = TempDir::new().unwrap();
    let o = replicator(&[
        "evolve", "--game", "bilinear", "--a", "1", "--b", "0", "--beta", "10", "--dt", "5", "--output",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("dynamics") && err.contains("integration error"), "{err}");
    assert!(err.contains("smaller dt"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"command":"steady","game":{"kind":"bilinear","a1":1,"b1":0,"a2":1,"b2":0},"beta":10,"grid_size":51}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = replicator(&["steady", "--config", &out_arg(&cfg), "--beta", "50", "--output", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("steady_bilinear_50_uniform_p1.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["config"]["beta"], 50.0);
    assert_eq!(m["config"]["grid_size"], 51);
}

#[test]
fn out_of_range_parameter_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let o = replicator(&[
        "steady", "--game", "quadratic", "--a1", "1.5", "--a2", "0.5", "--beta", "10", "--output",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("a1"), "{err}");
    assert!(!tmp.path().join("manifest.json").exists());

    let o = replicator(&["steady", "--game", "chess", "--beta", "10", "--output", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("chess"));
}

#[test]
fn non_convergence_exits_two_with_outputs() {
    let tmp = TempDir::new().unwrap();
    let o = replicator(&[
        "steady", "--game", "polad", "--beta", "20", "--max-iter", "1", "--grid-size", "51", "--output",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(tmp.path().join("steady_polad_20_uniform_p1.csv").exists());
    assert_eq!(manifest(tmp.path())["converged"], Value::Bool(false));
}

#[test]
fn manifest_rerun_reproduces_csv_bytes() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let o = replicator(&[
        "simulate", "--game", "polad", "--beta", "8", "--grid-size", "41", "--updates", "200", "--batch", "200",
        "--seed", "7", "--init", "all", "--output", &out_arg(&first),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let second = tmp.path().join("second");
    let o = replicator(&[
        "run", "--config", &out_arg(&first.join("manifest.json")), "--output", &out_arg(&second),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = csv_files(&first);
    assert_eq!(a.len(), 13);
    for f in &a {
        let twin = second.join(f.file_name().unwrap());
        assert_eq!(fs::read(f).unwrap(), fs::read(&twin).unwrap(), "{}", f.display());
    }
    let m = manifest(&first);
    assert_eq!(m["seed"], 7);
    assert!(m["rng"].as_str().unwrap().contains("ChaCha20"));
}

#[test]
fn analytic_commands_write_branches_and_densities() {
    let tmp = TempDir::new().unwrap();
    let o = replicator(&[
        "analytic-bilinear", "--game", "bilinear", "--a", "1", "--b", "-0.5", "--beta", "50", "--beta-max", "50",
        "--output", &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = scan_rows(&tmp.path().join("analytic-bilinear_bilinear_50.csv"));
    assert_eq!(rows.len(), 3);
    let dens = fs::read_to_string(tmp.path().join("analytic-bilinear_bilinear_50_densities.csv")).unwrap();
    assert!(dens.starts_with("branch,x,p1,p2\n"));
    assert_eq!(dens.lines().count(), 1 + 3 * 201);
    let meta: Value = serde_json::from_str(
        fs::read_to_string(tmp.path().join("analytic-bilinear_bilinear_50.jsonl")).unwrap().trim(),
    )
    .unwrap();
    let bc = meta["critical_beta_multistable"].as_f64().unwrap();
    assert!((bc - 12.0).abs() < 1e-3, "{bc}");

    let o = replicator(&[
        "analytic-quadratic", "--game", "quadratic", "--a", "0.5", "--beta", "10", "--output", &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = scan_rows(&tmp.path().join("analytic-quadratic_quadratic_10.csv"));
    assert!(!rows.is_empty());
    let meta = fs::read_to_string(tmp.path().join("analytic-quadratic_quadratic_10.jsonl")).unwrap();
    assert!(meta.contains("\"plateau_width\""));
}

#[test]
fn tabulated_payoff_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let grid = Grid::new(41).unwrap();
    let game = GameSpec::quadratic(0.3, 0.7);
    let table = tmp.path().join("payoff.csv");
    write_payoff(fs::File::create(&table).unwrap(), &tabulate(&game, grid).unwrap()).unwrap();

    let tab = tmp.path().join("tab");
    let o = replicator(&[
        "steady", "--payoff", &out_arg(&table), "--grid-size", "41", "--beta", "10", "--output", &out_arg(&tab),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let closed = tmp.path().join("closed");
    let o = replicator(&[
        "steady", "--game", "quadratic", "--a1", "0.3", "--a2", "0.7", "--grid-size", "41", "--beta", "10",
        "--output", &out_arg(&closed),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for agent in ["p1", "p2"] {
        let a = fs::File::open(tab.join(format!("steady_tabulated_10_uniform_{agent}.csv"))).unwrap();
        let b = fs::File::open(closed.join(format!("steady_quadratic_10_uniform_{agent}.csv"))).unwrap();
        let (a, b) = (read_density(a, Quadrature::Simpson).unwrap(), read_density(b, Quadrature::Simpson).unwrap());
        assert!(a.sup_distance(&b).unwrap() < 1e-9);
    }
    // The manifest carries the tables, so a rerun does not need the CSV.
    fs::remove_file(&table).unwrap();
    let again = tmp.path().join("again");
    let o = replicator(&["run", "--config", &out_arg(&tab.join("manifest.json")), "--output", &out_arg(&again)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
