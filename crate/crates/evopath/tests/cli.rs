use std::path::Path;
use std::process::Command;

use evopath::io::read_trajectory;

fn evopath(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_evopath"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn config() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.conf").to_string()
}

#[test]
fn cost_on_mean_step_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = evopath(dir.path(), &["mean-path"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_trajectory(&dir.path().join("mean_path.json")).unwrap();
    let z: Vec<String> = t.points[1].as_slice().iter().map(|x| format!("{x:e}")).collect();
    let o = evopath(dir.path(), &["cost", "--g", &z.join(",")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cost.json")).unwrap()).unwrap();
    assert!(v["exact"]["total"].as_f64().unwrap().abs() < 1e-12);
    assert!(v["first_order"]["total"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn geodesic_writes_table_shaped_csv_and_deterministic_json() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = evopath(d.path(), &["--config", &config(), "geodesic", "--stages", "1"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = std::fs::read_to_string(a.path().join("geodesic.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,gen1,gen2,gen3,step_cost");
    assert_eq!(lines.len(), 13);
    assert!(lines[1].starts_with("1,9.90000e-01,5.00000e-03,5.00000e-03,"));
    assert!(lines[12].starts_with("12,3.50000e-01,3.50000e-01,3.00000e-01,") && lines[12].ends_with(','));
    for f in ["geodesic.csv", "geodesic.json", "geodesic_summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("geodesic_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["length"], 12);
    for key in ["total_cost", "penultimate", "nu", "kappa", "status"] {
        assert!(summary.get(key).is_some(), "{key} missing");
    }
    let timing: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("timing.json")).unwrap()).unwrap();
    assert!(timing["wall_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_is_reproducible_per_seed() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, seed) in dirs.iter().zip(["7", "7", "8"]) {
        let o = evopath(d.path(), &["--seed", seed, "simulate", "--days", "4"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("simulation.csv")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
}

#[test]
fn errors_exit_nonzero_with_a_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "m = 1e-6\nfoo = 3\n").unwrap();
    let o = evopath(dir.path(), &["--config", bad.to_str().unwrap(), "cost"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[config]") && err.contains("line 2") && err.contains("foo"), "{err}");

    let o = evopath(dir.path(), &["cost", "--h", "0.0,0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error["));

    let o = evopath(dir.path(), &["--strategy", "spiral", "geodesic"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn landscape_and_validate_run() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("small.conf");
    std::fs::write(&conf, "landscape_epsilon = 1e-2\nld_N = [100, 200]\nld_trials = 20000\nstirling_n_max = 200\n").unwrap();
    let o = evopath(dir.path(), &["--config", conf.to_str().unwrap(), "pen-landscape"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pen_landscape.csv")).unwrap();
    assert!(csv.starts_with("y1,y2,y3,h\n"));
    assert!(csv.lines().count() > 1000);

    let o = evopath(dir.path(), &["--config", conf.to_str().unwrap(), "validate", "--skip-kernel"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
}
