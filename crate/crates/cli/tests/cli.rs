use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn convexlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("CONVEXLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mesh_verify_nonlinear_flow() {
    let dir = tempfile::tempdir().unwrap();
    let o = convexlab(&["mesh", "--domain", "ball", "--dim", "3", "--refine", "2", "--out", "ball.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = read_json(&dir.path().join("ball.json"));
    assert!(mesh.get("config").is_none());
    assert_eq!(mesh["family"]["family_tag"], "Ball");

    let o = convexlab(&["verify", "--suite", "all", "--seed", "1", "ball.json", "--out", "report.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gating checks pass"));
    let rep = read_json(&dir.path().join("report.json"));
    let checks = rep["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["pass"] == true));
    assert_eq!(rep["config"]["command"], "verify");
    assert_eq!(rep["config"]["mesh_file"], "ball.json");
    assert_eq!(rep["config"]["seed"], 1);
    assert!(rep["wall_time"].is_null());

    let o = convexlab(&["nonlinear", "--q", "2", "--starts", "8", "--seed", "7", "ball.json"], dir.path());
    assert_eq!(code(&o), 0);
    let run: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(run["classification"], "Constant");
    assert_eq!(run["starts"].as_array().unwrap().len(), 9);
    assert_eq!(run["config"]["options"]["q"], 2.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["nonlinear", "--domain", "ball", "--dim", "3", "--refine", "2", "--q", "2", "--starts", "3", "--seed", "11"][..],
        &["verify", "--domain", "ellipsoid", "--axes", "1,0.9,0.8", "--refine", "2", "--seed", "3"][..],
        &["solve", "--domain", "ball", "--dim", "2", "--refine", "3", "--lambda", "1", "--start", "random", "--seed", "5"][..],
    ] {
        let a = convexlab(args, dir.path());
        let b = convexlab(args, dir.path());
        assert_eq!(code(&a), code(&b));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn missing_seed_is_announced() {
    let dir = tempfile::tempdir().unwrap();
    let o = convexlab(&["nonlinear", "--domain", "ball", "--dim", "3", "--refine", "1", "--q", "2", "--starts", "1"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    let run: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(run["config"]["seed"], 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let usage: &[&[&str]] = &[
        &["frobnicate"],
        &["mesh", "--domain", "sphere"],
        &["mesh", "--domain", "cap", "--dim", "2"],
        &["verify", "missing.json"],
        &["verify", "--domain", "ball", "--suite", "everything"],
        &["verify", "--domain", "ball", "--tol", "nonsense=1"],
        &["convergence", "--domain", "ball", "--levels", "2", "--quantity", "volume"],
        &["mesh", "--domain", "ball", "--format", "csv"],
        &["solve", "--domain", "ball", "--dim", "3", "--lambda", "-1", "--q", "2"],
    ];
    for args in usage {
        let o = convexlab(args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&convexlab(&["--help"], dir.path())), 0);
    assert_eq!(code(&convexlab(&["--version"], dir.path())), 0);

    // equality is expected on the ball, so a zero tolerance exposes the discretization error
    let o = convexlab(
        &["verify", "--domain", "ball", "--dim", "3", "--refine", "1", "--suite", "inequalities", "--seed", "0", "--tol", "hersch=0", "--tol", "ros=0"],
        dir.path(),
    );
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> =
        rep["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["check_id"].as_str().unwrap()).collect();
    assert!(failed.contains(&"ros"), "{failed:?}");
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ros"));
}

#[test]
fn csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = convexlab(
        &["convergence", "--domain", "ball", "--dim", "2", "--levels", "1,2,3", "--quantity", "boundary_area", "--out", "conv.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("conv.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config {"));
    assert_eq!(lines[1], "level,h,value,error,observed_order");
    assert_eq!(lines.len(), 5);

    let o = convexlab(&["spectrum", "--domain", "ball", "--dim", "2", "--refine", "3", "--k", "4", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let sigma1: f64 = text.lines().nth(3).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((sigma1 - 1.0).abs() < 0.01);
}

#[test]
fn threads_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_convexlab"));
        c.args(["spectrum", "--domain", "ball", "--dim", "3", "--refine", "1", "--k", "3"]).current_dir(dir.path());
        match threads {
            Some(t) => c.env("CONVEXLAB_THREADS", t),
            None => c.env_remove("CONVEXLAB_THREADS"),
        };
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0);
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let (one, four) = (run(None), run(Some("4")));
    assert_eq!(one["config"]["threads"], 1);
    assert_eq!(four["config"]["threads"], 4);
    let (a, b) = (one["eigenvalues"].as_array().unwrap(), four["eigenvalues"].as_array().unwrap());
    for (x, y) in a.iter().zip(b) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-9);
    }
}
