use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cbve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbve")).args(args).output().expect("binary runs")
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(stdout: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn malformed_environment_exits_with_input_error() {
    let out = cbve(&["check-env", path_str(&fixture("malformed.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = cbve(&["solve", "/nonexistent/env.json", "--t", "1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_input_error() {
    let out = cbve(&["solve", path_str(&fixture("feller.json")), "--t", "5", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = cbve(&["simulate", path_str(&fixture("feller.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_env_reports_admissibility() {
    let out = cbve(&["check-env", path_str(&fixture("feller.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["data"]["report"]["admissible"], true);

    let bottleneck = fixture("bottleneck.json");
    let out = cbve(&["check-env", path_str(&bottleneck), "--t", "0.7", "--t", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["data"]["report"]["admissible"], false);
    assert_eq!(doc["data"]["latest_bottleneck"][0]["latest_bottleneck"], 0.5);
    assert!(doc["data"]["latest_bottleneck"][1]["latest_bottleneck"].is_null());

    let out = cbve(&["check-env", path_str(&bottleneck), "--strict"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn feller_solve_matches_closed_form() {
    let out = cbve(&["solve", path_str(&fixture("feller.json")), "--t", "1", "--lambda", "0.5,1,4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&out.stdout);
    assert_eq!(rows.len(), 3 * 101);
    let (b, c, t) = (1.0f64, 0.5f64, 1.0f64);
    for row in rows {
        let lambda: f64 = row[0].parse().unwrap();
        let r: f64 = row[1].parse().unwrap();
        let v: f64 = row[2].parse().unwrap();
        let decay = (-b * (t - r)).exp();
        let exact = lambda * decay / (1.0 + c / b * lambda * (1.0 - decay));
        assert!((v - exact).abs() <= 1e-8 * exact, "λ={lambda} r={r}: {v} vs {exact}");
    }
}

#[test]
fn bounds_sandwich_the_solution() {
    let out = cbve(&[
        "solve",
        path_str(&fixture("compound_poisson_atom.json")),
        "--t",
        "1",
        "--lambda",
        "0.5,2",
        "--bounds",
        "--grid-step",
        "0.05",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&out.stdout);
    assert!(!rows.is_empty());
    for row in rows {
        let x: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        let (v, l, u) = (x[2], x[4], x[5]);
        assert!(l <= v * (1.0 + 1e-9) && v <= u * (1.0 + 1e-9), "{row:?}");
    }
}

#[test]
fn zero_environment_keeps_lambda() {
    let out = cbve(&["solve", path_str(&fixture("zero.json")), "--t", "1", "--lambda", "0.3,7"]);
    assert_eq!(out.status.code(), Some(0));
    for row in data_rows(&out.stdout) {
        assert_eq!(row[0], row[2]);
    }
}

#[test]
fn solve_json_and_directory_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbve(&[
        "solve",
        path_str(&fixture("feller_critical.json")),
        "--t",
        "1",
        "--lambda",
        "1",
        "--limits",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("solve.csv").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    let ext = meta["data"]["limits"]["extinction"]["value"].as_f64().unwrap();
    // v(∞) = b/(c(1 − e^{−bt})) → 1/(ct) for b = 0.
    assert!((ext - 1.0).abs() < 1e-6, "{ext}");
}

#[test]
fn binary_output_is_reproducible() {
    let run = |dir: &std::path::Path, jobs: &str| {
        let out = cbve(&[
            "--jobs",
            jobs,
            "simulate",
            path_str(&fixture("compound_poisson_atom.json")),
            "--x0",
            "1",
            "--paths",
            "200",
            "--seed",
            "11",
            "--out",
            path_str(dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.join("paths.bin")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(a.path(), "1");
    let second = run(b.path(), "2");
    assert_eq!(&first[..4], b"CBVE");
    // The headers echo the output directory; the path records must agree.
    let tail = |bytes: &[u8]| {
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        bytes[10 + len..].to_vec()
    };
    assert_eq!(tail(&first), tail(&second));
    let c = tempfile::tempdir().unwrap();
    let c_path = c.path().to_path_buf();
    let again = run(&c_path, "1");
    assert_eq!(tail(&first), tail(&again));
}

#[test]
fn zero_paths_gives_a_valid_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbve(&[
        "simulate",
        path_str(&fixture("feller.json")),
        "--x0",
        "1",
        "--paths",
        "0",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file = std::fs::File::open(dir.path().join("paths.bin")).unwrap();
    let (header, paths) = cbve::io::read_paths_binary(std::io::BufReader::new(file)).unwrap();
    assert_eq!(header.tool, "cbve");
    assert!(paths.is_empty());
}

#[test]
fn bottleneck_kills_every_path() {
    let out = cbve(&["simulate", path_str(&fixture("bottleneck.json")), "--x0", "3", "--paths", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["data"]["summary"]["extinction_fraction"], 1.0);
}

#[test]
fn csv_paths_mark_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbve(&[
        "simulate",
        path_str(&fixture("compound_poisson_atom.json")),
        "--x0",
        "1",
        "--paths",
        "3",
        "--format",
        "csv",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert!(text.lines().any(|l| l.ends_with(",left")));
    assert!(text.lines().any(|l| l.ends_with(",atom")));
}

#[test]
fn verify_exit_status_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbve(&["verify", path_str(&fixture("suites/trivial.json")), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["data"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("summary.txt").exists());

    let out = cbve(&["verify", path_str(&fixture("suites/wrong_target.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["data"][0]["outcome"], "fail");
}
