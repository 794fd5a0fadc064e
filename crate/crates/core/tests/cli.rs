use std::process::{Command, Output};

use serde_json::Value;

fn cdopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

const ROW_KEYS: [&str; 11] = [
    "problem",
    "solver",
    "beta",
    "fval",
    "iter",
    "nfev",
    "ngev",
    "gradnorm",
    "feas",
    "wall_time_s",
    "seed",
];

fn keys_in_order(line: &str) -> Vec<String> {
    // serde_json::Value sorts keys, so read the order from the raw text.
    let mut keys = Vec::new();
    let mut rest = line;
    while let Some(i) = rest.find("\":") {
        let start = rest[..i].rfind('"').expect("opening quote");
        keys.push(rest[start + 1..i].to_string());
        rest = &rest[i + 2..];
    }
    keys
}

#[test]
fn bench_json_row_has_keys_in_order() {
    let o = cdopt(&["bench", "hyperbola2d", "--solver", "lbfgs", "--beta", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.trim();
    assert_eq!(line.lines().count(), 1);
    assert_eq!(keys_in_order(line), ROW_KEYS);
    let v: Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["problem"], "hyperbola2d");
    assert_eq!(v["solver"], "lbfgs");
    assert!(v["feas"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn bench_csv_has_header_and_one_row() {
    let o = cdopt(&["bench", "nsm", "--solver", "trncg", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], ROW_KEYS.join(","));
    assert_eq!(lines[1].split(',').count(), 11);
    assert!(lines[1].starts_with("nsm-10x2,trncg,2.0,"));
}

#[test]
fn bench_is_reproducible_except_wall_time() {
    let run = || {
        let o = cdopt(&["bench", "ncm", "--m", "15", "--s", "3", "--solver", "cg", "--seed", "4"]);
        let mut v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_s");
        v.to_string()
    };
    assert_eq!(run(), run());
}

#[test]
fn bench_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("row.json");
    let o = cdopt(&[
        "bench",
        "geneig",
        "--m",
        "40",
        "--s",
        "3",
        "--density",
        "0.1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(std::fs::read_to_string(&path).unwrap().trim()).unwrap();
    assert_eq!(v["problem"], "geneig-40x3");
}

#[test]
fn beta_auto_records_the_estimate() {
    let o = cdopt(&["bench", "nsm", "--beta-auto", "--solver", "lbfgs"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let beta = v["beta"].as_f64().unwrap();
    assert!(beta.is_finite() && beta > 0.0);
}

#[test]
fn iteration_cap_gives_status_2_with_a_row() {
    let o = cdopt(&["bench", "nsm", "--max-iter", "1", "--tol-grad", "1e-12"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["iter"], 1);
}

#[test]
fn usage_errors_give_status_64() {
    for args in [
        vec!["bench"],
        vec!["bench", "nope"],
        vec!["bench", "nsm", "--beta", "1", "--beta-auto"],
        vec!["bench", "nsm", "--beta", "-1"],
        vec!["bench", "geneig", "--m", "3", "--s", "5"],
        vec!["frobnicate"],
        vec!["verify", "--kinds", "torus"],
        vec!["contour", "--nx", "0"],
    ] {
        let o = cdopt(&args);
        assert_eq!(
            o.status.code(),
            Some(64),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn help_exits_cleanly() {
    let o = cdopt(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("bench"));
}

#[test]
fn unreadable_matrix_file_gives_status_74() {
    let o = cdopt(&["bench", "ncm", "--ncm-matrix", "/nonexistent/g.txt"]);
    assert_eq!(o.status.code(), Some(74));
}

#[test]
fn verify_filtered_by_kind_passes() {
    let o = cdopt(&["verify", "--kinds", "sphere,stiefel", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(!text.is_empty());
    for line in text.lines() {
        assert_eq!(keys_in_order(line), ["name", "pass", "worst", "tol", "n"]);
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], true, "{line}");
        let name = v["name"].as_str().unwrap();
        assert!(
            name.starts_with("sphere") || name.starts_with("stiefel") || !name.contains("/operator_axioms"),
            "{name}"
        );
    }
}

#[test]
fn verify_output_is_deterministic() {
    let a = cdopt(&["verify", "--kinds", "oblique", "--seed", "9"]);
    let b = cdopt(&["verify", "--kinds", "oblique", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn injected_fault_gives_status_1() {
    let o = cdopt(&["verify", "--kinds", "sphere", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let failing = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["pass"] == false)
        .count();
    assert!(failing > 0);
}

#[test]
fn contour_emits_the_grid() {
    let o = cdopt(&[
        "contour", "--nx", "5", "--ny", "3", "--xmin", "-1", "--xmax", "1", "--ymin", "-1", "--ymax", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,h,phi");
    assert_eq!(lines.len(), 1 + 15);
    assert!(lines.contains(&"0,0,2.5,nan"), "{text}");
    assert_eq!(text.matches("nan").count(), 1);
}
