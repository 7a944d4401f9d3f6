use std::process::Command;

fn rcsl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rcsl")).args(args).output().expect("spawn rcsl")
}

#[test]
fn lower_bound_csv_to_stdout() {
    let out = rcsl(&["lower-bound", "--u", "16,32"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("method,instance,seed,u,width"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",7,"), "{}", rows[0]);
    assert!(rows[1].contains(",15,"), "{}", rows[1]);
}

#[test]
fn stitching_json_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stitch.json");
    let out = rcsl(&[
        "counterexample",
        "--kind",
        "stitching",
        "--seeds",
        "0",
        "--mc-episodes",
        "2000",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let exact = rows.iter().find(|r| r["method"] == "mixture").unwrap();
    assert!((exact["achieved_return"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(exact["passed"], true);
}

#[test]
fn env_build_writes_mdp_and_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcsl(&["env", "build", "--kind", "linearq", "--u", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mdp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("linearq_u4.mdp.json")).unwrap())
            .unwrap();
    assert!(mdp.is_object());
    let data = std::fs::read_to_string(dir.path().join("linearq_u4.dataset.jsonl")).unwrap();
    assert!(data.lines().count() > 1);
    for line in data.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }

    let out = rcsl(&["env", "build", "--kind", "reward-ambiguity", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("ambiguity_m1.mdp.json").exists());
    assert!(dir.path().join("ambiguity_m2.dataset.jsonl").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(rcsl(&["linearq-sim", "--u", "abc"]).status.code(), Some(1));
    assert_eq!(rcsl(&["counterexample"]).status.code(), Some(1));
    assert_eq!(rcsl(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(rcsl(&["linearq-sim", "--ql-widths", "u/0"]).status.code(), Some(1));
}

#[test]
fn invalid_parameters_exit_one() {
    let out = rcsl(&["lower-bound", "--u", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(rcsl(&["--help"]).status.code(), Some(0));
    assert_eq!(rcsl(&["--version"]).status.code(), Some(0));
}

#[test]
fn failed_checks_exit_two() {
    let out =
        rcsl(&["mbrcsl-maze", "--seeds", "0", "--epochs", "1", "--lr", "1e-6", "--eval-episodes", "20"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("mbrcsl,") && l.contains(",false,")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed"));
}
