use std::path::Path;
use std::process::{Command, Output};

fn ferrobvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ferrobvp")).args(args).output().expect("binary runs")
}

#[test]
fn help_exits_cleanly() {
    let out = ferrobvp(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["bulk", "solve", "deflate", "stability", "continue", "metric", "asymptotics", "reproduce"] {
        assert!(text.contains(cmd), "missing {cmd} in help");
    }
}

#[test]
fn bulk_lists_the_trivial_critical_point() {
    let out = ferrobvp(&["bulk", "--c", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("c,"));
    assert!(lines.any(|l| l.split(',').next_back().is_some_and(|e| e.parse::<f64>().ok() == Some(1.25))));
}

#[test]
fn negative_length_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = ferrobvp(&["solve", "--l", "-1", "--c", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn unknown_figure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = ferrobvp(&["reproduce", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn solve_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ferrobvp(&["solve", "--l", "2", "--c", "1", "--n-cells", "200", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["solution.csv", "solution.json", "residuals.csv", "manifest.json"] {
        assert!(Path::new(d).join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["command"].as_str().unwrap().contains(" solve "));
    assert_eq!(manifest["config"]["model"]["n_cells"], 200);
}

#[test]
fn repeated_solves_write_identical_data() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = ferrobvp(&["solve", "--l", "2", "--c", "1", "--n-cells", "300", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    for f in ["solution.csv", "solution.json", "residuals.csv"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}
