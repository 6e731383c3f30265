use std::path::Path;
use std::process::{Command, Output};

use matfree::experiment::read_solution_csv;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matfree")).args(args).output().expect("spawn matfree")
}

fn history_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run(&["--level", "3", "--iters", "40", "--out-dir", out, "--compare-direct", "--export-vtk", "--export-mesh"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    for s in ["richardson", "cheb2", "cheb3"] {
        let rows = history_rows(&dir.path().join(format!("history_{s}.csv")));
        assert_eq!(rows.len(), 41);
        // residual and error columns
        assert!(rows.iter().all(|r| r.len() == 2));
        if s != "cheb2" {
            assert!(rows[40][1] < rows[0][1]);
        }
        let vtk = std::fs::read_to_string(dir.path().join(format!("solution_{s}.vtk"))).unwrap();
        assert!(vtk.contains("POINTS 81") && vtk.contains("SCALARS u"));
    }
    let u = read_solution_csv(&dir.path().join("solution_cheb3.csv")).unwrap();
    assert_eq!(u.len(), 81);
    assert!(dir.path().join("nodes.txt").exists() && dir.path().join("elements.txt").exists());
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("cheb3"));
}

#[test]
fn direct_only_has_no_history() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["--level", "2", "--solver", "direct", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(read_solution_csv(&dir.path().join("solution_direct.csv")).unwrap().len(), 25);
    assert!(!dir.path().join("history_direct.csv").exists());
}

#[test]
fn root_order_flag() {
    let dir = tempfile::tempdir().unwrap();
    let peak = |order: &str| {
        let sub = dir.path().join(order);
        let res = run(&[
            "--level", "4", "--solver", "cheb2", "--cycle-n", "16", "--iters", "32",
            "--root-order", order, "--out-dir", sub.to_str().unwrap(),
        ]);
        assert!(res.status.success());
        let rows = history_rows(&sub.join("history_cheb2.csv"));
        rows.iter().map(|r| r[0]).fold(0.0, f64::max) / rows[0][0]
    };
    assert!(peak("descending") <= 1.0 + 1e-12);
    assert!(peak("ascending") > 1.0);
}

#[test]
fn bad_arguments_exit_two() {
    for args in [
        &["--level", "0"][..],
        &["--level", "13"],
        &["--nu", "-1"],
        &["--cycle-n", "0"],
        &["--threads", "0"],
        &["--solver", "gmres"],
        &["--level"],
    ] {
        let res = run(args);
        assert_eq!(res.status.code(), Some(2), "{args:?}");
        assert!(!res.stderr.is_empty());
    }
}

#[test]
fn help_exits_zero() {
    let res = run(&["--help"]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("--root-order"));
}
