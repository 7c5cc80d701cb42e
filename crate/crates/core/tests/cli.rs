//! End-to-end runs of the `eitnet` binary on small configurations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eitnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eitnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A shipped config cut down to a few seconds of work.
fn small_config(dir: &Path, name: &str, overrides: &[(&str, &str)]) -> PathBuf {
    let text = std::fs::read_to_string(shipped(name)).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    for (key, value) in overrides {
        let entry = format!("{key} = {value}");
        match lines.iter_mut().find(|l| l.split('=').next().map(str::trim) == Some(key)) {
            Some(line) => *line = entry,
            None => lines.push(entry),
        }
    }
    let path = dir.join(name);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

const FAST: &[(&str, &str)] = &[
    ("epochs", "3"),
    ("n_interior", "1200"),
    ("n_boundary", "100"),
    ("layers", "[2, 8, 8, 1]"),
    ("reference_resolution", "32"),
    ("export_resolution", "24"),
    ("checkpoint_every", "2"),
];

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_forward_is_deterministic_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "phantom1_n1.cfg", FAST);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = eitnet(&["solve-forward", "--config", s(&cfg), "--seed", "1", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["u_history.csv", "u.csv", "u_dx.csv", "u.ckpt", "trace.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let history = std::fs::read_to_string(a.join("u_history.csv")).unwrap();
    assert!(history.starts_with("epoch,l2,topk,boundary,wd,tv,total,lr\n"));
    assert_eq!(history.lines().count(), 4);

    let c = dir.path().join("c");
    let o = eitnet(&["solve-forward", "--config", s(&cfg), "--seed", "2", "--out", s(&c)]);
    assert!(o.status.success());
    assert_ne!(
        std::fs::read(a.join("u_history.csv")).unwrap(),
        std::fs::read(c.join("u_history.csv")).unwrap()
    );
}

#[test]
fn forward_reference_evaluate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "phantom2_n2.cfg", FAST);
    let out = dir.path().join("run");
    for cmd in ["solve-forward", "make-reference"] {
        let o = eitnet(&[cmd, "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["u_ref.csv", "u_ref_dx.csv", "sigma_ref.csv", "trace.csv"] {
        assert!(out.join(file).exists(), "{file}");
    }

    let eval = dir.path().join("eval");
    let o = eitnet(&["evaluate", s(&out.join("u_ref.csv")), s(&out.join("u.csv")), "--out", s(&eval)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(eval.join("report.txt")).unwrap();
    assert!(report.contains("psnr = "));
    assert!(eval.join("rel_err.csv").exists());

    let o = eitnet(&["evaluate", s(&out.join("u_ref_dx.csv")), s(&out.join("u_dx.csv")), "--out", s(&eval)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let exported = dir.path().join("export");
    let o = eitnet(&[
        "export", "--checkpoint", s(&out.join("u.ckpt")), "--resolution", "24", "--name", "u", "--out", s(&exported),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(exported.join("u.csv")).unwrap(),
        std::fs::read(out.join("u.csv")).unwrap()
    );
}

#[test]
fn evaluate_identical_grids_reports_zero_mse() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.csv");
    eitnet::io::export_grid(
        |p| Ok(1.0 + p.x * p.y),
        &eitnet::geometry::Domain::UnitDisc,
        20,
        &grid,
    )
    .unwrap();
    let o = eitnet(&["evaluate", s(&grid), s(&grid), "--out", s(dir.path())]);
    assert!(o.status.success());
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("mse = 0e0"), "{report}");
    assert!(report.contains("psnr = inf"), "{report}");
}

#[test]
fn inverse_without_potential_checkpoint_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "phantom1_inverse_n1.cfg",
        &[("u_checkpoint", "\"does/not/exist.ckpt\""), ("epochs", "1")],
    );
    let o = eitnet(&["solve-inverse", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing file") && err.contains("loading potential"), "{err}");
}

#[test]
fn inverse_from_forward_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let fwd = small_config(dir.path(), "stratified.cfg", FAST);
    let out = dir.path().join("run");
    let o = eitnet(&["solve-forward", "--config", s(&fwd), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let inv = small_config(dir.path(), "stratified_inverse.cfg", FAST);
    let o = eitnet(&[
        "solve-inverse", "--config", s(&inv), "--out", s(&out), "--u-checkpoint", s(&out.join("u.ckpt")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["sigma.ckpt", "sigma.csv", "sigma_history.csv"] {
        assert!(out.join(file).exists(), "{file}");
    }
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "phantom1_n1.cfg", &[("k", "2000")]);
    let o = eitnet(&["solve-forward", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`k`") && err.contains("config"), "{err}");

    assert_eq!(eitnet(&["solve-forward"]).status.code(), Some(1));
    assert_eq!(eitnet(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(eitnet(&["--help"]).status.code(), Some(0));
    let o = eitnet(&["solve-inverse", "--config", s(&shipped("phantom1_n1.cfg"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "stratified.cfg",
        &[
            ("case", "\"harmonic-3\""),
            ("lr0", "1e3"),
            ("decay_factor", "1.0"),
            ("lambda", "1.0"),
            ("epochs", "200"),
            ("n_interior", "120"),
            ("batch_size", "120"),
            ("k", "5"),
            ("layers", "[2, 8, 1]"),
            ("checkpoint_every", "1"),
        ],
    );
    let out = dir.path().join("run");
    let o = eitnet(&["solve-forward", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("training failed"));
    // The last good state stays on disk.
    assert!(eitnet::io::load_checkpoint(&out.join("u.ckpt")).is_ok(), "{}", String::from_utf8_lossy(&o.stderr));
}
