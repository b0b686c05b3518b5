use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divclosure")).arg("--out").arg(dir).args(args).output().expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn project_k3_is_the_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--kmax", "3", "project"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("profile_f1_k3.csv"));
    assert_eq!(rows.len(), 601);
    assert_eq!((rows[0][0], rows[600][0]), (-6.0, 6.0));
    // 𝓔_f1 = N(0, 5) with mass 2
    for r in &rows {
        let want = 2.0 / (10.0 * std::f64::consts::PI).sqrt() * (-r[0] * r[0] / 10.0).exp();
        assert!((r[2] - want).abs() < 1e-12);
    }
    assert!(dir.path().join("alpha_f1_k3.csv").exists());
    let manifest = std::fs::read_to_string(dir.path().join("run_manifest.txt")).unwrap();
    assert!(manifest.contains("command=project") && manifest.contains("exit_status=0"));
    assert!(manifest.contains("config_hash="));
}

#[test]
fn mixture_file_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("custom_f2.txt");
    std::fs::write(&spec, "# weight mean variance\n1 2 1\n1 -2 2\n").unwrap();
    let a = run(dir.path(), &["--kmax", "5", "--dist", "f2", "converge"]);
    assert_eq!(a.status.code(), Some(0));
    let builtin = data_rows(&dir.path().join("convergence_f2.csv"));
    let b = run(dir.path(), &["--kmax", "5", "--dist", spec.to_str().unwrap(), "converge"]);
    assert_eq!(b.status.code(), Some(0), "{}", String::from_utf8_lossy(&b.stderr));
    let file = data_rows(&dir.path().join("convergence_custom_f2.csv"));
    assert_eq!(builtin, file);
}

#[test]
fn relax_rows_decay_exponentially() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--kmax", "6", "--dist", "f3", "relax"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&dir.path().join("relax_f3_k6.csv"));
    let at_tau = rows.iter().find(|r| (r[0] - 1.0).abs() < 1e-12).unwrap();
    assert!((at_tau[1] / rows[0][1] - (-1.0f64).exp()).abs() < 1e-6);
    assert!(rows.iter().all(|r| r[3] <= 0.0));
    let conv = run(dir.path(), &["--kmax", "6", "--dist", "f3", "converge"]);
    assert_eq!(conv.status.code(), Some(0));
    let err = data_rows(&dir.path().join("convergence_f3.csv"));
    let k6 = err.iter().find(|r| r[0] == 6.0).unwrap();
    assert!((k6[1] - rows[0][1]).abs() < 1e-9 * k6[1]);
}

#[test]
fn structure_reports_spd() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--kmax", "5", "structure"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("structure_f1_k5.csv")).unwrap();
    assert!(text.contains("a0_spd,0,true"));
    assert_eq!(text.lines().filter(|l| l.starts_with("speed,")).count(), 5);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "dist = f3\nk = 3,4\ntau = 2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_divclosure"))
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--dist", "f1", "newton-diag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("newton_f1.csv")).unwrap();
    assert!(text.contains("k_list=3,4") && text.contains("tau=2"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--tol", "2", "project"]).status.code(), Some(3));
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_divclosure"))
        .args(["--config", cfg.to_str().unwrap(), "project"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
    let missing = dir.path().join("nowhere.txt");
    assert_eq!(run(dir.path(), &["--dist", missing.to_str().unwrap(), "project"]).status.code(), Some(3));
    let negative = dir.path().join("neg.txt");
    std::fs::write(&negative, "-1 0 1\n").unwrap();
    assert_eq!(
        run(dir.path(), &["--dist", negative.to_str().unwrap(), "--kmax", "3", "project"]).status.code(),
        Some(4)
    );
    let starved = dir.path().join("starved.cfg");
    std::fs::write(&starved, "max_iter = 1\nk = 9\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_divclosure"))
        .args(["--config", starved.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "project"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let manifest = std::fs::read_to_string(dir.path().join("run_manifest.txt")).unwrap();
    assert!(manifest.contains("exit_status=2"));
}
