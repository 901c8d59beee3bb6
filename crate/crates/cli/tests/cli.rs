use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn caosim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caosim")).args(args).current_dir(cwd).output().unwrap()
}

fn config(t_end: f64, out: &str) -> String {
    format!(
        "# small forced run\nnx = 8\nny = 8\nnz_a = 6\nnz_o = 6\ndt = 0.01\nt_end = {t_end}\n\
         output_every = 3\nforcing = random\nforcing_amplitude = 0.2\nout_dir = {out}\n"
    )
}

#[test]
fn run_writes_the_documented_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.txt"), config(0.1, "out")).unwrap();
    let o = caosim(&["run", "c.txt"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    for f in ["config.txt", "budgets.csv", "checkpoint.caos", "snap_00000000.caos", "snap_00000009.caos", "snap_00000010.caos"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("budgets.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,E_a,E_o,diss_h_a,diss_v_a,diss_h_o,diss_v_o,drag,forcing_work,residual,V_L3cubed,H1_a,H1_o"
    );
    assert_eq!(lines.count(), 10);
}

#[test]
fn zero_end_time_writes_only_the_initial_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.txt"), config(0.0, "z")).unwrap();
    assert!(caosim(&["run", "c.txt"], tmp.path()).status.success());
    let snaps: Vec<_> = fs::read_dir(tmp.path().join("z"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("snap_"))
        .collect();
    assert_eq!(snaps.len(), 1);
}

#[test]
fn resume_matches_the_straight_run_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("full.txt"), config(0.12, "full")).unwrap();
    fs::write(tmp.path().join("part.txt"), config(0.05, "part")).unwrap();
    assert!(caosim(&["run", "full.txt"], tmp.path()).status.success());
    assert!(caosim(&["run", "part.txt"], tmp.path()).status.success());
    let o = caosim(&["resume", "part", "--t-end", "0.12"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["checkpoint.caos", "budgets.csv", "snap_00000012.caos"] {
        assert_eq!(fs::read(tmp.path().join("full").join(f)).unwrap(), fs::read(tmp.path().join("part").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn diagnose_and_norms_read_the_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.txt"), config(0.15, "out")).unwrap();
    assert!(caosim(&["run", "c.txt"], tmp.path()).status.success());
    let d = caosim(&["diagnose", "out"], tmp.path());
    assert!(d.status.success());
    let text = String::from_utf8(d.stdout).unwrap();
    assert!(text.starts_with("step,t,E_a"));
    assert_eq!(text.lines().count(), 1 + 6);
    let n = caosim(&["norms", "out", "--spec", "0.25,2,2,1", "--spec", "0,2,2,1"], tmp.path());
    assert!(n.status.success(), "{}", String::from_utf8_lossy(&n.stderr));
    assert_eq!(String::from_utf8(n.stdout).unwrap().lines().count(), 3);
}

#[test]
fn mms_prints_second_order_vertical_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = caosim(&["mms", "--case", "linear-ocean", "--ladder", "vertical", "--refine", "3"], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let ratios: Vec<f64> = text
        .lines()
        .skip(2)
        .filter_map(|l| l.split_whitespace().nth(2)?.parse().ok())
        .collect();
    assert_eq!(ratios.len(), 2, "{text}");
    assert!(ratios.iter().all(|r| (3.2..=4.8).contains(r)), "{text}");
}

#[test]
fn exit_codes_follow_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| caosim(args, tmp.path()).status.code().unwrap();
    assert_eq!(code(&["bogus"]), 1);
    assert_eq!(code(&["mms", "--case", "nope"]), 1);
    fs::write(tmp.path().join("bad.txt"), "nx = 15\n").unwrap();
    let o = caosim(&["run", "bad.txt"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nx must be even, ≥ 4"));
    assert_eq!(code(&["run", "missing.txt"]), 4);
    assert_eq!(code(&["diagnose", "nowhere"]), 4);
    fs::create_dir(tmp.path().join("empty")).unwrap();
    fs::write(tmp.path().join("empty/config.txt"), config(0.1, "empty")).unwrap();
    assert_eq!(code(&["resume", "empty", "--t-end", "1"]), 4);
}
