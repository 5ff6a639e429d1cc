//! End-to-end checks of the `zoldsd` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zoldsd::trace::TRACE_HEADER;

fn zoldsd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zoldsd"));
    c.env_remove("ZOLDSD_OUT");
    c
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.cfg", "objective = quadratic\noptimizer = ldsd\nseed = 1\nhorizon = 100\n");
    let out = dir.path().join("out");
    ok(zoldsd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap());
    let files = csv_files(&out);
    assert_eq!(files.len(), 1);
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(lines.count(), 100);

    // Same config and seed: same bytes.
    let again = dir.path().join("again");
    ok(zoldsd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&again).output().unwrap());
    assert_eq!(std::fs::read(&files[0]).unwrap(), std::fs::read(&csv_files(&again)[0]).unwrap());
}

#[test]
fn env_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.cfg", "objective = quadratic\noptimizer = zo_ldsd\nseed = 2\nbudget = 600\n");
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    ok(zoldsd()
        .env("ZOLDSD_OUT", &env_dir)
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .output()
        .unwrap());
    assert!(!flag_dir.exists());
    let files = csv_files(&env_dir);
    assert_eq!(files.len(), 1);
    let mut r = csv::Reader::from_path(&files[0]).unwrap();
    let last = r.records().last().unwrap().unwrap();
    assert_eq!(&last[2], "600");
}

#[test]
fn seeds_flag_writes_one_trace_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.cfg", "objective = quadratic\noptimizer = zo_sgd\nseed = 0\nbudget = 120\n");
    ok(zoldsd().args(["run", "--seeds", "1,2,3", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap());
    assert_eq!(csv_files(dir.path()).len(), 3);
}

#[test]
fn compare_writes_summary_and_refuses_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let base = "objective = quadratic\nseed = 0\nbudget = 600\n";
    let a = write(dir.path(), "a.cfg", &format!("{base}optimizer = zo_ldsd\n"));
    let b = write(dir.path(), "b.cfg", &format!("{base}optimizer = zo_adamm\nlabel = adamm_k1\nK = 1\n"));
    let out = dir.path().join("out");
    let stdout = ok(zoldsd()
        .args(["compare", "--seeds", "1,2", "--config"])
        .arg(&a)
        .arg("--config")
        .arg(&b)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    assert!(stdout.contains("adamm_k1"), "{stdout}");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("label,optimizer,K,budget,iterations,oracle_calls"));
    assert!(rows[1].starts_with("zo_ldsd,zo_ldsd,5,600,100,600,2,"), "{}", rows[1]);
    assert!(rows[2].starts_with("adamm_k1,zo_adamm,1,600,300,600,2,"), "{}", rows[2]);

    // Rerunning reproduces the summary.
    let out2 = dir.path().join("out2");
    ok(zoldsd()
        .args(["compare", "--seeds", "1,2", "--config"])
        .arg(&a)
        .arg("--config")
        .arg(&b)
        .arg("--out")
        .arg(&out2)
        .output()
        .unwrap());
    assert_eq!(summary, std::fs::read_to_string(out2.join("summary.csv")).unwrap());

    let c = write(dir.path(), "c.cfg", "objective = quadratic\nseed = 0\nbudget = 606\noptimizer = zo_sgd\n");
    let refused = zoldsd().args(["compare", "--config"]).arg(&a).arg("--config").arg(&c).arg("--out").arg(&out).output().unwrap();
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("budget mismatch"));
}

#[test]
fn bad_inputs_exit_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = zoldsd().args(["verify", "no_such_suite", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let cfg = write(dir.path(), "bad.cfg", "objective = quadratic\noptimizer = ldsd\nseed = 1\nK = 0\n");
    let bad = zoldsd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains('K'));
}

#[test]
fn verify_and_landscape_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(zoldsd().args(["verify", "hessian_bound", "--out"]).arg(dir.path()).output().unwrap());
    assert!(stdout.contains("[PASS]") && !stdout.contains("[FAIL]"), "{stdout}");

    ok(zoldsd()
        .args(["landscape", "--resolution", "5", "--samples", "2000", "--out"])
        .arg(dir.path())
        .output()
        .unwrap());
    let grid = std::fs::read_to_string(dir.path().join("landscape.csv")).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "mu1,mu2,mean,stderr");
    assert_eq!(grid.lines().count(), 1 + 25);
}
