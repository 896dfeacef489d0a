use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use saddle_cli::report::COLUMNS;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_saddle"));
    c.env_remove(saddle_cli::OUT_DIR_ENV);
    c
}

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/stokes_grid8.ini")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.ini");
    fs::write(&p, text).unwrap();
    p
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let idx = COLUMNS.iter().position(|c| *c == name).unwrap();
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn reference_config_passes_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = bin().arg("run").arg(reference_config()).arg("--out").arg(dir).output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("results.csv")).unwrap());
    assert_eq!(fs::read(a.join("certificate.md")).unwrap(), fs::read(b.join("certificate.md")).unwrap());

    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(column(&text, "chain_ok").iter().all(|v| v == "true"));
    let methods = column(&text, "method");
    let row = methods.iter().position(|m| m == "bwy").unwrap();
    let rate: f64 = column(&text, "observed_rate")[row].parse().unwrap();
    let rho1: f64 = column(&text, "rho1")[row].parse().unwrap();
    assert!(rate <= rho1 + 0.02, "{rate} vs {rho1}");
}

#[test]
fn env_var_sets_output_dir_and_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nkind = random\nn = 16\nm = 6\n[run]\nmethods = bwy\n");
    let env_dir = tmp.path().join("from_env");
    let o = bin().arg("run").arg(&cfg).env(saddle_cli::OUT_DIR_ENV, &env_dir).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(env_dir.join("results.csv").exists());

    let flag_dir = tmp.path().join("from_flag");
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(&flag_dir).env(saddle_cli::OUT_DIR_ENV, tmp.path().join("unused")).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag_dir.join("results.csv").exists());
    assert!(!tmp.path().join("unused").exists());
}

#[test]
fn config_errors_exit_two_with_every_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problme]\nkind = mac_stokes\n[smoothers]\na = sgs(1.5)\n");
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1") && err.contains("did you mean `problem`"), "{err}");
    assert!(err.contains("line 4") && err.contains("(0, 1]"), "{err}");
    assert!(err.contains("problem.kind"), "{err}");
}

#[test]
fn ium_without_symmetrized_smoother_is_a_hard_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nkind = mac_stokes\n[smoothers]\nium_smoother = plain\n[run]\nmethods = ium\n");
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetrized smoother"));
}

#[test]
fn failed_hypothesis_exits_one_and_marks_theorems() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nkind = random\nn = 24\nm = 10\n[smoothers]\ns = jacobi(4)\nrescale = none\n[run]\nmethods = bwy, sium\n");
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&o), 1);
    let md = fs::read_to_string(tmp.path().join("certificate.md")).unwrap();
    assert!(md.contains("NOT APPLICABLE (hypothesis R_S⁻¹ ≥ S̄ failed)"));
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert!(column(&csv, "status").iter().all(|s| s == "not_applicable"));
    assert!(column(&csv, "hyp_rs_sbar").iter().all(|s| s == "false"));
}

#[test]
fn overrides_apply_on_top_of_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(reference_config())
        .args(["--override", "problem.grid=4", "--override", "run.methods=bwy"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert_eq!(column(&csv, "n"), vec!["24"]);
    assert_eq!(column(&csv, "method"), vec!["bwy"]);
}

#[test]
fn verify_writes_certificates_only() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().arg("verify").arg(reference_config()).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert_eq!(column(&csv, "method"), vec!["none"]);
    assert_eq!(column(&csv, "status"), vec!["pass"]);
    assert_eq!(column(&csv, "loewner_pass"), column(&csv, "loewner_applicable"));
}

#[test]
fn exact_config_reports_one_step() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/exact.ini");
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg(cfg).arg("--out").arg(tmp.path()).output().unwrap();
    // R_A = A⁻¹ is only on the boundary of the strict hypothesis.
    assert_eq!(code(&o), 1);
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert!(column(&csv, "note").iter().all(|n| n == "one-step"));
    for col in ["rho_e_up", "norm_e_d", "rho_f", "rho_t"] {
        for v in column(&csv, col) {
            assert!(v.parse::<f64>().unwrap().abs() <= 1e-10, "{col} = {v}");
        }
    }
}

#[test]
fn sweep_writes_the_landscape() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("sweep")
        .arg(reference_config())
        .args(["--grid", "delta=0:0.6:5,gamma=0:0.99:4"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    let o = bin().arg("sweep").arg(reference_config()).args(["--grid", "delta=0"]).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&o), 2);
}
