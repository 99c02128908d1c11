use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subslope"))
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn solve_manufactured_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = problem("quotient_n1_manufactured.toml");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let c1 = summary_value(&summary, "c1");
    assert!((c1 - summary_value(&summary, "c_expected")).abs() < 1e-6);
    assert!(summary_value(&summary, "sigma_lower") <= summary_value(&summary, "sigma_trial"));
    for f in ["phi.f64", "phi.f64.hdr", "phi.csv", "monitor.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let monitor = fs::read_to_string(dir.path().join("monitor.csv")).unwrap();
    assert!(monitor.starts_with("t,c_t,residual,newton_iters,min_cone_margin,subsolution_margin,c_upper_bound"));
    let phi = fs::read(dir.path().join("phi.f64")).unwrap();
    assert_eq!(phi.len(), 256 * 8);
}

#[test]
fn solve_is_deterministic() {
    let cfg = problem("quotient_n2_shifted.toml");
    let logs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "17"]);
            assert!(out.status.success());
            let mut bytes = fs::read(dir.path().join("monitor.csv")).unwrap();
            bytes.extend(fs::read(dir.path().join("summary.txt")).unwrap());
            bytes
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn stationary_config_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = problem("stationary.toml");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary_value(&summary, "c1"), 0.0);
    let phi = fs::read(dir.path().join("phi.f64")).unwrap();
    assert!(phi.iter().all(|&b| b == 0));
}

const NOT_SUB: &str = r#"
[geometry]
n = 2
shape = [16, 1, 1, 1]

[operator]
kind = "quotient"
k = 2
l = 1

[fields]
omega = "diag 2 1"
h = "cos(x1)"
u_sub = "0"
"#;

#[test]
fn non_subsolution_fails_with_point_and_margin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, NOT_SUB).unwrap();
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("grid point") && err.contains("margin"), "{err}");
}

#[test]
fn config_errors_name_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, NOT_SUB.replace("k = 2", "k = 7")).unwrap();
    let out = run(&["check-subsolution", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("operator.k") && err.contains("line 8"), "{err}");
}

#[test]
fn check_subsolution_reports_both_dhym_routes() {
    let cfg = problem("dhym_n2_manufactured.toml");
    let out = run(&["check-subsolution", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("f_infinity_test = subsolution"), "{text}");
    assert!(text.contains("dhym_phase_test = subsolution"), "{text}");
    assert!(text.contains("min_margin") && text.contains("mean_margin"));
}

#[test]
fn subslope_prints_bracket() {
    let cfg = problem("quotient_n2_shifted.toml");
    let out = run(&["subslope", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(summary_value(&text, "lower") <= summary_value(&text, "upper"));
    assert_eq!(summary_value(&text, "trials"), 100.0);
}

#[test]
fn subslope_without_trials_fails() {
    let cfg = problem("stationary.toml");
    let out = run(&["subslope", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn verify_selection_and_fault_hook() {
    let ok = run(&["verify", "--only", "operators,kernel"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let bad = run(&["verify", "--only", "operators", "--corrupt-gradient"]);
    assert_eq!(bad.status.code(), Some(1));

    let empty = run(&["verify", "--only", ""]);
    assert_eq!(empty.status.code(), Some(2));
    let unknown = run(&["verify", "--only", "nonsense"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn full_verify_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
