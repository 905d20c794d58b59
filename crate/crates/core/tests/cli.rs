use std::path::Path;
use std::process::{Command, Output};

fn radprm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radprm"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("spawn radprm")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "[synth]\nnum_studies = 60\ncandidates_per_study = 8\n\n[eval]\nresamples = 200\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&radprm(dir.path(), &["bogus"])), 1);
    assert_eq!(code(&radprm(dir.path(), &["verify", "--verifier", "nope"])), 1);
    assert_eq!(code(&radprm(dir.path(), &["--help"])), 0);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[synth]\nnum_studies = 10\nsurprise = 1\n").unwrap();
    let o = radprm(dir.path(), &["synth", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&radprm(dir.path(), &["reject", "--pct-grid", "0,100"])), 2);
    assert_eq!(code(&radprm(dir.path(), &["reject", "--method", "max_prob"])), 2);
}

#[test]
fn missing_artifacts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["label", "eval", "report", "train-prm"] {
        let o = radprm(dir.path(), &[cmd]);
        assert_eq!(code(&o), 3, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn best_of_n_budget_above_candidates_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(code(&radprm(dir.path(), &["synth", "--config", &cfg])), 0);
    let o = radprm(dir.path(), &["bon", "--config", &cfg, "--method", "log_prob", "--n-grid", "1,16"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = radprm(dir.path(), &["bon", "--config", &cfg, "--method", "log_prob", "--n-grid", "1,8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("bon.csv").exists());
}

#[test]
fn report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for step in [
        &["synth"][..],
        &["label"],
        &["balance"],
        &["train-mlp"],
        &["verify", "--verifier", "mlp"],
        &["eval", "--verifier", "mlp"],
        &["reject", "--method", "log_prob,neg_entropy"],
    ] {
        let mut args = step.to_vec();
        args.extend(["--config", &cfg]);
        let o = radprm(dir.path(), &args);
        assert_eq!(code(&o), 0, "{step:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&radprm(dir.path(), &["report", "--config", &cfg])), 0);
    let first = std::fs::read(dir.path().join("report.md")).unwrap();
    assert_eq!(code(&radprm(dir.path(), &["report", "--config", &cfg])), 0);
    assert_eq!(first, std::fs::read(dir.path().join("report.md")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("| mlp |") && text.contains("## Rejection curves"), "{text}");
}

#[test]
fn config_subcommand_prints_effective_toml() {
    let dir = tempfile::tempdir().unwrap();
    let o = radprm(dir.path(), &["config", "--seed", "9"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("global = 9"), "{text}");
}
