use std::process::{Command, Output};

fn vdmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdmon"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bounds_sample_size_example() {
    let out = vdmon(&["bounds", "--range", "2", "--epsilon", "1", "--delta", "0.1353352832366127"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("sample_size 4"));
}

#[test]
fn bounds_batch_size_and_stage_bounds() {
    let out = vdmon(&[
        "bounds", "--range", "2", "--epsilon", "0.5", "--delta", "0.1", "--vectors", "10",
        "--batches", "4", "--beta", "0.5", "--h", "1",
    ]);
    let text = stdout(&out);
    assert!(text.contains("batch_size 12\n"), "{text}");
    let ms: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("multistage_bound "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((ms - 1.0 / 11.0).abs() < 1e-12);
}

#[test]
fn zero_trials_is_rejected() {
    let out = vdmon(&["experiment", "--trials", "0"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "trials = 3\nparticels = 10\n").unwrap();
    let out = vdmon(&["experiment", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("particels"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    std::fs::write(&cfg, "horizon = 3\ntrials = 9\nstages = 4\n").unwrap();
    let out = vdmon(&["experiment", cfg.to_str().unwrap(), "--trials", "4", "--quiet"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 1 + 4);
}

#[test]
fn alpha_file_path_matches_inline_solving() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = dir.path().join("tiger.alpha");
    let alpha = alpha.to_str().unwrap();
    assert!(vdmon(&["solve", "tiger", "--horizon", "5", "-o", alpha]).status.success());
    let common = [
        "--model", "tiger", "--policy", "exact,pf_ei,pf_dynamic", "--particles", "15",
        "--epsilon", "3", "--trials", "30", "--seed", "17", "--quiet",
    ];
    let mut inline = vec!["experiment", "--horizon", "5"];
    inline.extend(common);
    let mut from_file = vec!["experiment", "--alpha", alpha];
    from_file.extend(common);
    let a = vdmon(&inline);
    let b = vdmon(&from_file);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn generate_reproduces_the_bundled_fixture() {
    let out = vdmon(&["generate", "--preset", "synthetic8"]);
    assert_eq!(stdout(&out), vdmon::fixtures::SYNTHETIC8);
}

#[test]
fn monitor_prints_one_row_per_stage() {
    let out = vdmon(&["monitor", "--horizon", "3", "--policy", "pf_ei", "--stages", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let header = text.lines().position(|l| l.starts_with("stage,")).unwrap();
    assert_eq!(text.lines().skip(header + 1).take_while(|l| l.starts_with(char::is_numeric)).count(), 5);
    assert!(text.contains("\nloss "));
}

#[test]
fn missing_model_fails_cleanly() {
    let out = vdmon(&["solve", "no/such/model.pomdp"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
