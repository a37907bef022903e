use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calabi-lab"))
        .args(args)
        .current_dir(cwd)
        .env("KAHLER_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_and_describe() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["list"], tmp.path());
    assert!(o.status.success());
    for name in ["max-smoothing", "kr-criterion", "spike", "acceptance"] {
        assert!(stdout(&o).contains(name));
    }
    let o = bin(&["describe", "max-smoothing"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("crossing") && text.contains("collar"));
    let all = stdout(&bin(&["describe", "all"], tmp.path()));
    assert!(all.contains("kr-criterion:") && all.contains("pinsker:"));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["describe", "no-such"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max-smoothing"));
    assert_eq!(bin(&["run", "no-such"], tmp.path()).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(bin(&["run", "spike", "--set", "broken"], tmp.path()).status.code(), Some(2));
}

#[test]
fn q_above_p_is_rejected_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(
        &["run", "kr-criterion", "--out", "out", "--set", "exponents.p=1", "--set", "exponents.q=2"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn kr_criterion_pipeline_writes_a_reproducible_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "# hand-written\nexperiment = \"kr-criterion\"\nseed = 3\n\n[backend]\nkind = \"round-p1\"\nresolution = 128\n\n[exponents]\np = 2\nq = 1\n";
    fs::write(tmp.path().join("run.toml"), cfg).unwrap();
    let o = bin(&["run", "--config", "run.toml", "--out", "a"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let dir = tmp.path().join("a");
    for f in ["params.json", "config.toml", "stats.csv", "verdict.json", "criterion.csv", "trajectory/metadata.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let params: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("params.json")).unwrap()).unwrap();
    assert_eq!(params["config_text"].as_str().unwrap(), cfg);
    let verdict: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["passed"], true);
    assert!(verdict["verdicts"].as_array().unwrap().iter().any(|v| v["name"] == "length_finite"));
    let csv = fs::read_to_string(dir.join("criterion.csv")).unwrap();
    assert!(csv.starts_with("t,g,running_integral"));

    // same config, second directory: byte-identical statistics
    let o = bin(&["run", "--config", "run.toml", "--out", "b"], tmp.path());
    assert!(o.status.success());
    assert_eq!(fs::read(dir.join("stats.csv")).unwrap(), fs::read(tmp.path().join("b/stats.csv")).unwrap());

    // the directory alone reproduces itself
    let o = bin(&["verify", "a"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("reproduced: true"));

    // and its resolved config runs again
    let o = bin(&["run", "--config", "a/config.toml", "--out", "c"], tmp.path());
    assert!(o.status.success());
    assert_eq!(fs::read(dir.join("stats.csv")).unwrap(), fs::read(tmp.path().join("c/stats.csv")).unwrap());
}

#[test]
fn seeded_runs_are_deterministic_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |out: &str, seed: &str| {
        let o = bin(
            &["run", "q-domination", "--out", out, "--seed", seed, "--set", "schedule.trials=6"],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", stdout(&o));
        fs::read(tmp.path().join(out).join("stats.csv")).unwrap()
    };
    let a = run("s1", "11");
    let b = run("s2", "11");
    let c = run("s3", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn failing_invariant_exits_1_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    // p′ = 1 under q = 2 breaks the fixed thresholds of the domination sweep
    let o = bin(
        &["run", "q-domination", "--out", "x", "--set", "exponents.p_prime=1", "--set", "schedule.trials=10"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL no_counterexamples"));
    let verdict = fs::read_to_string(tmp.path().join("x/verdict.json")).unwrap();
    assert!(verdict.contains("\"passed\": false"));
}

#[test]
fn verify_rejects_a_non_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["verify", "."], tmp.path()).status.code(), Some(2));
}
