//! Command-line error contract: failures exit nonzero and name the stage
//! that failed, successes exit zero, and the log summarizer reads what the
//! replay writes.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[events]
seed = 1
day_count = 12

[harness]
split_day = 9
test_attacks = [
  { mode = "uninformed", start_day = 10.0, seed = 103 },
]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfauth"))
        .args(args)
        .output()
        .expect("spawning the binary")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Failures must name the stage so a scripted caller can tell a bad config
/// from a bad input file without parsing prose.
fn assert_fails_in_stage(output: &Output, stage: &str, context: &str) {
    assert!(
        !output.status.success(),
        "{context}: expected a failure, got exit 0\nstdout: {}",
        stdout_of(output)
    );
    let stderr = stderr_of(output);
    let expected = format!("error: stage {stage}:");
    assert!(
        stderr.starts_with(&expected),
        "{context}: stderr does not start with {expected:?}:\n{stderr}"
    );
}

#[test]
fn a_missing_config_file_fails_in_the_config_stage() {
    let output = run(&[
        "gen",
        "--config",
        "/nonexistent/experiment.toml",
        "--out",
        "/tmp",
    ]);
    assert_fails_in_stage(&output, "config", "gen with a missing config");
}

#[test]
fn an_unknown_config_key_fails_in_the_config_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[events]\nnonsense_knob = 3\n").unwrap();
    let output = run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_fails_in_stage(&output, "config", "gen with an unknown key");
}

#[test]
fn a_missing_trace_fails_in_the_trace_stage() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "run",
        "--trace",
        "/nonexistent/owner.trace",
        "--model",
        "/nonexistent/model.txt",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_fails_in_stage(&output, "trace", "run with a missing trace");
}

#[test]
fn a_malformed_model_fails_in_the_model_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let gen_out = dir.path().join("gen");
    let generated = run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        gen_out.to_str().unwrap(),
    ]);
    assert!(
        generated.status.success(),
        "gen failed: {}",
        stderr_of(&generated)
    );

    let model = dir.path().join("model.txt");
    std::fs::write(&model, "this is not a model\n").unwrap();
    let output = run(&[
        "run",
        "--trace",
        gen_out.join("owner.trace").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_fails_in_stage(&output, "model", "run with a malformed model");
}

#[test]
fn an_out_of_range_attack_index_fails_in_the_graft_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let gen_out = dir.path().join("gen");
    let generated = run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        gen_out.to_str().unwrap(),
    ]);
    assert!(
        generated.status.success(),
        "gen failed: {}",
        stderr_of(&generated)
    );

    let output = run(&[
        "graft",
        "--config",
        config.to_str().unwrap(),
        "--trace",
        gen_out.join("owner.trace").to_str().unwrap(),
        "--attack",
        "7",
        "--out",
        dir.path().join("graft").to_str().unwrap(),
    ]);
    assert_fails_in_stage(&output, "graft", "graft with attack index 7 of 1");
}

fn write_log(path: &Path, rows: &[&str]) {
    let mut text = String::from("# t,as_fore,as_back,ard_fore,ard_back,threat,verdict\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn report_summarizes_a_decision_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("decisions.log");
    write_log(
        &log,
        &[
            "600,0.1,0.0,-1.2,0.0,0.98,legitimate",
            "900,0.3,0.1,-0.9,0.1,0.91,legitimate",
            "1200,4.5,0.2,3.1,0.2,0.12,suspicious",
            "1500,9.0,0.2,7.8,0.2,-0.95,adversary",
        ],
    );
    let output = run(&["report", log.to_str().unwrap()]);
    assert!(
        output.status.success(),
        "report failed: {}",
        stderr_of(&output)
    );
    let stdout = stdout_of(&output);
    for line in [
        "windows=4",
        "legitimate=2",
        "suspicious=1",
        "adversary=1",
        "recognition_rate=0.5",
    ] {
        assert!(
            stdout.contains(line),
            "summary is missing {line:?}:\n{stdout}"
        );
    }
}

#[test]
fn report_rejects_an_unknown_verdict_with_its_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("decisions.log");
    write_log(
        &log,
        &[
            "600,0.1,0.0,-1.2,0.0,0.98,legitimate",
            "900,0.3,0.1,-0.9,0.1,0.91,confused",
        ],
    );
    let output = run(&["report", log.to_str().unwrap()]);
    assert_fails_in_stage(&output, "report", "report with a bad verdict");
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("line 3"),
        "error does not point at the offending line:\n{stderr}"
    );
}

#[test]
fn report_rejects_a_log_with_no_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("decisions.log");
    write_log(&log, &[]);
    let output = run(&["report", log.to_str().unwrap()]);
    assert_fails_in_stage(&output, "report", "report on a decision-free log");
}

#[test]
fn a_bare_invocation_prints_usage_and_fails() {
    let output = run(&[]);
    assert!(!output.status.success());
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("Usage") || stderr.contains("usage"),
        "no usage text on a bare invocation:\n{stderr}"
    );
}

#[test]
fn the_seed_flag_changes_what_gen_synthesizes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "1"), (&out_b, "2")] {
        let output = run(&[
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "gen failed: {}",
            stderr_of(&output)
        );
    }
    let trace_a = std::fs::read(out_a.join("owner.trace")).unwrap();
    let trace_b = std::fs::read(out_b.join("owner.trace")).unwrap();
    assert_ne!(
        trace_a, trace_b,
        "different seeds produced identical traces"
    );
}
