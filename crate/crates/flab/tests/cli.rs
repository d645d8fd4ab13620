//! End-to-end runs of the job binary: exit codes, output files, catalog.

use std::path::Path;
use std::process::Command;

fn run(dir: &Path, job: &str, envs: &[(&str, &str)]) -> (i32, String, String) {
    let job_path = dir.join("job.json");
    std::fs::write(&job_path, job).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flab"));
    cmd.arg("--job")
        .arg(&job_path)
        .arg("--out")
        .arg(dir.join("out"));
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn no_job_prints_the_catalog() {
    let out = Command::new(env!("CARGO_BIN_EXE_flab")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("classify"));
    assert!(text.contains("acceptance"));
}

#[test]
fn classify_job_succeeds_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(dir.path(), r#"{"task":"classify","expr":"t^(3/2)"}"#, &[]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let results: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/results.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(results["task"], "classify");
    assert_eq!(results["classification"]["case"], "I");
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["precision_bits"], 128);
}

#[test]
fn malformed_json_exits_three_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(dir.path(), "{\"task\":\n \"classify\",", &[]);
    assert_eq!(code, 3);
    assert!(stderr.contains("job.json:"), "stderr: {stderr}");
}

#[test]
fn unknown_task_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(dir.path(), r#"{"task":"frobnicate"}"#, &[]);
    assert_eq!(code, 3);
}

#[test]
fn case_v_refusal_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(
        dir.path(),
        r#"{"task":"predict","expr":"1/2*t^2 + t^(2/3)","shifts":[0],"signs":[1],"lambda":"uniform"}"#,
        &[],
    );
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("hypothesis unmet"));
}

#[test]
fn bad_expression_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(dir.path(), r#"{"task":"classify","expr":"t^^2"}"#, &[]);
    assert_eq!(code, 1);
}

#[test]
fn seed_env_var_lands_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(
        dir.path(),
        r#"{"task":"ortho","expr":"t^(3/2)","weight":{"kind":"bernoulli","seed":7},"N":4096}"#,
        &[("FLAB_SEED", "99")],
    );
    assert_eq!(code, 0);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 99);
}

#[test]
fn results_bytes_match_across_thread_counts() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let job = r#"{"task":"correlate","expr":"t^(3/2)","shifts":[1,0],"signs":[1,-1],"N":65536}"#;
    for (dir, threads) in [(&dir1, "1"), (&dir2, "4")] {
        let job_path = dir.path().join("job.json");
        std::fs::write(&job_path, job).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_flab"))
            .arg("--job")
            .arg(&job_path)
            .arg("--out")
            .arg(dir.path().join("out"))
            .arg("--threads")
            .arg(threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["results.json", "series.csv"] {
        let a = std::fs::read(dir1.path().join("out").join(name)).unwrap();
        let b = std::fs::read(dir2.path().join("out").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between 1 and 4 threads");
    }
}
