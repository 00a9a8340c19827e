use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn prioq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prioq"))
        .args(args)
        .env_remove("PRIOQ_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_model(dir: &tempfile::TempDir, text: &str) -> String {
    let path = dir.path().join("model.json");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn analyze_table_shows_class_two_wait() {
    let iid = model("iid_two_class.json");
    let out = prioq(&["analyze", "--model", iid.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("2 ")).unwrap();
    assert!(row.contains("1.708333"), "{row}");
    assert!(text.contains("# model: "));
}

#[test]
fn table_numbers_round_trip_from_json() {
    let iid = model("bursty.json");
    let path = iid.to_str().unwrap();
    let table = stdout(&prioq(&["analyze", "--model", path]));
    let json: serde_json::Value = serde_json::from_str(&stdout(&prioq(&[
        "analyze", "--model", path, "--format", "json",
    ])))
    .unwrap();
    let report = &json["report"];
    let fields = [
        "lambda",
        "rho",
        "eq_mean_h",
        "w_pr",
        "w_np",
        "d_pr",
        "u_pr",
        "u_np",
    ];
    for (k, class) in report["classes"].as_array().unwrap().iter().enumerate() {
        let row = table
            .lines()
            .find(|l| l.starts_with(&format!("{} ", k + 1)))
            .unwrap();
        let printed: Vec<f64> = row
            .split_whitespace()
            .skip(1)
            .map(|c| c.parse().unwrap())
            .collect();
        for (field, shown) in fields.iter().zip(printed) {
            let exact = class[field].as_f64().unwrap();
            assert!(
                (shown - exact).abs() <= 5e-7 * exact.abs().max(1.0),
                "{field}: {shown} vs {exact}"
            );
        }
    }
    assert_eq!(json["manifest"]["command"], "analyze");
    assert!(json["manifest"]["duration_ms"].is_null());
}

#[test]
fn unstable_model_exits_3() {
    let out = prioq(&[
        "analyze",
        "--model",
        model("unstable.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("rho = 1.04"), "{}", stderr(&out));
    let out = prioq(&[
        "simulate",
        "--model",
        model("unstable.json").to_str().unwrap(),
        "--slots",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(&dir, "{\n  \"classes\": [\n    {\"p\": 0.5,, }\n  ]\n}\n");
    let out = prioq(&["analyze", "--model", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn batch_at_zero_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(
        &dir,
        r#"{"classes": [{"p": 0.5,
            "alpha": [{"prob": 1.0, "batch": {"values": [0, 1], "probs": [0.5, 0.5]}}],
            "T": [[{"prob": 0.5, "batch": {"values": [1], "probs": [1.0]}}]],
            "service": {"values": [1], "probs": [1.0]}}]}"#,
    );
    for cmd in ["analyze", "validate"] {
        let out =
            prioq(&[cmd, "--model", &path, "--quick"][..if cmd == "validate" { 4 } else { 3 }]);
        assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
        assert!(stderr(&out).contains("invalid"), "{}", stderr(&out));
    }
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let iid = model("iid_two_class.json");
    let args = [
        "simulate",
        "--model",
        iid.to_str().unwrap(),
        "--discipline",
        "np",
        "--slots",
        "2e4",
        "--reps",
        "4",
        "--seed",
        "42",
        "--format",
        "json",
    ];
    let a = prioq(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_prioq"))
        .args(args)
        .env("PRIOQ_THREADS", "3")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["manifest"]["seed"], 42);
    let first = &doc["estimates"][0];
    assert_eq!(first["metric"], "W[1]");
    assert_eq!(first["estimate"]["values"].as_array().unwrap().len(), 4);
}

#[test]
fn single_replication_has_no_half_width() {
    let iid = model("iid_two_class.json");
    let path = iid.to_str().unwrap();
    let out = prioq(&[
        "simulate", "--model", path, "--reps", "1", "--slots", "5000",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("unavailable"));
    let out = prioq(&[
        "simulate", "--model", path, "--reps", "1", "--slots", "5000", "--format", "json",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["estimates"][0]["estimate"]["half_width_95"].is_null());
}

#[test]
fn quick_validate_runs_identities_only() {
    let iid = model("iid_two_class.json");
    let out = prioq(&[
        "validate",
        "--model",
        iid.to_str().unwrap(),
        "--quick",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = doc["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert!(checks
        .iter()
        .all(|c| !c["name"].as_str().unwrap().starts_with("np:")));
    assert!(doc["manifest"]["seed"].is_null());
}

#[test]
fn validate_with_simulation_passes_on_iid_model() {
    let iid = model("iid_two_class.json");
    let out = prioq(&[
        "validate",
        "--model",
        iid.to_str().unwrap(),
        "--slots",
        "2e5",
        "--reps",
        "10",
    ]);
    assert!(out.status.success(), "{}\n{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("np: W[2]"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let dst = dir.path().join("report.json");
    let iid = model("iid_two_class.json");
    let out = prioq(&[
        "analyze",
        "--model",
        iid.to_str().unwrap(),
        "--format",
        "json",
        "--timing",
        "--out",
        dst.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dst).unwrap()).unwrap();
    assert!(doc["manifest"]["duration_ms"].as_f64().unwrap() >= 0.0);
    assert!((doc["report"]["classes"][1]["w_pr"].as_f64().unwrap() - 41.0 / 24.0).abs() < 1e-12);
}

#[test]
fn bad_flags_are_rejected() {
    let iid = model("iid_two_class.json");
    let out = prioq(&[
        "simulate",
        "--model",
        iid.to_str().unwrap(),
        "--slots",
        "100",
        "--warmup",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = prioq(&["analyze", "--model", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(2));
}
