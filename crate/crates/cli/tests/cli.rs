use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures")).join(name)
}

fn bewley(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bewley"))
        .args(args)
        .env_remove("BEWLEY_FIXTURES")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn validate_accepts_bundled_profiles() {
    for name in [
        "example1.json",
        "flatzero.json",
        "dictator.json",
        "bewley_disjoint.json",
    ] {
        let out = bewley(&["validate", &path(name)]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert_eq!(json(&out)["valid"], true);
    }
}

#[test]
fn validate_reports_perception_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("example1.json")).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    doc["agents"][0]["perception"]["pieces"] = serde_json::json!([{ "g": [1.0, 1.0], "h": 1.0 }]);
    let file = dir.path().join("bad.json");
    std::fs::write(&file, doc.to_string()).unwrap();

    let out = bewley(&["validate", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["valid"], false);
    assert!(report["errors"][0]["message"]
        .as_str()
        .unwrap()
        .contains("min c = 0"));

    let out = bewley(&["audit", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_rejects_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("broken.json");
    std::fs::write(&file, "{ \"states\": [").unwrap();
    assert_eq!(
        bewley(&["validate", file.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(
        bewley(&["audit", file.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(
        bewley(&["validate", "/nonexistent/profile.json"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn audit_exit_codes_follow_outcome() {
    for (name, code, outcome) in [
        ("example1.json", 4, "converse_failure"),
        ("flatzero.json", 3, "condition_violation"),
        ("bewley_disjoint.json", 3, "condition_violation"),
        ("dictator.json", 0, "clean"),
    ] {
        let out = bewley(&["audit", &path(name), "--samples", "512"]);
        assert_eq!(out.status.code(), Some(code), "{name}");
        let report = json(&out);
        assert_eq!(report["outcome"], outcome, "{name}");
    }
}

#[test]
fn audit_of_flat_planner_carries_witnesses() {
    let out = bewley(&["audit", &path("flatzero.json")]);
    let report = json(&out);
    let witnesses = report["witnesses"].as_array().unwrap();
    assert!(!witnesses.is_empty());
    assert!(report["witness_failures"].as_array().unwrap().is_empty());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("violat"), "{stderr}");
}

#[test]
fn summary_flag_prints_restatement() {
    let out = bewley(&["audit", &path("example1.json"), "--summary"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("u₀(f(s1)) + c₀(p(s1) = 1) = 3 < 4 = u₀(g(s1))"),
        "{text}"
    );
    assert!(text.contains("converse failure"));
}

#[test]
fn audit_is_deterministic_and_seed_sensitive() {
    let run = |seed: &str| {
        bewley(&[
            "audit",
            &path("example1.json"),
            "--seed",
            seed,
            "--samples",
            "256",
        ])
        .stdout
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn dominance_reports_strict_social_preference() {
    let out = bewley(&[
        "dominance",
        &path("example1.json"),
        "--agent",
        "0",
        "--acts",
        &path("example1_acts.json"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["comparison"], "StrictlyDispreferred");
    assert!((r["forward"]["margin"].as_f64().unwrap() + 1.0).abs() < 1e-6);

    for agent in ["1", "2"] {
        let out = bewley(&[
            "dominance",
            &path("example1.json"),
            "--agent",
            agent,
            "--acts",
            &path("example1_acts.json"),
            "--f",
            "g",
            "--g",
            "f",
        ]);
        assert_eq!(json(&out)["comparison"], "Indifferent", "agent {agent}");
    }
}

#[test]
fn dominance_incomparable_for_planner_without_costs() {
    let dir = tempfile::tempdir().unwrap();
    let acts = dir.path().join("acts.json");
    std::fs::write(
        &acts,
        r#"{ "format_version": 1, "acts": [
            { "name": "bet", "outcomes": [[1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]] },
            { "name": "nothing", "outcomes": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]] } ] }"#,
    )
    .unwrap();
    let out = bewley(&[
        "dominance",
        &path("flatzero.json"),
        "--agent",
        "0",
        "--acts",
        acts.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["comparison"], "Incomparable");
}

#[test]
fn dominance_input_errors() {
    let acts = path("example1_acts.json");
    let out = bewley(&[
        "dominance",
        &path("example1.json"),
        "--agent",
        "5",
        "--acts",
        &acts,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("unknown agent"));

    let out = bewley(&[
        "dominance",
        &path("example1.json"),
        "--agent",
        "0",
        "--acts",
        &acts,
        "--f",
        "zz",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = bewley(&[
        "dominance",
        &path("flatzero.json"),
        "--agent",
        "0",
        "--acts",
        &path("dictator.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixtures_directory_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_bewley"))
        .args(["validate", "example1.json"])
        .env("BEWLEY_FIXTURES", fixture(""))
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn fixture_subcommand_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = bewley(&["fixture", "flatzero"]);
    assert_eq!(out.status.code(), Some(0));
    let file = dir.path().join("copy.json");
    std::fs::write(&file, &out.stdout).unwrap();
    assert_eq!(
        bewley(&["validate", file.to_str().unwrap()]).status.code(),
        Some(0)
    );
    assert_eq!(bewley(&["fixture", "nope"]).status.code(), Some(1));
}
