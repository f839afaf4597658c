use std::path::PathBuf;
use std::process::{Command, Output};

fn blockres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockres")).args(args).env_remove("BLOCKRES_SEED").output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    root.join(name).to_string_lossy().into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bundled_scenarios_pass() {
    for name in [
        "three_four_level_parties.json",
        "block_diagonal_input.json",
        "qutrit_fine_three_ancillas.json",
        "rotated_blocks.json",
    ] {
        let out = blockres(&["run", &scenario(name)]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&out)["passed"], true);
    }
}

#[test]
fn two_block_superposition_reports_one_bit_per_stage() {
    let out = blockres(&["run", &scenario("three_four_level_parties.json"), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("stage,measure,value_bits"));
    for line in lines {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((value - 1.0).abs() < 1e-10, "{line}");
    }
}

#[test]
fn rank_mismatch_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"name":"bad","plan":{"d":2,"n":1,"mode":"coarse","r":2,"ranks_A":[2,1]},"input_state":{"random":{"rank":1}}}"#,
    )
    .unwrap();
    let out = blockres(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plan.ranks_A"));
}

#[test]
fn wrong_state_dimension_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dim.json");
    std::fs::write(
        &path,
        r#"{"name":"dim","plan":{"d":2,"n":1,"mode":"fine"},"input_state":{"explicit":[[[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]}}"#,
    )
    .unwrap();
    let out = blockres(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input_state.explicit"));
}

#[test]
fn unknown_check_is_rejected_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("check.json");
    std::fs::write(
        &path,
        r#"{"name":"c","plan":{"d":2,"n":1,"mode":"fine"},"input_state":{"random":{"rank":1}},"checks":["round_trip","nope"]}"#,
    )
    .unwrap();
    let out = blockres(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checks[1]"));
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(blockres(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
}

#[test]
fn canonical_is_reproducible_apart_from_timing() {
    let strip = |out: &Output| {
        let mut v = json(out);
        v["elapsed_ms"] = serde_json::Value::Null;
        v
    };
    let a = blockres(&["canonical", "--seed", "5"]);
    let b = blockres(&["canonical", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(strip(&a), strip(&b));
    let c = blockres(&["canonical", "--seed", "6"]);
    assert_ne!(strip(&a)["measures"], strip(&c)["measures"]);
}

#[test]
fn seed_environment_variable_overrides_scenario_seed() {
    let run = |seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_blockres"))
            .args(["run", &scenario("qutrit_fine_three_ancillas.json")])
            .env("BLOCKRES_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        json(&out)
    };
    let a = run("100");
    assert_eq!(a["seed"], 100);
    assert_ne!(a["measures"], run("101")["measures"]);
}

#[test]
fn selftest_passes_and_fails_under_tiny_tolerance() {
    let ok = blockres(&["selftest", "--trials", "5", "--seed", "9"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let strict = blockres(&["selftest", "--trials", "5", "--seed", "9", "--tau-ent", "1e-16"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("FAIL"));
}

#[test]
fn saved_report_converts_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = blockres(&["canonical", "--seed", "2", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = blockres(&["report", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("stage,measure,value_bits\n"));
    assert!(text.contains("after_B1,c_r,"));
}
