use std::path::PathBuf;
use std::process::{Command, Output};

use quantwa::format::parse_model;
use serde_json::Value;

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name).display().to_string()
}

fn quantwa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quantwa")).args(args).env_remove("QUANTWA_THREADS").output().unwrap()
}

fn report(args: &[&str]) -> Value {
    let out = quantwa(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn validate_reports_derived_constants() {
    let r = report(&["validate", &model("quadruple_blocks.wqa")]);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["value_function"], "sum");
    assert_eq!(r["details"]["terminating"], true);
    assert_eq!(r["details"]["span"], "8");
    assert!(r.get("answer").is_none());
}

#[test]
fn validate_canonical_reproduces_the_fixture() {
    let path = model("first_letter_inf.wqa");
    let out = quantwa(&["validate", "--canonical", &path]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn extrema_answers_are_exact() {
    let r = report(&["extrema", "dist", &model("first_letter_inf.wqa"), "--lambda", "2"]);
    assert_eq!(r["bound"]["kind"], "exact");
    assert_eq!(r["answer"]["value"], "1/2");
    assert_eq!(r["parameters"]["lambda"], "2");
    let r = report(&["extrema", "expected", &model("first_letter_inf.wqa")]);
    assert_eq!(r["answer"], serde_json::json!({ "kind": "finite", "value": "2", "decimal": 2.0 }));
    assert_eq!(r["details"]["weights"], serde_json::json!(["0", "1", "2", "3", "4", "5"]));
    let exceed: Vec<&str> = r["details"]["exceed"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(exceed, ["1", "1/2", "1/2", "0", "0", "0"]);
}

#[test]
fn negative_thresholds_parse() {
    let r = report(&["extrema", "dist", &model("first_letter_inf.wqa"), "--lambda", "-1/2"]);
    assert_eq!(r["answer"]["value"], "0");
}

#[test]
fn limavg_expected_on_the_balance_example() {
    let r = report(&["limavg", "expected", &model("ab_balance.wqa"), "--epsilon", "1/100"]);
    assert_eq!(r["bound"]["kind"], "absolute");
    assert_eq!(r["bound"]["epsilon"], "1/100");
    let e = r["answer"]["decimal"].as_f64().unwrap();
    assert!((e - 1.0 / 3.0).abs() <= 0.01, "{e}");
    assert_eq!(r["details"]["bottom_components"].as_array().unwrap().len(), 1);
}

#[test]
fn limavg_with_a_strict_block_length() {
    let r = report(&["limavg", "expected", &model("swing_both.wqa"), "--epsilon", "1/4", "--k", "2", "--strict-k"]);
    assert_eq!(r["answer"]["value"], "0");
    assert_eq!(r["parameters"]["k"], 2);
}

#[test]
fn sum_distribution_reports_its_window() {
    let r = report(&["sum", "dist", &model("quadruple_blocks_capped.wqa"), "--epsilon", "1/10", "--lambda", "-1"]);
    assert_eq!(r["bound"]["kind"], "window");
    let lower = quantwa::rational::parse(r["bound"]["lower"].as_str().unwrap()).unwrap();
    let upper = quantwa::rational::parse(r["bound"]["upper"].as_str().unwrap()).unwrap();
    assert!(lower <= upper);
    assert!(&upper - &lower <= quantwa::rational::ratio(1, 20));
    assert!(r["parameters"]["cutoff"].as_u64().is_some());
}

#[test]
fn sum_budget_exhaustion_exits_with_three() {
    let out =
        quantwa(&["sum", "expected", &model("quadruple_blocks.wqa"), "--epsilon", "1/1000", "--cutoff-budget", "10"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn recurrent_check_shows_witnesses() {
    let r = report(&["recurrent-check", &model("swing_left.wqa")]);
    assert_eq!(r["details"]["all_words"]["recurrent"], true);
    let r = report(&["recurrent-check", &model("escape.wqa")]);
    assert_eq!(r["details"]["all_words"]["recurrent"], false);
}

#[test]
fn sample_reports_an_estimate_not_an_answer() {
    let args = ["sample", &model("ab_balance.wqa"), "--samples", "40", "--length", "256", "--seed", "3"];
    let r = report(&args);
    assert!(r.get("answer").is_none());
    assert_eq!(r["estimate"]["count"], 40);
    assert_eq!(r["parameters"]["seed"], 3);
    assert_eq!(report(&args)["estimate"], r["estimate"]);
}

#[test]
fn determinise_writes_a_deterministic_model() {
    let out = scratch("ab_balance_det.wqa");
    let r = report(&[
        "determinise",
        &model("ab_balance.wqa"),
        "--epsilon",
        "1/10",
        "-o",
        out.to_str().unwrap(),
        "--compare",
        "--samples",
        "100",
        "--length",
        "1024",
    ]);
    assert_eq!(r["details"]["comparison"]["violations"], 0);
    let doc = parse_model(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let a = &doc.automaton;
    assert_eq!(a.initial().len(), 1);
    for q in 0..a.num_states() {
        for l in 0..a.num_letters() {
            assert!(a.successors(q, l).len() <= 1);
        }
    }
    let again = quantwa(&["validate", out.to_str().unwrap()]);
    assert!(again.status.success());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(quantwa(&[]).status.code(), Some(1));
    assert_eq!(quantwa(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(quantwa(&["sum", "dist", &model("quadruple_blocks.wqa"), "--epsilon", "1/2"]).status.code(), Some(1));
    assert_eq!(quantwa(&["sum", "expected", &model("quadruple_blocks.wqa"), "--epsilon", "x"]).status.code(), Some(1));
    assert_eq!(quantwa(&["--help"]).status.code(), Some(0));
    assert_eq!(quantwa(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_models_exit_with_two() {
    let bad = scratch("bad.wqa");
    std::fs::write(&bad, "wqa 1\nalphabet a\nautomaton\nvalue sum\nstates q\ninitial r\n").unwrap();
    let out = quantwa(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
    assert_eq!(quantwa(&["validate", "no/such/file.wqa"]).status.code(), Some(2));
    let out = quantwa(&["sum", "expected", &model("ab_balance.wqa"), "--epsilon", "1/2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_answers() {
    let args = ["sum", "dist", &model("quadruple_blocks.wqa"), "--epsilon", "1/20", "--lambda", "-1"];
    let one = report(&[&["--threads", "1"], &args[..]].concat());
    let many = report(&[&["--threads", "4"], &args[..]].concat());
    assert_eq!(one["answer"], many["answer"]);
}

#[test]
fn limavg_report_shows_the_scc_classification() {
    let r = report(&["limavg", "expected", &model("escape.wqa"), "--epsilon", "1/10"]);
    assert_eq!(r["answer"]["value"], "1");
    let sccs = r["details"]["bottom_components"][0]["sccs"].as_array().unwrap();
    let permanent = |name: &str| sccs.iter().find(|s| s["states"] == name).unwrap()["permanent"].clone();
    assert_eq!(permanent("{qI}"), true);
    assert_eq!(permanent("{qF}"), false);
}
