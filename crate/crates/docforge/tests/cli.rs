use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use docforge::io::{load_corpus, read_verdicts};
use docforge_core::VerdictState;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn docforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docforge"))
        .args(args)
        .env_remove("DOCFORGE_CONFIG")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

struct Scratch(TempDir);

impl Scratch {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, body: &str) -> String {
        std::fs::write(self.path(name), body).unwrap();
        self.arg(name)
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = docforge(&["verify", "--bogus"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn zero_parallelism_rejected() {
    let out = docforge(&["verify", "--input", "a", "--output", "b", "--parallelism", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_input_file_is_a_usage_error() {
    let s = Scratch::new();
    let out = docforge(&["verify", "--input", &s.arg("absent.jsonl"), "--output", &s.arg("v.jsonl")]);
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_matches_golden_verdicts() {
    let s = Scratch::new();
    let out = docforge(&["verify", "--input", &fixture("golden_corpus.jsonl"), "--output", &s.arg("v.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let got = std::fs::read(s.path("v.jsonl")).unwrap();
    assert_eq!(got, std::fs::read(fixture("golden_verdicts.jsonl")).unwrap());
    let parsed = read_verdicts(&s.path("v.jsonl")).unwrap();
    assert!(parsed.is_clean());
    assert_eq!(parsed.records.len(), 12);
}

#[test]
fn bad_lines_are_reported_and_skipped() {
    let s = Scratch::new();
    let good = r#"{"id":"ok","candidates":[{"source_id":"a","markdown":"x"},{"source_id":"b","markdown":"x"}]}"#;
    let input = s.write("in.jsonl", &format!("{good}\nnot json\n{{\"candidates\":[]}}\n"));
    let out = docforge(&["verify", "--input", &input, "--output", &s.arg("v.jsonl")]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("line 3: missing required field 'id'"), "{err}");
    assert_eq!(lines(&s.path("v.jsonl")).len(), 1);
}

#[test]
fn consensus_threshold_flag_overrides_config() {
    let s = Scratch::new();
    let config = s.write("c.toml", "consensus_threshold = 0.5\n");
    let out = docforge(&[
        "verify",
        "--config",
        &config,
        "--consensus-threshold",
        "1.0",
        "--print-config",
        "--input",
        &fixture("golden_corpus.jsonl"),
        "--output",
        &s.arg("v.jsonl"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("consensus_threshold = 1.0"), "{}", stderr(&out));
    let v = lines(&s.path("v.jsonl"));
    // The consensual sample stops short of perfect agreement and escalates.
    assert_eq!(v[2]["layer"], "L3");
    assert_eq!(v[9]["layer"], "L2");
}

#[test]
fn config_from_environment() {
    let s = Scratch::new();
    let config = s.write("c.toml", "consensus_threshold = 0.5\n");
    let out = Command::new(env!("CARGO_BIN_EXE_docforge"))
        .args(["verify", "--print-config", "--input", &fixture("golden_corpus.jsonl"), "--output", &s.arg("v.jsonl")])
        .env("DOCFORGE_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("consensus_threshold = 0.5"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let s = Scratch::new();
    let config = s.write("c.toml", "consensus_weights = [0.5, 0.5, 0.5]\n");
    let out = docforge(&["report", "--config", &config, "--verdicts", &fixture("golden_verdicts.jsonl")]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sum to 1"), "{}", stderr(&out));
}

#[test]
fn gdpo_collapse_fixture() {
    let s = Scratch::new();
    let out = docforge(&["gdpo", "--input", &fixture("collapse_rewards.jsonl"), "--output", &s.arg("a.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let a = lines(&s.path("a.jsonl"));
    assert_eq!(a.len(), 2);
    assert_eq!(a[0]["source_id"], "text-only");
    let hat = |i: usize| a[i]["A_hat"].as_f64().unwrap();
    assert!((hat(0) - 1.0).abs() < 1e-5 && (hat(1) + 1.0).abs() < 1e-5, "{a:?}");
    assert_eq!(a[0]["A_grpo"].as_f64().unwrap(), 0.0);
    assert_eq!(a[1]["A_grpo"].as_f64().unwrap(), 0.0);
    assert!(a[0]["A"]["text"].as_f64().unwrap() > 0.99);
}

#[test]
fn singleton_group_is_a_data_error() {
    let s = Scratch::new();
    let input = s.write(
        "r.jsonl",
        concat!(
            r#"{"prompt_id":"p","rewards":{"text":1.0,"formula":0.0,"table":0.0,"struct":0.0}}"#,
            "\n",
            r#"{"prompt_id":"p","rewards":{"text":0.0,"formula":1.0,"table":0.0,"struct":0.0}}"#,
            "\n",
            r#"{"prompt_id":"q","rewards":{"text":0.5,"formula":0.5,"table":0.5,"struct":0.5}}"#,
            "\n"
        ),
    );
    let out = docforge(&["gdpo", "--input", &input, "--output", &s.arg("a.jsonl")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("\"q\""));
    assert_eq!(lines(&s.path("a.jsonl")).len(), 2);
}

#[test]
fn rewards_feed_gdpo() {
    let s = Scratch::new();
    let out = docforge(&["rewards", "--input", &fixture("golden_corpus.jsonl"), "--output", &s.arg("r.jsonl")]);
    // Eight golden samples carry no reference.
    assert_eq!(code(&out), 2);
    let r = lines(&s.path("r.jsonl"));
    assert_eq!(r.len(), 15);
    assert!(r.iter().all(|l| l["rewards"]["gated"].is_boolean()));
    let stripped: Vec<&Value> = r.iter().filter(|l| l["prompt_id"] == "golden-02-stripped-label").collect();
    assert_eq!(stripped.len(), 3);
    let out = docforge(&["gdpo", "--input", &s.arg("r.jsonl"), "--output", &s.arg("a.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(lines(&s.path("a.jsonl")).len(), 15);
}

#[test]
fn dpcs_scores_referenced_samples() {
    let s = Scratch::new();
    let semantic = s.write("sem.jsonl", "{\"sample_id\":\"golden-09-clean-text\",\"score\":0.0}\n");
    let out = docforge(&[
        "dpcs",
        "--input",
        &fixture("golden_corpus.jsonl"),
        "--semantic",
        &semantic,
        "--output",
        &s.arg("d.jsonl"),
    ]);
    assert_eq!(code(&out), 2);
    let d = lines(&s.path("d.jsonl"));
    assert_eq!(d.len(), 5);
    let by_id = |id: &str| d.iter().find(|l| l["sample_id"] == id).unwrap();
    assert_eq!(by_id("golden-10-clean-table")["total"], 100.0);
    assert_eq!(by_id("golden-10-clean-table")["tier"], "high");
    assert_eq!(by_id("golden-09-clean-text")["total"], 90.0);
}

#[test]
fn repair_check_rejects_non_pending_targets() {
    let s = Scratch::new();
    let repairs = s.write(
        "rep.jsonl",
        concat!(
            r#"{"sample_id":"golden-07-confusable-char","modality":"text","pre_text":"L0t 10 c0il 11, i11 01.","post_text":"Lot 10 coil 11, ill 01."}"#,
            "\n",
            r#"{"sample_id":"golden-09-clean-text","modality":"text","pre_text":"x","post_text":"y"}"#,
            "\n"
        ),
    );
    let out = docforge(&[
        "repair-check",
        "--input",
        &fixture("golden_corpus.jsonl"),
        "--verdicts",
        &fixture("golden_verdicts.jsonl"),
        "--repairs",
        &repairs,
        "--output",
        &s.arg("g.jsonl"),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("not pending"), "{}", stderr(&out));
    let g = lines(&s.path("g.jsonl"));
    assert_eq!(g.len(), 1);
    assert_eq!(g[0]["sample_id"], "golden-07-confusable-char");
    assert!(g[0]["admitted"].is_boolean());
    assert!(g[0]["red"].as_f64().unwrap() > 0.0);
}

#[test]
fn diagnose_then_targeted_augment() {
    let s = Scratch::new();
    let out = docforge(&[
        "diagnose",
        "--verdicts",
        &fixture("golden_verdicts.jsonl"),
        "--output",
        &s.arg("profile.json"),
        "--report",
        &s.arg("report.txt"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(s.path("profile.json")).unwrap()).unwrap();
    assert_eq!(doc["verdicts"], 12);
    let total: f64 = ["structural", "recognition", "relational", "format"]
        .iter()
        .map(|k| doc["profile"][k].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(!std::fs::read_to_string(s.path("report.txt")).unwrap().is_empty());

    let out = docforge(&[
        "augment",
        "--weakness-profile",
        &s.arg("profile.json"),
        "--plan-size",
        "40",
        "--seed",
        "7",
        "--emit",
        &s.arg("aug.jsonl"),
        "--provenance",
        &s.arg("prov.jsonl"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let emitted = load_corpus(&s.path("aug.jsonl")).unwrap();
    assert!(emitted.is_clean());
    let prov = lines(&s.path("prov.jsonl"));
    assert_eq!(prov.len(), 40);
    let admitted = prov.iter().filter(|p| p["status"] == "admitted").count();
    assert_eq!(admitted, emitted.records.len());
    for p in prov.iter().filter(|p| p["status"] == "admitted") {
        assert_eq!(p["state"], "pass");
    }
}

#[test]
fn augmented_records_reverify_as_pass() {
    let s = Scratch::new();
    let out = docforge(&[
        "augment",
        "--templates",
        "table:4x3,align:3",
        "--plan-size",
        "20",
        "--emit",
        &s.arg("aug.jsonl"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(s.path("aug.jsonl.provenance.jsonl").exists());
    let out = docforge(&["verify", "--input", &s.arg("aug.jsonl"), "--output", &s.arg("v.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_verdicts(&s.path("v.jsonl")).unwrap();
    assert!(v.records.iter().all(|v| v.state == VerdictState::Pass));
}

#[test]
fn bad_template_is_a_usage_error() {
    let s = Scratch::new();
    let out = docforge(&["augment", "--templates", "table:0x3", "--emit", &s.arg("aug.jsonl")]);
    assert_eq!(code(&out), 1);
}

#[test]
fn report_text_and_json() {
    let out = docforge(&["report", "--verdicts", &fixture("golden_verdicts.jsonl")]);
    assert_eq!(code(&out), 0);
    assert!(!out.stdout.is_empty());
    let out = docforge(&["report", "--json", "--verdicts", &fixture("golden_verdicts.jsonl")]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}
