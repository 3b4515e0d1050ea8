mod common;

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use axum::http::StatusCode;
use cbsbench_core::corpus::sample_corpus_dir;
use serde_json::{json, Value};

fn cbsbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbsbench"))
        .args(args)
        .env_remove("CBS_SCORER_ENDPOINT")
        .env_remove("CBS_GENERATE_ENDPOINT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_run_config(dir: &Path, name: &str, transform: Value, scorer: Value) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let cfg = json!({
        "corpus_path": sample_corpus_dir(),
        "scorer": scorer,
        "transform": transform,
        "seed": 3,
        "output_path": format!("{name}.results.jsonl"),
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn reference() -> Value {
    json!({"model_id": "reference", "kind": "reference"})
}

#[test]
fn validate_sample_corpus() {
    let out = cbsbench(&["validate", p(&sample_corpus_dir())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("corpus version"));
    assert!(text.contains("literature"));
}

#[test]
fn validate_rejects_broken_corpus() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["aspects.jsonl", "prompts.jsonl", "targets.jsonl"] {
        std::fs::copy(sample_corpus_dir().join(f), dir.path().join(f)).unwrap();
    }
    let prompts = std::fs::read_to_string(dir.path().join("prompts.jsonl")).unwrap();
    let mut lines: Vec<Value> = prompts.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let flag = lines[0]["has_first_person_pronoun"].as_bool().unwrap();
    lines[0]["has_first_person_pronoun"] = json!(!flag);
    let body: String = lines.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(dir.path().join("prompts.jsonl"), body).unwrap();
    assert_eq!(code(&cbsbench(&["validate", p(dir.path())])), 1);
    assert_eq!(code(&cbsbench(&["validate", "/nonexistent/corpus"])), 1);
}

#[test]
fn run_report_compare_delta() {
    let dir = tempfile::tempdir().unwrap();
    let vanilla = write_run_config(dir.path(), "vanilla", json!({"kind": "identity"}), reference());
    let token = write_run_config(dir.path(), "token", json!({"kind": "culture_token"}), reference());
    let prodrop = write_run_config(dir.path(), "prodrop", json!({"kind": "pronoun_drop"}), reference());
    for cfg in [&vanilla, &token, &prodrop] {
        let out = cbsbench(&["run", "--config", p(cfg)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("Avg"));
    }
    let res = |n: &str| dir.path().join(format!("{n}.results.jsonl"));

    let csv = cbsbench(&["report", "--format", "csv", p(&res("vanilla")), p(&res("token"))]);
    assert_eq!(code(&csv), 0);
    let csv = stdout(&csv);
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 12);

    let md = stdout(&cbsbench(&["report", "--format", "markdown", p(&res("vanilla"))]));
    assert!(md.contains("| Model"));

    let cmp = cbsbench(&["compare", p(&res("vanilla")), p(&res("token")), "--format", "csv"]);
    assert_eq!(code(&cmp), 0);
    assert!(stdout(&cmp).lines().count() >= 11);

    let delta = cbsbench(&[
        "delta",
        "--english-like",
        p(&res("vanilla")),
        "--prodrop",
        p(&res("prodrop")),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&delta), 0);
    assert!(stdout(&delta).starts_with("Model,CBS_Eng-like,CBS_ProDrop,"));

    // Missing results file and unknown format are configuration errors.
    assert_eq!(code(&cbsbench(&["report", p(&dir.path().join("missing.jsonl"))])), 1);
    assert_eq!(code(&cbsbench(&["report", "--format", "html", p(&res("vanilla"))])), 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_run_config(dir.path(), "a", json!({"kind": "identity"}), reference());
    let results = dir.path().join("a.results.jsonl");
    assert_eq!(code(&cbsbench(&["run", "--config", p(&cfg)])), 0);
    let first = std::fs::read(&results).unwrap();
    assert_eq!(code(&cbsbench(&["run", "--config", p(&cfg)])), 0);
    assert_eq!(first, std::fs::read(&results).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cbsbench(&["frobnicate"])), 1);
    assert_eq!(code(&cbsbench(&["--help"])), 0);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"corpus_path": "x"}"#).unwrap();
    assert_eq!(code(&cbsbench(&["run", "--config", p(&bad)])), 1);

    let remote_no_endpoint = write_run_config(
        dir.path(),
        "remote",
        json!({"kind": "identity"}),
        json!({"model_id": "m", "kind": "remote"}),
    );
    assert_eq!(code(&cbsbench(&["run", "--config", p(&remote_no_endpoint)])), 1);

    let dead = write_run_config(
        dir.path(),
        "dead",
        json!({"kind": "identity"}),
        json!({"model_id": "m", "kind": "remote", "endpoint": "http://127.0.0.1:1"}),
    );
    let out = cbsbench(&["run", "--config", p(&dead)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("dead.results.jsonl").exists());
}

#[test]
fn remote_run_against_stub() {
    let base = common::fill_mask_stub("stub-mlm", 4, |body| {
        let results: Vec<Value> = body["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| {
                let p = (c.as_str().unwrap().chars().count() % 7) as f64 / 10.0;
                json!({"candidate": c, "subword_probabilities": [p], "aggregate": p})
            })
            .collect();
        (StatusCode::OK, json!({"model": "stub-mlm", "results": results}))
    });
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_run_config(
        dir.path(),
        "stub",
        json!({"kind": "identity"}),
        json!({"model_id": "stub-mlm", "kind": "remote", "endpoint": base}),
    );
    let out = cbsbench(&["run", "--config", p(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("stub-mlm"));
}

fn label_file(dir: &Path, name: &str, rows: &[(&str, &str, &str)]) -> PathBuf {
    let path = dir.join(name);
    let body: String = rows
        .iter()
        .map(|(g, who, label)| {
            format!(
                "{}\n",
                json!({"generation_id": g, "annotator_id": who, "label": label, "timestamp": "2024-05-01T10:00:00Z"})
            )
        })
        .collect();
    std::fs::write(&path, body).unwrap();
    path
}

fn generations_file(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("generations.jsonl");
    let body: String = (0..n)
        .map(|i| {
            format!(
                "{}\n",
                json!({
                    "id": format!("m/food-1/{i}"),
                    "gen_prompt_id": "food-1",
                    "aspect_id": "food",
                    "model_id": "m",
                    "prompt_text": "على العشاء سنأكل",
                    "text": format!("طبق {i}"),
                    "sample_index": i,
                    "max_tokens": 64,
                })
            )
        })
        .collect();
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn kappa_and_labels_report() {
    let dir = tempfile::tempdir().unwrap();
    let gens = generations_file(dir.path(), 4);
    let ids: Vec<String> = (0..4).map(|i| format!("m/food-1/{i}")).collect();
    let a = label_file(
        dir.path(),
        "a.jsonl",
        &[(&ids[0], "a1", "arab"), (&ids[1], "a1", "arab"), (&ids[2], "a1", "western"), (&ids[3], "a1", "neutral")],
    );
    let b = label_file(
        dir.path(),
        "b.jsonl",
        &[(&ids[0], "a2", "arab"), (&ids[1], "a2", "western"), (&ids[2], "a2", "western"), (&ids[3], "a2", "neutral")],
    );
    let out = cbsbench(&["kappa", p(&a), p(&b)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("kappa       0.6364"), "{text}");
    assert!(text.contains("p_o         0.7500"));

    let mixed = label_file(dir.path(), "mixed.jsonl", &[(&ids[0], "a1", "arab"), (&ids[1], "a2", "arab")]);
    assert_eq!(code(&cbsbench(&["kappa", p(&mixed), p(&b)])), 1);

    let both = label_file(
        dir.path(),
        "both.jsonl",
        &[
            (&ids[0], "a1", "arab"),
            (&ids[0], "a2", "arab"),
            (&ids[1], "a1", "western"),
            (&ids[1], "a2", "western"),
            (&ids[2], "a1", "neutral"),
            (&ids[2], "a2", "arab"),
        ],
    );
    let out = cbsbench(&["labels-report", "--generations", p(&gens), "--labels", p(&both)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    assert_eq!(row, "food\tm\t4\t2\t1\t1\t50.00\t50.00\t0.00");
    let out = cbsbench(&[
        "labels-report",
        "--generations",
        p(&gens),
        "--labels",
        p(&both),
        "--resolution",
        "first_annotator",
    ]);
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    assert_eq!(row, "food\tm\t4\t3\t0\t1\t33.33\t33.33\t33.33");

    let dangling = label_file(dir.path(), "dangling.jsonl", &[("ghost", "a1", "arab")]);
    assert_eq!(code(&cbsbench(&["labels-report", "--generations", p(&gens), "--labels", p(&dangling)])), 1);
}

#[test]
fn gen_against_stub_backend() {
    let base = common::generate_stub(|body| {
        let n = body["n"].as_u64().unwrap() as usize;
        (StatusCode::OK, json!({"generations": vec!["نص"; n], "seed": body["seed"]}))
    });
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    std::fs::write(
        &cfg,
        json!({"model_id": "stub-lm", "endpoint": base, "samples_per_prompt": 3, "seed": 9, "output_path": "gens.jsonl"})
            .to_string(),
    )
    .unwrap();
    let out = cbsbench(&["gen", "--config", p(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(dir.path().join("gens.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 32 * 3);

    let short = common::generate_stub(|_| (StatusCode::OK, json!({"generations": []})));
    std::fs::write(
        &cfg,
        json!({"model_id": "stub-lm", "endpoint": short, "samples_per_prompt": 3, "output_path": "gens2.jsonl"})
            .to_string(),
    )
    .unwrap();
    assert_eq!(code(&cbsbench(&["gen", "--config", p(&cfg)])), 2);
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_annotation_api() {
    let dir = tempfile::tempdir().unwrap();
    let gens = generations_file(dir.path(), 2);
    let labels = dir.path().join("labels.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_cbsbench"))
        .args([
            "serve",
            "--annotation",
            "--generations",
            p(&gens),
            "--labels",
            p(&labels),
            "--addr",
            "127.0.0.1:0",
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let _server = Server(child);
    let base = first.trim().strip_prefix("listening on ").unwrap().to_string();

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent.get(&format!("{base}/api/tasks/next?annotator=a1")).call().unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let task: Value = resp.body_mut().read_json().unwrap();
    let resp = agent
        .post(&format!("{base}/api/labels"))
        .send_json(json!({"generation_id": task["generation_id"], "annotator_id": "a1", "label": "arab"}))
        .unwrap();
    assert_eq!(resp.status().as_u16(), 201);
    let mut resp = agent.get(&format!("{base}/api/progress?annotator=a1")).call().unwrap();
    let progress: Value = resp.body_mut().read_json().unwrap();
    assert_eq!(progress, json!({"labeled": 1, "total": 2}));
    // Labels land in the append-only file.
    let stored = std::fs::read_to_string(&labels).unwrap();
    assert_eq!(stored.lines().count(), 1);
}

#[test]
fn serve_requires_annotation_flag() {
    let dir = tempfile::tempdir().unwrap();
    let gens = generations_file(dir.path(), 1);
    let out = cbsbench(&["serve", "--generations", p(&gens), "--labels", p(&dir.path().join("l.jsonl"))]);
    assert_eq!(code(&out), 1);
}
