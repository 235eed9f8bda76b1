use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sparqlgen_core::kg_client::fixture::{FixtureEndpoint, FixtureScript, Reply};

fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn sparqlgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparqlgen"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(o), stderr(o));
}

/// Ten LC-QuAD 2.0 records from the bundled fixture plus a config pointing
/// at them.
fn mini_run(dir: &Path) -> PathBuf {
    let all: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(core_fixture("lcquad2_sample.json")).unwrap()).unwrap();
    let ten: Vec<&Value> = all.iter().filter(|r| r["question"].is_string()).take(10).collect();
    let data = dir.join("mini.json");
    std::fs::write(&data, serde_json::to_string(&ten).unwrap()).unwrap();
    let config = dir.join("run.toml");
    let text = format!(
        r#"seed = 21
output_dir = "{out}"
folds = 5

[dataset]
kind = "lcquad2"
paths = ["{data}"]

[pgn]
hidden_size = 12
embed_size = 8
attention_size = 12
input_dim = 8
epochs = 2
batch_size = 4
max_decode_len = 30
beam_width = 3
"#,
        out = dir.join("out").display(),
        data = data.display(),
    );
    std::fs::write(&config, text).unwrap();
    config
}

fn read_lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn prepare_emits_samples_and_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_run(dir.path());
    let cfg = config.to_str().unwrap();
    let first = sparqlgen(&["--config", cfg, "prepare"]);
    assert_ok(&first);
    assert!(stdout(&first).contains("records: 10"), "{}", stdout(&first));
    assert!(stdout(&first).contains("copy-required:"));

    let out = dir.path().join("out");
    let mut samples = Vec::new();
    for split in ["train", "dev", "test"] {
        samples.extend(read_lines(&out.join("fold0").join(format!("{split}.jsonl"))));
    }
    assert_eq!(samples.len(), 10);
    for s in &samples {
        assert_eq!(s["input_text"].as_str().unwrap().matches("[SEP]").count(), 2);
    }
    for name in ["sentinels.tsv", "splits.json", "stats.json", "records.jsonl", "fold4/uncoverable.tsv"] {
        assert!(out.join(name).exists(), "{name}");
    }

    let snapshot = |root: &Path| -> BTreeMap<String, Vec<u8>> {
        walk(root).into_iter().map(|p| (p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap())).collect()
    };
    let before = snapshot(&out);
    assert_ok(&sparqlgen(&["--config", cfg, "prepare"]));
    assert_eq!(before, snapshot(&out));

    // a different seed changes the splits
    let other = dir.path().join("other");
    assert_ok(&sparqlgen(&["--config", cfg, "--seed", "22", "--output-dir", other.to_str().unwrap(), "prepare"]));
    assert_ne!(std::fs::read(out.join("splits.json")).unwrap(), std::fs::read(other.join("splits.json")).unwrap());
}

fn walk(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn missing_dataset_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[dataset]\npaths = [\"/nonexistent/lcquad.json\"]\n").unwrap();
    let o = sparqlgen(&["--config", config.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap(), "prepare"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/lcquad.json"), "{}", stderr(&o));

    let o = sparqlgen(&["--config", "/nonexistent/run.toml", "prepare"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(sparqlgen(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn evaluate_without_decode_output_names_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_run(dir.path());
    let cfg = config.to_str().unwrap();
    let o = sparqlgen(&["--config", cfg, "--endpoint-url", "http://127.0.0.1:9/sparql", "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("splits.json") && stderr(&o).contains("sparqlgen prepare"), "{}", stderr(&o));

    assert_ok(&sparqlgen(&["--config", cfg, "prepare"]));
    let o = sparqlgen(&["--config", cfg, "--endpoint-url", "http://127.0.0.1:9/sparql", "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("beams_test.jsonl") && err.contains("sparqlgen decode --split test"), "{err}");

    let o = sparqlgen(&["--config", cfg, "analyze-errors"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eval.jsonl") && stderr(&o).contains("sparqlgen evaluate"), "{}", stderr(&o));
}

fn table_counts(text: &str) -> BTreeMap<String, usize> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with("Total"))
        .map(|l| {
            let rest = l.trim_end().rsplit_once('%').map(|(a, _)| a).unwrap();
            let mut fields: Vec<&str> = rest.split_whitespace().collect();
            fields.pop();
            let count: usize = fields.pop().unwrap().parse().unwrap();
            (fields.join(" "), count)
        })
        .collect()
}

#[test]
fn analyze_errors_reproduces_hand_labels() {
    let pairs: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(core_fixture("taxonomy_pairs.json")).unwrap()).unwrap();
    let label = |tag: &str| match tag {
        "TripleFlip" => "Triple flip",
        "WrongVar" => "Wrong variable",
        "WrongIntent" => "Wrong intent",
        "CopyError" => "Copy error",
        "CopyMorph" => "Copy morphing",
        "SyntaxError" => "Syntax error",
        _ => "Other",
    };
    let mut expected: BTreeMap<String, usize> = BTreeMap::new();
    for p in &pairs {
        *expected.entry(label(p["label"].as_str().unwrap()).to_string()).or_default() += 1;
    }
    let o = sparqlgen(&["analyze-errors", "--pairs", core_fixture("taxonomy_pairs.json").to_str().unwrap()]);
    assert_ok(&o);
    let got: BTreeMap<String, usize> = table_counts(&stdout(&o)).into_iter().filter(|(_, n)| *n > 0).collect();
    assert_eq!(got, expected, "{}", stdout(&o));
    assert!(stdout(&o).contains(&format!("{:<16} {:>6}", "Total", pairs.len())), "{}", stdout(&o));
}

fn gold_of(records: &[Value], id: &str) -> String {
    records.iter().find(|r| r["id"] == id).unwrap()["gold_sparql"].as_str().unwrap().to_string()
}

#[test]
fn full_pipeline_on_fixture_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_run(dir.path());
    let cfg = config.to_str().unwrap();
    let out = dir.path().join("out");

    let labels = FixtureEndpoint::start(FixtureScript::new().otherwise(Reply::empty("label"))).unwrap();
    assert_ok(&sparqlgen(&["--config", cfg, "--endpoint-url", &labels.url(), "prepare"]));
    assert!(labels.request_count() > 0);
    assert_ok(&sparqlgen(&["--config", cfg, "train"]));
    assert!(out.join("fold0/pgn.ckpt").exists());
    assert_ok(&sparqlgen(&["--config", cfg, "decode", "--split", "train"]));
    assert_ok(&sparqlgen(&["--config", cfg, "decode"]));

    let o = sparqlgen(&["--config", cfg, "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--endpoint-url"), "{}", stderr(&o));

    // Swap the barely trained model's beams for valid candidates: the gold
    // query first, then two that answer wrongly.
    let records = read_lines(&out.join("records.jsonl"));
    let mut script = FixtureScript::new().otherwise(Reply::iris("x", &["http://ex.org/wrong"]));
    for split in ["train", "test"] {
        let path = out.join(format!("fold0/beams_{split}.jsonl"));
        let mut lines = String::new();
        for (n, b) in read_lines(&path).into_iter().enumerate() {
            let id = b["id"].as_str().unwrap();
            let gold = gold_of(&records, id);
            let answer = format!("http://ex.org/{id}");
            script.insert(&gold, Reply::iris("x", &[answer.as_str()]));
            let beams: Vec<Value> = [gold.clone(), format!("SELECT ?x WHERE {{ wd:Q{n} wdt:P1 ?x }}"), format!("SELECT ?x WHERE {{ wd:Q{n} wdt:P2 ?x }}")]
                .into_iter()
                .enumerate()
                .map(|(k, q)| serde_json::json!({"query": q, "log_prob": -(k as f64)}))
                .collect();
            lines.push_str(&serde_json::json!({"id": id, "beams": beams}).to_string());
            lines.push('\n');
        }
        std::fs::write(&path, lines).unwrap();
    }
    let kg = FixtureEndpoint::start(script).unwrap();
    let url = kg.url();
    assert_ok(&sparqlgen(&["--config", cfg, "--endpoint-url", &url, "train-reranker"]));
    assert!(out.join("fold0/reranker.ckpt").exists());

    let o = sparqlgen(&["--config", cfg, "--endpoint-url", &url, "evaluate"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("f1: 1.0000"), "{}", stdout(&o));
    let lines = read_lines(&out.join("fold0/eval.jsonl"));
    assert!(lines.last().unwrap().get("summary").is_some());
    assert_ok(&sparqlgen(&["--config", cfg, "--endpoint-url", &url, "evaluate", "--rerank"]));
    assert!(out.join("fold0/eval_reranked.jsonl").exists());

    let o = sparqlgen(&["--config", cfg, "analyze-errors"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("Total"));
}
