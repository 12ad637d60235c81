//! Drives the built binary through a full small pipeline.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub const CONFIG: &str = r#"seed = 3

[paths]
triples = "data/triples.tsv"
surface = "data/surface.tsv"
corpus = "data/corpus.jsonl"

[train]
epochs = 8
patience = 4

[embed]
dim = 16
epochs = 30
"#;

pub fn kgfq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgfq"))
        .args(args)
        .current_dir(dir)
        .env_remove("KGFQ_LOG")
        .output()
        .expect("binary runs")
}

/// Runs `args` and panics with stderr on failure; returns stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kgfq(dir, args);
    assert!(out.status.success(), "kgfq {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_inputs(dir: &Path) {
    let corpus = fs::read_to_string(dir.join("data/corpus.jsonl")).unwrap();
    let mut followups = BTreeMap::new();
    for line in corpus.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        followups.insert(v["id"].as_str().unwrap().to_string(), v["followup"].as_str().unwrap().to_string());
    }
    let realized = fs::read_to_string(dir.join("o/realized.jsonl")).unwrap();
    let rows: Vec<(String, String)> = realized
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["id"].as_str().unwrap().to_string(), v["question"].as_str().unwrap().to_string())
        })
        .collect();
    let mut gold = String::new();
    let mut shuffled = String::new();
    let mut pairs = String::new();
    for (i, (id, q)) in rows.iter().enumerate() {
        let other = &rows[(i + 1) % rows.len()].1;
        gold.push_str(&serde_json::json!({"id": id, "question": followups[id]}).to_string());
        shuffled.push_str(&serde_json::json!({"id": id, "question": other}).to_string());
        pairs.push_str(&serde_json::json!({"id": id, "candidate": q, "reference": followups[id]}).to_string());
        for s in [&mut gold, &mut shuffled, &mut pairs] {
            s.push('\n');
        }
    }
    fs::write(dir.join("gold.jsonl"), gold).unwrap();
    fs::write(dir.join("shuffled.jsonl"), shuffled).unwrap();
    fs::write(dir.join("pairs.jsonl"), pairs).unwrap();
    fs::write(dir.join("ratings.csv"), "rater,i1,i2,i3,i4\na,1,2,3,\nb,1,2,3,4\nc,1,3,3,4\n").unwrap();
}

/// Every subcommand, in dependency order, writing under `dir/o`.
pub fn run_pipeline(dir: &Path) {
    fs::write(dir.join("kgfq.toml"), CONFIG).unwrap();
    ok(dir, &["--config", "kgfq.toml", "synth", "--out", "data", "--per-kind", "6", "--examples", "150"]);
    let base = ["--config", "kgfq.toml", "--out", "o"];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        ok(dir, &args)
    };
    run(&["kg", "build"]);
    run(&["kg", "stats"]);
    run(&["embed", "train"]);
    run(&["embed", "eval", "--embeddings", "o/embeddings-transE.json"]);
    run(&["select", "train", "--embeddings", "o/embeddings-transE.json"]);
    run(&["select", "eval", "--selector", "o/selector-mlp-transE.json", "--embeddings", "o/embeddings-transE.json"]);
    run(&["gen", "prompt", "--selector", "o/selector-mlp-transE.json", "--embeddings", "o/embeddings-transE.json"]);
    run(&["gen", "realize"]);
    run(&["gen", "export"]);
    run(&["score", "train"]);
    write_inputs(dir);
    run(&["score", "gricean", "--questions", "o/realized.jsonl", "--system", "realizer", "--models", "o"]);
    run(&["score", "gricean", "--questions", "gold.jsonl", "--system", "gold", "--models", "o"]);
    run(&["score", "gricean", "--questions", "shuffled.jsonl", "--system", "shuffled", "--models", "o"]);
    run(&["score", "rouge", "--pairs", "pairs.jsonl", "--system", "realizer"]);
    run(&[
        "stats", "anova", "--report", "o/gricean-realizer.json", "--report", "o/gricean-gold.json", "--report",
        "o/gricean-shuffled.json",
    ]);
    run(&["stats", "alpha", "--ratings", "ratings.csv"]);
    run(&[
        "report", "o/selection_eval.json", "o/gricean-realizer.json", "o/gricean-gold.json", "o/gricean-shuffled.json",
        "o/rouge-realizer.json", "o/anova.json", "o/alpha.json",
    ]);
}

/// File name to contents for every file under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    files
}
