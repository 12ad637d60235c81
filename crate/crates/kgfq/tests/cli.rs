mod common;

use std::fs;
use std::path::Path;

use common::{kgfq, ok, run_pipeline, snapshot};
use serde_json::Value;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn pipeline_is_deterministic_and_well_formed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path());
    run_pipeline(b.path());
    let (sa, sb) = (snapshot(&a.path().join("o")), snapshot(&b.path().join("o")));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (name, bytes) in &sa {
        assert!(bytes == &sb[name], "{name} differs between identical runs");
    }
    assert_eq!(snapshot(&a.path().join("data")), snapshot(&b.path().join("data")));

    for (name, bytes) in &sa {
        let text = std::str::from_utf8(bytes).unwrap();
        if name.ends_with(".json") {
            let v: Value = serde_json::from_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(v["kind"].is_string(), "{name} has no kind");
            let p = &v["provenance"];
            assert_eq!(p["tool"], "kgfq", "{name}");
            assert_eq!(p["seed"], 3, "{name}");
            assert_eq!(p["config_hash"].as_str().map(str::len), Some(64), "{name}");
        } else if name.ends_with(".jsonl") || name.ends_with(".txt") {
            assert!(sa.contains_key(&format!("{name}.provenance.json")), "{name} has no sidecar");
        } else if name.ends_with(".md") {
            assert!(text.trim_end().lines().last().unwrap().starts_with("<!-- kgfq "), "{name}");
        }
        if name.ends_with(".jsonl") {
            for line in text.lines() {
                serde_json::from_str::<Value>(line).unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }
    for required in [
        "graph.json",
        "graph_stats.json",
        "corpus_stats.json",
        "link_prediction.json",
        "selection_eval.json",
        "prompts.jsonl",
        "realized.jsonl",
        "finetune.txt",
        "relation_predictor.json",
        "coherence.json",
        "ngram.json",
        "rouge-realizer.json",
        "anova.json",
        "alpha.json",
        "report.md",
        "report.json",
    ] {
        assert!(sa.contains_key(required), "missing {required}");
    }
}

#[test]
fn aggregates_are_means_of_the_records() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    for system in ["realizer", "gold", "shuffled"] {
        let v = read_json(&dir.path().join(format!("o/gricean-{system}.json")));
        let records = v["report"]["records"].as_array().unwrap();
        let ag = &v["report"]["aggregates"];
        let n = records.len() as f64;
        let mean = |k: &str| records.iter().map(|r| r[k].as_f64().unwrap()).sum::<f64>() / n;
        assert_eq!(ag["n"].as_u64().unwrap() as usize, records.len());
        for (agg, field, scale) in [
            ("rel_pct", "rel", 100.0),
            ("info_mean", "info", 1.0),
            ("truth_pct", "truth", 100.0),
            ("cla_mean", "cla", 1.0),
            ("coh_pct", "coh", 100.0),
        ] {
            let got = ag[agg].as_f64().unwrap();
            assert!((got - scale * mean(field)).abs() < 1e-9, "{system} {agg}: {got}");
        }
        for r in records {
            for k in ["rel", "truth", "coh"] {
                assert!(matches!(r[k].as_u64(), Some(0 | 1)), "{system} {k}");
            }
        }
    }
    let report = read_json(&dir.path().join("o/report.json"));
    assert_eq!(report["gricean"].as_array().unwrap().len(), 3);
    let md = fs::read_to_string(dir.path().join("o/report.md")).unwrap();
    assert!(md.contains("| realizer |") && md.contains("ANOVA"));
}

fn single_line_failure(dir: &Path, args: &[&str], kind: &str, code: i32) {
    let out = kgfq(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    assert!(err.starts_with(&format!("error[{kind}]: ")), "{args:?}: {err}");
}

#[test]
fn failures_are_one_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    single_line_failure(d, &["--bogus"], "usage", 2);
    single_line_failure(d, &["embed", "train", "--dim", "many"], "usage", 2);
    single_line_failure(d, &["kg", "build"], "usage", 1);
    fs::write(d.join("bad.toml"), "bogus = 1\n").unwrap();
    single_line_failure(d, &["--config", "bad.toml", "kg", "build"], "config", 1);
    fs::write(d.join("seeded.toml"), "[train]\nseed = 4\n").unwrap();
    single_line_failure(d, &["--config", "seeded.toml", "config"], "config", 1);
    single_line_failure(d, &["--config", "missing.toml", "config"], "io", 1);

    ok(d, &["synth", "--out", "data", "--per-kind", "4", "--examples", "40"]);
    let g = ["--triples", "data/triples.tsv", "--surface", "data/surface.tsv", "--corpus", "data/corpus.jsonl"];
    let with = |rest: &[&'static str]| g.iter().chain(rest).copied().collect::<Vec<_>>();
    single_line_failure(d, &with(&["embed", "eval", "--embeddings", "none.json"]), "missing-checkpoint", 1);
    single_line_failure(
        d,
        &with(&["select", "eval", "--selector", "none.json", "--embeddings", "none.json"]),
        "missing-checkpoint",
        1,
    );
    single_line_failure(d, &with(&["score", "gricean", "--questions", "q.jsonl", "--models", "nowhere"]), "io", 1);
    fs::write(d.join("q.jsonl"), "{\"id\": \"x\", \"question\": \"what?\"}\nnot json\n").unwrap();
    single_line_failure(d, &with(&["score", "gricean", "--questions", "q.jsonl", "--models", "nowhere"]), "parse", 1);
    fs::write(d.join("data/triples.tsv"), "a\tb\n").unwrap();
    single_line_failure(d, &with(&["kg", "build"]), "parse", 1);
}

#[test]
fn help_version_and_default_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(dir.path(), &["--help"]).contains("Usage"));
    assert!(ok(dir.path(), &["--version"]).contains(env!("CARGO_PKG_VERSION")));
    let text = ok(dir.path(), &["config"]);
    fs::write(dir.path().join("default.toml"), &text).unwrap();
    assert_eq!(ok(dir.path(), &["--config", "default.toml", "config"]), text);
}
