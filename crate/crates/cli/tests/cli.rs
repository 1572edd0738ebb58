use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_compsum"));
    c.env_remove("URLCOMSUM_STOPWORDS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DOCS: [(&str, &str, &str); 4] = [
    (
        "a",
        "The bank raised rates on Monday. Investors sold bonds quickly. The storm missed the coast. Markets fell for a second day.",
        "The bank raised rates.",
    ),
    (
        "b",
        "The team won the final match. The coach praised the striker. Rain delayed the start. Fans celebrated in the stadium.",
        "The team won the final.",
    ),
    (
        "c",
        "Doctors tested a new vaccine. The trial enrolled many patients. The league cancelled a game. Results looked promising.",
        "A new vaccine was tested.",
    ),
    (
        "d",
        "A flood hit the coast overnight. Officials warned residents early. The bank reported profits. Roads stayed closed all day.",
        "A flood hit the coast.",
    ),
];

fn write_jsonl(dir: &Path, name: &str, with_summaries: bool) -> PathBuf {
    let path = dir.join(name);
    let lines: Vec<String> = DOCS
        .iter()
        .map(|(id, doc, sum)| {
            let mut v = serde_json::json!({ "id": id, "document": doc });
            if with_summaries {
                v["summary"] = serde_json::json!(sum);
            }
            v.to_string()
        })
        .collect();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("cfg.toml");
    fs::write(
        &path,
        "epochs = 1\nbatch_size = 2\nembedding_dim = 8\nhidden = 4\nlayers = 1\nheads = 2\nmax_sentences = 6\nmax_words = 10\n",
    )
    .unwrap();
    path
}

fn trained_checkpoint(dir: &Path) -> PathBuf {
    let data = write_jsonl(dir, "train.jsonl", false);
    let cfg = small_config(dir);
    let out = dir.join("run");
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--L_E",
        "2",
        "--L_C",
        "8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("model.ckpt")
}

#[test]
fn train_writes_checkpoint_metrics_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let run_dir = ck.parent().unwrap();
    assert!(ck.exists());
    let metrics = fs::read_to_string(run_dir.join("metrics.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    for key in ["step", "loss", "r_sampled", "r_baseline", "cov", "flu"] {
        assert!(first.get(key).is_some(), "metrics line lacks {key}");
    }
    // learning rate and batch size: flags override, file values otherwise, defaults last
    let resolved = fs::read_to_string(run_dir.join("config.toml")).unwrap();
    assert!(resolved.contains("learning_rate = 0.01"), "{resolved}");
    assert!(resolved.contains("batch_size = 2"), "{resolved}");
}

#[test]
fn default_hyperparameters_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_jsonl(dir.path(), "train.jsonl", false);
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o = run(&[
        "train", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out",
        out.to_str().unwrap(), "--lr", "0.01", "--batch-size", "3", "--L_E", "1", "--L_C", "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("lr 0.01 batch size 3"), "{}", stderr(&o));
}

#[test]
fn train_without_data_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "learning_rate = -1.0\n").unwrap();
    let data = write_jsonl(dir.path(), "train.jsonl", false);
    let o = run(&[
        "train", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn summarize_emits_one_line_per_document() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let single = dir.path().join("one.jsonl");
    fs::write(&single, format!("{}\n", serde_json::json!({"id": "x", "document": DOCS[0].1}))).unwrap();
    let o = run(&["summarize", "--checkpoint", ck.to_str().unwrap(), "--data", single.to_str().unwrap(), "--L_E", "2", "--L_C", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["id"], "x");
    assert!(v["compressive"].as_str().unwrap().split_whitespace().count() <= 5);
    assert!(!v["extractive"].as_str().unwrap().is_empty());

    // greedy is the default mode: explicit flag gives the same output
    let again = run(&[
        "summarize", "--checkpoint", ck.to_str().unwrap(), "--data", single.to_str().unwrap(), "--L_E", "2", "--L_C", "5",
        "--mode", "greedy", "--seed", "9",
    ]);
    assert_eq!(stdout(&again), out);
}

#[test]
fn profile_sets_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let data = write_jsonl(dir.path(), "docs.jsonl", false);
    let o = run(&["summarize", "--checkpoint", ck.to_str().unwrap(), "--data", data.to_str().unwrap(), "--profile", "xsum"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["compressive"].as_str().unwrap().split_whitespace().count() <= 24);
    }
}

#[test]
fn corrupt_checkpoint_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let mut bytes = fs::read(&ck).unwrap();
    bytes[8] = 99; // version field
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, bytes).unwrap();
    let data = write_jsonl(dir.path(), "docs.jsonl", false);
    let o = run(&["summarize", "--checkpoint", bad.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn score_reports_breakdown() {
    let doc = DOCS[0].1;
    let o = run(&["score", "--document", doc, "--summary", doc, "--exact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let cov = v["coverage"].as_f64().unwrap();
    assert!(cov > 0.999, "{cov}");
    let total = v["total"].as_f64().unwrap();
    assert!((total - (cov + 2.0 * v["fluency"].as_f64().unwrap())).abs() < 1e-9);

    let o = run(&["score", "--document", doc, "--summary", doc, "--exact", "--w-cov", "3", "--w-flu", "0"]);
    let w: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((w["total"].as_f64().unwrap() - 3.0 * w["coverage"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn score_rejects_empty_summary() {
    let o = run(&["score", "--document", DOCS[0].1, "--summary", "  "]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn explain_writes_matrix_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan");
    let o = run(&["explain", "--document", DOCS[1].1, "--summary", DOCS[1].2, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("plan.tsv").exists());
    assert!(out.join("plan.png").exists());
    let tsv = fs::read_to_string(out.join("plan.tsv")).unwrap();
    let header: Vec<&str> = tsv.lines().next().unwrap().split('\t').collect();
    assert_eq!(header[0], "doc\\summary");
    assert!(header.contains(&"team"));
}

#[test]
fn explain_sends_doc_only_mass_to_the_nearest_summary_word() {
    // 2×2 case: "alpha" is near "gamma", "beta" near "delta"; the exact plan
    // must move all of beta's mass to delta.
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("vec.txt");
    fs::write(&vectors, "alpha 1 0 0\nbeta 0 1 0\ngamma 0.9 0.1 0\ndelta 0.1 0.9 0.2\n").unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "embedding_dim = 3\n").unwrap();
    let stop = dir.path().join("stop.txt");
    fs::write(&stop, "").unwrap();
    let out = dir.path().join("plan");
    let o = bin()
        .env("URLCOMSUM_STOPWORDS", &stop)
        .args([
            "explain", "--document", "alpha beta", "--summary", "delta gamma", "--embeddings",
            vectors.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--exact", "--out", out.to_str().unwrap(),
            "--no-heatmap",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.join("plan.png").exists());
    let tsv = fs::read_to_string(out.join("plan.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = tsv.lines().map(|l| l.split('\t').collect()).collect();
    let col = |t: &str| rows[0].iter().position(|h| *h == t).unwrap();
    let row = |t: &str| rows.iter().position(|r| r[0] == t).unwrap();
    let at = |r: &str, c: &str| rows[row(r)][col(c)].parse::<f64>().unwrap();
    assert!((at("beta", "delta") - 0.5).abs() < 1e-9);
    assert!(at("beta", "gamma").abs() < 1e-9);
    assert!((at("alpha", "gamma") - 0.5).abs() < 1e-9);
}

#[test]
fn evaluate_lead_without_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_jsonl(dir.path(), "test.jsonl", true);
    let out = dir.path().join("report");
    let o = run(&[
        "evaluate", "--systems", "lead,leadword", "--data", data.to_str().unwrap(), "--sample-size", "3", "--L_E", "1",
        "--L_C", "6", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["sample_size"], 3);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["budgets", "config_hash", "dataset", "rows", "sample_size", "seed"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["system"], "LEAD");
    let score_keys: Vec<&String> = rows[0]["scores"].as_object().unwrap().keys().collect();
    assert_eq!(score_keys, ["rouge1_f", "rouge2_f", "rougeL_f"]);
    assert!(out.join("report.json").exists() && out.join("report.txt").exists());
}

#[test]
fn evaluate_includes_model_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let data = write_jsonl(dir.path(), "test.jsonl", true);
    let system = format!("lead,model:{}", ck.display());
    let o = run(&["evaluate", "--systems", &system, "--data", data.to_str().unwrap(), "--L_E", "2", "--L_C", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = v["rows"].as_array().unwrap().iter().map(|r| r["system"].as_str().unwrap()).collect();
    assert_eq!(names, ["LEAD", "model (Ext.)", "model (Ext.+Com.)"]);
}

#[test]
fn evaluate_needs_references_and_known_systems() {
    let dir = tempfile::tempdir().unwrap();
    let no_refs = write_jsonl(dir.path(), "plain.jsonl", false);
    let o = run(&["evaluate", "--systems", "lead", "--data", no_refs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let data = write_jsonl(dir.path(), "test.jsonl", true);
    let o = run(&["evaluate", "--systems", "oracle", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["evaluate", "--systems", "lead"]);
    assert_eq!(o.status.code(), Some(2));
}
