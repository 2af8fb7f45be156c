use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hatepipe::corpus::save_dataset;
use hatepipe::synthdata::{generate, SynthSpec};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn hatepipe(dir: &Path, args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_hatepipe"))
        .args(args)
        .current_dir(dir)
        .env_remove("HATEPIPE_RESOURCES")
        .output()
        .unwrap();
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let r = hatepipe(dir, args);
    assert_eq!(r.code, 0, "hatepipe {args:?}\nstdout: {}\nstderr: {}", r.stdout, r.stderr);
    r.stdout
}

/// Small train/test corpora with planted markers, plus resources.
fn workspace(p_marker: f64) -> TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let train = SynthSpec { p_marker, id_prefix: "tr".into(), noise_vocab: 60, markers_per_class: 2, ..SynthSpec::new(40, 30, 11) };
    let test = SynthSpec { p_marker, id_prefix: "te".into(), noise_vocab: 60, markers_per_class: 2, ..SynthSpec::new(25, 20, 12) };
    save_dataset(&generate(&train).unwrap(), &d.join("train.csv")).unwrap();
    save_dataset(&generate(&test).unwrap(), &d.join("test.csv")).unwrap();
    fs::write(d.join("stopwords.txt"), train.stopwords(5).join("\n")).unwrap();
    let lemmas: Vec<String> = train.lemma_pairs(5).into_iter().map(|(f, l)| format!("{f}\t{l}")).collect();
    fs::write(d.join("lemmas.tsv"), lemmas.join("\n")).unwrap();
    tmp
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn train_predict_evaluate_round_trip() {
    let tmp = workspace(1.0);
    let d = tmp.path();
    let out = ok(d, &["train", "--train", "train.csv", "--set", "classifier=SVM-POLY-1", "--set", "mode=freq", "--model-out", "m.json"]);
    assert!(out.contains("train_f1="), "{out}");
    ok(d, &["predict", "--model", "m.json", "--input", "test.csv", "--output", "pred.csv"]);
    let pred = read(d.join("pred.csv"));
    let truth = read(d.join("test.csv"));
    let mut lines = pred.lines();
    assert_eq!(lines.next(), Some("id,label,score"));
    // every document carries its class marker, so predictions match the truth
    let want: Vec<(String, String)> = truth
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[f.len() - 1].to_string())
        })
        .collect();
    let got: Vec<(String, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(got, want);
    let ev = ok(d, &["evaluate", "--model", "m.json", "--test", "test.csv", "--metrics-out", "metrics.json"]);
    assert!(ev.contains("f1_positive=1.0000"), "{ev}");
    let json: serde_json::Value = serde_json::from_str(&read(d.join("metrics.json"))).unwrap();
    assert_eq!(json["metrics"]["f1_positive"], 1.0);
}

#[test]
fn same_seed_same_model_bytes() {
    let tmp = workspace(0.8);
    let d = tmp.path();
    for name in ["a.json", "b.json"] {
        ok(d, &["train", "--train", "train.csv", "--seed", "7", "--set", "smote=yes", "--set", "classifier=SVM-RBF", "--model-out", name]);
    }
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("b.json")).unwrap());
}

#[test]
fn missing_stopwords_names_the_path() {
    let tmp = workspace(1.0);
    let d = tmp.path();
    let r = hatepipe(d, &["train", "--train", "train.csv", "--set", "stopwords=yes", "--stopwords", "nowhere/stw.txt", "--model-out", "m.json"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("nowhere/stw.txt"), "{}", r.stderr);
    assert!(!d.join("m.json").exists());
}

#[test]
fn empty_input_gives_header_only() {
    let tmp = workspace(1.0);
    let d = tmp.path();
    ok(d, &["train", "--train", "train.csv", "--model-out", "m.json"]);
    fs::write(d.join("empty.csv"), "id,text\n").unwrap();
    ok(d, &["predict", "--model", "m.json", "--input", "empty.csv", "--output", "pred.csv"]);
    assert_eq!(read(d.join("pred.csv")), "id,label,score\n");
}

#[test]
fn corrupted_model_is_a_runtime_error() {
    let tmp = workspace(1.0);
    let d = tmp.path();
    ok(d, &["train", "--train", "train.csv", "--model-out", "m.json"]);
    let text = read(d.join("m.json"));
    fs::write(d.join("bad.json"), &text[..text.len() / 2]).unwrap();
    let r = hatepipe(d, &["predict", "--model", "bad.json", "--input", "test.csv", "--output", "pred.csv"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("error"), "{}", r.stderr);
}

#[test]
fn grid_with_invalid_row_still_completes() {
    let tmp = workspace(0.9);
    let d = tmp.path();
    fs::write(
        d.join("grid.txt"),
        "# two good rows and a bad one\nword=1 mode=freq classifier=SVM-POLY-1\nfeatures=w2v char=2 classifier=SVM-RBF\n\nword=1,2 mode=tfidf classifier=AdaBoost n_estimators=5\n",
    )
    .unwrap();
    let out = ok(d, &["sweep", "--grid", "grid.txt", "--train", "train.csv", "--test", "test.csv", "--out", "sweep"]);
    assert!(out.contains("3 runs, 1 failed"), "{out}");
    let results = read(d.join("sweep/results.csv"));
    let rows: Vec<&str> = results.lines().collect();
    assert!(rows[0].starts_with("rank,status,config"));
    assert_eq!(rows.len(), 4);
    assert!(rows[3].contains(",failed,"), "{results}");
    let failures = read(d.join("sweep/failures.csv"));
    assert_eq!(failures.lines().count(), 2);
    assert!(failures.contains("char"), "{failures}");
    let manifest: serde_json::Value = serde_json::from_str(&read(d.join("sweep/manifest.json"))).unwrap();
    assert_eq!(manifest["rows"].as_array().unwrap().len(), 3);
    assert!(d.join("sweep/table.md").exists() && d.join("sweep/table.csv").exists());
}

#[test]
fn preset_needing_embeddings_fails_fast() {
    let tmp = workspace(1.0);
    let d = tmp.path();
    let r = hatepipe(d, &["sweep", "--preset", "B1", "--train", "train.csv", "--test", "test.csv", "--out", "o", "--resources", "."]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("embeddings"), "{}", r.stderr);
    assert!(!d.join("o").exists());
}

#[test]
fn unknown_preset_lists_the_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let r = hatepipe(tmp.path(), &["sweep", "--preset", "Z9", "--train", "a", "--test", "b", "--out", "o"]);
    assert_eq!(r.code, 1);
    for p in ["A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"] {
        assert!(r.stderr.contains(p), "{}", r.stderr);
    }
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hatepipe(tmp.path(), &["train", "--bogus"]).code, 1);
    assert_eq!(hatepipe(tmp.path(), &["frobnicate"]).code, 1);
    assert_eq!(hatepipe(tmp.path(), &["reproduce", "--jobs", "0"]).code, 1);
    assert_eq!(hatepipe(tmp.path(), &["--help"]).code, 0);
}

#[test]
fn reproduce_reports_resources_and_targets() {
    let tmp = workspace(1.0);
    let d = tmp.path();
    let out = ok(d, &["reproduce", "--resources", "."]);
    assert!(out.contains("A1 (task A)"), "{out}");
    assert!(out.contains("F1 = 0.8318"), "{out}");
    assert!(out.contains("F1 = 0.4931"), "{out}");
    assert!(out.contains("stopwords.txt: found"), "{out}");
    assert!(out.contains("embeddings.txt: missing"), "{out}");
    let one = ok(d, &["reproduce", "--preset", "b2"]);
    assert!(one.starts_with("B2"), "{one}");
    assert_eq!(one.lines().filter(|l| l.contains("target")).count(), 2);
}

#[test]
fn preprocess_writes_tokens() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("in.csv"), "id,text,label\n1,hello  world,1\n2,\u{0643}\u{062A}\u{0627}\u{0628}\u{064E},0\n").unwrap();
    fs::write(d.join("stopwords.txt"), "hello\n").unwrap();
    ok(d, &["preprocess", "--input", "in.csv", "--output", "out.csv", "--remove-stopwords", "--resources", "."]);
    let out = read(d.join("out.csv"));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "id,text,label");
    assert_eq!(lines[1], "1,world,1");
    // Arabic kaf folded to keheh, fatha dropped
    assert_eq!(lines[2], "2,\u{06A9}\u{062A}\u{0627}\u{0628},0");
}

#[test]
fn synth_then_preset_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--task", "b", "--out", "data", "--seed", "4"]);
    for f in ["train.csv", "test.csv", "stopwords.txt", "lemmas.tsv", "embeddings.txt"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    let head = read(d.join("data/embeddings.txt"));
    assert!(head.starts_with("416 16\n"), "{}", &head[..20]);
    // grid of one B1-style config keeps the test quick
    fs::write(d.join("g.txt"), "stopwords=yes features=w2v word=1 smote=yes classifier=SVM-POLY-1\n").unwrap();
    let out = ok(d, &["sweep", "--grid", "g.txt", "--train", "data/train.csv", "--test", "data/test.csv", "--resources", "data", "--out", "s"]);
    assert!(out.contains("1 runs, 0 failed"), "{out}");
    let table = read(d.join("s/table.md"));
    assert!(table.contains("| SVM-POLY-1 |"), "{table}");
    assert!(table.contains("Yes"), "{table}");
}
