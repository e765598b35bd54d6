use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lexattr_cli::{manifest_path, RunManifest};

const BIN: &str = env!("CARGO_BIN_EXE_lexattr");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn small_synth(dir: &Path) {
    let out = run(
        dir,
        &["synth", "--seed", "3", "--train-sentences", "120", "--test-sentences", "40",
          "--judgment-train", "20", "--judgment-test", "10", "--out", "syn"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn every_command_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    assert!(d.join("syn.manifest.json").exists());
    assert_eq!(code(&run(d, &["train", "--train", "syn/train.jsonl", "--epochs", "3", "--out", "m.bin"])), 0);
    let m = RunManifest::read(&manifest_path(&d.join("m.bin"))).unwrap();
    assert_eq!(m.command, "train");
    assert_eq!(m.seed, Some(0));
    assert_eq!(m.argv[1..], ["train", "--train", "syn/train.jsonl", "--epochs", "3", "--out", "m.bin"]);
    assert_eq!(m.inputs[0].path, "syn/train.jsonl");
    assert_eq!(m.outputs[0].bytes, fs::metadata(d.join("m.bin")).unwrap().len());
    assert_eq!(m.config["train"]["epochs"], 3);

    assert_eq!(code(&run(d, &["tag", "--model", "m.bin", "--input", "syn/test.jsonl", "--out", "t.tsv"])), 0);
    let spans = fs::read_to_string(d.join("t.tsv.spans.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(spans.lines().next().unwrap()).unwrap();
    assert_eq!(first["doc_id"], "test-0000");
    let tagged = fs::read_to_string(d.join("t.tsv")).unwrap();
    assert!(tagged.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).all(|l| l.split('\t').count() == 3));

    let eval = run(d, &["eval", "--input", "t.tsv", "--out", "r.json", "--method", "Sparse CRF"]);
    assert_eq!(code(&eval), 0);
    assert!(String::from_utf8_lossy(&eval.stdout).contains("\nSparse CRF\t"));
    for out in ["t.tsv", "r.json"] {
        assert!(manifest_path(&d.join(out)).exists(), "{out}");
    }
}

#[test]
fn convert_handles_empty_and_invalid_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.jsonl"), "").unwrap();
    assert_eq!(code(&run(d, &["convert", "--input", "empty.jsonl", "--out", "e.tsv"])), 0);
    assert_eq!(fs::read(d.join("e.tsv")).unwrap(), b"");

    fs::write(
        d.join("overlap.jsonl"),
        r#"{"id":"case-17","text":"He was stabbed twice.","spans":[{"start":0,"end":10,"tag":"Assault"},{"start":5,"end":14,"tag":"Homicide"}]}"#,
    )
    .unwrap();
    let out = run(d, &["convert", "--input", "overlap.jsonl", "--out", "o.tsv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("case-17"));
    assert!(!d.join("o.tsv").exists());
}

#[test]
fn bio_scheme_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("a.jsonl"),
        r#"{"id":"d","text":"The mob rioted loudly.","spans":[{"start":4,"end":14,"tag":"Riot"}]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(d, &["convert", "--input", "a.jsonl", "--out", "a.tsv", "--scheme", "bio"])), 0);
    assert_eq!(
        fs::read_to_string(d.join("a.tsv")).unwrap(),
        "# doc_id = d\nThe\tO\nmob\tB-Riot\nrioted\tI-Riot\nloudly.\tO\n\n"
    );
}

#[test]
fn stats_on_an_empty_corpus_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.jsonl"), "").unwrap();
    let out = run(d, &["stats", "--split", "train=empty.jsonl", "--out", "s.tsv", "--format", "tsv"]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(d.join("s.tsv")).unwrap();
    assert!(text.starts_with("# split = train\ntag\tsentences\ttokens\n"));
    assert_eq!(text.lines().filter(|l| l.ends_with("\t0\t0")).count(), 7);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    fs::write(d.join("unknown.jsonl"), r#"{"id":"d","text":"ab","spans":[{"start":0,"end":1,"tag":"Theft"}]}"#).unwrap();
    assert_eq!(code(&run(d, &["stats", "--split", "unknown.jsonl", "--out", "s"])), 2);
    assert_eq!(code(&run(d, &["train", "--train", "missing.jsonl", "--out", "m"])), 2);
    assert_eq!(code(&run(d, &["train", "--train", "syn/train.jsonl"])), 2);
    assert_eq!(code(&run(d, &["train", "--train", "syn/train.jsonl", "--mode", "dense", "--out", "m"])), 2);
    assert_eq!(code(&run(d, &["train", "--train", "syn/train.jsonl", "--lr", "0", "--out", "m"])), 2);
    let diverged = run(d, &["train", "--train", "syn/train.jsonl", "--lr", "1e307", "--l2", "0", "--out", "m"]);
    assert_eq!(code(&diverged), 3, "{}", String::from_utf8_lossy(&diverged.stderr));
    assert!(!d.join("m").exists());
}

#[test]
fn inputs_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    let before = fs::read(d.join("syn/train.jsonl")).unwrap();
    assert_eq!(code(&run(d, &["train", "--train", "syn/train.jsonl", "--out", "syn/train.jsonl"])), 2);
    assert_eq!(fs::read(d.join("syn/train.jsonl")).unwrap(), before);
}

#[test]
fn dense_models_need_their_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    let train = run(
        d,
        &["train", "--train", "syn/train.jsonl", "--dev", "syn/test.jsonl", "--mode", "dense",
          "--embeddings", "hashed:16:2", "--epochs", "4", "--patience", "2", "--out", "dense.bin"],
    );
    assert_eq!(code(&train), 0, "{}", String::from_utf8_lossy(&train.stderr));
    assert_eq!(code(&run(d, &["tag", "--model", "dense.bin", "--input", "syn/test.jsonl", "--out", "t.tsv"])), 2);
    let ok = run(
        d,
        &["tag", "--model", "dense.bin", "--input", "syn/test.jsonl", "--embeddings", "hashed:16:2", "--out", "t.tsv"],
    );
    assert_eq!(code(&ok), 0);
    let wrong_dim = run(
        d,
        &["tag", "--model", "dense.bin", "--input", "syn/test.jsonl", "--embeddings", "hashed:8", "--out", "t2.tsv"],
    );
    assert_eq!(code(&wrong_dim), 2);
}

#[test]
fn token_tsv_is_accepted_for_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    assert_eq!(code(&run(d, &["convert", "--input", "syn/train.jsonl", "--out", "train.tsv"])), 0);
    let a = run(d, &["train", "--train", "train.tsv", "--epochs", "2", "--out", "a.bin"]);
    let b = run(d, &["train", "--train", "syn/train.jsonl", "--epochs", "2", "--out", "b.bin"]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    // offsets differ between the two inputs but features only see surfaces
    assert_eq!(fs::read(d.join("a.bin")).unwrap(), fs::read(d.join("b.bin")).unwrap());
}

#[test]
fn judge_reports_every_embedding_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    assert_eq!(code(&run(d, &["train", "--train", "syn/train.jsonl", "--epochs", "3", "--out", "m.bin"])), 0);
    fs::create_dir(d.join("exp")).unwrap();
    fs::write(
        d.join("exp/judge.json"),
        r#"{"train": "../syn/judgment-train.jsonl", "test": "../syn/judgment-test.jsonl",
            "crf_model": "../m.bin", "modes": ["Text", "Text+Span"],
            "embeddings": ["hashed:8:1", "hashed:16:2"], "logreg": {"epochs": 50}}"#,
    )
    .unwrap();
    let out = run(d, &["judge", "--config", "exp/judge.json", "--out", "j.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("j.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["mode"], "Text+Span");
    let table = fs::read_to_string(d.join("j.json.tsv")).unwrap();
    assert!(table.starts_with("Embedding\tInput Format\tClass 0 Precision\tClass 0 Recall\tClass 1 Precision\tClass 1 Recall\tAcc\n"));
    assert_eq!(table.lines().count(), 5);

    fs::write(d.join("exp/bad.json"), r#"{"train": "x", "test": "y", "crf_model": "z", "embeddings": [], "extra": 1}"#).unwrap();
    assert_eq!(code(&run(d, &["judge", "--config", "exp/bad.json", "--out", "k.json"])), 2);
}

#[test]
fn rerun_check_detects_changed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    assert_eq!(code(&run(d, &["rerun", "--manifest", "syn.manifest.json", "--check"])), 0);
    let mut m = RunManifest::read(&d.join("syn.manifest.json")).unwrap();
    m.outputs[0].crc32 = "00000000".into();
    fs::write(d.join("edited.json"), serde_json::to_string(&m).unwrap()).unwrap();
    let out = run(d, &["rerun", "--manifest", "edited.json", "--check"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("differs\tsyn/train.jsonl"));
}
