use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use towe::corpus::{read_dataset, write_dataset};
use towe::synthetic::next_token_corpus;

fn towe(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_towe"))
        .args(args)
        .current_dir(dir)
        .env_remove("TOWE_DATA_ROOT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const INLINE: &str = "s_id\tsentence\ttarget_tags\topinion_tags
1\tThe food is good\tThe\\O food\\B is\\O good\\O\tThe\\O food\\O is\\O good\\B
2\tgreat service but slow kitchen\tgreat\\O service\\B but\\O slow\\O kitchen\\O\tgreat\\B service\\O but\\O slow\\O kitchen\\O
2\tgreat service but slow kitchen\tgreat\\O service\\O but\\O slow\\O kitchen\\B\tgreat\\O service\\O but\\O slow\\B kitchen\\O
";

fn conll(rows: &[(&str, &str, usize)]) -> String {
    rows.iter()
        .enumerate()
        .map(|(i, (w, pos, head))| format!("{}\t{w}\t_\t{pos}\t{pos}\t_\t{head}\tdep\t_\t_\n", i + 1))
        .collect()
}

fn write_inline_fixture(dir: &Path) {
    fs::write(dir.join("raw.tsv"), INLINE).unwrap();
    let parses = conll(&[("The", "DT", 2), ("food", "NN", 3), ("is", "VBZ", 0), ("good", "JJ", 3)])
        + "\n"
        + &conll(&[
            ("great", "JJ", 2),
            ("service", "NN", 0),
            ("but", "CC", 2),
            ("slow", "JJ", 5),
            ("kitchen", "NN", 2),
        ]);
    fs::write(dir.join("raw.conll"), parses).unwrap();
}

#[test]
fn import_joins_parses() {
    let dir = tempfile::tempdir().unwrap();
    write_inline_fixture(dir.path());
    let out = towe(
        &["import", "--input", "raw.tsv", "--parses", "raw.conll", "--out", "data/train.jsonl"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("3 instances, 2 sentences"), "{}", stdout(&out));
    let split = read_dataset(&dir.path().join("data/train.jsonl"), "t").unwrap();
    assert_eq!(split.len(), 3);
    assert_eq!(split.instances[1].heads().unwrap(), vec![Some(1), None, Some(1), Some(4), Some(1)]);

    let stats = towe(&["stats", "data/train.jsonl"], dir.path());
    assert!(stats.status.success(), "{}", stderr(&stats));
    let text = stdout(&stats);
    assert!(text.contains("#D.Dist") && text.contains("train"), "{text}");

    let json = towe(&["stats", "--format", "json", "data/train.jsonl"], dir.path());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(rows[0]["num_sentences"], 2);
    assert_eq!(rows[0]["num_aspect_terms"], 3);
}

#[test]
fn missing_parse_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_inline_fixture(dir.path());
    let out = towe(
        &["import", "--input", "raw.tsv", "--parses", "absent.conll", "--out", "x.jsonl"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.conll"), "{}", stderr(&out));
}

#[test]
fn unknown_split_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("train.jsonl"), &next_token_corpus(3, 5, 3, 5, 1)).unwrap();
    let out = towe(&["stats", "--split", "dev", "train.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("available: train"), "{}", stderr(&out));
}

#[test]
fn bad_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(towe(&["train", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(towe(&["train", "--config", "none.toml"], dir.path()).status.code(), Some(2));
}

const CONFIG: &str = r#"
seed = 4
out_dir = "runs"

[[datasets]]
name = "Syn"
train = "syn/train.jsonl"
test = "syn/test.jsonl"

[model.input]
word_dim = 8
posn_dim = 6
post_dim = 4
max_distance = 10
dropout = 0.0

[model.encoder]
kind = "bilstm"
hidden_dim = 8

[train]
epochs = 3
learning_rate = 0.01
batch_size = 4

[grid]
datasets = ["Syn"]
encoders = ["bilstm"]
gcn = [false, true]
gcn_layers = [1, 2]
seeds = [1, 2]
jobs = 2
"#;

fn write_config_fixture(dir: &Path) {
    fs::create_dir_all(dir.join("syn")).unwrap();
    write_dataset(&dir.join("syn/train.jsonl"), &next_token_corpus(20, 15, 4, 8, 1)).unwrap();
    write_dataset(&dir.join("syn/test.jsonl"), &next_token_corpus(6, 15, 4, 8, 2)).unwrap();
    fs::write(dir.join("exp.toml"), CONFIG).unwrap();
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    write_config_fixture(dir.path());
    let out = towe(&["train", "--config", "exp.toml", "--format", "json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["seed"], 4);
    let run_dir = dir.path().join(summary["run_dir"].as_str().unwrap());
    assert!(run_dir.file_name().unwrap().to_str().unwrap().ends_with("-seed4"));
    let curve = fs::read_to_string(run_dir.join("dev_curve.jsonl")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(run_dir.join("summary.json").exists());

    let ckpt = run_dir.join("checkpoint.json");
    let ckpt = ckpt.to_str().unwrap();
    let eval = towe(
        &["eval", "--checkpoint", ckpt, "--config", "exp.toml", "--format", "json"],
        dir.path(),
    );
    assert!(eval.status.success(), "{}", stderr(&eval));
    let report: serde_json::Value = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(report["f1"], summary["test"]["f1"]);

    let direct = towe(&["eval", "--checkpoint", ckpt, "--data", "syn/test.jsonl"], dir.path());
    assert!(direct.status.success(), "{}", stderr(&direct));
    assert!(stdout(&direct).contains("F1"));

    let again = towe(&["train", "--config", "exp.toml", "--seed", "9"], dir.path());
    assert!(again.status.success(), "{}", stderr(&again));
    assert!(stdout(&again).contains("seed9"), "{}", stdout(&again));
}

#[test]
fn grid_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_config_fixture(dir.path());
    let out = towe(&["grid", "--config", "exp.toml", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("| Model |") && text.contains("BiLSTM+GCN"), "{text}");
    let run = fs::read_dir(dir.path().join("g")).unwrap().next().unwrap().unwrap().path();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("grid.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert!(run.join("grid.md").exists());
}
