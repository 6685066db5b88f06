#![allow(dead_code)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curate::Document;

pub fn curate_bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_curate"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    curate_bin().args(args).output().expect("spawn curate")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes `{"id", "text"}` lines.
pub fn write_jsonl(path: &Path, docs: &[Document]) {
    let mut f = fs::File::create(path).unwrap();
    for d in docs {
        let line = serde_json::json!({"id": d.id, "text": d.text});
        writeln!(f, "{line}").unwrap();
    }
}

pub fn write_glove(path: &Path, table: &curate::EmbeddingTable) {
    table.save(path).unwrap();
}

pub fn write_lexicon(path: &Path, terms: &[String]) -> PathBuf {
    let mut body = String::from("# test lexicon\n");
    for t in terms {
        body.push_str(t);
        body.push('\n');
    }
    fs::write(path, body).unwrap();
    path.to_path_buf()
}

pub fn read_lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn ids(path: &Path) -> Vec<String> {
    read_lines(path)
        .into_iter()
        .map(|v| v["id"].as_str().unwrap().to_string())
        .collect()
}

/// Reference tokenizer: lowercased runs of letters and digits.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    static WORD: std::sync::LazyLock<regex::Regex> =
        std::sync::LazyLock::new(|| regex::Regex::new(r"[\p{Alphabetic}\p{N}]+").unwrap());
    WORD.find_iter(text).map(|m| m.as_str().to_lowercase()).collect()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (nu * nv)
}
