//! Fixture writers and a scripted assessor shared by the CLI tests.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use compat_cli::campaign_cmd::{Answer, WorkerItem};
use compat_cli::Cli;

/// Runs the CLI in-process and returns its standard output.
pub fn run(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("compat").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    compat_cli::run(&cli, &mut out)?;
    Ok(String::from_utf8(out)?)
}

pub fn run_ok(args: &[&str]) -> String {
    run(args).unwrap_or_else(|e| panic!("compat {args:?} failed: {e:#}"))
}

/// Runs the built binary: (exit success, stdout, stderr).
pub fn run_bin(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_compat")).args(args).output().expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A TREC run listing `docs` per topic in the given order.
pub fn run_text(tag: &str, topics: &[(&str, Vec<String>)]) -> String {
    let mut out = String::new();
    for (topic, docs) in topics {
        for (i, d) in docs.iter().enumerate() {
            writeln!(out, "{topic} Q0 {d} {} {} {tag}", i + 1, docs.len() - i).unwrap();
        }
    }
    out
}

/// Campaign fixture: topic `small` has six candidates `s0..s5` at grade 3,
/// topic `large` has twenty candidates `l00..l19` at grade 2; each topic
/// also has grade-1 and grade-0 documents. Passage text is `rank N`, where
/// N is the document's position in the hidden true order.
pub struct CampaignFixture {
    pub qrels: String,
    pub docs: String,
    pub questions: String,
}

impl CampaignFixture {
    pub fn new() -> Self {
        let mut qrels = String::new();
        let mut docs = String::new();
        let mut add = |topic: &str, doc: String, grade: u32, rank: usize| {
            writeln!(qrels, "{topic} 0 {doc} {grade}").unwrap();
            writeln!(docs, "{doc}\trank {rank}").unwrap();
        };
        for i in 0..6 {
            add("small", format!("s{i}"), 3, i);
        }
        for i in 0..20 {
            add("large", format!("l{i:02}"), 2, i);
        }
        for topic in ["small", "large"] {
            for i in 0..3 {
                add(topic, format!("{topic}-m{i}"), 1, 100 + i);
                add(topic, format!("{topic}-z{i}"), 0, 900 + i);
            }
        }
        CampaignFixture {
            qrels,
            docs,
            questions: "small\twhat is small?\nlarge\twhat is large?\n".into(),
        }
    }

    /// Writes the fixture files into `dir` and runs `campaign init` on
    /// `dir/campaign` with any extra flags.
    pub fn init(&self, dir: &Path, extra: &[&str]) -> PathBuf {
        let qrels = write(dir, "qrels.txt", &self.qrels);
        let docs = write(dir, "docs.tsv", &self.docs);
        let questions = write(dir, "questions.tsv", &self.questions);
        let root = dir.join("campaign");
        let mut args = vec!["campaign", "init", s(&root), "--qrels", s(&qrels), "--docs", s(&docs), "--questions", s(&questions)];
        args.extend_from_slice(extra);
        run_ok(&args);
        root
    }
}

pub fn rank_of(passage: &str) -> usize {
    passage.strip_prefix("rank ").and_then(|r| r.parse().ok()).expect("fixture passage")
}

/// `a` or `b`: the side a consistent assessor picks, or the other side
/// when `careless`.
pub fn choose(passage_a: &str, passage_b: &str, careless: bool) -> &'static str {
    let a_better = rank_of(passage_a) < rank_of(passage_b);
    if a_better != careless {
        "a"
    } else {
        "b"
    }
}

pub fn parse_export(text: &str) -> Vec<WorkerItem> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// Answers every exported item as `assessor`, skipping batches for which
/// `skip` returns true.
pub fn answer_all(items: &[WorkerItem], assessor: &str, careless: bool, skip: impl Fn(&str) -> bool) -> String {
    let mut out = String::new();
    for item in items.iter().filter(|i| !skip(&i.batch_id)) {
        let answer = Answer {
            pair_id: item.pair_id.clone(),
            assessor: assessor.into(),
            winner: choose(&item.passage_a, &item.passage_b, careless).into(),
            timestamp: 0,
        };
        out.push_str(&serde_json::to_string(&answer).unwrap());
        out.push('\n');
    }
    out
}

/// Parses tab-separated `campaign status` output into rows keyed by topic.
pub fn status_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with("excluded"))
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}
