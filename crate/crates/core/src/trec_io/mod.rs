//! TREC-compatible text formats: runs, graded qrels and preference qrels.
//!
//! All three are whitespace-separated, one entry per line:
//!
//! ```text
//! run:          <topic> Q0 <doc> <rank> <score> <tag>
//! graded qrels: <topic> Q0 <doc> <grade>
//! preferences:  <topic> Q0 <doc> <preference>
//! ```
//!
//! The second column is required but its content is ignored; it is always
//! written back as `Q0`. Blank lines are skipped. Extra columns are an error.

mod ledger;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::ranking::{DocId, Ranking};

pub use ledger::{parse_ledger, read_ledger, JudgmentRecord, Ledger};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate entry for topic {topic:?}, document {doc:?}")]
    Duplicate {
        line: usize,
        topic: String,
        doc: DocId,
    },
    #[error("invalid judgment record: {0}")]
    InvalidRecord(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn malformed(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        msg: msg.into(),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits `text` into numbered, non-blank lines and checks the column count.
fn columns(text: &str, expected: usize) -> impl Iterator<Item = Result<(usize, Vec<&str>), FormatError>> {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            return None;
        }
        let line = i + 1;
        if cols.len() != expected {
            return Some(Err(malformed(
                line,
                format!("expected {expected} columns, found {}", cols.len()),
            )));
        }
        Some(Ok((line, cols)))
    })
}

/// One retrieved document in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: DocId,
    pub rank: u32,
    pub score: f64,
}

fn run_order(a: &RunEntry, b: &RunEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.rank.cmp(&b.rank))
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// A parsed run. Entries for each topic are kept in ranking order: score
/// descending, then the rank column, then document id.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub run_tag: String,
    topics: BTreeMap<String, Vec<RunEntry>>,
}

impl RunFile {
    pub fn new(run_tag: impl Into<String>) -> Self {
        RunFile {
            run_tag: run_tag.into(),
            topics: BTreeMap::new(),
        }
    }

    /// Builds a run whose per-topic order is exactly the given rankings.
    pub fn from_rankings<I>(run_tag: impl Into<String>, rankings: I) -> Self
    where
        I: IntoIterator<Item = (String, Ranking)>,
    {
        let mut run = RunFile::new(run_tag);
        for (topic, ranking) in rankings {
            let n = ranking.len();
            let entries = ranking
                .into_vec()
                .into_iter()
                .enumerate()
                .map(|(i, doc_id)| RunEntry {
                    doc_id,
                    rank: i as u32 + 1,
                    score: (n - i) as f64,
                })
                .collect();
            run.topics.insert(topic, entries);
        }
        run
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn entries(&self, topic: &str) -> &[RunEntry] {
        self.topics.get(topic).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.topics.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// The topic's ranking; empty when the run has no entries for it.
    pub fn ranking(&self, topic: &str) -> Ranking {
        let docs = self.entries(topic).iter().map(|e| e.doc_id.clone());
        Ranking::new(docs).expect("run entries are unique per topic")
    }

    pub fn rankings(&self) -> BTreeMap<String, Ranking> {
        self.topics
            .keys()
            .map(|t| (t.clone(), self.ranking(t)))
            .collect()
    }

    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, entries) in &self.topics {
            for e in entries {
                let _ = writeln!(
                    out,
                    "{topic} Q0 {} {} {} {}",
                    e.doc_id, e.rank, e.score, self.run_tag
                );
            }
        }
        out
    }
}

pub fn parse_run(text: &str) -> Result<RunFile, FormatError> {
    let mut run_tag: Option<String> = None;
    let mut topics: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for row in columns(text, 6) {
        let (line, cols) = row?;
        let rank: u32 = cols[3]
            .parse()
            .ok()
            .filter(|&r| r > 0)
            .ok_or_else(|| malformed(line, format!("rank {:?} is not a positive integer", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| malformed(line, format!("score {:?} is not a finite number", cols[4])))?;
        match &run_tag {
            None => run_tag = Some(cols[5].to_string()),
            Some(tag) if tag != cols[5] => {
                return Err(malformed(
                    line,
                    format!("run tag {:?} differs from {:?}", cols[5], tag),
                ))
            }
            Some(_) => {}
        }
        if !seen.insert((cols[0].to_string(), cols[2].to_string())) {
            return Err(FormatError::Duplicate {
                line,
                topic: cols[0].to_string(),
                doc: cols[2].to_string(),
            });
        }
        topics.entry(cols[0].to_string()).or_default().push(RunEntry {
            doc_id: cols[2].to_string(),
            rank,
            score,
        });
    }
    for entries in topics.values_mut() {
        entries.sort_by(run_order);
    }
    Ok(RunFile {
        run_tag: run_tag.unwrap_or_default(),
        topics,
    })
}

pub fn read_run(path: &Path) -> Result<RunFile, FormatError> {
    parse_run(&read_text(path)?)
}

/// Graded relevance judgments. Grade 0 is kept: it marks judged non-relevant
/// documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradedQrels {
    topics: BTreeMap<String, BTreeMap<DocId, u32>>,
}

impl GradedQrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment, returning `false` if the pair was already present.
    pub fn insert(&mut self, topic: impl Into<String>, doc: impl Into<DocId>, grade: u32) -> bool {
        self.topics
            .entry(topic.into())
            .or_default()
            .insert(doc.into(), grade)
            .is_none()
    }

    pub fn topic(&self, topic: &str) -> Option<&BTreeMap<DocId, u32>> {
        self.topics.get(topic)
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn grade(&self, topic: &str, doc: &str) -> Option<u32> {
        self.topics.get(topic)?.get(doc).copied()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn len(&self) -> usize {
        self.topics.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// Documents judged with grade 0 for the topic.
    pub fn nonrelevant(&self, topic: &str) -> BTreeSet<DocId> {
        self.topics
            .get(topic)
            .map(|docs| {
                docs.iter()
                    .filter(|(_, &g)| g == 0)
                    .map(|(d, _)| d.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.topics {
            for (doc, grade) in docs {
                let _ = writeln!(out, "{topic} Q0 {doc} {grade}");
            }
        }
        out
    }
}

pub fn parse_graded_qrels(text: &str) -> Result<GradedQrels, FormatError> {
    let mut qrels = GradedQrels::new();
    for row in columns(text, 4) {
        let (line, cols) = row?;
        let grade: u32 = cols[3].parse().map_err(|_| {
            malformed(
                line,
                format!("grade {:?} is not a non-negative integer", cols[3]),
            )
        })?;
        if !qrels.insert(cols[0], cols[2], grade) {
            return Err(FormatError::Duplicate {
                line,
                topic: cols[0].to_string(),
                doc: cols[2].to_string(),
            });
        }
    }
    Ok(qrels)
}

pub fn read_graded_qrels(path: &Path) -> Result<GradedQrels, FormatError> {
    parse_graded_qrels(&read_text(path)?)
}

/// Preference judgments: larger values are better, equal values share an
/// effectiveness level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceQrels {
    topics: BTreeMap<String, BTreeMap<DocId, f64>>,
}

impl PreferenceQrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a preference; returns `false` if the pair was already present.
    /// Panics on a non-positive or non-finite value.
    pub fn insert(&mut self, topic: impl Into<String>, doc: impl Into<DocId>, preference: f64) -> bool {
        assert!(
            preference.is_finite() && preference > 0.0,
            "preference must be a positive finite number"
        );
        self.topics
            .entry(topic.into())
            .or_default()
            .insert(doc.into(), preference)
            .is_none()
    }

    pub fn topic(&self, topic: &str) -> Option<&BTreeMap<DocId, f64>> {
        self.topics.get(topic)
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// Documents grouped by distinct preference value, best group first.
    pub fn groups(&self, topic: &str) -> Option<Vec<BTreeSet<DocId>>> {
        let docs = self.topics.get(topic)?;
        let mut values: Vec<f64> = docs.values().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values.dedup();
        Some(
            values
                .iter()
                .map(|v| {
                    docs.iter()
                        .filter(|(_, p)| *p == v)
                        .map(|(d, _)| d.clone())
                        .collect()
                })
                .collect(),
        )
    }

    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.topics {
            for (doc, pref) in docs {
                let _ = writeln!(out, "{topic} Q0 {doc} {pref}");
            }
        }
        out
    }
}

pub fn parse_preference_qrels(text: &str) -> Result<PreferenceQrels, FormatError> {
    let mut prefs = PreferenceQrels::new();
    for row in columns(text, 4) {
        let (line, cols) = row?;
        let value: f64 = cols[3]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v > 0.0)
            .ok_or_else(|| {
                malformed(
                    line,
                    format!("preference {:?} is not a positive number", cols[3]),
                )
            })?;
        if !prefs.insert(cols[0], cols[2], value) {
            return Err(FormatError::Duplicate {
                line,
                topic: cols[0].to_string(),
                doc: cols[2].to_string(),
            });
        }
    }
    Ok(prefs)
}

pub fn read_preference_qrels(path: &Path) -> Result<PreferenceQrels, FormatError> {
    parse_preference_qrels(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking;

    #[test]
    fn single_line_run() {
        let run = parse_run("31.1 Q0 D7 1 9.5 rA").unwrap();
        assert_eq!(run.run_tag, "rA");
        assert_eq!(run.topic_ids().collect::<Vec<_>>(), ["31.1"]);
        assert_eq!(run.ranking("31.1"), ranking!["D7"]);
    }

    #[test]
    fn run_sorted_by_score() {
        let run = parse_run("31.1 Q0 D2 2 3.2 rA\n31.1 Q0 D7 1 9.5 rA\n").unwrap();
        assert_eq!(run.ranking("31.1"), ranking!["D7", "D2"]);
    }

    #[test]
    fn run_ties_use_rank_then_doc_id() {
        let text = "1 Q0 z 2 1.0 t\n1 Q0 y 1 1.0 t\n1 Q0 b 3 1.0 t\n1 Q0 a 3 1.0 t\n";
        let run = parse_run(text).unwrap();
        assert_eq!(run.ranking("1"), ranking!["y", "z", "a", "b"]);
    }

    #[test]
    fn run_duplicate_doc_rejected() {
        let err = parse_run("1 Q0 a 1 2 t\n1 Q0 a 2 1 t\n").unwrap_err();
        assert!(matches!(err, FormatError::Duplicate { line: 2, .. }));
    }

    #[test]
    fn run_malformed_lines() {
        let err = parse_run("1 Q0 a 1 2 t\n\n1 Q0 b 2 x t\n").unwrap_err();
        assert!(matches!(err, FormatError::Malformed { line: 3, .. }), "{err}");
        assert!(parse_run("1 Q0 a 1 2").is_err());
        assert!(parse_run("1 Q0 a 1 2 t extra").is_err());
        assert!(parse_run("1 Q0 a 0 2 t").is_err());
        assert!(parse_run("1 Q0 a 1 NaN t").is_err());
        assert!(parse_run("1 Q0 a 1 2 t\n1 Q0 b 2 1 u").is_err());
    }

    #[test]
    fn missing_topic_is_empty_ranking() {
        let run = parse_run("1 Q0 a 1 2 t").unwrap();
        assert!(run.ranking("2").is_empty());
    }

    #[test]
    fn graded_qrels() {
        let q = parse_graded_qrels("67.10 Q0 M1 4\n67.10 0 M2 0\n").unwrap();
        assert_eq!(q.grade("67.10", "M1"), Some(4));
        assert_eq!(q.grade("67.10", "M2"), Some(0));
        assert_eq!(q.nonrelevant("67.10"), BTreeSet::from(["M2".to_string()]));
        assert!(parse_graded_qrels("1 Q0 a -1").is_err());
        assert!(parse_graded_qrels("1 Q0 a 1.5").is_err());
        assert!(matches!(
            parse_graded_qrels("1 Q0 a 1\n1 Q0 a 2"),
            Err(FormatError::Duplicate { .. })
        ));
    }

    #[test]
    fn preference_levels() {
        let p = parse_preference_qrels("t Q0 A 9\nt Q0 B 8\nt Q0 C 8\n").unwrap();
        let groups = p.groups("t").unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0], BTreeSet::from(["A".to_string()]));
        assert_eq!(groups[1], BTreeSet::from(["B".to_string(), "C".to_string()]));

        let single = parse_preference_qrels("t Q0 A 0.5").unwrap();
        assert_eq!(single.groups("t").unwrap().len(), 1);

        assert!(parse_preference_qrels("t Q0 A 0").is_err());
        assert!(parse_preference_qrels("t Q0 A -2").is_err());
        assert!(parse_preference_qrels("t Q0 A 1\nt Q0 A 2").is_err());
    }

    #[test]
    fn emit_uses_q0() {
        let run = parse_run("1 0 a 1 2.5 t").unwrap();
        assert_eq!(run.to_trec_string(), "1 Q0 a 1 2.5 t\n");
        let q = parse_graded_qrels("1 0 a 3").unwrap();
        assert_eq!(q.to_trec_string(), "1 Q0 a 3\n");
    }
}
