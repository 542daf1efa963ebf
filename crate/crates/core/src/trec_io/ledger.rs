//! Append-only judgment ledger stored as JSON lines.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, FormatError};
use crate::ranking::DocId;

/// One pairwise preference judgment. Ties cannot be recorded: the winner is
/// always one of the two documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub topic: String,
    pub doc_a: DocId,
    pub doc_b: DocId,
    pub winner: DocId,
    pub assessor: String,
    /// Protocol stage the pair was issued for, e.g. `reduction:1`,
    /// `round_robin` or `tournament`.
    pub stage: String,
    pub batch: String,
    #[serde(default)]
    pub challenge: bool,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl JudgmentRecord {
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.doc_a == self.doc_b {
            return Err(FormatError::InvalidRecord(format!(
                "document {:?} paired with itself",
                self.doc_a
            )));
        }
        if self.winner != self.doc_a && self.winner != self.doc_b {
            return Err(FormatError::InvalidRecord(format!(
                "winner {:?} is neither {:?} nor {:?}",
                self.winner, self.doc_a, self.doc_b
            )));
        }
        Ok(())
    }

    pub fn loser(&self) -> &DocId {
        if self.winner == self.doc_a {
            &self.doc_b
        } else {
            &self.doc_a
        }
    }
}

/// Parses ledger text. A trailing line without a newline is treated as a
/// write in progress and skipped, so concurrent readers see a clean prefix.
pub fn parse_ledger(text: &str) -> Result<Vec<JudgmentRecord>, FormatError> {
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    let mut records = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: JudgmentRecord =
            serde_json::from_str(line).map_err(|e| FormatError::Malformed {
                line: i + 1,
                msg: e.to_string(),
            })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_ledger(path: &Path) -> Result<Vec<JudgmentRecord>, FormatError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    parse_ledger(&read_text(path)?)
}

/// Single writer handle on a ledger file.
#[derive(Debug)]
pub struct Ledger {
    path: PathBuf,
    file: File,
}

impl Ledger {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, FormatError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| io_err(&path, source))?;
        Ok(Ledger { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &JudgmentRecord) -> Result<(), FormatError> {
        self.append_all(std::slice::from_ref(record))
    }

    /// Appends records with a single write so a batch lands as a unit.
    pub fn append_all(&mut self, records: &[JudgmentRecord]) -> Result<(), FormatError> {
        let mut buf = String::new();
        for r in records {
            r.validate()?;
            buf.push_str(&serde_json::to_string(r).expect("record serializes"));
            buf.push('\n');
        }
        self.file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|source| io_err(&self.path, source))
    }

    pub fn read(&self) -> Result<Vec<JudgmentRecord>, FormatError> {
        read_ledger(&self.path)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: usize) -> JudgmentRecord {
        JudgmentRecord {
            topic: "t1".into(),
            doc_a: format!("d{i}"),
            doc_b: format!("e{i}"),
            winner: format!("e{i}"),
            assessor: "w".into(),
            stage: "round_robin".into(),
            batch: format!("b{}", i / 10),
            challenge: i.is_multiple_of(7),
            timestamp: i as u64,
        }
    }

    #[test]
    fn append_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::open(dir.path().join("ledger.jsonl")).unwrap();
        ledger.append(&record(1)).unwrap();
        assert_eq!(ledger.read().unwrap(), vec![record(1)]);
    }

    #[test]
    fn thousand_appends_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::open(dir.path().join("ledger.jsonl")).unwrap();
        for i in 0..1000 {
            ledger.append(&record(i)).unwrap();
        }
        let back = read_ledger(ledger.path()).unwrap();
        assert_eq!(back.len(), 1000);
        assert!(back.iter().enumerate().all(|(i, r)| *r == record(i)));
    }

    #[test]
    fn foreign_winner_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::open(dir.path().join("ledger.jsonl")).unwrap();
        let mut bad = record(1);
        bad.winner = "doc_c".into();
        assert!(matches!(ledger.append(&bad), Err(FormatError::InvalidRecord(_))));
        assert!(ledger.read().unwrap().is_empty());

        let line = serde_json::to_string(&bad).unwrap() + "\n";
        assert!(parse_ledger(&line).is_err());
    }

    #[test]
    fn partial_trailing_line_is_skipped() {
        let full = serde_json::to_string(&record(1)).unwrap() + "\n";
        let partial = format!("{full}{{\"topic\":\"t1\",\"doc_");
        assert_eq!(parse_ledger(&partial).unwrap(), vec![record(1)]);
    }

    #[test]
    fn missing_file_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_ledger(&dir.path().join("nope.jsonl")).unwrap().is_empty());
    }
}
