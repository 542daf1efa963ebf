//! Rankings: ordered, duplicate-free lists of document identifiers.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Document identifier as it appears in run and qrels files.
pub type DocId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankingError {
    #[error("document {0:?} appears more than once in the ranking")]
    Duplicate(DocId),
}

/// An ordered list of documents for a single topic, best first.
///
/// Construction rejects duplicates, so every `Ranking` is a valid input for
/// the rank similarity measures.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Ranking(Vec<DocId>);

impl Ranking {
    pub fn new<I, S>(docs: I) -> Result<Self, RankingError>
    where
        I: IntoIterator<Item = S>,
        S: Into<DocId>,
    {
        let docs: Vec<DocId> = docs.into_iter().map(Into::into).collect();
        let mut seen = HashSet::with_capacity(docs.len());
        for d in &docs {
            if !seen.insert(d.as_str()) {
                return Err(RankingError::Duplicate(d.clone()));
            }
        }
        Ok(Ranking(docs))
    }

    pub fn empty() -> Self {
        Ranking(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[DocId] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DocId> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<DocId> {
        self.0
    }

    /// Keeps only the first `depth` documents.
    pub fn truncated(&self, depth: usize) -> Ranking {
        Ranking(self.0.iter().take(depth).cloned().collect())
    }
}

impl<'a> IntoIterator for &'a Ranking {
    type Item = &'a DocId;
    type IntoIter = std::slice::Iter<'a, DocId>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

/// Builds a ranking from string literals, panicking on duplicates. Test and
/// fixture helper.
#[macro_export]
macro_rules! ranking {
    ($($doc:expr),* $(,)?) => {
        $crate::Ranking::new([$($doc),*]).expect("duplicate document in ranking literal")
    };
}
