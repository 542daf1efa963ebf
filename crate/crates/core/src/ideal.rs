//! Effectiveness levels and the ideal rankings they define.
//!
//! A topic's judged documents are partitioned into ordered levels, best
//! first. Every ordering that lists the top level (in any order), then the
//! next level, and so on, is an ideal ranking. Documents outside every level
//! (non-relevant or unjudged) never appear in an ideal ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ranking::{DocId, Ranking};
use crate::trec_io::{GradedQrels, PreferenceQrels};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdealError {
    #[error("topic {0:?} has no judgments")]
    TopicAbsent(String),
    #[error("top-k result for topic {0:?} is empty")]
    EmptyTopK(String),
    #[error("empty effectiveness level for topic {0:?}")]
    EmptyLevel(String),
    #[error("document {doc:?} appears in more than one level of topic {topic:?}")]
    Overlap { topic: String, doc: DocId },
}

/// Ordered partition of a topic's judged documents, best level first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectivenessLevels {
    topic_id: String,
    levels: Vec<BTreeSet<DocId>>,
}

impl EffectivenessLevels {
    /// Levels are given best first. Each must be non-empty and they must be
    /// pairwise disjoint. Zero levels is allowed (nothing is relevant).
    pub fn new(topic_id: impl Into<String>, levels: Vec<BTreeSet<DocId>>) -> Result<Self, IdealError> {
        let topic_id = topic_id.into();
        let mut seen = BTreeSet::new();
        for level in &levels {
            if level.is_empty() {
                return Err(IdealError::EmptyLevel(topic_id));
            }
            for doc in level {
                if !seen.insert(doc) {
                    return Err(IdealError::Overlap {
                        topic: topic_id,
                        doc: doc.clone(),
                    });
                }
            }
        }
        Ok(EffectivenessLevels { topic_id, levels })
    }

    pub fn topic_id(&self) -> &str {
        &self.topic_id
    }

    /// Levels from best to worst.
    pub fn levels(&self) -> &[BTreeSet<DocId>] {
        &self.levels
    }

    /// Number of levels above the implicit bottom level.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn num_docs(&self) -> usize {
        self.levels.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level index counted from the bottom (1 = lowest explicit level, 0 =
    /// not in any level).
    pub fn level_of(&self, doc: &str) -> usize {
        let t = self.levels.len();
        self.levels
            .iter()
            .position(|l| l.contains(doc))
            .map_or(0, |i| t - i)
    }
}

/// Outcome of a top-k assessment. Each group holds documents that tied;
/// groups are ordered best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKResult {
    pub topic_id: String,
    pub groups: Vec<BTreeSet<DocId>>,
    pub k_requested: usize,
    pub k_effective: usize,
}

impl TopKResult {
    pub fn new(topic_id: impl Into<String>, groups: Vec<BTreeSet<DocId>>, k_requested: usize) -> Self {
        let k_effective = groups.iter().map(BTreeSet::len).sum();
        TopKResult {
            topic_id: topic_id.into(),
            groups,
            k_requested,
            k_effective,
        }
    }

    /// Reads a top-k result back from preference judgments: one group per
    /// distinct preference value.
    pub fn from_preferences(prefs: &PreferenceQrels, topic: &str) -> Result<Self, IdealError> {
        let groups = prefs
            .groups(topic)
            .ok_or_else(|| IdealError::TopicAbsent(topic.to_string()))?;
        let k = groups.iter().map(BTreeSet::len).sum();
        Ok(TopKResult::new(topic, groups, k))
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Documents in rank order, ties in doc-id order.
    pub fn docs(&self) -> impl Iterator<Item = &DocId> {
        self.groups.iter().flatten()
    }

    /// Writes the result as preference judgments: the best group receives
    /// the largest value, the last group receives 1.
    pub fn write_preferences(&self, out: &mut PreferenceQrels) {
        let n = self.groups.len();
        for (i, group) in self.groups.iter().enumerate() {
            for doc in group {
                out.insert(self.topic_id.clone(), doc.clone(), (n - i) as f64);
            }
        }
    }
}

/// Grade levels, top grade first. Grades with no documents are skipped and
/// grade 0 falls to the implicit bottom level.
pub fn levels_from_grades(qrels: &GradedQrels, topic: &str) -> Result<EffectivenessLevels, IdealError> {
    let docs = qrels
        .topic(topic)
        .ok_or_else(|| IdealError::TopicAbsent(topic.to_string()))?;
    let levels = grade_levels(docs);
    Ok(EffectivenessLevels::new(topic, levels).expect("grades partition documents"))
}

fn grade_levels(docs: &BTreeMap<DocId, u32>) -> Vec<BTreeSet<DocId>> {
    let mut by_grade: BTreeMap<u32, BTreeSet<DocId>> = BTreeMap::new();
    for (doc, &grade) in docs {
        if grade > 0 {
            by_grade.entry(grade).or_default().insert(doc.clone());
        }
    }
    by_grade.into_values().rev().collect()
}

pub fn levels_from_topk(topk: &TopKResult) -> Result<EffectivenessLevels, IdealError> {
    if topk.is_empty() {
        return Err(IdealError::EmptyTopK(topk.topic_id.clone()));
    }
    EffectivenessLevels::new(topk.topic_id.clone(), topk.groups.clone())
}

/// Levels defined directly by preference values.
pub fn levels_from_preferences(prefs: &PreferenceQrels, topic: &str) -> Result<EffectivenessLevels, IdealError> {
    levels_from_topk(&TopKResult::from_preferences(prefs, topic)?)
}

/// Top-k groups first, then the grade levels with every top-k document
/// removed. Grade levels left empty by the removal are dropped.
pub fn levels_combined(
    topk: &TopKResult,
    qrels: &GradedQrels,
    topic: &str,
) -> Result<EffectivenessLevels, IdealError> {
    let docs = qrels
        .topic(topic)
        .ok_or_else(|| IdealError::TopicAbsent(topic.to_string()))?;
    let top: BTreeSet<&DocId> = topk.docs().collect();
    let mut levels = topk.groups.clone();
    levels.extend(grade_levels(docs).into_iter().filter_map(|level| {
        let rest: BTreeSet<DocId> = level.into_iter().filter(|d| !top.contains(d)).collect();
        (!rest.is_empty()).then_some(rest)
    }));
    EffectivenessLevels::new(topic, levels)
}

/// The ideal ranking most similar to `actual`: within each level, documents
/// retrieved by `actual` come first in their retrieved order, followed by the
/// unretrieved ones in doc-id order.
pub fn best_ideal(levels: &EffectivenessLevels, actual: &Ranking) -> Ranking {
    let position: HashMap<&str, usize> = actual
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let mut ideal = Vec::with_capacity(levels.num_docs());
    for level in levels.levels() {
        let mut retrieved: Vec<(usize, &DocId)> = level
            .iter()
            .filter_map(|d| position.get(d.as_str()).map(|&p| (p, d)))
            .collect();
        retrieved.sort_unstable();
        ideal.extend(retrieved.into_iter().map(|(_, d)| d.clone()));
        ideal.extend(
            level
                .iter()
                .filter(|d| !position.contains_key(d.as_str()))
                .cloned(),
        );
    }
    Ranking::new(ideal).expect("levels are disjoint")
}

/// Size of the ideal ranking set: the product of the level sizes'
/// factorials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdealCount {
    Exact(u128),
    Overflow,
}

impl fmt::Display for IdealCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdealCount::Exact(n) => write!(f, "{n}"),
            IdealCount::Overflow => f.write_str("overflow"),
        }
    }
}

pub fn count_ideal_rankings(levels: &EffectivenessLevels) -> IdealCount {
    let mut total: u128 = 1;
    for level in levels.levels() {
        for i in 2..=level.len() as u128 {
            match total.checked_mul(i) {
                Some(t) => total = t,
                None => return IdealCount::Overflow,
            }
        }
    }
    IdealCount::Exact(total)
}
