use std::collections::{BTreeMap, BTreeSet};

use crate::ideal::TopKResult;
use crate::ranking::DocId;
use crate::trec_io::GradedQrels;

use super::CampaignError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolStage {
    Thinned,
    /// Reduction round number, starting at 1.
    Reduction(u32),
    RoundRobin,
    Tournament,
    Finalized(TopKResult),
}

impl PoolStage {
    fn order(&self) -> (u32, u32) {
        match self {
            PoolStage::Thinned => (0, 0),
            PoolStage::Reduction(r) => (1, *r),
            PoolStage::RoundRobin | PoolStage::Tournament => (2, 0),
            PoolStage::Finalized(_) => (3, 0),
        }
    }
}

/// Candidates still in contention for a topic's top-k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    pub topic_id: String,
    pub candidates: BTreeSet<DocId>,
    stage: PoolStage,
}

impl CandidatePool {
    pub fn new(topic_id: impl Into<String>, candidates: BTreeSet<DocId>, stage: PoolStage) -> Self {
        CandidatePool {
            topic_id: topic_id.into(),
            candidates,
            stage,
        }
    }

    pub fn stage(&self) -> &PoolStage {
        &self.stage
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Moves to a later stage. Panics on a backwards transition.
    pub fn advance(&mut self, stage: PoolStage) {
        assert!(
            stage.order() > self.stage.order(),
            "pool stage can only move forward ({:?} -> {:?})",
            self.stage,
            stage
        );
        self.stage = stage;
    }

    /// Same candidates, later stage.
    pub(crate) fn with_candidates(&self, candidates: BTreeSet<DocId>, stage: PoolStage) -> Self {
        let mut next = CandidatePool::new(self.topic_id.clone(), candidates, self.stage.clone());
        next.advance(stage);
        next
    }
}

/// Unions grade sets from the top grade down until the pool holds at least
/// `k` documents or the positive grades run out.
pub fn thin_herd(qrels: &GradedQrels, topic: &str, k: usize) -> Result<CandidatePool, CampaignError> {
    let docs = qrels
        .topic(topic)
        .ok_or_else(|| CampaignError::UnknownTopic(topic.to_string()))?;
    let mut by_grade: BTreeMap<u32, Vec<&DocId>> = BTreeMap::new();
    for (doc, &grade) in docs {
        by_grade.entry(grade).or_default().push(doc);
    }
    let mut pool = BTreeSet::new();
    for (&grade, docs) in by_grade.iter().rev() {
        if pool.len() >= k || grade == 0 {
            break;
        }
        pool.extend(docs.iter().map(|d| (*d).clone()));
    }
    Ok(CandidatePool::new(topic, pool, PoolStage::Thinned))
}
