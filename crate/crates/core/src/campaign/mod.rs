//! Top-k assessment protocol.
//!
//! A topic's graded pool is first thinned to a small candidate set. From
//! there, either
//!
//! * crowdsourced assessment: reduction rounds pair every candidate with
//!   `P` or `P + 1` others and keep majority winners until at most `F`
//!   candidates remain, then a round robin ranks the rest by wins; or
//! * dedicated assessment: a single-elimination tournament extracts the
//!   top `k` one at a time.
//!
//! Crowd judgments are collected in HIT batches salted with challenge pairs
//! (a candidate against a known non-relevant document). [`Campaign`] replays
//! the judgment ledger into per-topic state; the same state is reached
//! whether judgments are applied live or replayed from disk.

mod aggregate;
mod config;
mod engine;
mod hits;
mod pairing;
mod protocol;
mod simulate;
mod thinning;
mod tournament;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranking::DocId;
use crate::trec_io::FormatError;

pub use aggregate::{aggregate_pair, aggregate_plan};
pub use config::{AssessmentMode, CampaignConfig};
pub use engine::{BatchOutcome, Campaign, Phase, TopicState, TopicStatus};
pub use hits::{build_hits, validate_hit, HitBatch, HitItem, HitVerdict, Submission};
pub use pairing::{plan_reduction_round, plan_round_robin, PairingPlan, PlanStage};
pub use protocol::{cull, finalize_topk, win_counts};
pub use simulate::{simulate_campaign, AssessorModel, SimulatedAssessor, SimulationReport};
pub use thinning::{thin_herd, CandidatePool, PoolStage};
pub use tournament::{estimate_tournament_cost, tournament_bound, TournamentSession};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error("topic {0:?} is not part of the campaign")]
    UnknownTopic(String),
    #[error("topic {topic:?}: cannot pair {n} candidates with {p} partners each")]
    DegreeTooLarge { topic: String, n: usize, p: usize },
    #[error("topic {topic:?}: no pairing plan found ({reason})")]
    PairingInfeasible { topic: String, reason: String },
    #[error("topic {topic:?}: {} pair(s) not yet judged, e.g. {}", .pairs.len(), .pairs.first().map(|p| p.to_string()).unwrap_or_default())]
    Unjudged { topic: String, pairs: Vec<Pair> },
    #[error("topic {0:?}: challenge pairs requested but no non-relevant documents are known")]
    NoNonrelevant(String),
    #[error("batch {batch:?} is incomplete: {} item(s) unanswered", .missing.len())]
    IncompleteBatch { batch: String, missing: Vec<String> },
    #[error("batch {batch:?} has no item {pair_id:?}")]
    UnknownItem { batch: String, pair_id: String },
    #[error("{winner:?} is not one of the documents of pair {pair}")]
    InvalidWinner { pair: Pair, winner: DocId },
    #[error("no judgments recorded for pair {0}")]
    NoJudgments(Pair),
    #[error("pair {0} has not been issued")]
    NotIssued(Pair),
    #[error("batch mixes assessors {0:?} and {1:?}")]
    MixedAssessors(String, String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Unordered pair of distinct documents, stored smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(DocId, DocId);

impl Pair {
    /// Panics if both documents are the same.
    pub fn new(a: impl Into<DocId>, b: impl Into<DocId>) -> Self {
        let (a, b) = (a.into(), b.into());
        assert_ne!(a, b, "a document cannot be paired with itself");
        if a < b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    pub fn first(&self) -> &DocId {
        &self.0
    }

    pub fn second(&self) -> &DocId {
        &self.1
    }

    pub fn contains(&self, doc: &str) -> bool {
        self.0 == doc || self.1 == doc
    }

    /// The partner of `doc`, if `doc` is in the pair.
    pub fn other(&self, doc: &str) -> Option<&DocId> {
        if self.0 == doc {
            Some(&self.1)
        } else if self.1 == doc {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Derives an independent seed for a labelled sub-stream (topic, round,
/// trial, ...) so each piece of randomness is reproducible on its own.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into the seed with a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
