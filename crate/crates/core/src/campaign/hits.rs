//! HIT batches: groups of real pairs salted with challenge pairs.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ranking::DocId;
use crate::trec_io::JudgmentRecord;

use super::config::CampaignConfig;
use super::pairing::PairingPlan;
use super::{CampaignError, Pair};

/// One question in a batch. `doc_a` is shown on the left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitItem {
    pub pair_id: String,
    pub topic: String,
    pub doc_a: DocId,
    pub doc_b: DocId,
    /// For challenge items, the known non-relevant document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge: Option<DocId>,
}

impl HitItem {
    pub fn pair(&self) -> Pair {
        Pair::new(self.doc_a.clone(), self.doc_b.clone())
    }

    pub fn is_challenge(&self) -> bool {
        self.challenge.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitBatch {
    pub batch_id: String,
    pub topic: String,
    /// Stage tag of the plan the real pairs come from.
    pub stage: String,
    pub items: Vec<HitItem>,
}

impl HitBatch {
    pub fn item(&self, pair_id: &str) -> Option<&HitItem> {
        self.items.iter().find(|i| i.pair_id == pair_id)
    }

    /// Real (non-challenge) pairs in the batch.
    pub fn real_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.items.iter().filter(|i| !i.is_challenge()).map(HitItem::pair)
    }

    /// Ledger records for a complete submission, in item order.
    pub fn records(&self, submission: &Submission, timestamp: u64) -> Vec<JudgmentRecord> {
        self.items
            .iter()
            .filter_map(|item| {
                let winner = submission.answers.get(&item.pair_id)?;
                Some(JudgmentRecord {
                    topic: item.topic.clone(),
                    doc_a: item.doc_a.clone(),
                    doc_b: item.doc_b.clone(),
                    winner: winner.clone(),
                    assessor: submission.assessor.clone(),
                    stage: self.stage.clone(),
                    batch: self.batch_id.clone(),
                    challenge: item.is_challenge(),
                    timestamp,
                })
            })
            .collect()
    }
}

/// A worker's answers to one batch, keyed by pair id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub assessor: String,
    pub answers: BTreeMap<String, DocId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HitVerdict {
    Accepted,
    /// Pair ids of the failed challenge items.
    Rejected { failed: Vec<String> },
    /// The assessor was already excluded.
    Refused,
}

/// Splits the plan's pairs into batches of `hit_size` and adds
/// `challenges_per_hit` challenge items to each. Pair order, sides and the
/// position of challenges are all drawn from `seed`.
pub fn build_hits(
    plan: &PairingPlan,
    nonrelevant: &BTreeSet<DocId>,
    config: &CampaignConfig,
    seed: u64,
) -> Result<Vec<HitBatch>, CampaignError> {
    build_hits_for(plan, plan.pairs.iter().cloned().collect(), nonrelevant, config, seed)
}

/// Like [`build_hits`], restricted to `pairs` (a subset of the plan).
pub(crate) fn build_hits_for(
    plan: &PairingPlan,
    mut pairs: Vec<Pair>,
    nonrelevant: &BTreeSet<DocId>,
    config: &CampaignConfig,
    seed: u64,
) -> Result<Vec<HitBatch>, CampaignError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let nonrelevant: Vec<&DocId> = nonrelevant.iter().collect();
    if config.challenges_per_hit > 0 && nonrelevant.is_empty() {
        return Err(CampaignError::NoNonrelevant(plan.topic_id.clone()));
    }
    let candidates: Vec<&DocId> = plan.docs().into_iter().collect();
    let stage = plan.stage.tag();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);

    let mut batches = Vec::new();
    for (i, chunk) in pairs.chunks(config.hit_size).enumerate() {
        let mut sides: Vec<(DocId, DocId, Option<DocId>)> = chunk
            .iter()
            .map(|p| {
                let (a, b) = (p.first().clone(), p.second().clone());
                if rng.random::<bool>() { (a, b, None) } else { (b, a, None) }
            })
            .collect();
        for _ in 0..config.challenges_per_hit {
            let cand = (*candidates.choose(&mut rng).expect("plan has pairs")).clone();
            let bad = (*nonrelevant.choose(&mut rng).expect("checked above")).clone();
            sides.push(if rng.random::<bool>() {
                (cand, bad.clone(), Some(bad))
            } else {
                (bad.clone(), cand, Some(bad))
            });
        }
        sides.shuffle(&mut rng);
        let batch_id = format!("{}:{}:{:x}:{}", plan.topic_id, stage, seed, i);
        let items = sides
            .into_iter()
            .enumerate()
            .map(|(j, (doc_a, doc_b, challenge))| HitItem {
                pair_id: format!("{batch_id}:{j}"),
                topic: plan.topic_id.clone(),
                doc_a,
                doc_b,
                challenge,
            })
            .collect();
        batches.push(HitBatch {
            batch_id,
            topic: plan.topic_id.clone(),
            stage: stage.clone(),
            items,
        });
    }
    Ok(batches)
}

/// Checks a submission against its batch. A batch is rejected when any
/// challenge item was answered with the non-relevant document.
pub fn validate_hit(
    batch: &HitBatch,
    submission: &Submission,
    excluded: &BTreeSet<String>,
) -> Result<HitVerdict, CampaignError> {
    if excluded.contains(&submission.assessor) {
        return Ok(HitVerdict::Refused);
    }
    for (pair_id, winner) in &submission.answers {
        let item = batch.item(pair_id).ok_or_else(|| CampaignError::UnknownItem {
            batch: batch.batch_id.clone(),
            pair_id: pair_id.clone(),
        })?;
        if *winner != item.doc_a && *winner != item.doc_b {
            return Err(CampaignError::InvalidWinner {
                pair: item.pair(),
                winner: winner.clone(),
            });
        }
    }
    let missing: Vec<String> = batch
        .items
        .iter()
        .filter(|i| !submission.answers.contains_key(&i.pair_id))
        .map(|i| i.pair_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CampaignError::IncompleteBatch {
            batch: batch.batch_id.clone(),
            missing,
        });
    }
    let failed: Vec<String> = batch
        .items
        .iter()
        .filter(|i| i.challenge.as_ref() == submission.answers.get(&i.pair_id))
        .map(|i| i.pair_id.clone())
        .collect();
    Ok(if failed.is_empty() {
        HitVerdict::Accepted
    } else {
        HitVerdict::Rejected { failed }
    })
}
