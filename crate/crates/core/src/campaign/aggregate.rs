use std::collections::BTreeMap;

use log::warn;

use crate::ranking::DocId;
use crate::trec_io::JudgmentRecord;

use super::pairing::PairingPlan;
use super::{CampaignError, Pair};

/// Majority vote over the accepted judgments of one pair. An even split goes
/// to the lexicographically smaller document id, with a warning.
pub fn aggregate_pair(records: &[&JudgmentRecord]) -> Result<DocId, CampaignError> {
    let first = records.first().ok_or_else(|| CampaignError::NoJudgments(Pair::new("?", "??")))?;
    let pair = Pair::new(first.doc_a.clone(), first.doc_b.clone());
    let mut votes = 0i64;
    for r in records {
        if Pair::new(r.doc_a.clone(), r.doc_b.clone()) != pair || !pair.contains(&r.winner) {
            return Err(CampaignError::InvalidWinner {
                pair,
                winner: r.winner.clone(),
            });
        }
        votes += if r.winner == *pair.first() { 1 } else { -1 };
    }
    if votes == 0 {
        warn!(
            "topic {}: judgments for {pair} split evenly; awarding {}",
            first.topic,
            pair.first()
        );
    }
    Ok(if votes >= 0 { pair.first() } else { pair.second() }.clone())
}

/// Aggregated winners for every planned pair that has at least one record.
pub fn aggregate_plan(
    plan: &PairingPlan,
    votes: &BTreeMap<Pair, Vec<JudgmentRecord>>,
) -> Result<BTreeMap<Pair, DocId>, CampaignError> {
    let mut winners = BTreeMap::new();
    for pair in &plan.pairs {
        if let Some(records) = votes.get(pair).filter(|r| !r.is_empty()) {
            let refs: Vec<&JudgmentRecord> = records.iter().collect();
            winners.insert(pair.clone(), aggregate_pair(&refs)?);
        }
    }
    Ok(winners)
}
