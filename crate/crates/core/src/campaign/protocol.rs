//! Culling after a reduction round and the final cut after the round robin.

use std::collections::{BTreeMap, BTreeSet};

use crate::ideal::TopKResult;
use crate::ranking::DocId;

use super::pairing::PairingPlan;
use super::thinning::{CandidatePool, PoolStage};
use super::{CampaignError, Pair};

/// Wins and degree of every candidate in the plan. Fails if any planned
/// pair has no winner.
pub fn win_counts(
    pool: &CandidatePool,
    plan: &PairingPlan,
    winners: &BTreeMap<Pair, DocId>,
) -> Result<BTreeMap<DocId, (usize, usize)>, CampaignError> {
    let missing: Vec<Pair> = plan
        .pairs
        .iter()
        .filter(|p| !winners.contains_key(*p))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CampaignError::Unjudged {
            topic: plan.topic_id.clone(),
            pairs: missing,
        });
    }
    let mut counts: BTreeMap<DocId, (usize, usize)> =
        pool.candidates.iter().map(|d| (d.clone(), (0, 0))).collect();
    for pair in &plan.pairs {
        let winner = &winners[pair];
        if !pair.contains(winner) {
            return Err(CampaignError::InvalidWinner {
                pair: pair.clone(),
                winner: winner.clone(),
            });
        }
        for doc in [pair.first(), pair.second()] {
            let entry = counts.entry(doc.clone()).or_default();
            entry.1 += 1;
            if doc == winner {
                entry.0 += 1;
            }
        }
    }
    Ok(counts)
}

/// Keeps candidates that won strictly more than half of their own pairings.
/// If fewer than `k` survive, the `k` candidates with the most wins (plus
/// everyone tied with the k-th) are kept as well. The returned pool moves to
/// the next reduction round, or to the round robin once it holds at most
/// `round_robin_threshold` candidates.
pub fn cull(
    pool: &CandidatePool,
    plan: &PairingPlan,
    winners: &BTreeMap<Pair, DocId>,
    k: usize,
    round_robin_threshold: usize,
) -> Result<CandidatePool, CampaignError> {
    let counts = win_counts(pool, plan, winners)?;
    let mut survivors: BTreeSet<DocId> = counts
        .iter()
        .filter(|(_, &(wins, degree))| 2 * wins > degree)
        .map(|(d, _)| d.clone())
        .collect();
    if survivors.len() < k {
        let mut by_wins: Vec<(&DocId, usize)> = counts.iter().map(|(d, &(w, _))| (d, w)).collect();
        by_wins.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(&(_, cutoff)) = by_wins.get(k - 1).or(by_wins.last()) {
            survivors.extend(by_wins.iter().filter(|(_, w)| *w >= cutoff).map(|(d, _)| (*d).clone()));
        }
    }
    let stage = if survivors.len() > round_robin_threshold {
        let round = match pool.stage() {
            PoolStage::Reduction(r) => r + 1,
            _ => 2,
        };
        PoolStage::Reduction(round)
    } else {
        PoolStage::RoundRobin
    };
    Ok(pool.with_candidates(survivors, stage))
}

/// Ranks round-robin candidates by wins and cuts after the group holding
/// rank `k`; candidates tied at the boundary are all kept.
pub fn finalize_topk(
    pool: &CandidatePool,
    plan: &PairingPlan,
    winners: &BTreeMap<Pair, DocId>,
    k: usize,
) -> Result<TopKResult, CampaignError> {
    let counts = win_counts(pool, plan, winners)?;
    let mut by_wins: BTreeMap<usize, BTreeSet<DocId>> = BTreeMap::new();
    for (doc, (wins, _)) in counts {
        by_wins.entry(wins).or_default().insert(doc);
    }
    let mut groups = Vec::new();
    let mut taken = 0;
    for (_, group) in by_wins.into_iter().rev() {
        if taken >= k {
            break;
        }
        taken += group.len();
        groups.push(group);
    }
    Ok(TopKResult::new(pool.topic_id.clone(), groups, k))
}
