//! Pairing plans: random near-regular graphs for reduction rounds and the
//! complete graph for the round robin.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ranking::DocId;

use super::thinning::{CandidatePool, PoolStage};
use super::{CampaignError, Pair};

/// Attempts at building a graph before declaring the round infeasible.
const MAX_ATTEMPTS: usize = 64;
/// Degree-preserving edge swaps per edge, to randomize the initial graph.
const SWAPS_PER_EDGE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlanStage {
    Reduction(u32),
    RoundRobin,
}

impl PlanStage {
    /// Stage label stored with each judgment in the ledger.
    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PlanStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanStage::Reduction(r) => write!(f, "reduction:{r}"),
            PlanStage::RoundRobin => f.write_str("round_robin"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingPlan {
    pub topic_id: String,
    pub stage: PlanStage,
    pub pairs: BTreeSet<Pair>,
}

impl PairingPlan {
    pub fn docs(&self) -> BTreeSet<&DocId> {
        self.pairs.iter().flat_map(|p| [p.first(), p.second()]).collect()
    }

    pub fn degree(&self, doc: &str) -> usize {
        self.pairs.iter().filter(|p| p.contains(doc)).count()
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Randomized Havel-Hakimi: repeatedly connect the node with the largest
/// remaining demand to the allowed partners with the largest demand, ties
/// broken at random.
fn havel_hakimi(
    targets: &[usize],
    forbidden: &HashSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<(usize, usize)>> {
    let n = targets.len();
    let mut residual = targets.to_vec();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    loop {
        let max = *residual.iter().max()?;
        if max == 0 {
            break;
        }
        let heads: Vec<usize> = (0..n).filter(|&v| residual[v] == max).collect();
        let v = *heads.choose(rng)?;
        let mut options: Vec<usize> = (0..n)
            .filter(|&u| {
                u != v
                    && residual[u] > 0
                    && !edges.contains(&key(u, v))
                    && !forbidden.contains(&key(u, v))
            })
            .collect();
        if options.len() < residual[v] {
            return None;
        }
        options.shuffle(rng);
        options.sort_by(|a, b| residual[*b].cmp(&residual[*a]));
        for &u in &options[..residual[v]] {
            edges.insert(key(u, v));
            residual[u] -= 1;
        }
        residual[v] = 0;
    }
    let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
    edges.sort_unstable();
    Some(edges)
}

/// Degree-preserving double-edge swaps that respect `forbidden`.
fn shuffle_edges(edges: &mut [(usize, usize)], forbidden: &HashSet<(usize, usize)>, rng: &mut ChaCha8Rng) {
    if edges.len() < 2 {
        return;
    }
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    for _ in 0..edges.len() * SWAPS_PER_EDGE {
        let i = rng.random_range(0..edges.len());
        let j = rng.random_range(0..edges.len());
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, d) = if rng.random::<bool>() { edges[j] } else { (edges[j].1, edges[j].0) };
        if a == c || a == d || b == c || b == d {
            continue;
        }
        let (e1, e2) = (key(a, c), key(b, d));
        if present.contains(&e1) || present.contains(&e2) || forbidden.contains(&e1) || forbidden.contains(&e2) {
            continue;
        }
        present.remove(&edges[i]);
        present.remove(&edges[j]);
        present.insert(e1);
        present.insert(e2);
        edges[i] = e1;
        edges[j] = e2;
    }
}

/// Random pairing for a reduction round: every candidate gets `pairings`
/// partners, except that one candidate gets one extra when the degree sum
/// would otherwise be odd. No pair in `history` is repeated.
pub fn plan_reduction_round(
    pool: &CandidatePool,
    pairings: usize,
    seed: u64,
    history: &BTreeSet<Pair>,
) -> Result<PairingPlan, CampaignError> {
    let topic = pool.topic_id.clone();
    let round = match pool.stage() {
        PoolStage::Reduction(r) => *r,
        _ => 1,
    };
    let docs: Vec<&DocId> = pool.candidates.iter().collect();
    let n = docs.len();
    if pairings == 0 || pairings >= n {
        return Err(CampaignError::DegreeTooLarge { topic, n, p: pairings });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = vec![pairings; n];
    if n * pairings % 2 == 1 {
        targets[rng.random_range(0..n)] += 1;
    }
    if targets.iter().any(|&t| t >= n) {
        return Err(CampaignError::DegreeTooLarge { topic, n, p: pairings });
    }

    let index = |d: &DocId| docs.binary_search(&d).ok();
    let forbidden: HashSet<(usize, usize)> = history
        .iter()
        .filter_map(|p| Some(key(index(p.first())?, index(p.second())?)))
        .collect();

    let infeasible = |reason: String| CampaignError::PairingInfeasible {
        topic: topic.clone(),
        reason,
    };
    let needed = targets.iter().sum::<usize>() / 2;
    let available = n * (n - 1) / 2 - forbidden.len();
    if available < needed {
        return Err(infeasible(format!(
            "{needed} pairs needed but only {available} unjudged pairs remain"
        )));
    }
    for v in 0..n {
        let free = (0..n).filter(|&u| u != v && !forbidden.contains(&key(u, v))).count();
        if free < targets[v] {
            return Err(infeasible(format!(
                "{} has only {free} unjudged partners left",
                docs[v]
            )));
        }
    }

    for _ in 0..MAX_ATTEMPTS {
        if let Some(mut edges) = havel_hakimi(&targets, &forbidden, &mut rng) {
            shuffle_edges(&mut edges, &forbidden, &mut rng);
            let pairs = edges
                .into_iter()
                .map(|(a, b)| Pair::new(docs[a].clone(), docs[b].clone()))
                .collect();
            return Ok(PairingPlan {
                topic_id: topic,
                stage: PlanStage::Reduction(round),
                pairs,
            });
        }
    }
    Err(infeasible(format!("no valid graph after {MAX_ATTEMPTS} attempts")))
}

/// Every pair of remaining candidates.
pub fn plan_round_robin(pool: &CandidatePool) -> PairingPlan {
    let docs: Vec<&DocId> = pool.candidates.iter().collect();
    let mut pairs = BTreeSet::new();
    for (i, a) in docs.iter().enumerate() {
        for b in &docs[i + 1..] {
            pairs.insert(Pair::new(*a, *b));
        }
    }
    PairingPlan {
        topic_id: pool.topic_id.clone(),
        stage: PlanStage::RoundRobin,
        pairs,
    }
}
