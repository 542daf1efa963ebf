//! Single-elimination tournament for dedicated assessors.
//!
//! The bracket is a complete binary tree over `2^ceil(log2 n)` leaf slots;
//! candidates are seeded in random order and the unused slots at the end are
//! byes. Finding the winner costs `n - 1` judgments. After a winner is
//! extracted its leaf is emptied and only the matches on its path are
//! replayed, which involves only candidates that lost directly to it, so each
//! further rank costs at most `ceil(log2 n)` judgments.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ideal::TopKResult;
use crate::ranking::DocId;

use super::thinning::CandidatePool;
use super::{CampaignError, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// No candidate below this node.
    Empty,
    /// Winner of the subtree, as an index into `docs`.
    Player(usize),
    /// Waiting on a match somewhere below or at this node.
    Open,
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Upper bound on judgments needed to find the top `k` of `n` candidates.
pub fn tournament_bound(n: usize, k: usize) -> usize {
    if n == 0 {
        0
    } else {
        n + k.saturating_sub(1) * ceil_log2(n)
    }
}

/// Sum of [`tournament_bound`] over per-topic pool sizes.
pub fn estimate_tournament_cost(pool_sizes: &[usize], k: usize) -> usize {
    pool_sizes.iter().map(|&n| tournament_bound(n, k)).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TournamentSession {
    topic_id: String,
    k: usize,
    /// Candidates in bracket order.
    docs: Vec<DocId>,
    /// Heap layout: node 1 is the root, leaves occupy `width..2 * width`.
    slots: Vec<Slot>,
    width: usize,
    results: BTreeMap<Pair, DocId>,
    extracted: Vec<DocId>,
    judgments: usize,
}

impl TournamentSession {
    pub fn new(pool: &CandidatePool, k: usize, seed: u64) -> Self {
        let mut docs: Vec<DocId> = pool.candidates.iter().cloned().collect();
        docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let width = docs.len().max(1).next_power_of_two();
        let mut slots = vec![Slot::Open; 2 * width];
        for leaf in 0..width {
            slots[width + leaf] = if leaf < docs.len() { Slot::Player(leaf) } else { Slot::Empty };
        }
        let mut session = TournamentSession {
            topic_id: pool.topic_id.clone(),
            k,
            docs,
            slots,
            width,
            results: BTreeMap::new(),
            extracted: Vec::new(),
            judgments: 0,
        };
        session.settle();
        session
    }

    pub fn topic_id(&self) -> &str {
        &self.topic_id
    }

    pub fn judgments(&self) -> usize {
        self.judgments
    }

    pub fn extracted(&self) -> &[DocId] {
        &self.extracted
    }

    pub fn is_finished(&self) -> bool {
        self.extracted.len() >= self.k.min(self.docs.len())
    }

    /// Matches whose two entrants are known and that have not been judged,
    /// earliest round first, left to right.
    pub fn ready_pairs(&self) -> Vec<(DocId, DocId)> {
        if self.is_finished() {
            return Vec::new();
        }
        let mut nodes: Vec<usize> = (1..self.width)
            .filter(|&i| self.slots[i] == Slot::Open)
            .filter(|&i| matches!((self.slots[2 * i], self.slots[2 * i + 1]), (Slot::Player(_), Slot::Player(_))))
            .collect();
        nodes.sort_by_key(|&i| (std::cmp::Reverse(ceil_log2(i + 1)), i));
        nodes
            .into_iter()
            .map(|i| match (self.slots[2 * i], self.slots[2 * i + 1]) {
                (Slot::Player(a), Slot::Player(b)) => (self.docs[a].clone(), self.docs[b].clone()),
                _ => unreachable!(),
            })
            .collect()
    }

    pub fn next_pair(&self) -> Option<(DocId, DocId)> {
        self.ready_pairs().into_iter().next()
    }

    /// Records the outcome of a ready match and advances the bracket.
    pub fn report(&mut self, a: &str, b: &str, winner: &str) -> Result<(), CampaignError> {
        let pair = Pair::new(a, b);
        let issued = self
            .ready_pairs()
            .iter()
            .any(|(x, y)| Pair::new(x.clone(), y.clone()) == pair);
        if !issued {
            return Err(CampaignError::NotIssued(pair));
        }
        if !pair.contains(winner) {
            return Err(CampaignError::InvalidWinner {
                pair,
                winner: winner.to_string(),
            });
        }
        self.results.insert(pair, winner.to_string());
        self.judgments += 1;
        self.settle();
        Ok(())
    }

    /// Resolves every node whose outcome is determined, extracting winners
    /// at the root until `k` are out or a judgment is needed.
    fn settle(&mut self) {
        loop {
            for i in (1..self.width).rev() {
                if self.slots[i] != Slot::Open {
                    continue;
                }
                self.slots[i] = match (self.slots[2 * i], self.slots[2 * i + 1]) {
                    (Slot::Empty, Slot::Empty) => Slot::Empty,
                    (Slot::Empty, s) | (s, Slot::Empty) => s,
                    (Slot::Player(a), Slot::Player(b)) => {
                        match self.results.get(&Pair::new(self.docs[a].clone(), self.docs[b].clone())) {
                            Some(w) if *w == self.docs[a] => Slot::Player(a),
                            Some(_) => Slot::Player(b),
                            None => Slot::Open,
                        }
                    }
                    _ => Slot::Open,
                };
            }
            match self.slots[1] {
                Slot::Player(w) if !self.is_finished() => {
                    self.extracted.push(self.docs[w].clone());
                    let mut node = self.width + w;
                    self.slots[node] = Slot::Empty;
                    while node > 1 {
                        node /= 2;
                        self.slots[node] = Slot::Open;
                    }
                }
                _ => return,
            }
        }
    }

    /// Top-k so far, one singleton group per extracted candidate.
    pub fn result(&self) -> TopKResult {
        let groups = self
            .extracted
            .iter()
            .map(|d| BTreeSet::from([d.clone()]))
            .collect();
        TopKResult::new(self.topic_id.clone(), groups, self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::PoolStage;

    fn pool(n: usize) -> CandidatePool {
        CandidatePool::new(
            "t",
            (0..n).map(|i| format!("d{i:02}")).collect(),
            PoolStage::Tournament,
        )
    }

    /// Runs a session to completion with a consistent assessor preferring
    /// smaller ids.
    fn run(n: usize, k: usize, seed: u64) -> TournamentSession {
        let mut s = TournamentSession::new(&pool(n), k, seed);
        while let Some((a, b)) = s.next_pair() {
            let w = if a < b { a.clone() } else { b.clone() };
            s.report(&a, &b, &w).unwrap();
        }
        assert!(s.is_finished());
        s
    }

    #[test]
    fn bound_formula() {
        assert_eq!(tournament_bound(8, 3), 14);
        assert_eq!(tournament_bound(1, 5), 1);
        assert_eq!(tournament_bound(0, 5), 0);
        assert_eq!(tournament_bound(9, 2), 9 + 4);
        assert_eq!(estimate_tournament_cost(&[8, 1], 3), 15);
    }

    #[test]
    fn eight_candidates() {
        let s = run(8, 1, 3);
        assert_eq!(s.judgments(), 7);
        assert_eq!(s.extracted(), ["d00"]);
        let s = run(8, 2, 3);
        assert_eq!(s.judgments(), 9);
        assert_eq!(s.extracted(), ["d00", "d01"]);
    }

    #[test]
    fn consistent_order_recovered() {
        for n in 1..=64 {
            for k in 1..=5 {
                let s = run(n, k, n as u64 * 31 + k as u64);
                let expected: Vec<String> = (0..k.min(n)).map(|i| format!("d{i:02}")).collect();
                assert_eq!(s.extracted(), expected, "n={n} k={k}");
                assert!(s.judgments() <= tournament_bound(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn unissued_report_rejected() {
        let mut s = TournamentSession::new(&pool(8), 2, 1);
        let (a, b) = s.next_pair().unwrap();
        let outsider = (0..8)
            .map(|i| format!("d{i:02}"))
            .find(|d| *d != a && *d != b)
            .unwrap();
        assert!(matches!(s.report(&a, &outsider, &a), Err(CampaignError::NotIssued(_))));
        assert!(matches!(s.report(&a, &b, &outsider), Err(CampaignError::InvalidWinner { .. })));
        s.report(&a, &b, &a).unwrap();
        assert!(matches!(s.report(&a, &b, &a), Err(CampaignError::NotIssued(_))));
    }

    #[test]
    fn trivial_pools() {
        let s = TournamentSession::new(&pool(1), 5, 0);
        assert!(s.is_finished());
        assert_eq!(s.result().k_effective, 1);
        let s = TournamentSession::new(&pool(0), 5, 0);
        assert!(s.is_finished());
        assert!(s.result().is_empty());
    }

    #[test]
    fn first_round_matches_are_ready_together() {
        let s = TournamentSession::new(&pool(8), 1, 11);
        assert_eq!(s.ready_pairs().len(), 4);
        let s = TournamentSession::new(&pool(5), 1, 11);
        // Leaves 0..5 filled, 5..8 byes: matches (0,1) and (2,3) first.
        assert_eq!(s.ready_pairs().len(), 2);
    }
}
