//! Monte-Carlo simulation of the protocol with synthetic assessors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ideal::TopKResult;
use crate::ranking::DocId;

use super::config::{AssessmentMode, CampaignConfig};
use super::engine::open_crowd_stage;
use super::pairing::{PairingPlan, PlanStage};
use super::protocol::{cull, finalize_topk, win_counts};
use super::thinning::{CandidatePool, PoolStage};
use super::tournament::{tournament_bound, TournamentSession};
use super::{derive_seed, Pair};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssessorModel {
    /// Always prefers the document ranked higher in the true order.
    Consistent,
    /// Like `Consistent`, but each answer is flipped with probability
    /// `epsilon`.
    Noisy { epsilon: f64 },
}

pub struct SimulatedAssessor {
    rank: HashMap<DocId, usize>,
    model: AssessorModel,
    rng: ChaCha8Rng,
}

impl SimulatedAssessor {
    pub fn new(true_order: &[DocId], model: AssessorModel, seed: u64) -> Self {
        SimulatedAssessor {
            rank: true_order.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect(),
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn prefer<'a>(&mut self, a: &'a DocId, b: &'a DocId) -> &'a DocId {
        let (better, worse) = if self.rank[a] < self.rank[b] { (a, b) } else { (b, a) };
        match self.model {
            AssessorModel::Consistent => better,
            AssessorModel::Noisy { epsilon } => {
                if self.rng.random::<f64>() < epsilon {
                    worse
                } else {
                    better
                }
            }
        }
    }

    fn judge(&mut self, plan: &PairingPlan) -> BTreeMap<Pair, DocId> {
        plan.pairs
            .iter()
            .map(|p| (p.clone(), self.prefer(p.first(), p.second()).clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    /// Number of simulated topic runs (`trials` times the number of orders).
    pub runs: usize,
    /// Mean real judgments per run (challenge items not counted).
    pub mean_judgments: f64,
    /// Fraction of runs whose top-k set equals the true top-k.
    pub recovery_accuracy: f64,
    /// Fraction of runs whose first group contains the true best document.
    pub first_group_best: f64,
    /// Mean of survivors / pool size over all reduction rounds.
    pub mean_survivor_fraction: f64,
    pub reduction_rounds: usize,
    /// Mean pool size after thinning (index 0) and after each reduction
    /// round, over the runs that reached that round.
    pub trajectory: Vec<f64>,
    /// First reduction rounds in which the true k-th best document exists.
    pub event_opportunities: usize,
    /// Of those, rounds where the k-th best was paired with every one of the
    /// true top k-1 and won no majority.
    pub event_count: usize,
    /// Of the events, how many actually removed the k-th best from the pool.
    pub event_culled: usize,
    /// Reduction rounds that fell back to the round robin.
    pub fallbacks: usize,
    /// Tournament runs that used more judgments than the bound allows.
    pub bound_violations: usize,
}

impl SimulationReport {
    pub fn event_frequency(&self) -> f64 {
        if self.event_opportunities == 0 {
            0.0
        } else {
            self.event_count as f64 / self.event_opportunities as f64
        }
    }

    /// Standard error of [`Self::event_frequency`] as a binomial proportion.
    pub fn event_standard_error(&self) -> f64 {
        let n = self.event_opportunities as f64;
        if n == 0.0 {
            return 0.0;
        }
        let f = self.event_frequency();
        (f * (1.0 - f) / n).sqrt()
    }
}

#[derive(Default)]
struct RunStats {
    judgments: usize,
    recovered: bool,
    first_best: bool,
    survivor_fractions: Vec<f64>,
    trajectory: Vec<usize>,
    event_opportunity: bool,
    event: bool,
    event_culled: bool,
    fallbacks: usize,
    bound_violation: bool,
}

fn recovered(result: &TopKResult, order: &[DocId], k: usize) -> bool {
    let got: BTreeSet<&DocId> = result.docs().collect();
    let want: BTreeSet<&DocId> = order.iter().take(k).collect();
    got == want
}

fn first_best(result: &TopKResult, order: &[DocId]) -> bool {
    match (result.groups.first(), order.first()) {
        (Some(group), Some(best)) => group.contains(best),
        (None, None) => true,
        _ => false,
    }
}

fn run_crowd(order: &[DocId], model: AssessorModel, config: &CampaignConfig, seed: u64) -> RunStats {
    let mut stats = RunStats::default();
    let mut assessor = SimulatedAssessor::new(order, model, derive_seed(seed, "assessor"));
    let mut pool = CandidatePool::new("sim", order.iter().cloned().collect(), PoolStage::Thinned);
    let mut history = BTreeSet::new();
    stats.trajectory.push(pool.len());
    let k = config.k;
    loop {
        let (plan, fell_back) =
            open_crowd_stage(&mut pool, &history, config, seed).expect("simulated pools are valid");
        stats.fallbacks += fell_back as usize;
        let winners = assessor.judge(&plan);
        stats.judgments += plan.pairs.len();
        if plan.stage == PlanStage::RoundRobin {
            let result = finalize_topk(&pool, &plan, &winners, k).expect("all pairs judged");
            stats.recovered = recovered(&result, order, k);
            stats.first_best = first_best(&result, order);
            return stats;
        }
        let next = cull(&pool, &plan, &winners, k, config.round_robin_threshold).expect("all pairs judged");
        if plan.stage == PlanStage::Reduction(1) && order.len() >= k && k >= 2 {
            let kth = &order[k - 1];
            stats.event_opportunity = true;
            let paired_with_top = order[..k - 1].iter().all(|d| plan.pairs.contains(&Pair::new(d.clone(), kth.clone())));
            if paired_with_top {
                let (wins, degree) = win_counts(&pool, &plan, &winners).expect("all pairs judged")[kth];
                stats.event = 2 * wins <= degree;
                stats.event_culled = stats.event && !next.candidates.contains(kth);
            }
        }
        stats.survivor_fractions.push(next.len() as f64 / pool.len() as f64);
        stats.trajectory.push(next.len());
        history.extend(plan.pairs.iter().cloned());
        pool = next;
    }
}

fn run_tournament(order: &[DocId], model: AssessorModel, config: &CampaignConfig, seed: u64) -> RunStats {
    let mut assessor = SimulatedAssessor::new(order, model, derive_seed(seed, "assessor"));
    let pool = CandidatePool::new("sim", order.iter().cloned().collect(), PoolStage::Tournament);
    let mut session = TournamentSession::new(&pool, config.k, derive_seed(seed, "bracket"));
    while let Some((a, b)) = session.next_pair() {
        let w = assessor.prefer(&a, &b).clone();
        session.report(&a, &b, &w).expect("issued pair");
    }
    let result = session.result();
    RunStats {
        judgments: session.judgments(),
        recovered: recovered(&result, order, config.k),
        first_best: first_best(&result, order),
        trajectory: vec![order.len()],
        bound_violation: session.judgments() > tournament_bound(order.len(), config.k),
        ..RunStats::default()
    }
}

/// Runs the protocol `trials` times on every true order (each order is a
/// topic's candidate pool, best first). Each run draws its pairings, bracket
/// and assessor noise from a seed derived from `config.seed`, the trial and
/// the order index, so results do not depend on thread scheduling.
pub fn simulate_campaign(
    true_orders: &[Vec<DocId>],
    model: AssessorModel,
    config: &CampaignConfig,
    trials: usize,
) -> SimulationReport {
    let runs: Vec<RunStats> = (0..trials * true_orders.len())
        .into_par_iter()
        .map(|i| {
            let (trial, topic) = (i / true_orders.len(), i % true_orders.len());
            let seed = derive_seed(config.seed, &format!("trial{trial}/topic{topic}"));
            let order = &true_orders[topic];
            match config.mode {
                AssessmentMode::Crowdsourced => run_crowd(order, model, config, seed),
                AssessmentMode::Tournament => run_tournament(order, model, config, seed),
            }
        })
        .collect();

    let n = runs.len().max(1) as f64;
    let fractions: Vec<f64> = runs.iter().flat_map(|r| r.survivor_fractions.iter().copied()).collect();
    let depth = runs.iter().map(|r| r.trajectory.len()).max().unwrap_or(0);
    let trajectory = (0..depth)
        .map(|j| {
            let sizes: Vec<usize> = runs.iter().filter_map(|r| r.trajectory.get(j).copied()).collect();
            sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
        })
        .collect();
    SimulationReport {
        runs: runs.len(),
        mean_judgments: runs.iter().map(|r| r.judgments).sum::<usize>() as f64 / n,
        recovery_accuracy: runs.iter().filter(|r| r.recovered).count() as f64 / n,
        first_group_best: runs.iter().filter(|r| r.first_best).count() as f64 / n,
        mean_survivor_fraction: if fractions.is_empty() {
            1.0
        } else {
            fractions.iter().sum::<f64>() / fractions.len() as f64
        },
        reduction_rounds: fractions.len(),
        trajectory,
        event_opportunities: runs.iter().filter(|r| r.event_opportunity).count(),
        event_count: runs.iter().filter(|r| r.event).count(),
        event_culled: runs.iter().filter(|r| r.event_culled).count(),
        fallbacks: runs.iter().map(|r| r.fallbacks).sum(),
        bound_violations: runs.iter().filter(|r| r.bound_violation).count(),
    }
}
