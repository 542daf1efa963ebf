//! Campaign state as a fold over the judgment ledger.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;

use crate::ideal::TopKResult;
use crate::ranking::DocId;
use crate::trec_io::{GradedQrels, JudgmentRecord, PreferenceQrels};

use super::aggregate::aggregate_plan;
use super::config::{AssessmentMode, CampaignConfig};
use super::hits::{build_hits_for, HitBatch, HitItem};
use super::pairing::{plan_reduction_round, plan_round_robin, PairingPlan, PlanStage};
use super::protocol::{cull, finalize_topk};
use super::thinning::{thin_herd, CandidatePool, PoolStage};
use super::tournament::TournamentSession;
use super::{derive_seed, CampaignError, Pair};

pub(crate) const TOURNAMENT_STAGE: &str = "tournament";

#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    /// Collecting crowd judgments for one pairing plan.
    Crowd {
        plan: PairingPlan,
        votes: BTreeMap<Pair, Vec<JudgmentRecord>>,
    },
    Tournament(TournamentSession),
    Finalized(TopKResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicState {
    /// Pool produced by thinning.
    pub initial_pool: BTreeSet<DocId>,
    pub pool: CandidatePool,
    pub phase: Phase,
    /// Pairs judged in earlier reduction rounds.
    pub history: BTreeSet<Pair>,
    /// Accepted real judgments.
    pub judgments: usize,
    /// Pool size after thinning and after each reduction round.
    pub trajectory: Vec<usize>,
    /// Reduction rounds that could not be paired and went to the round robin.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchOutcome {
    /// `stale` counts records for pairs that are no longer being collected.
    Applied { applied: usize, stale: usize },
    Rejected { failed: usize },
    Refused,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicStatus {
    pub topic: String,
    pub stage: String,
    pub pool_size: usize,
    pub pending: usize,
    pub judgments: usize,
}

/// Opens the next crowd stage for `pool`: a reduction round while the pool
/// is larger than the round-robin threshold, else the round robin. A
/// reduction round that cannot be paired without repeating history falls
/// back to the round robin; the flag reports that.
pub(crate) fn open_crowd_stage(
    pool: &mut CandidatePool,
    history: &BTreeSet<Pair>,
    config: &CampaignConfig,
    seed: u64,
) -> Result<(PairingPlan, bool), CampaignError> {
    if *pool.stage() == PoolStage::Thinned {
        pool.advance(if pool.len() > config.round_robin_threshold {
            PoolStage::Reduction(1)
        } else {
            PoolStage::RoundRobin
        });
    }
    let round = match pool.stage() {
        PoolStage::Reduction(r) => *r,
        _ => return Ok((plan_round_robin(pool), false)),
    };
    let label = format!("{}/reduction:{round}", pool.topic_id);
    match plan_reduction_round(pool, config.pairings, derive_seed(seed, &label), history) {
        Ok(plan) => Ok((plan, false)),
        Err(e @ (CampaignError::PairingInfeasible { .. } | CampaignError::DegreeTooLarge { .. })) => {
            warn!("{e}; moving {} candidates to the round robin", pool.len());
            pool.advance(PoolStage::RoundRobin);
            Ok((plan_round_robin(pool), true))
        }
        Err(e) => Err(e),
    }
}

impl TopicState {
    fn stage_tag(&self) -> String {
        match &self.phase {
            Phase::Crowd { plan, .. } => plan.stage.tag(),
            Phase::Tournament(_) => TOURNAMENT_STAGE.to_string(),
            Phase::Finalized(_) => "finalized".to_string(),
        }
    }

    fn pending(&self) -> Vec<Pair> {
        match &self.phase {
            Phase::Crowd { plan, votes } => plan.pairs.iter().filter(|p| !votes.contains_key(*p)).cloned().collect(),
            Phase::Tournament(s) => s.ready_pairs().into_iter().map(|(a, b)| Pair::new(a, b)).collect(),
            Phase::Finalized(_) => Vec::new(),
        }
    }

    fn finalize(&mut self, result: TopKResult) {
        self.pool.advance(PoolStage::Finalized(result.clone()));
        self.phase = Phase::Finalized(result);
    }

    /// Moves through every stage whose judgments are complete.
    fn advance(&mut self, config: &CampaignConfig) -> Result<(), CampaignError> {
        loop {
            match &self.phase {
                Phase::Crowd { plan, votes } if plan.pairs.iter().all(|p| votes.contains_key(p)) => {
                    let winners = aggregate_plan(plan, votes)?;
                    if plan.stage == PlanStage::RoundRobin {
                        let result = finalize_topk(&self.pool, plan, &winners, config.k)?;
                        self.finalize(result);
                        continue;
                    }
                    let next = cull(&self.pool, plan, &winners, config.k, config.round_robin_threshold)?;
                    self.history.extend(plan.pairs.iter().cloned());
                    self.trajectory.push(next.len());
                    self.pool = next;
                    let (plan, fell_back) = open_crowd_stage(&mut self.pool, &self.history, config, config.seed)?;
                    self.fallbacks += fell_back as usize;
                    self.phase = Phase::Crowd {
                        plan,
                        votes: BTreeMap::new(),
                    };
                }
                Phase::Tournament(session) if session.is_finished() => {
                    let result = session.result();
                    self.finalize(result);
                }
                _ => return Ok(()),
            }
        }
    }
}

/// All campaign state derived from the graded qrels, the configuration and
/// the judgment records applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    config: CampaignConfig,
    topics: BTreeMap<String, TopicState>,
    nonrelevant: BTreeMap<String, BTreeSet<DocId>>,
    excluded: BTreeSet<String>,
    seen_batches: BTreeSet<String>,
}

impl Campaign {
    pub fn new(config: CampaignConfig, grades: &GradedQrels) -> Result<Self, CampaignError> {
        config.validate()?;
        let mut topics = BTreeMap::new();
        let mut nonrelevant = BTreeMap::new();
        for topic in grades.topic_ids() {
            let mut pool = thin_herd(grades, topic, config.k)?;
            let initial_pool = pool.candidates.clone();
            let history = BTreeSet::new();
            let (phase, fallbacks) = match config.mode {
                AssessmentMode::Tournament => {
                    pool.advance(PoolStage::Tournament);
                    let seed = derive_seed(config.seed, &format!("{topic}/{TOURNAMENT_STAGE}"));
                    (Phase::Tournament(TournamentSession::new(&pool, config.k, seed)), 0)
                }
                AssessmentMode::Crowdsourced => {
                    let (plan, fell_back) = open_crowd_stage(&mut pool, &history, &config, config.seed)?;
                    let phase = Phase::Crowd {
                        plan,
                        votes: BTreeMap::new(),
                    };
                    (phase, fell_back as usize)
                }
            };
            let mut state = TopicState {
                trajectory: vec![initial_pool.len()],
                initial_pool,
                pool,
                phase,
                history,
                judgments: 0,
                fallbacks,
            };
            state.advance(&config)?;
            topics.insert(topic.to_string(), state);
            nonrelevant.insert(topic.to_string(), grades.nonrelevant(topic));
        }
        Ok(Campaign {
            config,
            topics,
            nonrelevant,
            excluded: BTreeSet::new(),
            seen_batches: BTreeSet::new(),
        })
    }

    /// Rebuilds state from ledger records; consecutive records with the same
    /// batch id are applied as one batch.
    pub fn replay(config: CampaignConfig, grades: &GradedQrels, records: &[JudgmentRecord]) -> Result<Self, CampaignError> {
        let mut campaign = Campaign::new(config, grades)?;
        for batch in records.chunk_by(|a, b| a.batch == b.batch) {
            campaign.apply(batch)?;
        }
        Ok(campaign)
    }

    /// Applies one batch of records from a single assessor. A batch with a
    /// failed challenge is discarded and its assessor excluded from then on.
    /// Batches from excluded assessors are refused without being recorded,
    /// so another assessor can still submit them.
    pub fn apply(&mut self, records: &[JudgmentRecord]) -> Result<BatchOutcome, CampaignError> {
        let Some(first) = records.first() else {
            return Ok(BatchOutcome::Applied { applied: 0, stale: 0 });
        };
        for r in records {
            r.validate()?;
            if r.assessor != first.assessor {
                return Err(CampaignError::MixedAssessors(first.assessor.clone(), r.assessor.clone()));
            }
            if !self.topics.contains_key(&r.topic) {
                return Err(CampaignError::UnknownTopic(r.topic.clone()));
            }
        }
        if self.seen_batches.contains(&first.batch) {
            return Ok(BatchOutcome::Duplicate);
        }
        if self.excluded.contains(&first.assessor) {
            return Ok(BatchOutcome::Refused);
        }
        self.seen_batches.insert(first.batch.clone());
        let failed = records
            .iter()
            .filter(|r| r.challenge && self.nonrelevant[&r.topic].contains(&r.winner))
            .count();
        if failed > 0 {
            self.excluded.insert(first.assessor.clone());
            return Ok(BatchOutcome::Rejected { failed });
        }

        let (mut applied, mut stale) = (0, 0);
        let mut touched = BTreeSet::new();
        for r in records.iter().filter(|r| !r.challenge) {
            let state = self.topics.get_mut(&r.topic).expect("checked above");
            let accepted = match &mut state.phase {
                Phase::Crowd { plan, votes } => {
                    let pair = Pair::new(r.doc_a.clone(), r.doc_b.clone());
                    let current = r.stage == plan.stage.tag() && plan.pairs.contains(&pair);
                    if current {
                        votes.entry(pair).or_default().push(r.clone());
                    }
                    current
                }
                Phase::Tournament(session) => {
                    r.stage == TOURNAMENT_STAGE && session.report(&r.doc_a, &r.doc_b, &r.winner).is_ok()
                }
                Phase::Finalized(_) => false,
            };
            if accepted {
                applied += 1;
                state.judgments += 1;
                touched.insert(r.topic.clone());
            } else {
                stale += 1;
            }
        }
        for topic in touched {
            let config = &self.config;
            self.topics.get_mut(&topic).expect("known topic").advance(config)?;
        }
        Ok(BatchOutcome::Applied { applied, stale })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn topics(&self) -> &BTreeMap<String, TopicState> {
        &self.topics
    }

    pub fn topic(&self, topic: &str) -> Result<&TopicState, CampaignError> {
        self.topics
            .get(topic)
            .ok_or_else(|| CampaignError::UnknownTopic(topic.to_string()))
    }

    pub fn excluded(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    pub fn nonrelevant(&self, topic: &str) -> Option<&BTreeSet<DocId>> {
        self.nonrelevant.get(topic)
    }

    pub fn has_batch(&self, batch: &str) -> bool {
        self.seen_batches.contains(batch)
    }

    /// Stage label used in ledger records for the topic's current stage.
    pub fn stage_tag(&self, topic: &str) -> Result<String, CampaignError> {
        Ok(self.topic(topic)?.stage_tag())
    }

    /// Pairs still waiting for an accepted judgment. In tournament mode only
    /// matches whose entrants are known are listed.
    pub fn pending_pairs(&self, topic: &str) -> Result<Vec<Pair>, CampaignError> {
        Ok(self.topic(topic)?.pending())
    }

    /// Fresh batches for the topic's pending pairs, leaving out pairs in
    /// `outstanding` (already issued in another batch). Crowd stages yield
    /// HITs with challenge items; a tournament yields one batch per ready
    /// match, identified by the match itself. `generation` must differ
    /// between calls for the same crowd stage so batch ids stay unique.
    pub fn next_batches(
        &self,
        topic: &str,
        outstanding: &BTreeSet<Pair>,
        generation: u64,
    ) -> Result<Vec<HitBatch>, CampaignError> {
        let state = self.topic(topic)?;
        let pairs: Vec<Pair> = state.pending().into_iter().filter(|p| !outstanding.contains(p)).collect();
        match &state.phase {
            Phase::Crowd { plan, .. } => {
                let seed = derive_seed(self.config.seed, &format!("{topic}/{}/{generation}", plan.stage.tag()));
                build_hits_for(plan, pairs, &self.nonrelevant[topic], &self.config, seed)
            }
            Phase::Tournament(_) => Ok(pairs
                .into_iter()
                .map(|pair| {
                    let batch_id = format!("{topic}:{TOURNAMENT_STAGE}:{}:{}", pair.first(), pair.second());
                    let swap = derive_seed(self.config.seed, &batch_id) & 1 == 1;
                    let (a, b) = if swap { (pair.second(), pair.first()) } else { (pair.first(), pair.second()) };
                    HitBatch {
                        items: vec![HitItem {
                            pair_id: format!("{batch_id}:0"),
                            topic: topic.to_string(),
                            doc_a: a.clone(),
                            doc_b: b.clone(),
                            challenge: None,
                        }],
                        batch_id,
                        topic: topic.to_string(),
                        stage: TOURNAMENT_STAGE.to_string(),
                    }
                })
                .collect()),
            Phase::Finalized(_) => Ok(Vec::new()),
        }
    }

    pub fn status(&self) -> Vec<TopicStatus> {
        self.topics
            .iter()
            .map(|(topic, state)| TopicStatus {
                topic: topic.clone(),
                stage: state.stage_tag(),
                pool_size: state.pool.len(),
                pending: state.pending().len(),
                judgments: state.judgments,
            })
            .collect()
    }

    pub fn top_k(&self, topic: &str) -> Option<&TopKResult> {
        match &self.topics.get(topic)?.phase {
            Phase::Finalized(result) => Some(result),
            _ => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.topics.values().all(|s| matches!(s.phase, Phase::Finalized(_)))
    }

    /// Finalized topics as preference judgments.
    pub fn to_preference_qrels(&self) -> PreferenceQrels {
        let mut out = PreferenceQrels::new();
        for state in self.topics.values() {
            if let Phase::Finalized(result) = &state.phase {
                result.write_preferences(&mut out);
            }
        }
        out
    }
}
