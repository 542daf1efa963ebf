//! Rank-similarity evaluation against preference judgments.
//!
//! * [`trec_io`]: TREC runs, graded and preference qrels, and the judgment
//!   ledger.
//! * [`ideal`]: effectiveness levels and the ideal rankings they admit.
//! * [`metrics`]: RBO, normalized RBO, compatibility and NDCG.
//! * [`stats`]: Kendall's tau, paired t-tests, confidence intervals and
//!   sensitivity.
//! * [`campaign`]: the top-k preference assessment protocol, its event-sourced
//!   state and a Monte-Carlo simulator.

pub mod campaign;
pub mod ideal;
pub mod metrics;
pub mod ranking;
pub mod stats;
pub mod trec_io;

pub use ideal::{best_ideal, count_ideal_rankings, EffectivenessLevels, IdealCount, IdealError, TopKResult};
pub use metrics::{
    compatibility, evaluate_run, ndcg_at_k, nrbo, rbo, rbo_self, IdealSource, Judgments, MeasureError,
    MeasureReport, MeasureSpec, RboParams,
};
pub use ranking::{DocId, Ranking, RankingError};
pub use stats::{kendall_tau, mean_ci, paired_t_test, sensitivity, ScoreMatrix, SensitivityReport, StatsError};
pub use trec_io::{FormatError, GradedQrels, JudgmentRecord, PreferenceQrels, RunFile};
