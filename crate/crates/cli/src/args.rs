//! Command-line definitions.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use compat_core::campaign::AssessmentMode;

#[derive(Debug, Parser)]
#[command(name = "compat", version, about = "Compatibility-based evaluation and preference judging campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one run file under one or more measures.
    Eval(EvalArgs),
    /// Compare the runs in a directory: ordering, sensitivity and consistency.
    Compare(CompareArgs),
    /// Manage a preference judging campaign stored in a directory.
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Serve a campaign over HTTP for live judging.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct JudgmentArgs {
    /// Graded relevance judgments (TREC qrels).
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Preference judgments (TREC qrels with real-valued preference scores).
    #[arg(long)]
    pub prefs: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Measure spec such as `ndcg:k=10`, `compat` or `compat:p=0.8,src=topk`.
    /// Repeat for several measures.
    #[arg(long = "measure", short = 'm', default_value = "compat")]
    pub measures: Vec<String>,
    /// Default RBO persistence for compatibility measures.
    #[arg(long, default_value_t = 0.95)]
    pub p: f64,
    /// Default RBO evaluation depth.
    #[arg(long, default_value_t = 1000)]
    pub depth: usize,
    /// Default NDCG cutoff for specs without `k=`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Normalize compatibility by the ideal's self-similarity.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// TREC run file.
    pub run: PathBuf,
    #[command(flatten)]
    pub judgments: JudgmentArgs,
    #[command(flatten)]
    pub measures: MeasureArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory holding one TREC run file per system.
    pub runs: PathBuf,
    #[command(flatten)]
    pub judgments: JudgmentArgs,
    #[command(flatten)]
    pub measures: MeasureArgs,
    /// Significance level of the paired t-tests.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Crowdsourced,
    Tournament,
}

impl From<ModeArg> for AssessmentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Crowdsourced => AssessmentMode::Crowdsourced,
            ModeArg::Tournament => AssessmentMode::Tournament,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CampaignCommand {
    /// Create a campaign directory from graded judgments.
    Init(InitArgs),
    /// Print each topic's candidate pool after thinning.
    Thin(DirArg),
    /// Print the pairs each topic is waiting on.
    Plan(DirArg),
    /// Write worker-facing batches for every pending pair.
    Export(ExportArgs),
    /// Import worker answers into the ledger.
    Import(ImportArgs),
    /// Print per-topic stage, pending pairs and judgments used.
    Status(DirArg),
    /// Write the top-k results as preference judgments.
    Finalize(FinalizeArgs),
    /// Simulate the protocol with scripted assessors.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DirArg {
    /// Campaign directory.
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Campaign directory to create.
    pub dir: PathBuf,
    /// Graded judgments the candidate pools are drawn from.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Passage texts, one `doc_id<TAB>text` per line.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// Question texts, one `topic_id<TAB>text` per line.
    #[arg(long)]
    pub questions: Option<PathBuf>,
    /// Base configuration (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub dir: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    pub dir: PathBuf,
    /// Answers, one JSON object `{pair_id, assessor, winner: "a"|"b"}` per line.
    pub answers: PathBuf,
}

#[derive(Debug, Args)]
pub struct FinalizeArgs {
    pub dir: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulate the topics of this campaign, taking grade order as the truth.
    #[arg(long, conflicts_with = "sizes")]
    pub dir: Option<PathBuf>,
    /// Synthetic pool sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Probability that the assessor flips a judgment.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}
