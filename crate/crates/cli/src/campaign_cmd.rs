//! `campaign` subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use compat_core::campaign::{
    simulate_campaign, validate_hit, AssessorModel, BatchOutcome, Campaign, CampaignConfig, HitBatch, HitVerdict,
    Submission,
};
use compat_core::trec_io::read_graded_qrels;
use compat_core::DocId;
use serde::{Deserialize, Serialize};

use crate::args::{
    CampaignCommand, DirArg, ExportArgs, FinalizeArgs, ImportArgs, InitArgs, SimulateArgs,
};
use crate::store::{issue_batches, open_batches, unissued, CampaignDir};

pub fn run(cmd: &CampaignCommand, out: &mut dyn Write) -> Result<()> {
    match cmd {
        CampaignCommand::Init(args) => init(args, out),
        CampaignCommand::Thin(args) => thin(args, out),
        CampaignCommand::Plan(args) => plan(args, out),
        CampaignCommand::Export(args) => export(args, out),
        CampaignCommand::Import(args) => import(args, out),
        CampaignCommand::Status(args) => status(args, out),
        CampaignCommand::Finalize(args) => finalize(args, out),
        CampaignCommand::Simulate(args) => simulate(args, out),
    }
}

/// One pair as shown to a worker. Carries no document ids and no hint of
/// which items are challenges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerItem {
    pub batch_id: String,
    pub pair_id: String,
    pub topic: String,
    pub question: String,
    pub passage_a: String,
    pub passage_b: String,
}

/// One line of an answers file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub pair_id: String,
    pub assessor: String,
    /// `a` or `b`.
    pub winner: String,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

fn init(args: &InitArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    let grades = read_graded_qrels(&args.qrels)?;
    let dir = CampaignDir::init(&args.dir, &config, &grades, args.docs.as_deref(), args.questions.as_deref())?;
    let campaign = dir.load()?;
    writeln!(out, "initialized {} with {} topic(s)", dir.root().display(), campaign.topics().len())?;
    Ok(())
}

fn thin(args: &DirArg, out: &mut dyn Write) -> Result<()> {
    let campaign = CampaignDir::open(&args.dir)?.load()?;
    writeln!(out, "topic\tsize\tcandidates")?;
    for (topic, state) in campaign.topics() {
        let docs: Vec<&str> = state.initial_pool.iter().map(String::as_str).collect();
        writeln!(out, "{topic}\t{}\t{}", docs.len(), docs.join(" "))?;
    }
    Ok(())
}

fn plan(args: &DirArg, out: &mut dyn Write) -> Result<()> {
    let campaign = CampaignDir::open(&args.dir)?.load()?;
    writeln!(out, "topic\tstage\tdoc_a\tdoc_b")?;
    for topic in campaign.topics().keys() {
        let stage = campaign.stage_tag(topic)?;
        for pair in campaign.pending_pairs(topic)? {
            writeln!(out, "{topic}\t{stage}\t{}\t{}", pair.first(), pair.second())?;
        }
    }
    Ok(())
}

pub fn worker_item(batch: &HitBatch, index: usize, docs: &BTreeMap<String, String>, questions: &BTreeMap<String, String>) -> WorkerItem {
    let item = &batch.items[index];
    let text = |id: &DocId| docs.get(id).cloned().unwrap_or_else(|| id.clone());
    WorkerItem {
        batch_id: batch.batch_id.clone(),
        pair_id: item.pair_id.clone(),
        topic: item.topic.clone(),
        question: questions.get(&item.topic).cloned().unwrap_or_else(|| item.topic.clone()),
        passage_a: text(&item.doc_a),
        passage_b: text(&item.doc_b),
    }
}

/// Issues batches for uncovered pending pairs, then writes every open batch.
fn export(args: &ExportArgs, out: &mut dyn Write) -> Result<()> {
    let dir = CampaignDir::open(&args.dir)?;
    let campaign = dir.load()?;
    let mut manifest = dir.manifest()?;
    let fresh = issue_batches(&campaign, &manifest)?;
    dir.append_manifest(&fresh)?;
    manifest.extend(fresh);
    let (docs, questions) = (dir.docs()?, dir.questions()?);
    let mut text = String::new();
    let open = open_batches(&campaign, &manifest);
    for batch in &open {
        for i in 0..batch.items.len() {
            text.push_str(&serde_json::to_string(&worker_item(batch, i, &docs, &questions))?);
            text.push('\n');
        }
    }
    match &args.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "exported {} batch(es) to {}", open.len(), path.display())?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Maps `a`/`b` to the document shown on that side.
pub fn side_to_doc(batch: &HitBatch, pair_id: &str, side: &str) -> Result<DocId> {
    let item = batch
        .item(pair_id)
        .with_context(|| format!("batch {} has no item {pair_id:?}", batch.batch_id))?;
    match side.trim().to_ascii_lowercase().as_str() {
        "a" => Ok(item.doc_a.clone()),
        "b" => Ok(item.doc_b.clone()),
        other => bail!("winner must be \"a\" or \"b\", got {other:?}"),
    }
}

fn read_answers(path: &std::path::Path) -> Result<Vec<Answer>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

/// Imports answers batch by batch, in order of first appearance. A batch is
/// written to the ledger only when complete and not refused; problems with
/// one batch do not stop the others.
fn import(args: &ImportArgs, out: &mut dyn Write) -> Result<()> {
    let dir = CampaignDir::open(&args.dir)?;
    let mut campaign = dir.load()?;
    let manifest = dir.manifest()?;
    let mut ledger = dir.ledger()?;
    let by_pair: BTreeMap<&str, &HitBatch> = manifest
        .iter()
        .rev()
        .flat_map(|b| b.items.iter().map(move |i| (i.pair_id.as_str(), b)))
        .collect();

    let mut groups: Vec<(&HitBatch, Vec<Answer>)> = Vec::new();
    let mut failures = 0;
    for answer in read_answers(&args.answers)? {
        let Some(&batch) = by_pair.get(answer.pair_id.as_str()) else {
            writeln!(out, "-\t{}\terror: unknown pair id {:?}", answer.assessor, answer.pair_id)?;
            failures += 1;
            continue;
        };
        match groups.iter_mut().find(|(b, _)| b.batch_id == batch.batch_id) {
            Some((_, answers)) => answers.push(answer),
            None => groups.push((batch, vec![answer])),
        }
    }

    for (batch, answers) in groups {
        match import_batch(&mut campaign, &mut ledger, batch, &answers) {
            Ok(outcome) => writeln!(out, "{}\t{}\t{outcome}", batch.batch_id, answers[0].assessor)?,
            Err(e) => {
                failures += 1;
                writeln!(out, "{}\t{}\terror: {e:#}", batch.batch_id, answers[0].assessor)?;
            }
        }
    }
    if failures > 0 {
        bail!("{failures} batch(es) or line(s) could not be imported");
    }
    Ok(())
}

fn import_batch(
    campaign: &mut Campaign,
    ledger: &mut compat_core::trec_io::Ledger,
    batch: &HitBatch,
    answers: &[Answer],
) -> Result<String> {
    let assessor = &answers[0].assessor;
    if let Some(other) = answers.iter().find(|a| a.assessor != *assessor) {
        bail!("answers from both {assessor:?} and {:?}", other.assessor);
    }
    let mut submission = Submission {
        assessor: assessor.clone(),
        answers: BTreeMap::new(),
    };
    for a in answers {
        let doc = side_to_doc(batch, &a.pair_id, &a.winner)?;
        if submission.answers.insert(a.pair_id.clone(), doc).is_some() {
            bail!("pair {:?} answered twice", a.pair_id);
        }
    }
    if let HitVerdict::Refused = validate_hit(batch, &submission, campaign.excluded())? {
        return Ok("refused: assessor is excluded".into());
    }
    let timestamp = answers.iter().map(|a| a.timestamp).max().unwrap_or(0);
    let records = batch.records(&submission, timestamp);
    let mut next = campaign.clone();
    let outcome = next.apply(&records)?;
    let text = match outcome {
        BatchOutcome::Duplicate => return Ok("duplicate: already imported".into()),
        BatchOutcome::Refused => return Ok("refused: assessor is excluded".into()),
        BatchOutcome::Applied { applied, stale } => format!("accepted: {applied} applied, {stale} stale"),
        BatchOutcome::Rejected { failed } => format!("rejected: {failed} failed check(s), pairs requeued"),
    };
    ledger.append_all(&records)?;
    *campaign = next;
    Ok(text)
}

fn status(args: &DirArg, out: &mut dyn Write) -> Result<()> {
    let dir = CampaignDir::open(&args.dir)?;
    let campaign = dir.load()?;
    let unissued = unissued(&campaign, &dir.manifest()?);
    writeln!(out, "topic\tstage\tpool\tpending\tunissued\tjudgments")?;
    for s in campaign.status() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.topic,
            s.stage,
            s.pool_size,
            s.pending,
            unissued[&s.topic].len(),
            s.judgments
        )?;
    }
    if !campaign.excluded().is_empty() {
        let names: Vec<&str> = campaign.excluded().iter().map(String::as_str).collect();
        writeln!(out, "excluded\t{}", names.join(","))?;
    }
    Ok(())
}

fn finalize(args: &FinalizeArgs, out: &mut dyn Write) -> Result<()> {
    let campaign = CampaignDir::open(&args.dir)?.load()?;
    let open: Vec<String> = campaign
        .status()
        .into_iter()
        .filter(|s| campaign.top_k(&s.topic).is_none())
        .map(|s| format!("{} ({}, {} pending)", s.topic, s.stage, s.pending))
        .collect();
    if !open.is_empty() {
        bail!("cannot finalize: {} topic(s) unfinished: {}", open.len(), open.join(", "));
    }
    let text = campaign.to_preference_qrels().to_trec_string();
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let (mut config, orders): (CampaignConfig, Vec<Vec<DocId>>) = match &args.dir {
        Some(path) => {
            let dir = CampaignDir::open(path)?;
            let (config, grades) = (dir.config()?, dir.grades()?);
            let campaign = Campaign::new(config.clone(), &grades)?;
            let orders = campaign
                .topics()
                .iter()
                .map(|(topic, state)| {
                    let mut docs: Vec<DocId> = state.initial_pool.iter().cloned().collect();
                    docs.sort_by_key(|d| std::cmp::Reverse(grades.grade(topic, d).unwrap_or(0)));
                    docs
                })
                .collect();
            (config, orders)
        }
        None => {
            let orders = args
                .sizes
                .iter()
                .map(|&n| (0..n).map(|i| format!("d{i:03}")).collect())
                .collect();
            (CampaignConfig::default(), orders)
        }
    };
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    config.validate()?;
    if !(0.0..=0.5).contains(&args.noise) {
        bail!("--noise must lie in [0, 0.5], got {}", args.noise);
    }
    let model = if args.noise == 0.0 {
        AssessorModel::Consistent
    } else {
        AssessorModel::Noisy { epsilon: args.noise }
    };
    let r = simulate_campaign(&orders, model, &config, args.trials);
    let trajectory: Vec<String> = r.trajectory.iter().map(|v| format!("{v:.2}")).collect();
    writeln!(out, "runs\t{}", r.runs)?;
    writeln!(out, "mean_judgments\t{:.2}", r.mean_judgments)?;
    writeln!(out, "recovery_accuracy\t{:.4}", r.recovery_accuracy)?;
    writeln!(out, "first_group_best\t{:.4}", r.first_group_best)?;
    writeln!(out, "reduction_rounds\t{}", r.reduction_rounds)?;
    writeln!(out, "mean_survivor_fraction\t{:.4}", r.mean_survivor_fraction)?;
    writeln!(out, "pool_trajectory\t{}", trajectory.join(" "))?;
    writeln!(
        out,
        "kth_best_swept\t{}/{}\t{:.4}\t+-{:.4}",
        r.event_count,
        r.event_opportunities,
        r.event_frequency(),
        3.0 * r.event_standard_error()
    )?;
    writeln!(out, "kth_best_removed\t{}", r.event_culled)?;
    writeln!(out, "round_robin_fallbacks\t{}", r.fallbacks)?;
    writeln!(out, "bound_violations\t{}", r.bound_violations)?;
    Ok(())
}
