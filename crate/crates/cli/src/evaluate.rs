//! `eval` and `compare`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use compat_core::metrics::{evaluate_run, Judgments, MeasureSpec, RboParams};
use compat_core::stats::{kendall_tau, mean_ci, sensitivity, ScoreMatrix, StatsError};
use compat_core::trec_io::{read_graded_qrels, read_preference_qrels, read_run};
use compat_core::{MeasureReport, RunFile};
use log::warn;

use crate::args::{CompareArgs, EvalArgs, JudgmentArgs, MeasureArgs};

pub fn load_judgments(args: &JudgmentArgs) -> Result<Judgments> {
    if args.qrels.is_none() && args.prefs.is_none() {
        bail!("no judgments given; pass --qrels and/or --prefs");
    }
    let grades = match &args.qrels {
        Some(path) => Some(read_graded_qrels(path)?),
        None => None,
    };
    let preferences = match &args.prefs {
        Some(path) => Some(read_preference_qrels(path)?),
        None => None,
    };
    Ok(Judgments { grades, preferences })
}

/// Parses every `--measure`, filling in the `--p`, `--depth`, `--k` and
/// `--normalize` defaults.
pub fn measure_specs(args: &MeasureArgs) -> Result<Vec<MeasureSpec>> {
    let defaults = RboParams::new(args.p, args.depth)?;
    args.measures
        .iter()
        .map(|m| {
            let m = match (m.trim(), args.k) {
                ("ndcg", Some(k)) => format!("ndcg:k={k}"),
                _ => m.clone(),
            };
            MeasureSpec::parse_with_defaults(&m, &defaults, args.normalize)
                .with_context(|| format!("measure {m:?}"))
        })
        .collect()
}

fn evaluate(run: &RunFile, judgments: &Judgments, spec: &MeasureSpec) -> Result<MeasureReport> {
    let report = evaluate_run(run, judgments, spec).with_context(|| format!("evaluating {}", run.run_tag))?;
    if !report.empty_ideal.is_empty() {
        let topics: Vec<&str> = report.empty_ideal.iter().map(String::as_str).collect();
        warn!("{}: no ideal ranking for topic(s) {}; scored 0", report.measure, topics.join(", "));
    }
    Ok(report)
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let judgments = load_judgments(&args.judgments)?;
    let specs = measure_specs(&args.measures)?;
    let run = read_run(&args.run)?;
    for spec in &specs {
        out.write_all(evaluate(&run, &judgments, spec)?.to_text().as_bytes())?;
    }
    Ok(())
}

/// Regular files of `dir`, sorted by name.
fn run_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("--alpha must lie in (0, 1), got {}", args.alpha);
    }
    let judgments = load_judgments(&args.judgments)?;
    let specs = measure_specs(&args.measures)?;
    let runs: Vec<RunFile> = run_paths(&args.runs)?
        .iter()
        .map(|p| read_run(p).with_context(|| format!("reading run {}", p.display())))
        .collect::<Result<_>>()?;
    if runs.len() < 2 {
        bail!("{} holds {} run file(s); need at least 2", args.runs.display(), runs.len());
    }
    let mut tags = BTreeSet::new();
    for run in &runs {
        if !tags.insert(run.run_tag.as_str()) {
            bail!("run tag {:?} appears in more than one file", run.run_tag);
        }
    }
    let topics: BTreeSet<&str> = runs[0].topic_ids().collect();
    for run in &runs[1..] {
        if run.topic_ids().collect::<BTreeSet<_>>() != topics {
            bail!(
                "runs {:?} and {:?} cover different topic sets",
                runs[0].run_tag,
                run.run_tag
            );
        }
    }

    let mut means = Vec::new();
    for spec in &specs {
        let reports: Vec<MeasureReport> =
            runs.iter().map(|run| evaluate(run, &judgments, spec)).collect::<Result<_>>()?;
        let matrix = ScoreMatrix::from_reports(&reports)?;
        write_measure(&matrix, args.alpha, out)?;
        means.push((spec.to_string(), matrix.means()));
    }
    for (i, (a, xa)) in means.iter().enumerate() {
        for (b, xb) in &means[i + 1..] {
            let tau = match kendall_tau(xa, xb) {
                Ok(t) => format!("{t:.4}"),
                Err(StatsError::ConstantSequence) => "undefined".to_string(),
                Err(e) => return Err(e.into()),
            };
            writeln!(out, "kendall_tau\t{a}\t{b}\t{tau}")?;
        }
    }
    Ok(())
}

fn write_measure(matrix: &ScoreMatrix, alpha: f64, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "measure\t{}", matrix.measure)?;
    writeln!(out, "rank\trun\tmean\tci95_low\tci95_high")?;
    let means = matrix.means();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then_with(|| matrix.runs()[a].cmp(&matrix.runs()[b])));
    for (rank, &i) in order.iter().enumerate() {
        let (lo, hi) = match mean_ci(matrix.row(i), 0.95) {
            Ok(ci) => (format!("{:.4}", ci.lo), format!("{:.4}", ci.hi)),
            Err(_) => ("undefined".into(), "undefined".into()),
        };
        writeln!(out, "{}\t{}\t{:.4}\t{lo}\t{hi}", rank + 1, matrix.runs()[i], means[i])?;
    }
    let report = sensitivity(matrix, alpha)?;
    writeln!(
        out,
        "sensitivity\t{}/{}\t{:.4}\talpha={}",
        report.distinguished, report.total_pairs, report.sensitivity, alpha
    )?;
    writeln!(out, "pair\trun_a\trun_b\tt\tp_value\tsignificant")?;
    for pair in &report.pairs {
        writeln!(
            out,
            "pair\t{}\t{}\t{:.4}\t{:.6}\t{}",
            pair.run_a,
            pair.run_b,
            pair.t,
            pair.p_value,
            if pair.distinguished { "yes" } else { "no" }
        )?;
    }
    writeln!(out)?;
    Ok(())
}
