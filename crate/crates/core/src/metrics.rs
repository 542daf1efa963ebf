//! Rank-biased overlap, compatibility and NDCG.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::ideal::{self, best_ideal, EffectivenessLevels, IdealError, TopKResult};
use crate::ranking::Ranking;
use crate::trec_io::{GradedQrels, PreferenceQrels, RunFile};

pub const DEFAULT_P: f64 = 0.95;
pub const DEFAULT_DEPTH: usize = 1000;

/// Persistence values whose compatibility sensitivity roughly matches
/// NDCG at the paired cutoff, on graded ideal rankings.
pub const P_FOR_NDCG_CUTOFF: [(usize, f64); 4] = [(3, 0.80), (5, 0.85), (10, 0.90), (20, 0.95)];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("persistence must lie strictly between 0 and 1, got {0}")]
    InvalidPersistence(f64),
    #[error("depth and cutoffs must be at least 1")]
    InvalidDepth,
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error("invalid measure parameter {0:?}")]
    InvalidParam(String),
    #[error("measure {measure} needs {needs}")]
    MissingJudgments { measure: String, needs: &'static str },
    #[error("topic {0:?} is not in the qrels")]
    TopicAbsent(String),
    #[error(transparent)]
    Ideal(#[from] IdealError),
}

/// Parameters of rank-biased overlap: persistence `p` and the depth at
/// which the infinite sum is cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RboParams {
    p: f64,
    depth: usize,
}

impl RboParams {
    pub fn new(p: f64, depth: usize) -> Result<Self, MeasureError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(MeasureError::InvalidPersistence(p));
        }
        if depth == 0 {
            return Err(MeasureError::InvalidDepth);
        }
        Ok(RboParams { p, depth })
    }

    pub fn with_p(p: f64) -> Result<Self, MeasureError> {
        Self::new(p, DEFAULT_DEPTH)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

impl Default for RboParams {
    fn default() -> Self {
        RboParams {
            p: DEFAULT_P,
            depth: DEFAULT_DEPTH,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `(1-p) * sum_{i=1..depth} p^(i-1) * |A[..i] ∩ B[..i]| / i`, where a prefix
/// longer than a ranking is the whole ranking.
pub fn rbo(actual: &Ranking, ideal: &Ranking, params: &RboParams) -> f64 {
    let (a, b) = (actual.as_slice(), ideal.as_slice());
    let p = params.p;
    let listed = a.len().max(b.len()).min(params.depth);
    let mut seen_a: HashSet<&str> = HashSet::with_capacity(listed);
    let mut seen_b: HashSet<&str> = HashSet::with_capacity(listed);
    let mut overlap = 0usize;
    let mut weight = 1.0;
    let mut sum = CompensatedSum::default();

    for i in 1..=listed {
        let x = a.get(i - 1).map(String::as_str);
        let y = b.get(i - 1).map(String::as_str);
        match (x, y) {
            (Some(x), Some(y)) if x == y => overlap += 1,
            _ => {
                if let Some(x) = x {
                    overlap += seen_b.contains(x) as usize;
                }
                if let Some(y) = y {
                    overlap += seen_a.contains(y) as usize;
                }
            }
        }
        if let Some(x) = x {
            seen_a.insert(x);
        }
        if let Some(y) = y {
            seen_b.insert(y);
        }
        sum.add(weight * overlap as f64 / i as f64);
        weight *= p;
    }

    // Both rankings exhausted: the overlap stays constant.
    if overlap > 0 {
        let overlap = overlap as f64;
        for i in listed + 1..=params.depth {
            if weight == 0.0 {
                break;
            }
            sum.add(weight * overlap / i as f64);
            weight *= p;
        }
    }
    (1.0 - p) * sum.value()
}

pub fn rbo_self(ideal: &Ranking, params: &RboParams) -> f64 {
    rbo(ideal, ideal, params)
}

/// RBO divided by the ideal's self-similarity. `None` for an empty ideal,
/// where the ratio is undefined.
pub fn nrbo(actual: &Ranking, ideal: &Ranking, params: &RboParams) -> Option<f64> {
    if ideal.is_empty() {
        return None;
    }
    let max = rbo_self(ideal, params);
    Some((rbo(actual, ideal, params) / max).min(1.0))
}

/// Maximum similarity between `actual` and any ideal ranking of `levels`.
/// `None` when there are no levels (the ideal set holds only the empty
/// ranking).
pub fn compatibility(
    actual: &Ranking,
    levels: &EffectivenessLevels,
    params: &RboParams,
    normalized: bool,
) -> Option<f64> {
    if levels.is_empty() {
        return None;
    }
    let ideal = best_ideal(levels, actual);
    if normalized {
        nrbo(actual, &ideal, params)
    } else {
        Some(rbo(actual, &ideal, params))
    }
}

/// NDCG with gain equal to the grade and a `1/log2(rank + 1)` discount.
pub fn ndcg_at_k(actual: &Ranking, qrels: &GradedQrels, topic: &str, k: usize) -> Result<f64, MeasureError> {
    if k == 0 {
        return Err(MeasureError::InvalidDepth);
    }
    let grades = qrels
        .topic(topic)
        .ok_or_else(|| MeasureError::TopicAbsent(topic.to_string()))?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = actual
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| grades.get(d).copied().unwrap_or(0) as f64 * discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 * discount(i + 1))
        .sum();
    Ok(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

/// Which judgments define the ideal rankings for compatibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdealSource {
    /// Graded qrels only.
    Grades,
    /// Preference qrels only (typically a top-k).
    TopK,
    /// Preference levels above the remaining grade levels.
    Combined,
    /// Only the top preference level.
    BestOnly,
}

impl IdealSource {
    fn name(self) -> &'static str {
        match self {
            IdealSource::Grades => "grades",
            IdealSource::TopK => "topk",
            IdealSource::Combined => "combined",
            IdealSource::BestOnly => "best",
        }
    }
}

impl FromStr for IdealSource {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grades" => Ok(IdealSource::Grades),
            "topk" | "prefs" => Ok(IdealSource::TopK),
            "combined" => Ok(IdealSource::Combined),
            "best" | "best-only" => Ok(IdealSource::BestOnly),
            _ => Err(MeasureError::InvalidParam(format!("src={s}"))),
        }
    }
}

/// A measure as named on the command line, e.g. `ndcg:k=3` or
/// `compat:p=0.8,norm=true,src=combined`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Ndcg {
        k: usize,
    },
    Compat {
        params: RboParams,
        normalized: bool,
        source: IdealSource,
    },
}

impl MeasureSpec {
    pub fn compat(params: RboParams, normalized: bool, source: IdealSource) -> Self {
        MeasureSpec::Compat {
            params,
            normalized,
            source,
        }
    }

    /// Parses a spec, taking unspecified compatibility settings from the
    /// given defaults.
    pub fn parse_with_defaults(s: &str, defaults: &RboParams, normalized: bool) -> Result<Self, MeasureError> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = BTreeMap::new();
        for part in args.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| MeasureError::InvalidParam(part.to_string()))?;
            kv.insert(k.trim(), v.trim());
        }
        let bad = |k: &str, v: &str| MeasureError::InvalidParam(format!("{k}={v}"));
        match name {
            "ndcg" => {
                let mut k = 10;
                for (key, v) in kv {
                    match key {
                        "k" => k = v.parse().map_err(|_| bad(key, v))?,
                        _ => return Err(bad(key, v)),
                    }
                }
                if k == 0 {
                    return Err(MeasureError::InvalidDepth);
                }
                Ok(MeasureSpec::Ndcg { k })
            }
            "compat" | "rbo" => {
                let mut p = defaults.p;
                let mut depth = defaults.depth;
                let mut norm = normalized;
                let mut source = IdealSource::Grades;
                for (key, v) in kv {
                    match key {
                        "p" => p = v.parse().map_err(|_| bad(key, v))?,
                        "depth" => depth = v.parse().map_err(|_| bad(key, v))?,
                        "norm" => norm = v.parse().map_err(|_| bad(key, v))?,
                        "src" => source = v.parse()?,
                        _ => return Err(bad(key, v)),
                    }
                }
                Ok(MeasureSpec::compat(RboParams::new(p, depth)?, norm, source))
            }
            _ => Err(MeasureError::UnknownMeasure(s.to_string())),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MeasureSpec::parse_with_defaults(s, &RboParams::default(), true)
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Ndcg { k } => write!(f, "ndcg:k={k}"),
            MeasureSpec::Compat {
                params,
                normalized,
                source,
            } => write!(
                f,
                "compat:p={},depth={},norm={},src={}",
                params.p,
                params.depth,
                normalized,
                source.name()
            ),
        }
    }
}

/// Judgments available to measures.
#[derive(Debug, Clone, Default)]
pub struct Judgments {
    pub grades: Option<GradedQrels>,
    pub preferences: Option<PreferenceQrels>,
}

impl Judgments {
    pub fn graded(grades: GradedQrels) -> Self {
        Judgments {
            grades: Some(grades),
            preferences: None,
        }
    }

    fn need_grades(&self, spec: &MeasureSpec) -> Result<&GradedQrels, MeasureError> {
        self.grades.as_ref().ok_or_else(|| MeasureError::MissingJudgments {
            measure: spec.to_string(),
            needs: "graded qrels",
        })
    }

    fn need_prefs(&self, spec: &MeasureSpec) -> Result<&PreferenceQrels, MeasureError> {
        self.preferences.as_ref().ok_or_else(|| MeasureError::MissingJudgments {
            measure: spec.to_string(),
            needs: "preference qrels",
        })
    }

    /// Topics evaluated under `spec`: those of the judgment source.
    pub fn topics(&self, spec: &MeasureSpec) -> Result<Vec<String>, MeasureError> {
        let ids: Vec<String> = match spec {
            MeasureSpec::Ndcg { .. }
            | MeasureSpec::Compat {
                source: IdealSource::Grades,
                ..
            } => self.need_grades(spec)?.topic_ids().map(String::from).collect(),
            MeasureSpec::Compat { .. } => self.need_prefs(spec)?.topic_ids().map(String::from).collect(),
        };
        Ok(ids)
    }

    /// Effectiveness levels for a topic under the given ideal source.
    pub fn levels(&self, spec: &MeasureSpec, source: IdealSource, topic: &str) -> Result<EffectivenessLevels, MeasureError> {
        Ok(match source {
            IdealSource::Grades => ideal::levels_from_grades(self.need_grades(spec)?, topic)?,
            IdealSource::TopK => ideal::levels_from_preferences(self.need_prefs(spec)?, topic)?,
            IdealSource::BestOnly => {
                let mut top = TopKResult::from_preferences(self.need_prefs(spec)?, topic)?;
                top.groups.truncate(1);
                ideal::levels_from_topk(&top)?
            }
            IdealSource::Combined => {
                let top = TopKResult::from_preferences(self.need_prefs(spec)?, topic)?;
                ideal::levels_combined(&top, self.need_grades(spec)?, topic)?
            }
        })
    }
}

/// Per-topic and mean scores of one run under one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub run_tag: String,
    pub measure: String,
    pub per_topic: BTreeMap<String, f64>,
    pub mean: f64,
    /// Topics whose ideal ranking is empty; they score 0.
    pub empty_ideal: BTreeSet<String>,
}

impl MeasureReport {
    /// `measure topic score` lines followed by the `all` mean line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (topic, score) in &self.per_topic {
            out.push_str(&format!("{}\t{}\t{:.6}\n", self.measure, topic, score));
        }
        out.push_str(&format!("{}\tall\t{:.6}\n", self.measure, self.mean));
        out
    }
}

pub fn evaluate_run(run: &RunFile, judgments: &Judgments, spec: &MeasureSpec) -> Result<MeasureReport, MeasureError> {
    let topics = judgments.topics(spec)?;
    let scored: Vec<(String, f64, bool)> = topics
        .par_iter()
        .map(|topic| {
            let actual = run.ranking(topic);
            match spec {
                MeasureSpec::Ndcg { k } => {
                    let grades = judgments.need_grades(spec)?;
                    Ok((topic.clone(), ndcg_at_k(&actual, grades, topic, *k)?, false))
                }
                MeasureSpec::Compat {
                    params,
                    normalized,
                    source,
                } => {
                    let levels = judgments.levels(spec, *source, topic)?;
                    Ok(match compatibility(&actual, &levels, params, *normalized) {
                        Some(score) => (topic.clone(), score, false),
                        None => (topic.clone(), 0.0, true),
                    })
                }
            }
        })
        .collect::<Result<_, MeasureError>>()?;

    let mean = if scored.is_empty() {
        0.0
    } else {
        scored.iter().map(|(_, s, _)| s).sum::<f64>() / scored.len() as f64
    };
    Ok(MeasureReport {
        run_tag: run.run_tag.clone(),
        measure: spec.to_string(),
        empty_ideal: scored
            .iter()
            .filter(|(_, _, flagged)| *flagged)
            .map(|(t, _, _)| t.clone())
            .collect(),
        per_topic: scored.into_iter().map(|(t, s, _)| (t, s)).collect(),
        mean,
    })
}
