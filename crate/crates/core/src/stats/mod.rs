//! Meta-evaluation: consistency (Kendall's tau between run orderings),
//! sensitivity (share of run pairs separated by a paired t-test) and
//! confidence intervals on run means.

pub mod dist;

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::MeasureReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("kendall's tau is undefined when one sequence is constant")]
    ConstantSequence,
    #[error("run {run:?} covers a different topic set")]
    TopicMismatch { run: String },
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
}

/// Kendall's tau-b, which corrects for ties on either side.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut untied_x, mut untied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).expect("finite scores");
            let dy = y[i].partial_cmp(&y[j]).expect("finite scores");
            use std::cmp::Ordering::Equal;
            if dx != Equal {
                untied_x += 1;
            }
            if dy != Equal {
                untied_y += 1;
            }
            if dx != Equal && dy != Equal {
                if dx == dy {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    if untied_x == 0 || untied_y == 0 {
        return Err(StatsError::ConstantSequence);
    }
    Ok((concordant - discordant) as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Two-sided paired t-test on per-topic differences `a - b`.
///
/// Zero variance of the differences gives `p = 1` when the mean difference
/// is zero and `p = 0` (infinite `t`) otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_and_sd(&diffs);
    let df = n - 1;
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p_value: 1.0, df }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p_value: 0.0,
                df,
            }
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    Ok(TTest {
        t,
        p_value: dist::t_two_sided_p(t, df as f64),
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `mean ± t_{(1+level)/2, n-1} · sd/√n`.
pub fn mean_ci(scores: &[f64], level: f64) -> Result<ConfidenceInterval, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    let n = scores.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    let (mean, sd) = mean_and_sd(scores);
    let half = dist::t_quantile((1.0 + level) / 2.0, (n - 1) as f64) * sd / (n as f64).sqrt();
    Ok(ConfidenceInterval {
        mean,
        lo: mean - half,
        hi: mean + half,
    })
}

/// Per-(run, topic) scores under one measure. Every run covers the same
/// topics in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub measure: String,
    runs: Vec<String>,
    topics: Vec<String>,
    scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(
        measure: impl Into<String>,
        runs: Vec<String>,
        topics: Vec<String>,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self, StatsError> {
        if scores.len() != runs.len() {
            return Err(StatsError::LengthMismatch(scores.len(), runs.len()));
        }
        for (run, row) in runs.iter().zip(&scores) {
            if row.len() != topics.len() {
                return Err(StatsError::TopicMismatch { run: run.clone() });
            }
        }
        Ok(ScoreMatrix {
            measure: measure.into(),
            runs,
            topics,
            scores,
        })
    }

    /// Builds the matrix from per-run reports of one measure; all reports
    /// must cover the same topics.
    pub fn from_reports(reports: &[MeasureReport]) -> Result<Self, StatsError> {
        let Some(first) = reports.first() else {
            return ScoreMatrix::new("", vec![], vec![], vec![]);
        };
        let topics: Vec<String> = first.per_topic.keys().cloned().collect();
        let topic_set: BTreeSet<&String> = topics.iter().collect();
        let mut scores = Vec::with_capacity(reports.len());
        for r in reports {
            if r.per_topic.keys().collect::<BTreeSet<_>>() != topic_set {
                return Err(StatsError::TopicMismatch { run: r.run_tag.clone() });
            }
            scores.push(r.per_topic.values().copied().collect());
        }
        ScoreMatrix::new(
            first.measure.clone(),
            reports.iter().map(|r| r.run_tag.clone()).collect(),
            topics,
            scores,
        )
    }

    pub fn runs(&self) -> &[String] {
        &self.runs
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn row(&self, run: usize) -> &[f64] {
        &self.scores[run]
    }

    pub fn means(&self) -> Vec<f64> {
        self.scores
            .iter()
            .map(|row| {
                if row.is_empty() {
                    0.0
                } else {
                    row.iter().sum::<f64>() / row.len() as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTest {
    pub run_a: String,
    pub run_b: String,
    pub t: f64,
    pub p_value: f64,
    pub distinguished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub measure: String,
    pub distinguished: usize,
    pub total_pairs: usize,
    pub sensitivity: f64,
    pub alpha: f64,
    pub pairs: Vec<PairTest>,
}

/// Fraction of run pairs whose paired t-test gives `p < alpha`, with no
/// multiple-comparison correction.
pub fn sensitivity(matrix: &ScoreMatrix, alpha: f64) -> Result<SensitivityReport, StatsError> {
    let n = matrix.runs.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    let index_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let pairs = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let test = paired_t_test(&matrix.scores[i], &matrix.scores[j])?;
            Ok(PairTest {
                run_a: matrix.runs[i].clone(),
                run_b: matrix.runs[j].clone(),
                t: test.t,
                p_value: test.p_value,
                distinguished: test.p_value < alpha,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let distinguished = pairs.iter().filter(|p| p.distinguished).count();
    let total_pairs = pairs.len();
    Ok(SensitivityReport {
        measure: matrix.measure.clone(),
        distinguished,
        total_pairs,
        sensitivity: distinguished as f64 / total_pairs as f64,
        alpha,
        pairs,
    })
}
