//! Seeded fixtures shared by the benchmarks.

use std::collections::BTreeSet;

use compat_core::stats::ScoreMatrix;
use compat_core::{EffectivenessLevels, Ranking};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn doc(i: usize) -> String {
    format!("d{i:05}")
}

/// A shuffled ranking of `len` documents drawn from `d0..d{universe}`.
pub fn random_ranking(len: usize, universe: usize, seed: u64) -> Ranking {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<String> = (0..universe.max(len)).map(doc).collect();
    docs.shuffle(&mut rng);
    docs.truncate(len);
    Ranking::new(docs).expect("distinct ids")
}

/// `judged` documents from `d0..` spread over `levels` levels of roughly
/// equal size.
pub fn random_levels(judged: usize, levels: usize, seed: u64) -> EffectivenessLevels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<String> = (0..judged).map(doc).collect();
    docs.shuffle(&mut rng);
    let mut out: Vec<BTreeSet<String>> = vec![BTreeSet::new(); levels];
    for (i, d) in docs.into_iter().enumerate() {
        out[i % levels].insert(d);
    }
    out.retain(|l| !l.is_empty());
    EffectivenessLevels::new("t", out).expect("disjoint levels")
}

/// Scores for `runs` systems over `topics` topics; run `i` has a mean
/// shifted by `0.01 * i`.
pub fn random_scores(runs: usize, topics: usize, seed: u64) -> ScoreMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = (0..runs)
        .map(|r| (0..topics).map(|_| (rng.random::<f64>() * 0.5 + 0.01 * r as f64).min(1.0)).collect())
        .collect();
    ScoreMatrix::new(
        "bench",
        (0..runs).map(|r| format!("run{r:02}")).collect(),
        (0..topics).map(|t| format!("t{t:03}")).collect(),
        scores,
    )
    .expect("rectangular matrix")
}
