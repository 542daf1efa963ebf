//! Reference computations shared by the integration tests. Everything here
//! is written for clarity over speed and avoids the library's code paths.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use compat_core::{EffectivenessLevels, Ranking};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// RBO from the definition. Prefix overlaps are recomputed from scratch at
/// each depth up to the longer list; past that the overlap is constant and
/// the remaining weight `sum_{d=m+1}^{depth} p^(d-1) / d` comes from a table
/// filled term by term.
pub struct RboOracle {
    p: f64,
    depth: usize,
    tails: Vec<f64>,
}

impl RboOracle {
    pub fn new(p: f64, depth: usize, max_len: usize) -> Self {
        let tails = (0..=max_len.min(depth))
            .map(|m| ((m + 1)..=depth).map(|d| p.powi(d as i32 - 1) / d as f64).sum())
            .collect();
        RboOracle { p, depth, tails }
    }

    pub fn rbo(&self, a: &[String], b: &[String]) -> f64 {
        let longest = a.len().max(b.len()).min(self.depth);
        let mut sum = 0.0;
        for d in 1..=longest {
            let pa: HashSet<&String> = a.iter().take(d).collect();
            let overlap = b.iter().take(d).filter(|x| pa.contains(x)).count();
            sum += self.p.powi(d as i32 - 1) * overlap as f64 / d as f64;
        }
        let pa: HashSet<&String> = a.iter().take(longest).collect();
        let overlap = b.iter().take(longest).filter(|x| pa.contains(x)).count();
        sum += overlap as f64 * self.tails[longest];
        (1.0 - self.p) * sum
    }

    /// Brute-force compatibility: best (normalized) RBO over the whole
    /// ideal set.
    pub fn compatibility(&self, actual: &[String], levels: &[BTreeSet<String>], normalized: bool) -> f64 {
        all_ideals(levels)
            .iter()
            .map(|ideal| {
                let v = self.rbo(actual, ideal);
                if normalized {
                    v / self.rbo(ideal, ideal)
                } else {
                    v
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// All orderings of `items` (Heap's algorithm).
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    fn heap<T: Clone>(k: usize, a: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut out = Vec::new();
    heap(items.len(), &mut items.to_vec(), &mut out);
    out
}

/// Every ranking consistent with the levels, best level first.
pub fn all_ideals(levels: &[BTreeSet<String>]) -> Vec<Vec<String>> {
    let mut acc: Vec<Vec<String>> = vec![Vec::new()];
    for level in levels {
        let docs: Vec<String> = level.iter().cloned().collect();
        let perms = permutations(&docs);
        acc = acc
            .iter()
            .flat_map(|prefix| {
                perms.iter().map(move |perm| {
                    let mut v = prefix.clone();
                    v.extend(perm.iter().cloned());
                    v
                })
            })
            .collect();
    }
    acc
}

/// A random judged set of up to `max_docs` documents spread over at most
/// `max_levels` non-empty levels, plus a random run drawing from judged and
/// unjudged documents.
pub fn random_case(rng: &mut ChaCha8Rng, max_docs: usize, max_levels: usize) -> (EffectivenessLevels, Ranking) {
    let n = rng.random_range(1..=max_docs);
    let t = rng.random_range(1..=max_levels.min(n));
    let mut judged: Vec<String> = (0..n).map(|i| format!("j{i}")).collect();
    judged.shuffle(rng);
    // Cut points give t non-empty levels.
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(t - 1).collect();
    cuts.sort();
    let mut levels = Vec::new();
    let mut start = 0;
    for end in cuts.into_iter().chain(std::iter::once(n)) {
        levels.push(judged[start..end].iter().cloned().collect::<BTreeSet<_>>());
        start = end;
    }
    let mut pool: Vec<String> = judged.clone();
    pool.extend((0..rng.random_range(0..6)).map(|i| format!("u{i}")));
    pool.shuffle(rng);
    let len = rng.random_range(0..=pool.len());
    let run = Ranking::new(pool.into_iter().take(len)).unwrap();
    (EffectivenessLevels::new("t", levels).unwrap(), run)
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
