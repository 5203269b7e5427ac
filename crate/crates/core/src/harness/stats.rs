//! Seed aggregation and scalar summaries.

use std::collections::BTreeMap;

use crate::config::Framework;
use crate::error::{Error, Result};

/// Percentile with linear interpolation between order statistics:
/// `h = (n - 1)·q`, value `x[⌊h⌋] + (h - ⌊h⌋)·(x[⌊h⌋+1] - x[⌊h⌋])`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    pub count: usize,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Per-episode mean and interquartile band across runs.
pub fn aggregate(runs: &[&[f64]]) -> Result<AggregateCurve> {
    let first = runs.first().ok_or_else(|| Error::Invalid("aggregate needs at least one run".into()))?;
    let episodes = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != episodes) {
        return Err(Error::DimensionMismatch {
            what: "episode count across runs",
            expected: episodes,
            actual: bad.len(),
        });
    }
    let mut curve = AggregateCurve {
        mean: Vec::with_capacity(episodes),
        band_low: Vec::with_capacity(episodes),
        band_high: Vec::with_capacity(episodes),
        count: runs.len(),
    };
    let mut column = Vec::with_capacity(runs.len());
    for e in 0..episodes {
        column.clear();
        column.extend(runs.iter().map(|r| r[e]));
        column.sort_by(f64::total_cmp);
        curve.mean.push(column.iter().sum::<f64>() / column.len() as f64);
        curve.band_low.push(percentile(&column, 0.25));
        curve.band_high.push(percentile(&column, 0.75));
    }
    Ok(curve)
}

pub fn final_mean(curve: &[f64], last: usize) -> f64 {
    let tail = &curve[curve.len().saturating_sub(last)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Area under a reward curve, one unit per episode.
pub fn auc(curve: &[f64]) -> f64 {
    curve.iter().sum()
}

/// Number of episodes until the curve first reaches `threshold`.
pub fn episodes_to_threshold(curve: &[f64], threshold: f64) -> Option<usize> {
    curve.iter().position(|&r| r >= threshold).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub framework: Framework,
    pub final20_mean: f64,
    pub auc: f64,
    pub episodes_to_threshold: Option<usize>,
    pub seeds: usize,
}

pub fn summarize(framework: Framework, curve: &AggregateCurve, threshold: f64) -> Summary {
    Summary {
        framework,
        final20_mean: final_mean(&curve.mean, 20),
        auc: auc(&curve.mean),
        episodes_to_threshold: episodes_to_threshold(&curve.mean, threshold),
        seeds: curve.count,
    }
}

/// Per-seed AUC comparison of two frameworks over the seeds both ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedWins {
    pub a: Framework,
    pub b: Framework,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
}

impl PairedWins {
    pub fn pairs(&self) -> usize {
        self.wins_a + self.wins_b + self.ties
    }
}

pub fn paired_auc(
    a: Framework,
    runs_a: &BTreeMap<u64, Vec<f64>>,
    b: Framework,
    runs_b: &BTreeMap<u64, Vec<f64>>,
) -> PairedWins {
    let mut out = PairedWins {
        a,
        b,
        wins_a: 0,
        wins_b: 0,
        ties: 0,
    };
    for (seed, ra) in runs_a {
        let Some(rb) = runs_b.get(seed) else { continue };
        let (x, y) = (auc(ra), auc(rb));
        if x > y {
            out.wins_a += 1;
        } else if y > x {
            out.wins_b += 1;
        } else {
            out.ties += 1;
        }
    }
    out
}
