//! Seed sweeps over frameworks, aggregation, and CSV output.

mod emit;
mod file;
mod stats;

pub use emit::{emit, read_records, write_summary, OutputFiles};
pub use file::{AgentSection, ExperimentSection, SuiteConfig};
pub use stats::{
    aggregate, auc, episodes_to_threshold, final_mean, paired_auc, percentile, summarize, AggregateCurve,
    PairedWins, Summary,
};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::agent::{train, StepDiagnostic};
use crate::config::Framework;
use crate::error::{Error, Result};

/// RNG seed for one run: the first 8 bytes of
/// `SHA-256(config_seed ‖ framework name ‖ ordinal)`, little-endian.
/// Depends only on the triple, so reordering a sweep leaves every run intact.
pub fn derive_seed(config_seed: u64, framework: Framework, ordinal: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(config_seed.to_le_bytes());
    h.update(framework.name().as_bytes());
    h.update(ordinal.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment_id: String,
    pub framework: Framework,
    /// Seed ordinal; runs of different frameworks pair on it.
    pub seed: u64,
    pub rewards: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostic>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub framework: Framework,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

impl SuiteResult {
    pub fn by_framework(&self) -> BTreeMap<Framework, BTreeMap<u64, Vec<f64>>> {
        group_rewards(&self.records)
    }
}

pub fn group_rewards(records: &[RunRecord]) -> BTreeMap<Framework, BTreeMap<u64, Vec<f64>>> {
    let mut out: BTreeMap<Framework, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        out.entry(r.framework).or_default().insert(r.seed, r.rewards.clone());
    }
    out
}

/// Runs every (framework, seed) pair on up to `jobs` threads. A failed run
/// is recorded and the rest continue.
pub fn run_suite(suite: &SuiteConfig, seeds: &[u64], frameworks: &[Framework], jobs: usize) -> Result<SuiteResult> {
    suite.validate()?;
    let tasks: Vec<(Framework, u64)> = frameworks
        .iter()
        .flat_map(|&f| seeds.iter().map(move |&s| (f, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<std::result::Result<RunRecord, RunFailure>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(framework, seed)| {
                let config = suite.resolve(framework, derive_seed(suite.experiment.seed, framework, seed));
                let start = Instant::now();
                log::info!("{framework} seed {seed}: starting");
                match train(&config) {
                    Ok(out) => {
                        let secs = start.elapsed().as_secs_f64();
                        log::info!(
                            "{framework} seed {seed}: done in {secs:.1}s, final-20 mean {:.1}",
                            final_mean(&out.rewards, 20)
                        );
                        Ok(RunRecord {
                            experiment_id: suite.experiment.id.clone(),
                            framework,
                            seed,
                            rewards: out.rewards,
                            diagnostics: out.diagnostics,
                            wall_clock_secs: secs,
                        })
                    }
                    Err(e) => {
                        log::error!("{framework} seed {seed}: {e}");
                        Err(RunFailure {
                            framework,
                            seed,
                            message: e.to_string(),
                        })
                    }
                }
            })
            .collect()
    });
    let mut result = SuiteResult::default();
    for o in outcomes {
        match o {
            Ok(r) => result.records.push(r),
            Err(f) => result.failures.push(f),
        }
    }
    Ok(result)
}

/// Aggregate curves and summaries per framework.
pub fn analyze(records: &[RunRecord], threshold: f64) -> Result<Vec<(Framework, AggregateCurve, Summary)>> {
    let mut out = Vec::new();
    for (framework, runs) in group_rewards(records) {
        let refs: Vec<&[f64]> = runs.values().map(|r| r.as_slice()).collect();
        let curve = aggregate(&refs)?;
        let summary = summarize(framework, &curve, threshold);
        out.push((framework, curve, summary));
    }
    Ok(out)
}

/// Paired AUC comparison for every pair of frameworks present.
pub fn paired_table(records: &[RunRecord]) -> Vec<PairedWins> {
    let grouped = group_rewards(records);
    let names: Vec<Framework> = grouped.keys().copied().collect();
    let mut out = Vec::new();
    for (i, &a) in names.iter().enumerate() {
        for &b in &names[i + 1..] {
            out.push(paired_auc(a, &grouped[&a], b, &grouped[&b]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_part() {
        let base = derive_seed(1, Framework::Dalap, 0);
        assert_eq!(base, derive_seed(1, Framework::Dalap, 0));
        assert_ne!(base, derive_seed(2, Framework::Dalap, 0));
        assert_ne!(base, derive_seed(1, Framework::Per, 0));
        assert_ne!(base, derive_seed(1, Framework::Dalap, 1));
    }
}
