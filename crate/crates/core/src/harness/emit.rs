//! Output directory layout.
//!
//! | file               | columns                                                   |
//! |--------------------|-----------------------------------------------------------|
//! | `runs.csv`         | experiment_id, framework, seed, episode, reward           |
//! | `diag.csv`         | experiment_id, framework, seed, step, beta, delta_i, rho  |
//! | `summary.csv`      | framework, final20_mean, auc, episodes_to_threshold, seeds |
//! | `paired.csv`       | framework_a, framework_b, wins_a, wins_b, ties            |
//! | `curves.csv`       | framework, episode, mean, band_low, band_high             |
//! | `curves.spec.txt`  | column roles for plotting `curves.csv`                    |
//! | `metadata.json`    | wall-clock times and failed runs                          |
//!
//! Everything except `metadata.json` is a pure function of the config.
//! Floats are written in shortest round-trip form, so parsing them back is
//! lossless.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{analyze, paired_table, RunFailure, RunRecord, Summary};
use crate::agent::StepDiagnostic;
use crate::config::Framework;
use crate::error::{Error, Result};

const CURVE_SPEC: &str = "\
file: curves.csv
x: episode
y: mean
band: band_low, band_high
group: framework
";

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    experiment_id: String,
    framework: Framework,
    seed: u64,
    episode: u64,
    reward: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagRow {
    experiment_id: String,
    framework: Framework,
    seed: u64,
    step: u64,
    beta: Option<f64>,
    delta_i: Option<f64>,
    rho: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    framework: Framework,
    final20_mean: f64,
    auc: f64,
    episodes_to_threshold: String,
    seeds: usize,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    framework: Framework,
    episode: usize,
    mean: f64,
    band_low: f64,
    band_high: f64,
}

#[derive(Debug, Serialize)]
struct PairedRow {
    framework_a: Framework,
    framework_b: Framework,
    wins_a: usize,
    wins_b: usize,
    ties: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunTiming {
    framework: Framework,
    seed: u64,
    wall_clock_secs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FailureEntry {
    framework: Framework,
    seed: u64,
    message: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    runs: Vec<RunTiming>,
    failures: Vec<FailureEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub runs: PathBuf,
    pub diag: PathBuf,
    pub summary: PathBuf,
    pub paired: PathBuf,
    pub curves: PathBuf,
    pub curve_spec: PathBuf,
    pub metadata: PathBuf,
}

impl OutputFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            runs: dir.join("runs.csv"),
            diag: dir.join("diag.csv"),
            summary: dir.join("summary.csv"),
            paired: dir.join("paired.csv"),
            curves: dir.join("curves.csv"),
            curve_spec: dir.join("curves.spec.txt"),
            metadata: dir.join("metadata.json"),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a header (even for zero rows) followed by the rows.
fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn write_summary(path: &Path, summaries: &[Summary]) -> Result<()> {
    write_csv(
        path,
        &["framework", "final20_mean", "auc", "episodes_to_threshold", "seeds"],
        summaries.iter().map(|s| SummaryRow {
            framework: s.framework,
            final20_mean: s.final20_mean,
            auc: s.auc,
            episodes_to_threshold: s
                .episodes_to_threshold
                .map_or_else(|| "not reached".to_string(), |e| e.to_string()),
            seeds: s.seeds,
        }),
    )
}

/// Writes every output file into `dir`, creating it if needed.
pub fn emit(records: &[RunRecord], failures: &[RunFailure], threshold: f64, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = OutputFiles::in_dir(dir);

    write_csv(
        &files.runs,
        &["experiment_id", "framework", "seed", "episode", "reward"],
        records.iter().flat_map(|r| {
            r.rewards.iter().enumerate().map(|(e, &reward)| RunRow {
                experiment_id: r.experiment_id.clone(),
                framework: r.framework,
                seed: r.seed,
                episode: e as u64,
                reward,
            })
        }),
    )?;
    write_csv(
        &files.diag,
        &["experiment_id", "framework", "seed", "step", "beta", "delta_i", "rho"],
        records.iter().flat_map(|r| {
            r.diagnostics.iter().map(|d| DiagRow {
                experiment_id: r.experiment_id.clone(),
                framework: r.framework,
                seed: r.seed,
                step: d.step,
                beta: d.beta,
                delta_i: d.delta_i,
                rho: d.rho,
            })
        }),
    )?;

    let analysis = analyze(records, threshold)?;
    let summaries: Vec<Summary> = analysis.iter().map(|(_, _, s)| s.clone()).collect();
    write_summary(&files.summary, &summaries)?;
    write_csv(
        &files.curves,
        &["framework", "episode", "mean", "band_low", "band_high"],
        analysis.iter().flat_map(|(f, c, _)| {
            (0..c.len()).map(move |e| CurveRow {
                framework: *f,
                episode: e,
                mean: c.mean[e],
                band_low: c.band_low[e],
                band_high: c.band_high[e],
            })
        }),
    )?;
    write_csv(
        &files.paired,
        &["framework_a", "framework_b", "wins_a", "wins_b", "ties"],
        paired_table(records).into_iter().map(|p| PairedRow {
            framework_a: p.a,
            framework_b: p.b,
            wins_a: p.wins_a,
            wins_b: p.wins_b,
            ties: p.ties,
        }),
    )?;
    std::fs::write(&files.curve_spec, CURVE_SPEC).map_err(io_err(&files.curve_spec))?;

    let meta = Metadata {
        runs: records
            .iter()
            .map(|r| RunTiming {
                framework: r.framework,
                seed: r.seed,
                wall_clock_secs: r.wall_clock_secs,
            })
            .collect(),
        failures: failures
            .iter()
            .map(|f| FailureEntry {
                framework: f.framework,
                seed: f.seed,
                message: f.message.clone(),
            })
            .collect(),
    };
    let mut file = File::create(&files.metadata).map_err(io_err(&files.metadata))?;
    serde_json::to_writer_pretty(&mut file, &meta)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", files.metadata.display())))?;
    writeln!(file).map_err(io_err(&files.metadata))?;
    Ok(files)
}

/// Parses `runs.csv`, `diag.csv` and, when present, `metadata.json` back
/// into records, in file order.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let files = OutputFiles::in_dir(dir);
    let mut records: Vec<RunRecord> = Vec::new();
    let mut index: BTreeMap<(Framework, u64), usize> = BTreeMap::new();
    for row in read_csv::<RunRow>(&files.runs)? {
        let i = *index.entry((row.framework, row.seed)).or_insert_with(|| {
            records.push(RunRecord {
                experiment_id: row.experiment_id.clone(),
                framework: row.framework,
                seed: row.seed,
                rewards: Vec::new(),
                diagnostics: Vec::new(),
                wall_clock_secs: 0.0,
            });
            records.len() - 1
        });
        if row.episode as usize != records[i].rewards.len() {
            return Err(Error::Invalid(format!(
                "{}: {} seed {} episode {} out of order",
                files.runs.display(),
                row.framework,
                row.seed,
                row.episode
            )));
        }
        records[i].rewards.push(row.reward);
    }
    if files.diag.exists() {
        for row in read_csv::<DiagRow>(&files.diag)? {
            let i = *index.get(&(row.framework, row.seed)).ok_or_else(|| {
                Error::Invalid(format!(
                    "{}: diagnostics for {} seed {} without a reward trace",
                    files.diag.display(),
                    row.framework,
                    row.seed
                ))
            })?;
            records[i].diagnostics.push(StepDiagnostic {
                step: row.step,
                beta: row.beta,
                delta_i: row.delta_i,
                rho: row.rho,
            });
        }
    }
    if files.metadata.exists() {
        let text = std::fs::read_to_string(&files.metadata).map_err(io_err(&files.metadata))?;
        let meta: Metadata = serde_json::from_str(&text)
            .map_err(|e| Error::Invalid(format!("cannot parse {}: {e}", files.metadata.display())))?;
        for t in meta.runs {
            if let Some(&i) = index.get(&(t.framework, t.seed)) {
                records[i].wall_clock_secs = t.wall_clock_secs;
            }
        }
    }
    Ok(records)
}
