use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use replay_lab::harness::{self, SuiteConfig};
use replay_lab::{selftest, Framework};

#[derive(Parser)]
#[command(name = "replay-lab", version, about = "Prioritized replay experiments on a small DQN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seed sweep and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed ordinals, overriding the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Frameworks to run, overriding the config's list.
        #[arg(long, value_delimiter = ',')]
        frameworks: Option<Vec<String>>,
        /// Concurrent runs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a results directory written by `run`.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 195.0)]
        threshold: f64,
    },
    /// Run the built-in property checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_summary(records: &[harness::RunRecord], threshold: f64) -> Result<()> {
    println!(
        "{:<8} {:>12} {:>12} {:>16} {:>6}",
        "framework", "final20", "auc", "to_threshold", "seeds"
    );
    for (_, _, s) in harness::analyze(records, threshold)? {
        let reach = s
            .episodes_to_threshold
            .map_or_else(|| "not reached".to_string(), |e| e.to_string());
        println!(
            "{:<8} {:>12.2} {:>12.1} {:>16} {:>6}",
            s.framework, s.final20_mean, s.auc, reach, s.seeds
        );
    }
    let paired = harness::paired_table(records);
    if !paired.is_empty() {
        println!();
        for p in paired {
            println!(
                "{} vs {}: {} / {} wins, {} ties over {} paired seeds",
                p.a,
                p.b,
                p.wins_a,
                p.wins_b,
                p.ties,
                p.pairs()
            );
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seeds,
            frameworks,
            jobs,
        } => {
            let suite = SuiteConfig::load(&config)?;
            let seeds = seeds.unwrap_or_else(|| suite.experiment.seeds.clone());
            let frameworks = match frameworks {
                Some(names) => names
                    .iter()
                    .map(|n| n.parse::<Framework>())
                    .collect::<Result<Vec<_>, _>>()?,
                None => suite.experiment.frameworks.clone(),
            };
            let jobs = jobs.unwrap_or(suite.experiment.jobs);
            let result = harness::run_suite(&suite, &seeds, &frameworks, jobs)?;
            harness::emit(&result.records, &result.failures, suite.experiment.threshold, &out)
                .with_context(|| format!("writing results to {}", out.display()))?;
            print_summary(&result.records, suite.experiment.threshold)?;
            if !result.failures.is_empty() {
                for f in &result.failures {
                    eprintln!("failed: {} seed {}: {}", f.framework, f.seed, f.message);
                }
                bail!("{} of {} runs failed", result.failures.len(), seeds.len() * frameworks.len());
            }
        }
        Command::Compare { input, threshold } => {
            let records = harness::read_records(&input)?;
            if records.is_empty() {
                bail!("no runs found in {}", input.display());
            }
            print_summary(&records, threshold)?;
        }
        Command::Selftest { seed } => {
            let report = selftest::run(seed);
            for check in &report {
                println!("{} {}", if check.passed { "PASS" } else { "FAIL" }, check.name);
                if let Some(detail) = &check.detail {
                    println!("     {detail}");
                }
            }
            let failed = report.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} self-test checks failed");
            }
        }
    }
    Ok(())
}
