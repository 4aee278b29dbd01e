use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use cshap::config::RunConfig;
use cshap::dataset::Condition;
use cshap::error::Error;
use cshap::pipeline;
use cshap::report::stability_table;
use cshap::signal::ConceptId;

#[derive(Parser)]
#[command(name = "cshap", version, about = "Concept-level exact Shapley attribution for time-series classifiers")]
struct Cli {
    /// Run configuration file (TOML); built-in defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus with per-cycle ground truth
    Synth {
        #[arg(long, default_value = "runs/synth")]
        out: PathBuf,
    },
    /// Parse traces, window and split them; emit the dataset manifest
    Ingest {
        /// Directory of trace files with metadata sidecars
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        window_size: usize,
        #[arg(long, default_value = "runs/ingest")]
        out: PathBuf,
    },
    /// Train the reference classifier; emit checkpoint and metrics
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Attribute test windows to concepts by exact coalition enumeration
    Explain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "runs/explain")]
        out: PathBuf,
    },
    /// Render report artifacts from an attribution file
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        attributions: PathBuf,
        #[arg(long, default_value = "runs/report")]
        out: PathBuf,
    },
    /// Multi-run experiments
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Run the oracle suites: Shapley axioms, PELT vs exhaustive DP,
    /// gradient checks
    Verify,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Train and explain across window sizes; emit accuracies, attribution
    /// deltas and the stability report
    WindowSize {
        #[arg(long, default_value = "runs/window-size")]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Verification(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    match cli.command {
        Command::Synth { out } => {
            let report = pipeline::run_synth(&cfg, &out)?;
            println!(
                "wrote {} traces ({} cycle-op phases, {} samples) to {}",
                report.traces,
                report.phases,
                report.samples,
                out.display()
            );
        }
        Command::Ingest { corpus, window_size, out } => {
            let manifest = pipeline::run_ingest(&cfg, &corpus, window_size, &out)?;
            println!(
                "manifest: window_size={} shift={} -> {}",
                manifest.window_size,
                manifest.shift,
                out.join("manifest.json").display()
            );
            for class in Condition::ALL {
                println!(
                    "  {:<10} train {:>7} windows, test {:>6} windows",
                    class.label(),
                    manifest.train_windows[class.index()],
                    manifest.test_windows[class.index()]
                );
            }
        }
        Command::Train { corpus, manifest, out } => {
            let report = pipeline::run_train(&cfg, &corpus, &manifest, &out)?;
            println!("test accuracy: {:.4}", report.metrics.accuracy);
            println!("confusion (rows = truth):");
            for class in Condition::ALL {
                println!(
                    "  {:<10} {:?}",
                    class.label(),
                    report.metrics.confusion[class.index()]
                );
            }
            println!("checkpoint: {}", out.join("model.ckpt").display());
        }
        Command::Explain { corpus, manifest, checkpoint, out } => {
            let summary = pipeline::run_explain(&cfg, &corpus, &manifest, &checkpoint, &out)?;
            println!("mean |attribution| per concept ({} windows):", summary.windows.len());
            for concept in ConceptId::ALL {
                println!(
                    "  {:<8} {:.6} (std {:.6})",
                    concept.label(),
                    summary.mean_abs[concept.index()],
                    summary.std_abs[concept.index()]
                );
            }
            println!("attributions: {}", out.join("attributions.csv").display());
        }
        Command::Report { corpus, manifest, attributions, out } => {
            pipeline::run_report(&cfg, &corpus, &manifest, &attributions, &out)?;
            println!("report artifacts written to {}", out.display());
        }
        Command::Experiment(ExperimentCommand::WindowSize { out }) => {
            let outcome = pipeline::run_window_size_experiment(&cfg, &out)?;
            for size in &outcome.sizes {
                println!(
                    "W={:<5} mean accuracy {:.4} (per seed: {})",
                    size.window_size,
                    size.mean_accuracy,
                    size.per_seed_accuracy
                        .iter()
                        .map(|a| format!("{a:.4}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            println!("attribution delta, smallest -> largest window:");
            for concept in ConceptId::ALL {
                println!(
                    "  {:<8} {:+.6}",
                    concept.label(),
                    outcome.mean_delta[concept.index()]
                );
            }
            print!("{}", stability_table(&outcome.stability));
            println!(
                "completed in {:.1}s; artifacts in {}",
                outcome.wall_seconds,
                out.display()
            );
        }
        Command::Verify => {
            let report = pipeline::run_verify(&cfg)?;
            for suite in &report.suites {
                println!(
                    "{}: {} ({})",
                    suite.name,
                    if suite.passed { "PASS" } else { "FAIL" },
                    suite.details
                );
            }
            if !report.all_passed() {
                return Err(Error::Verification("one or more oracle suites failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("cshap=info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
