//! Miniature run of the window-size loop: train at several window sizes,
//! attribute the same test windows at each size, and compare.
//!
//! The full-scale run lives behind `cshap experiment window-size`; this
//! example uses a reduced corpus so it finishes in about a minute.
//!
//! ```bash
//! cargo run --release --example window_size_experiment
//! ```

use cshap::config::{ExperimentSection, ModelSection, RunConfig, SynthSection, WindowSection};
use cshap::pipeline::run_window_size_experiment;
use cshap::report::stability_table;
use cshap::signal::ConceptId;

fn main() -> cshap::Result<()> {
    let cfg = RunConfig {
        seed: 1,
        synth: SynthSection {
            scenarios_per_class: 1,
            cycles_per_scenario: 6,
            overlap: 0.5,
        },
        windows: WindowSection {
            sizes: vec![100, 400],
            shift: 10,
        },
        model: ModelSection {
            epochs: 6,
            ..Default::default()
        },
        experiment: ExperimentSection { seeds: vec![1, 2] },
        ..Default::default()
    };

    let out = std::env::temp_dir().join("cshap_window_size_example");
    let outcome = run_window_size_experiment(&cfg, &out)?;

    for size in &outcome.sizes {
        println!("W={:<4} mean test accuracy {:.4}", size.window_size, size.mean_accuracy);
    }
    println!("\nattribution change, W=100 -> W=400 (per-window differences):");
    for concept in ConceptId::ALL {
        println!("  {:<8} {:+.5}", concept.label(), outcome.mean_delta[concept.index()]);
    }
    println!();
    print!("{}", stability_table(&outcome.stability));
    println!("\nartifacts in {}", out.display());
    Ok(())
}
