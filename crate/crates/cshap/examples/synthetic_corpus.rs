//! Generate a labelled corpus of monitoring traces and split it into
//! training and test phases.
//!
//! ```bash
//! cargo run --example synthetic_corpus
//! ```

use cshap::dataset::{split_policy, SplitPolicy, WindowProfile};
use cshap::synth::{generate_corpus, SynthSpec};

fn main() -> cshap::Result<()> {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 8, 42)?;
    println!("{} traces:", traces.len());
    for t in &traces {
        println!(
            "  {:<28} {:>6} samples, {} cycle-op phases",
            t.id,
            t.signal.len(),
            t.phase_marks.len()
        );
    }

    let outcome = split_policy(&traces, &SplitPolicy::default())?;
    println!(
        "split: {} train phases, {} test phases (two per designated scenario)",
        outcome.train.len(),
        outcome.test.len()
    );
    println!("train phases per class: {:?}", outcome.balance.train_phases);
    println!("test phases per class:  {:?}", outcome.balance.test_phases);

    let profile = WindowProfile { window_size: 100, shift: 10 };
    let train_windows: usize = outcome.train.iter().map(|p| profile.count(p.signal.len())).sum();
    let test_windows: usize = outcome.test.iter().map(|p| profile.count(p.signal.len())).sum();
    println!("window profile {profile:?}: {train_windows} train / {test_windows} test instances");
    Ok(())
}
