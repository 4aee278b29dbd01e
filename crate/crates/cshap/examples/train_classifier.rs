//! Train the reference 1-D conv net on a synthetic corpus and evaluate it
//! on the held-out phases.
//!
//! ```bash
//! cargo run --release --example train_classifier
//! ```

use cshap::dataset::{slide_windows, split_policy, Condition, SplitPolicy, WindowProfile};
use cshap::model::{evaluate, train_convnet, ConvNetConfig};
use cshap::synth::{generate_corpus, SynthSpec};

fn main() -> cshap::Result<()> {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 6, 3)?;
    let outcome = split_policy(&traces, &SplitPolicy::default())?;
    let profile = WindowProfile { window_size: 100, shift: 10 };

    let windows = |phases: &[cshap::dataset::PhaseEntry]| -> Vec<_> {
        phases
            .iter()
            .flat_map(|p| {
                slide_windows(&p.signal, &profile, p.meta.condition, &p.meta, &p.trace_id, p.phase_index)
            })
            .collect()
    };
    let train = windows(&outcome.train);
    let test = windows(&outcome.test);
    println!("{} training windows, {} test windows", train.len(), test.len());

    let cfg = ConvNetConfig {
        epochs: 8,
        seed: 1,
        ..ConvNetConfig::desk(profile.window_size)
    };
    let (net, losses) = train_convnet(&train, &cfg)?;
    println!("loss: {:.4} -> {:.4}", losses.first().unwrap(), losses.last().unwrap());

    let report = evaluate(&net, &test)?;
    println!("test accuracy: {:.4}", report.metrics.accuracy);
    println!("confusion (rows = truth):");
    for class in Condition::ALL {
        println!("  {:<10} {:?}", class.label(), report.metrics.confusion[class.index()]);
    }
    println!(
        "misclassified: {} of {} (mostly Normal vs NoFan on the shared levels)",
        report.misclassified.len(),
        test.len()
    );
    Ok(())
}
