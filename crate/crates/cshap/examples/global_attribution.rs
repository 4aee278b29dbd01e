//! Global attribution summary with the rule-based levels oracle: since the
//! oracle reads only the window mean, the Levels concept should dominate.
//!
//! ```bash
//! cargo run --release --example global_attribution
//! ```

use cshap::dataset::{select_background, window_at, split_policy, BackgroundFilter, SplitPolicy};
use cshap::decompose::DecomposeParams;
use cshap::explain::{aggregate_global, exact_shap, ClassSelector};
use cshap::model::make_levels_oracle;
use cshap::report::{global_summary_csv, render_global};
use cshap::signal::ConceptId;
use cshap::synth::{generate_corpus, SynthSpec};

fn main() -> cshap::Result<()> {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 6, 9)?;
    let outcome = split_policy(&traces, &SplitPolicy::default())?;
    let params = DecomposeParams::default();
    let w = 100;

    let background = select_background(
        &outcome.train,
        &BackgroundFilter { core_type: "big".into(), rounds: 1 },
        5,
        w,
        &params,
        9,
    )?;
    let oracle = make_levels_oracle(0.72, 0.84);

    let mut results = Vec::new();
    for phase in &outcome.test {
        for k in 0..10 {
            let window = window_at(phase, k * 150, w)?;
            results.push(exact_shap(&oracle, &window, &background, &params)?);
        }
    }

    let summary = aggregate_global(&results, ClassSelector::GroundTruth);
    let total: f64 = summary.mean_abs.iter().sum();
    println!("mean |attribution| over {} windows:", summary.windows.len());
    for concept in ConceptId::ALL {
        let share = 100.0 * summary.mean_abs[concept.index()] / total;
        println!(
            "  {:<8} {:.5}  ({share:.1}% of total mass)",
            concept.label(),
            summary.mean_abs[concept.index()]
        );
    }

    let dir = std::env::temp_dir();
    std::fs::write(dir.join("cshap_global.svg"), render_global(&summary))?;
    std::fs::write(dir.join("cshap_global.csv"), global_summary_csv(&summary))?;
    println!("chart: {}", dir.join("cshap_global.svg").display());
    Ok(())
}
