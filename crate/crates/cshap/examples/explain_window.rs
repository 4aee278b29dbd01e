//! Exact concept-Shapley attribution for a single window, cross-checked
//! against the permutation-enumeration oracle.
//!
//! ```bash
//! cargo run --release --example explain_window
//! ```

use cshap::dataset::{select_background, slide_windows, split_policy, SplitPolicy, WindowProfile};
use cshap::decompose::DecomposeParams;
use cshap::explain::{exact_shap, shap_permutation_oracle};
use cshap::model::{train_convnet, ConvNetConfig};
use cshap::signal::ConceptId;
use cshap::synth::{generate_corpus, SynthSpec};

fn main() -> cshap::Result<()> {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 6, 5)?;
    let outcome = split_policy(&traces, &SplitPolicy::default())?;
    let profile = WindowProfile { window_size: 100, shift: 10 };
    let params = DecomposeParams::default();

    let train: Vec<_> = outcome
        .train
        .iter()
        .flat_map(|p| slide_windows(&p.signal, &profile, p.meta.condition, &p.meta, &p.trace_id, p.phase_index))
        .collect();
    let cfg = ConvNetConfig { epochs: 6, seed: 2, ..ConvNetConfig::desk(100) };
    let (net, _) = train_convnet(&train, &cfg)?;

    let background = select_background(
        &outcome.train,
        &cshap::dataset::BackgroundFilter { core_type: "big".into(), rounds: 1 },
        5,
        profile.window_size,
        &params,
        5,
    )?;
    println!("background: {} decompositions from {} scenarios",
        background.len(),
        background.provenance.iter().map(|p| &p.scenario).collect::<std::collections::BTreeSet<_>>().len());

    let test_phase = &outcome.test[1];
    let window = slide_windows(
        &test_phase.signal,
        &profile,
        test_phase.meta.condition,
        &test_phase.meta,
        &test_phase.trace_id,
        test_phase.phase_index,
    )
    .into_iter()
    .nth(40)
    .expect("phase shorter than expected");

    let result = exact_shap(&net, &window, &background, &params)?;
    println!(
        "window {} (truth {}, predicted {}, {} model evaluations)",
        result.origin.id(),
        result.ground_truth,
        result.predicted_class,
        result.model_evals
    );
    let class = result.ground_truth.index();
    println!("base value: {:.4}", result.base_value[class]);
    for concept in ConceptId::ALL {
        println!("  {:<8} {:+.6}", concept.label(), result.phi[class][concept.index()]);
    }
    let total: f64 = result.phi[class].iter().sum();
    println!("sum of phi: {total:+.6} (= prediction - base, the efficiency identity)");

    let oracle = shap_permutation_oracle(&net, &window, &background, &params)?;
    let gap = result.phi[class]
        .iter()
        .zip(oracle.phi[class].iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("permutation-oracle gap: {gap:.2e} over all 120 orderings");
    Ok(())
}
