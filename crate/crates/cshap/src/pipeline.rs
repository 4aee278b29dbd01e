//! End-to-end pipeline stages behind the CLI: corpus synthesis, ingestion,
//! training, attribution, reporting, the window-size experiment, and the
//! self-verification suites.
//!
//! Every stage is deterministic for a fixed configuration and seed: rayon is
//! used only across independent windows with order-preserving collection,
//! and no artifact file embeds wall-clock state.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::changepoint::{exhaustive_segmentation, pelt_with_objective, CpdParams};
use crate::config::{write_provenance, RunConfig};
use crate::dataset::{
    build_manifest, collect_phases, load_background_cache, manifest_windows, parse_trace,
    read_manifest, select_background, slide_windows, split_policy, window_at,
    write_background_cache, write_manifest, write_trace, BackgroundKey, BackgroundSet, Manifest,
    PhaseEntry, Split, SplitPolicy, Trace, TraceFormat, WindowInstance, WindowProfile,
};
use crate::decompose::{decompose_seeded, stable_hash, write_components, DecomposeParams};
use crate::error::{Error, Result};
use crate::explain::{
    aggregate_global, compare_runs, exact_shap, shapley_from_table,
    shapley_from_table_by_permutations, write_attributions, AttributionResult, ClassSelector,
    ConceptDelta, GlobalSummary, RunComparison,
};
use crate::model::{
    evaluate, gradient_check, train_convnet, write_predictions, Classifier, ConvNet, EvalReport,
};
use crate::report::{
    global_summary_csv, histogram_csv, levels_histogram, render_global, render_histogram,
    render_local, stability_csv, stability_json, stability_report, LocalWindow, StabilityReport,
    StabilityRow,
};
use crate::signal::{ConceptId, Decomposition};
use crate::synth::generate_corpus_with_truth;

const PHASE_KIND: &str = "cycle-op";

fn write_text(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    std::fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

/// First `k` indices of `0..n`, spread evenly.
fn evenly_sample(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        (0..n).collect()
    } else {
        (0..k).map(|i| i * n / k).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub traces: usize,
    pub phases: usize,
    pub samples: usize,
}

/// Generates the synthetic corpus, exporting traces plus per-cycle ground
/// truth in the decomposition debug format.
pub fn run_synth(cfg: &RunConfig, out_dir: &Path) -> Result<SynthReport> {
    let spec = cfg.synth_spec();
    let (traces, truths) = generate_corpus_with_truth(
        &spec,
        cfg.synth.scenarios_per_class,
        cfg.synth.cycles_per_scenario,
        cfg.seed,
    )?;
    let trace_dir = out_dir.join("traces");
    let truth_dir = out_dir.join("truth");
    std::fs::create_dir_all(&truth_dir)?;
    for trace in &traces {
        write_trace(trace, &trace_dir, &TraceFormat::default())?;
    }
    for t in &truths {
        let trace = traces.iter().find(|tr| tr.id == t.trace_id).unwrap();
        let mark = &trace.phase_marks[t.phase_index];
        let phase_signal = trace.signal.slice(mark.start, mark.end);
        write_components(
            &truth_dir.join(format!("{}_{}.csv", t.trace_id, t.phase_index)),
            &phase_signal,
            &t.truth,
        )?;
    }
    write_provenance(out_dir, cfg, cfg.seed)?;
    Ok(SynthReport {
        traces: traces.len(),
        phases: truths.len(),
        samples: traces.iter().map(|t| t.signal.len()).sum(),
    })
}

/// Loads every trace (`*.csv` with a `.meta.json` sidecar) in a directory,
/// sorted by filename.
pub fn load_corpus(dir: &Path) -> Result<Vec<Trace>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no trace files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| parse_trace(p, &TraceFormat::default()))
        .collect()
}

/// Parses, windows and splits a corpus; emits the dataset manifest.
pub fn run_ingest(
    cfg: &RunConfig,
    corpus_dir: &Path,
    window_size: usize,
    out_dir: &Path,
) -> Result<Manifest> {
    let corpus = load_corpus(corpus_dir)?;
    let outcome = split_policy(&corpus, &SplitPolicy::default())?;
    let profile = WindowProfile {
        window_size,
        shift: cfg.windows.shift,
    };
    profile.validate()?;
    let manifest = build_manifest(&outcome, &profile, PHASE_KIND);
    std::fs::create_dir_all(out_dir)?;
    write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    write_provenance(out_dir, cfg, cfg.seed)?;
    Ok(manifest)
}

/// Trains the reference network per the manifest; emits checkpoint, metrics,
/// the loss curve, and test-set predictions in the external format.
pub fn run_train(
    cfg: &RunConfig,
    corpus_dir: &Path,
    manifest_path: &Path,
    out_dir: &Path,
) -> Result<EvalReport> {
    let corpus = load_corpus(corpus_dir)?;
    let manifest = read_manifest(manifest_path)?;
    let train_windows = manifest_windows(&corpus, &manifest, Split::Train)?;
    let test_windows = manifest_windows(&corpus, &manifest, Split::Test)?;
    let net_cfg = cfg.convnet_config(manifest.window_size, cfg.seed);
    let (net, losses) = train_convnet(&train_windows, &net_cfg)?;
    let report = evaluate(&net, &test_windows)?;

    std::fs::create_dir_all(out_dir)?;
    net.save_checkpoint(&out_dir.join("model.ckpt"))?;
    write_text(
        &out_dir.join("metrics.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    let mut curve = String::from("epoch,loss\n");
    for (e, l) in losses.iter().enumerate() {
        curve.push_str(&format!("{e},{l}\n"));
    }
    write_text(&out_dir.join("loss_curve.csv"), &curve)?;
    write_predictions(&out_dir.join("predictions.csv"), &net, &test_windows)?;
    write_provenance(out_dir, cfg, cfg.seed)?;
    Ok(report)
}

fn phases_for_split(corpus: &[Trace], manifest: &Manifest, split: Split) -> Vec<PhaseEntry> {
    let keys: std::collections::BTreeSet<(String, usize)> = manifest
        .entries
        .iter()
        .filter(|e| e.split == split)
        .map(|e| (e.trace.clone(), e.phase))
        .collect();
    collect_phases(corpus, &manifest.phase_kind)
        .into_iter()
        .filter(|p| keys.contains(&(p.trace_id.clone(), p.phase_index)))
        .collect()
}

fn background_for(
    cfg: &RunConfig,
    train_phases: &[PhaseEntry],
    window_size: usize,
    params: &DecomposeParams,
    seed: u64,
    cache_path: Option<&Path>,
) -> Result<BackgroundSet> {
    let key = BackgroundKey {
        seed,
        core_type: cfg.explain.core_type.clone(),
        rounds: cfg.explain.rounds,
        window_size,
        cycles_per_scenario: cfg.explain.cycles_per_scenario,
    };
    if let Some(path) = cache_path {
        if let Some(set) = load_background_cache(path, &key)? {
            return Ok(set);
        }
    }
    let set = select_background(
        train_phases,
        &cfg.background_filter(),
        cfg.explain.cycles_per_scenario,
        window_size,
        params,
        seed,
    )?;
    if let Some(path) = cache_path {
        write_background_cache(path, &key, &set)?;
    }
    Ok(set)
}

fn explain_windows(
    model: &dyn Classifier,
    windows: &[WindowInstance],
    background: &BackgroundSet,
    params: &DecomposeParams,
) -> Result<Vec<AttributionResult>> {
    windows
        .par_iter()
        .map(|w| exact_shap(model, w, background, params))
        .collect()
}

/// Versioned envelope for the global-summary JSON artifact.
#[derive(Serialize)]
struct SummaryFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    summary: &'a GlobalSummary,
}

fn summary_json(summary: &GlobalSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SummaryFile {
        schema_version: 1,
        summary,
    })?)
}

/// Explains a sample of test windows with the checkpointed model; emits the
/// attribution file, the background cache, and the global summary artifacts.
pub fn run_explain(
    cfg: &RunConfig,
    corpus_dir: &Path,
    manifest_path: &Path,
    checkpoint_path: &Path,
    out_dir: &Path,
) -> Result<GlobalSummary> {
    let corpus = load_corpus(corpus_dir)?;
    let manifest = read_manifest(manifest_path)?;
    let model = ConvNet::load_checkpoint(checkpoint_path)?;
    if model.window_size() != manifest.window_size {
        return Err(Error::Data(format!(
            "checkpoint expects windows of {}, manifest has {}",
            model.window_size(),
            manifest.window_size
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let params = cfg.decompose_params(cfg.seed);
    let train_phases = phases_for_split(&corpus, &manifest, Split::Train);
    let background = background_for(
        cfg,
        &train_phases,
        manifest.window_size,
        &params,
        cfg.seed,
        Some(&out_dir.join("background.json")),
    )?;

    let test_windows = manifest_windows(&corpus, &manifest, Split::Test)?;
    let sample: Vec<WindowInstance> = evenly_sample(test_windows.len(), cfg.explain.max_windows)
        .into_iter()
        .map(|i| test_windows[i].clone())
        .collect();
    let results = explain_windows(&model, &sample, &background, &params)?;

    write_attributions(&out_dir.join("attributions.csv"), &results)?;
    let summary = aggregate_global(&results, ClassSelector::GroundTruth);
    write_text(&out_dir.join("global.svg"), &render_global(&summary))?;
    write_text(&out_dir.join("global_summary.csv"), &global_summary_csv(&summary))?;
    write_text(&out_dir.join("summary.json"), &summary_json(&summary)?)?;
    write_provenance(out_dir, cfg, cfg.seed)?;
    Ok(summary)
}

/// Levels value per manifest window, via one decomposition per phase.
fn window_levels_values(
    corpus: &[Trace],
    manifest: &Manifest,
    split: Split,
    params: &DecomposeParams,
) -> Result<Vec<(crate::dataset::Condition, f64)>> {
    let phases = phases_for_split(corpus, manifest, split);
    let decomposed: Vec<(&PhaseEntry, Decomposition)> = phases
        .par_iter()
        .map(|p| {
            let salt = stable_hash(&format!("{}:{}", p.trace_id, p.phase_index));
            decompose_seeded(&p.signal, params, salt).map(|d| (p, d))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for entry in manifest.entries.iter().filter(|e| e.split == split) {
        if let Some((phase, d)) = decomposed
            .iter()
            .find(|(p, _)| p.trace_id == entry.trace && p.phase_index == entry.phase)
        {
            let slice = &d.levels[entry.offset..entry.offset + manifest.window_size];
            out.push((phase.meta.condition, crate::stats::mean(slice)));
        }
    }
    Ok(out)
}

/// Renders the report artifacts from an attribution file: global bars,
/// per-class Levels histograms (training data and misclassified windows),
/// and a local overlay for the phase with the most explained windows.
pub fn run_report(
    cfg: &RunConfig,
    corpus_dir: &Path,
    manifest_path: &Path,
    attributions_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    let corpus = load_corpus(corpus_dir)?;
    let manifest = read_manifest(manifest_path)?;
    let results = crate::explain::read_attributions(attributions_path)?;
    if results.is_empty() {
        return Err(Error::Data("attribution file holds no windows".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let params = cfg.decompose_params(cfg.seed);

    let summary = aggregate_global(&results, ClassSelector::GroundTruth);
    write_text(&out_dir.join("global.svg"), &render_global(&summary))?;
    write_text(&out_dir.join("global_summary.csv"), &global_summary_csv(&summary))?;

    let train_values = window_levels_values(&corpus, &manifest, Split::Train, &params)?;
    if !train_values.is_empty() {
        let hist = levels_histogram(&train_values, 40)?;
        write_text(&out_dir.join("train_levels_histogram.csv"), &histogram_csv(&hist))?;
        write_text(
            &out_dir.join("train_levels_histogram.svg"),
            &render_histogram(&hist, "Levels values, training windows"),
        )?;
    }

    // misclassified explained windows, by their phase decomposition
    let mis: Vec<&AttributionResult> =
        results.iter().filter(|r| r.predicted_class != r.ground_truth).collect();
    if !mis.is_empty() {
        let phases = phases_for_split(&corpus, &manifest, Split::Test);
        let mut values = Vec::new();
        for r in &mis {
            if let Some(phase) = phases
                .iter()
                .find(|p| p.trace_id == r.origin.trace && p.phase_index == r.origin.phase)
            {
                let salt = stable_hash(&format!("{}:{}", phase.trace_id, phase.phase_index));
                let d = decompose_seeded(&phase.signal, &params, salt)?;
                let slice = &d.levels[r.origin.offset..r.origin.offset + manifest.window_size];
                values.push((r.ground_truth, crate::stats::mean(slice)));
            }
        }
        if !values.is_empty() {
            let hist = levels_histogram(&values, 40)?;
            write_text(&out_dir.join("misclassified_levels_histogram.csv"), &histogram_csv(&hist))?;
            write_text(
                &out_dir.join("misclassified_levels_histogram.svg"),
                &render_histogram(&hist, "Levels values, misclassified windows"),
            )?;
        }
    }

    // densest explained phase becomes the local overlay
    let mut by_phase: std::collections::BTreeMap<(String, usize), Vec<&AttributionResult>> =
        Default::default();
    for r in &results {
        by_phase
            .entry((r.origin.trace.clone(), r.origin.phase))
            .or_default()
            .push(r);
    }
    let (key, rows) = by_phase
        .iter()
        .max_by_key(|(key, rows)| (rows.len(), std::cmp::Reverse((*key).clone())))
        .map(|(k, v)| (k.clone(), v.clone()))
        .unwrap();
    let phases = phases_for_split(&corpus, &manifest, Split::Test);
    if let Some(phase) = phases
        .iter()
        .find(|p| p.trace_id == key.0 && p.phase_index == key.1)
    {
        let salt = stable_hash(&format!("{}:{}", phase.trace_id, phase.phase_index));
        let d = decompose_seeded(&phase.signal, &params, salt)?;
        let mut windows: Vec<LocalWindow> = rows
            .iter()
            .map(|r| LocalWindow {
                offset: r.origin.offset,
                len: manifest.window_size,
                predicted: r.predicted_class,
                truth: r.ground_truth,
                phi: r.phi[r.ground_truth.index()],
            })
            .collect();
        windows.sort_by_key(|w| w.offset);
        write_text(
            &out_dir.join("local_overlay.svg"),
            &render_local(&phase.signal, &d, &windows, &ConceptId::ALL),
        )?;
        write_text(
            &out_dir.join("local_overlay_levels.svg"),
            &render_local(&phase.signal, &d, &windows, &[ConceptId::Levels]),
        )?;
    }
    write_provenance(out_dir, cfg, cfg.seed)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeOutcome {
    pub window_size: usize,
    pub per_seed_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Pooled over all seeds' explained windows.
    pub pooled_mean_abs: [f64; 5],
    pub pooled_std_abs: [f64; 5],
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub sizes: Vec<SizeOutcome>,
    /// `compare_runs(smallest, largest)` per seed.
    pub per_seed_delta: Vec<RunComparison>,
    /// Mean over seeds of the per-seed mean difference, per concept.
    pub mean_delta: [f64; 5],
    pub stability: StabilityReport,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ExperimentOutcome {
    pub fn mean_levels_delta(&self) -> f64 {
        self.mean_delta[ConceptId::Levels.index()]
    }

    pub fn accuracy_for(&self, window_size: usize) -> Option<f64> {
        self.sizes
            .iter()
            .find(|s| s.window_size == window_size)
            .map(|s| s.mean_accuracy)
    }
}

/// The full diagnose-and-remeasure loop: for each seed, generate the overlap
/// corpus, train one model per window size, attribute a fixed set of
/// origin-aligned test windows at every size, and compare the smallest
/// against the largest size.
pub fn run_window_size_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let started = Instant::now();
    let mut sizes: Vec<usize> = cfg.windows.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::Config("experiment needs at least one window size".into()));
    }
    if cfg.experiment.seeds.is_empty() {
        return Err(Error::Config("experiment needs at least one seed".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let max_w = *sizes.last().unwrap();
    let smallest = sizes[0];

    // accuracies[size][seed], results[size][seed]
    let mut accuracies: Vec<Vec<f64>> = vec![Vec::new(); sizes.len()];
    let mut all_results: Vec<Vec<Vec<AttributionResult>>> = vec![Vec::new(); sizes.len()];
    let mut summaries: Vec<Vec<GlobalSummary>> = vec![Vec::new(); sizes.len()];

    for &seed in &cfg.experiment.seeds {
        let spec = cfg.synth_spec();
        let (corpus, _) = generate_corpus_with_truth(
            &spec,
            cfg.synth.scenarios_per_class,
            cfg.synth.cycles_per_scenario,
            seed,
        )?;
        let split = split_policy(&corpus, &SplitPolicy::default())?;
        let params = cfg.decompose_params(seed);

        // explained origins valid at every size, fixed across sizes
        let mut origins: Vec<(usize, usize)> = Vec::new();
        for (pi, phase) in split.test.iter().enumerate() {
            let mut offset = 0;
            while offset + max_w <= phase.signal.len() {
                origins.push((pi, offset));
                offset += cfg.windows.shift;
            }
        }
        if origins.is_empty() {
            return Err(Error::Data(format!(
                "no test phase is long enough for window size {max_w}"
            )));
        }
        let chosen = evenly_sample(origins.len(), cfg.explain.max_windows);

        for (si, &window_size) in sizes.iter().enumerate() {
            let profile = WindowProfile {
                window_size,
                shift: cfg.windows.shift,
            };
            let collect = |phases: &[PhaseEntry]| -> Vec<WindowInstance> {
                phases
                    .iter()
                    .flat_map(|p| {
                        slide_windows(
                            &p.signal,
                            &profile,
                            p.meta.condition,
                            &p.meta,
                            &p.trace_id,
                            p.phase_index,
                        )
                    })
                    .collect()
            };
            let train_windows = collect(&split.train);
            let test_windows = collect(&split.test);
            log::info!(
                "seed {seed} W={window_size}: {} train / {} test windows",
                train_windows.len(),
                test_windows.len()
            );

            let net_cfg = cfg.convnet_config(window_size, seed);
            let (net, _) = train_convnet(&train_windows, &net_cfg)?;
            let eval = evaluate(&net, &test_windows)?;
            accuracies[si].push(eval.metrics.accuracy);
            log::info!("seed {seed} W={window_size}: accuracy {:.4}", eval.metrics.accuracy);

            let background = background_for(cfg, &split.train, window_size, &params, seed, None)?;
            let sample: Vec<WindowInstance> = chosen
                .iter()
                .map(|&i| {
                    let (pi, offset) = origins[i];
                    window_at(&split.test[pi], offset, window_size)
                })
                .collect::<Result<_>>()?;
            let results = explain_windows(&net, &sample, &background, &params)?;
            summaries[si].push(aggregate_global(&results, ClassSelector::GroundTruth));
            all_results[si].push(results);
        }
    }

    let n_seeds = cfg.experiment.seeds.len();
    let small_idx = 0;
    let large_idx = sizes.iter().position(|&w| w == max_w).unwrap();
    let per_seed_delta: Vec<RunComparison> = (0..n_seeds)
        .map(|k| compare_runs(&summaries[small_idx][k], &summaries[large_idx][k]))
        .collect();
    let mut mean_delta = [0.0; 5];
    for delta in &per_seed_delta {
        for c in 0..5 {
            mean_delta[c] += delta.per_concept[c].mean;
        }
    }
    for m in mean_delta.iter_mut() {
        *m /= n_seeds as f64;
    }

    let mut size_outcomes = Vec::new();
    let mut stability_rows = Vec::new();
    for (si, &window_size) in sizes.iter().enumerate() {
        let pooled: Vec<AttributionResult> =
            all_results[si].iter().flatten().cloned().collect();
        let pooled_summary = aggregate_global(&pooled, ClassSelector::GroundTruth);
        let mean_accuracy =
            accuracies[si].iter().sum::<f64>() / accuracies[si].len() as f64;
        stability_rows.push(StabilityRow {
            window_size,
            accuracy: mean_accuracy,
            levels_mean_abs: pooled_summary.mean_abs[ConceptId::Levels.index()],
            levels_std_abs: pooled_summary.std_abs[ConceptId::Levels.index()],
        });
        write_text(
            &out_dir.join(format!("global_w{window_size}.svg")),
            &render_global(&pooled_summary),
        )?;
        write_text(
            &out_dir.join(format!("shap_summary_w{window_size}.csv")),
            &global_summary_csv(&pooled_summary),
        )?;
        size_outcomes.push(SizeOutcome {
            window_size,
            per_seed_accuracy: accuracies[si].clone(),
            mean_accuracy,
            pooled_mean_abs: pooled_summary.mean_abs,
            pooled_std_abs: pooled_summary.std_abs,
        });
    }
    let stability = stability_report(&stability_rows);

    let mut acc_csv = String::from("window_size,seed,accuracy\n");
    for (si, &window_size) in sizes.iter().enumerate() {
        for (k, &seed) in cfg.experiment.seeds.iter().enumerate() {
            acc_csv.push_str(&format!("{window_size},{seed},{}\n", accuracies[si][k]));
        }
    }
    write_text(&out_dir.join("accuracies.csv"), &acc_csv)?;

    let mut delta_csv =
        format!("concept,{}_to_{}_mean_diff,mean_of_per_seed_std\n", smallest, max_w);
    for concept in ConceptId::ALL {
        let c = concept.index();
        let std_mean: f64 = per_seed_delta
            .iter()
            .map(|d| d.per_concept[c].std)
            .sum::<f64>()
            / n_seeds as f64;
        delta_csv.push_str(&format!("{},{},{}\n", concept.label(), mean_delta[c], std_mean));
    }
    write_text(&out_dir.join("shap_delta.csv"), &delta_csv)?;

    let mut delta_seed_csv = String::from("seed,concept,mean_diff,std_diff\n");
    for (k, &seed) in cfg.experiment.seeds.iter().enumerate() {
        for concept in ConceptId::ALL {
            let d: ConceptDelta = per_seed_delta[k].per_concept[concept.index()];
            delta_seed_csv.push_str(&format!("{seed},{},{},{}\n", concept.label(), d.mean, d.std));
        }
    }
    write_text(&out_dir.join("shap_delta_per_seed.csv"), &delta_seed_csv)?;

    write_text(&out_dir.join("stability.csv"), &stability_csv(&stability))?;
    write_text(&out_dir.join("stability.json"), &stability_json(&stability)?)?;

    let outcome = ExperimentOutcome {
        schema_version: 1,
        seeds: cfg.experiment.seeds.clone(),
        sizes: size_outcomes,
        per_seed_delta,
        mean_delta,
        stability,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_text(
        &out_dir.join("experiment_summary.json"),
        &serde_json::to_string_pretty(&outcome)?,
    )?;
    write_provenance(out_dir, cfg, cfg.seed)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySuite {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<VerifySuite>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

fn random_coalition_table(rng: &mut ChaCha8Rng) -> [[f64; 3]; 32] {
    let mut table = [[0.0; 3]; 32];
    for row in table.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    table
}

fn verify_shapley_axioms() -> VerifySuite {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0A1);
    let mut worst: f64 = 0.0;
    let mut passed = true;

    // exact weights vs permutation enumeration, plus per-class efficiency
    for _ in 0..20 {
        let table = random_coalition_table(&mut rng);
        let a = shapley_from_table(&table);
        let b = shapley_from_table_by_permutations(&table);
        for class in 0..3 {
            for concept in 0..5 {
                worst = worst.max((a[class][concept] - b[class][concept]).abs());
            }
            let total: f64 = a[class].iter().sum();
            let expected = table[31][class] - table[0][class];
            worst = worst.max((total - expected).abs());
        }
    }
    passed &= worst <= 1e-9;

    // dummy: a constant game attributes nothing
    let constant = [[0.4, 0.1, 0.5]; 32];
    let phi = shapley_from_table(&constant);
    let dummy_worst = phi
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    passed &= dummy_worst <= 1e-12;

    // linearity and symmetry on an additive game
    let weights = [0.25, -0.5, 0.1, 0.25, 0.0];
    let mut additive = [[0.0; 3]; 32];
    for (mask, row) in additive.iter_mut().enumerate() {
        let total: f64 = (0..5)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| weights[i])
            .sum();
        *row = [total; 3];
    }
    let phi = shapley_from_table_by_permutations(&additive);
    let mut axiom_worst: f64 = 0.0;
    for concept in 0..5 {
        axiom_worst = axiom_worst.max((phi[0][concept] - weights[concept]).abs());
    }
    axiom_worst = axiom_worst.max((phi[0][0] - phi[0][3]).abs());
    passed &= axiom_worst <= 1e-9;

    VerifySuite {
        name: "shapley-axioms".into(),
        passed,
        details: format!(
            "oracle/efficiency err {worst:.2e}, dummy err {dummy_worst:.2e}, additive err {axiom_worst:.2e}"
        ),
    }
}

fn verify_pelt_against_exhaustive() -> VerifySuite {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E17);
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for _ in 0..50 {
        let n_segments = rng.random_range(1..5usize);
        let noise = Normal::new(0.0, rng.random_range(0.05..0.5)).unwrap();
        let mut x = Vec::new();
        for _ in 0..n_segments {
            let level = rng.random_range(-3.0..3.0);
            let len = rng.random_range(100..500usize);
            for _ in 0..len {
                x.push(level + noise.sample(&mut rng));
            }
        }
        let p = CpdParams {
            subsample: 10,
            penalty: rng.random_range(5.0..100.0),
            ..CpdParams::default()
        };
        match (pelt_with_objective(&x, &p), exhaustive_segmentation(&x, &p)) {
            (Ok((_, fast)), Ok((_, slow))) => {
                worst = worst.max((fast - slow).abs());
            }
            _ => passed = false,
        }
    }
    passed &= worst <= 1e-9;
    VerifySuite {
        name: "pelt-exhaustive-dp".into(),
        passed,
        details: format!("objective gap over 50 random signals: {worst:.2e}"),
    }
}

fn verify_gradients(cfg: &RunConfig) -> VerifySuite {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for seed in 1..=5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let windows: Vec<WindowInstance> = (0..4)
            .map(|k| {
                let values: Vec<f64> = (0..32).map(|_| 0.6 + noise.sample(&mut rng)).collect();
                WindowInstance {
                    time_channel: (0..32).map(|i| i as f64 * 1e-3).collect(),
                    metric_channel: values,
                    label: crate::dataset::Condition::ALL[k % 3],
                    scenario: crate::dataset::ScenarioMeta {
                        workload: "verify".into(),
                        core_type: "big".into(),
                        condition: crate::dataset::Condition::ALL[k % 3],
                        rounds: 1,
                    },
                    origin: crate::dataset::WindowOrigin {
                        trace: "verify".into(),
                        phase: 0,
                        offset: k,
                    },
                }
            })
            .collect();
        let net_cfg = crate::model::ConvNetConfig {
            seed,
            ..cfg.convnet_config(32, seed)
        };
        match gradient_check(&net_cfg, &windows, 6, 1e-3) {
            Ok(rel) => worst = worst.max(rel),
            Err(_) => passed = false,
        }
    }
    passed &= worst < 1e-4;
    VerifySuite {
        name: "gradient-check".into(),
        passed,
        details: format!("max relative error over 5 seeds: {worst:.2e}"),
    }
}

/// Runs the oracle suites: Shapley axioms, PELT against the unpruned DP, and
/// the backprop gradient check.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let report = VerifyReport {
        suites: vec![
            verify_shapley_axioms(),
            verify_pelt_against_exhaustive(),
            verify_gradients(cfg),
        ],
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evenly_sample_covers_and_orders() {
        assert_eq!(evenly_sample(3, 10), vec![0, 1, 2]);
        let s = evenly_sample(100, 10);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s[0], 0);
    }

    #[test]
    fn verify_suites_pass() {
        let report = run_verify(&RunConfig::default()).unwrap();
        for suite in &report.suites {
            assert!(suite.passed, "{}: {}", suite.name, suite.details);
        }
        assert!(report.all_passed());
    }
}
