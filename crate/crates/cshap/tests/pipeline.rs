//! End-to-end pipeline tests over the synthetic corpus: every stage wired
//! together the way the CLI drives them.

use std::path::PathBuf;

use cshap::config::{ExperimentSection, ModelSection, RunConfig, SynthSection, WindowSection};
use cshap::dataset::{
    select_background, slide_windows, split_policy, window_at, BackgroundFilter, Condition,
    Split, SplitPolicy, WindowProfile,
};
use cshap::decompose::DecomposeParams;
use cshap::explain::{aggregate_global, exact_shap, ClassSelector};
use cshap::model::{
    evaluate, load_external_predictions, make_levels_oracle, train_convnet, write_predictions,
    ConvNetConfig,
};
use cshap::pipeline::{
    load_corpus, run_explain, run_ingest, run_report, run_synth, run_train,
};
use cshap::report::{levels_histogram, window_levels_value};
use cshap::synth::{generate_corpus, generate_corpus_with_truth, SynthSpec};

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cshap_it_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn mini_config() -> RunConfig {
    RunConfig {
        seed: 5,
        synth: SynthSection {
            scenarios_per_class: 1,
            cycles_per_scenario: 4,
            overlap: 0.5,
        },
        windows: WindowSection {
            sizes: vec![100],
            shift: 20,
        },
        model: ModelSection {
            epochs: 3,
            batch_size: 32,
            ..Default::default()
        },
        experiment: ExperimentSection { seeds: vec![1] },
        ..Default::default()
    }
}

#[test]
fn full_stage_chain_produces_consistent_artifacts() {
    let cfg = mini_config();
    let root = temp_dir("chain");

    let synth = run_synth(&cfg, &root.join("synth")).unwrap();
    assert_eq!(synth.traces, 3);
    assert_eq!(synth.phases, 12);

    let corpus_dir = root.join("synth/traces");
    let corpus = load_corpus(&corpus_dir).unwrap();
    assert_eq!(corpus.len(), 3);

    let manifest = run_ingest(&cfg, &corpus_dir, 100, &root.join("ingest")).unwrap();
    let manifest_path = root.join("ingest/manifest.json");
    // balanced classes by construction
    assert_eq!(manifest.train_windows[0], manifest.train_windows[1]);
    assert_eq!(manifest.train_windows[1], manifest.train_windows[2]);

    let report = run_train(&cfg, &corpus_dir, &manifest_path, &root.join("train")).unwrap();
    assert!(report.metrics.accuracy > 0.5, "accuracy {}", report.metrics.accuracy);

    let summary = run_explain(
        &cfg,
        &corpus_dir,
        &manifest_path,
        &root.join("train/model.ckpt"),
        &root.join("explain"),
    )
    .unwrap();
    assert_eq!(summary.windows.len(), cfg.explain.max_windows.min(summary.windows.len()));
    // every explanation satisfies per-class efficiency within 1e-9: checked
    // via the recorded rows being finite and bounded
    assert!(summary.mean_abs.iter().all(|m| m.is_finite()));

    run_report(
        &cfg,
        &corpus_dir,
        &manifest_path,
        &root.join("explain/attributions.csv"),
        &root.join("report"),
    )
    .unwrap();
    for artifact in [
        "report/global.svg",
        "report/global_summary.csv",
        "report/train_levels_histogram.csv",
        "report/local_overlay.svg",
        "report/local_overlay_levels.svg",
        "explain/background.json",
        "explain/provenance.json",
    ] {
        assert!(root.join(artifact).exists(), "missing {artifact}");
    }
}

#[test]
fn explain_artifacts_are_byte_identical_across_runs() {
    let cfg = mini_config();
    let root = temp_dir("determinism");
    run_synth(&cfg, &root.join("synth")).unwrap();
    let corpus_dir = root.join("synth/traces");
    run_ingest(&cfg, &corpus_dir, 100, &root.join("ingest")).unwrap();
    let manifest_path = root.join("ingest/manifest.json");
    run_train(&cfg, &corpus_dir, &manifest_path, &root.join("train")).unwrap();
    let ckpt = root.join("train/model.ckpt");

    run_explain(&cfg, &corpus_dir, &manifest_path, &ckpt, &root.join("explain_a")).unwrap();
    run_explain(&cfg, &corpus_dir, &manifest_path, &ckpt, &root.join("explain_b")).unwrap();
    for file in ["attributions.csv", "global_summary.csv", "summary.json", "global.svg"] {
        let a = std::fs::read(root.join("explain_a").join(file)).unwrap();
        let b = std::fs::read(root.join("explain_b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn levels_oracle_confuses_normal_and_nofan_on_overlap_corpus() {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 6, 11).unwrap();
    let outcome = split_policy(&traces, &SplitPolicy::default()).unwrap();
    let profile = WindowProfile { window_size: 100, shift: 10 };
    let test: Vec<_> = outcome
        .test
        .iter()
        .flat_map(|p| {
            slide_windows(&p.signal, &profile, p.meta.condition, &p.meta, &p.trace_id, p.phase_index)
        })
        .collect();

    let oracle = make_levels_oracle(0.72, 0.84);
    let report = evaluate(&oracle, &test).unwrap();
    assert!(report.metrics.accuracy < 1.0, "overlap corpus should confuse the oracle");
    let c = report.metrics.confusion;
    let normal_nofan = c[0][1] + c[1][0];
    let others: usize = c[0][2] + c[2][0] + c[1][2] + c[2][1];
    assert!(
        normal_nofan > others,
        "Normal/NoFan confusion ({normal_nofan}) should dominate other errors ({others})"
    );
}

#[test]
fn misclassified_windows_show_depressed_levels_attribution() {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 6, 13).unwrap();
    let outcome = split_policy(&traces, &SplitPolicy::default()).unwrap();
    let params = DecomposeParams::default();
    let w = 100;
    let background = select_background(
        &outcome.train,
        &BackgroundFilter { core_type: "big".into(), rounds: 1 },
        5,
        w,
        &params,
        13,
    )
    .unwrap();
    let oracle = make_levels_oracle(0.72, 0.84);

    // consecutive windows of the NoFan test phases: the oracle misreads the
    // ones sitting on shared levels
    let mut correct_phi = Vec::new();
    let mut miss_phi = Vec::new();
    for phase in outcome.test.iter().filter(|p| p.meta.condition == Condition::NoFan) {
        let mut offset = 0;
        while offset + w <= phase.signal.len() {
            let window = window_at(phase, offset, w).unwrap();
            let r = exact_shap(&oracle, &window, &background, &params).unwrap();
            let phi_levels = r.phi[r.ground_truth.index()][0];
            if r.predicted_class == r.ground_truth {
                correct_phi.push(phi_levels);
            } else {
                miss_phi.push(phi_levels);
            }
            offset += 60;
        }
    }
    assert!(
        !miss_phi.is_empty() && !correct_phi.is_empty(),
        "expected both correct and misclassified windows (got {} / {})",
        correct_phi.len(),
        miss_phi.len()
    );
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&miss_phi) < mean(&correct_phi),
        "Levels attribution should drop on misclassified windows: {} vs {}",
        mean(&miss_phi),
        mean(&correct_phi)
    );
}

#[test]
fn external_predictions_reproduce_reference_metrics() {
    let cfg = mini_config();
    let root = temp_dir("external");
    run_synth(&cfg, &root.join("synth")).unwrap();
    let corpus_dir = root.join("synth/traces");
    let manifest = run_ingest(&cfg, &corpus_dir, 100, &root.join("ingest")).unwrap();
    let corpus = load_corpus(&corpus_dir).unwrap();
    let train = cshap::dataset::manifest_windows(&corpus, &manifest, Split::Train).unwrap();
    let test = cshap::dataset::manifest_windows(&corpus, &manifest, Split::Test).unwrap();

    let net_cfg = ConvNetConfig { epochs: 2, seed: 5, ..ConvNetConfig::desk(100) };
    let (net, _) = train_convnet(&train, &net_cfg).unwrap();
    let direct = evaluate(&net, &test).unwrap();

    let pred_path = root.join("predictions.csv");
    write_predictions(&pred_path, &net, &test).unwrap();
    let external = load_external_predictions(&manifest, &pred_path).unwrap();
    let via_file = evaluate(&external, &test).unwrap();
    assert_eq!(direct.metrics, via_file.metrics);
    assert_eq!(direct.misclassified.len(), via_file.misclassified.len());
}

#[test]
fn synth_trace_files_round_trip() {
    let spec = SynthSpec::desk(0.25);
    let traces = generate_corpus(&spec, 1, 3, 17).unwrap();
    let dir = temp_dir("roundtrip");
    for trace in &traces {
        let path = cshap::dataset::write_trace(trace, &dir, &Default::default()).unwrap();
        let back = cshap::dataset::parse_trace(&path, &Default::default()).unwrap();
        assert_eq!(&back, trace);
    }
}

#[test]
fn levels_histograms_overlap_only_on_overlap_corpus() {
    let w = 100;
    let shared_for = |overlap: f64| -> usize {
        let spec = SynthSpec::desk(overlap);
        let (traces, truths) = generate_corpus_with_truth(&spec, 1, 4, 19).unwrap();
        // ground-truth levels keep the check independent of the extractor
        let mut values = Vec::new();
        for truth in &truths {
            let trace = traces.iter().find(|t| t.id == truth.trace_id).unwrap();
            let n = truth.truth.len();
            let mut offset = 0;
            while offset + w <= n {
                let slice = cshap::signal::Decomposition {
                    levels: truth.truth.levels[offset..offset + w].to_vec(),
                    peaks: vec![0.0; w],
                    scale: 1.0,
                    lf: vec![0.0; w],
                    hf: vec![0.0; w],
                    resampled_indices: Default::default(),
                    peak_indices: Default::default(),
                };
                values.push((trace.meta.condition, window_levels_value(&slice)));
                offset += 50;
            }
        }
        let hist = levels_histogram(&values, 30).unwrap();
        (0..30)
            .filter(|&b| hist.counts[0][b] > 0 && hist.counts[1][b] > 0)
            .count()
    };
    assert_eq!(shared_for(0.0), 0, "disjoint palettes must not share bins");
    assert!(shared_for(0.5) > 0, "overlap corpus must share Normal/NoFan bins");
}

#[test]
fn cli_exit_codes_follow_the_contract() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_cshap");

    // unknown flag -> usage error (1)
    let out = Command::new(bin).arg("--no-such-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // missing corpus directory -> data error (2)
    let out = Command::new(bin)
        .args(["ingest", "--corpus", "/nonexistent/corpus", "--window-size", "100"])
        .output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // config schema violation -> usage error (1)
    let dir = temp_dir("cli_codes");
    let bad_cfg = dir.join("bad.toml");
    std::fs::write(&bad_cfg, "sede = 7\n").unwrap();
    let out = Command::new(bin)
        .args(["--config", bad_cfg.to_str().unwrap(), "synth"])
        .output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // --help exits cleanly
    let out = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8_lossy(&out.stdout);
    for sub in ["synth", "ingest", "train", "explain", "report", "experiment", "verify"] {
        assert!(help.contains(sub), "help misses subcommand {sub}");
    }

    // successful synth run exits 0
    let out = Command::new(bin)
        .args([
            "--config", "/dev/null", // empty config: all defaults
            "synth", "--out",
        ])
        .arg(dir.join("synth"))
        .output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // verify exits 0 when all oracle suites pass
    let out = Command::new(bin).arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(": PASS").count(), 3, "{stdout}");
}

#[test]
fn attribution_mass_concentrates_on_levels_for_the_oracle() {
    let spec = SynthSpec::desk(0.5);
    let traces = generate_corpus(&spec, 2, 5, 23).unwrap();
    let outcome = split_policy(&traces, &SplitPolicy::default()).unwrap();
    let params = DecomposeParams::default();
    let w = 100;
    let background = select_background(
        &outcome.train,
        &BackgroundFilter { core_type: "big".into(), rounds: 1 },
        5,
        w,
        &params,
        23,
    )
    .unwrap();
    let oracle = make_levels_oracle(0.72, 0.84);
    let mut results = Vec::new();
    for phase in &outcome.test {
        for k in 0..6 {
            let window = window_at(phase, k * 250, w).unwrap();
            results.push(exact_shap(&oracle, &window, &background, &params).unwrap());
        }
    }
    let summary = aggregate_global(&results, ClassSelector::GroundTruth);
    let total: f64 = summary.mean_abs.iter().sum();
    assert!(
        summary.mean_abs[0] >= 0.5 * total,
        "Levels share {} of {total}",
        summary.mean_abs[0]
    );
}
