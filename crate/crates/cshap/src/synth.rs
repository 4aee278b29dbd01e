//! Synthetic trace generation with stored ground-truth components.
//!
//! Cycles are built directly in the decomposition algebra
//! (`levels + peaks + scale * (lf + hf)`), so the generator doubles as an
//! oracle for the extraction pipeline. The `overlap` knob controls what
//! fraction of the level palette Normal and NoFan share; ambiguous levels
//! inside short windows are the mechanism the window-size experiment probes.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Condition, PhaseMark, ScenarioMeta, Trace};
use crate::decompose::{rng_for, stable_hash};
use crate::error::{Error, Result};
use crate::signal::{Decomposition, Signal};

/// Per-class generation profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// Candidate segment means, drawn uniformly per level segment.
    pub level_palette: Vec<f64>,
    /// Segment length range in raw samples (aligned to `boundary_grid`).
    pub segment_len: (usize, usize),
    /// Per-sample spike probability.
    pub peak_rate: f64,
    pub peak_amplitude: f64,
    /// Slow sinusoid amplitude, in normalized units.
    pub lf_amplitude: f64,
    /// Slow sinusoid period in samples.
    pub lf_period: f64,
    /// Fast noise deviation, in normalized units. Samples are clipped at
    /// 2.2 sigma: outlier excursions belong to the Peaks concept, and an
    /// unbounded tail would trip the outlier fences during extraction.
    pub hf_std: f64,
    /// Range of the per-cycle amplitude normalizer.
    pub scale_range: (f64, f64),
}

/// Full generator specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub normal: ClassProfile,
    pub nofan: ClassProfile,
    pub undervolt: ClassProfile,
    /// Fraction of the level palette shared between Normal and NoFan.
    pub overlap: f64,
    /// Cycle length range in samples.
    pub cycle_len: (usize, usize),
    /// Idle gap length range between cycles.
    pub gap_len: (usize, usize),
    pub idle_level: f64,
    pub sample_period: f64,
    /// Level-segment boundaries snap to this grid.
    pub boundary_grid: usize,
}

impl SynthSpec {
    /// Desk-scale specification with a configurable Normal/NoFan level
    /// overlap.
    pub fn desk(overlap: f64) -> Self {
        let overlap = overlap.clamp(0.0, 1.0);
        let normal_only = [0.620, 0.640, 0.655, 0.665];
        let shared = [0.680, 0.690, 0.700, 0.710];
        let nofan_only = [0.740, 0.750, 0.765, 0.780];
        let shared_count = (overlap * 4.0).round() as usize;
        let mut normal_palette: Vec<f64> = normal_only[..4 - shared_count].to_vec();
        normal_palette.extend_from_slice(&shared[..shared_count]);
        let mut nofan_palette: Vec<f64> = nofan_only[..4 - shared_count].to_vec();
        nofan_palette.extend_from_slice(&shared[..shared_count]);

        let base = ClassProfile {
            level_palette: normal_palette,
            segment_len: (120, 280),
            peak_rate: 0.003,
            peak_amplitude: 0.3,
            lf_amplitude: 0.55,
            lf_period: 180.0,
            hf_std: 0.32,
            scale_range: (0.045, 0.065),
        };
        let nofan = ClassProfile {
            level_palette: nofan_palette,
            ..base.clone()
        };
        let undervolt = ClassProfile {
            level_palette: vec![0.880, 0.905, 0.930, 0.960],
            peak_rate: 0.005,
            hf_std: 0.40,
            ..base.clone()
        };
        SynthSpec {
            normal: base,
            nofan,
            undervolt,
            overlap,
            cycle_len: (2000, 2480),
            gap_len: (80, 160),
            idle_level: 0.15,
            sample_period: 1e-3,
            boundary_grid: 40,
        }
    }

    pub fn profile(&self, class: Condition) -> &ClassProfile {
        match class {
            Condition::Normal => &self.normal,
            Condition::NoFan => &self.nofan,
            Condition::UnderVolt => &self.undervolt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap {} outside [0, 1]", self.overlap)));
        }
        for profile in [&self.normal, &self.nofan, &self.undervolt] {
            if profile.level_palette.is_empty() {
                return Err(Error::Config("empty level palette".into()));
            }
            if profile.hf_std < 0.0 || profile.peak_rate < 0.0 || profile.lf_amplitude < 0.0 {
                return Err(Error::Config("negative noise parameter".into()));
            }
            if profile.segment_len.0 == 0 || profile.segment_len.0 > profile.segment_len.1 {
                return Err(Error::Config("bad segment length range".into()));
            }
        }
        if self.boundary_grid == 0 || self.cycle_len.0 == 0 || self.cycle_len.0 > self.cycle_len.1 {
            return Err(Error::Config("bad cycle geometry".into()));
        }
        Ok(())
    }
}

fn align(v: usize, grid: usize) -> usize {
    ((v + grid / 2) / grid).max(1) * grid
}

/// Ground-truth components of one generated cycle.
fn cycle_values(
    spec: &SynthSpec,
    class: Condition,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Decomposition) {
    let profile = spec.profile(class);

    let mut levels = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let raw = rng.random_range(profile.segment_len.0..=profile.segment_len.1);
        let len = align(raw, spec.boundary_grid).min(n - pos);
        let level = profile.level_palette[rng.random_range(0..profile.level_palette.len())];
        levels[pos..pos + len].fill(level);
        pos += len;
    }

    let mut peaks = vec![0.0; n];
    let mut peak_indices = BTreeSet::new();
    for i in 0..n {
        if rng.random::<f64>() < profile.peak_rate {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let magnitude = profile.peak_amplitude * (1.0 + 0.3 * rng.random_range(-1.0..1.0));
            peaks[i] = sign * magnitude;
            peak_indices.insert(i);
        }
    }

    let phase0 = rng.random_range(0.0..TAU);
    let lf_raw: Vec<f64> = (0..n)
        .map(|i| profile.lf_amplitude * (TAU * i as f64 / profile.lf_period + phase0).sin())
        .collect();
    let hf_noise = Normal::new(0.0, profile.hf_std.max(0.0))
        .unwrap_or_else(|_| Normal::new(0.0, 0.0).unwrap());
    let clip = 2.2 * profile.hf_std;
    let hf_raw: Vec<f64> = (0..n)
        .map(|_| hf_noise.sample(rng).clamp(-clip, clip))
        .collect();

    // normalize the fluctuation so max|lf + hf| == 1 exactly, then apply the
    // drawn scale; the extraction pipeline can recover the same normalizer
    let mut norm = 0.0f64;
    for i in 0..n {
        norm = norm.max((lf_raw[i] + hf_raw[i]).abs());
    }
    if norm == 0.0 {
        norm = 1.0;
    }
    let scale = rng.random_range(profile.scale_range.0..=profile.scale_range.1);
    let lf: Vec<f64> = lf_raw.iter().map(|v| v / norm).collect();
    let hf: Vec<f64> = hf_raw.iter().map(|v| v / norm).collect();

    let truth = Decomposition {
        levels,
        peaks,
        scale,
        lf,
        hf,
        resampled_indices: BTreeSet::new(),
        peak_indices,
    };
    let values = crate::signal::recompose(&truth);
    (values, truth)
}

/// Generates one cycle with its ground-truth decomposition. The cycle length
/// is drawn from the seed.
pub fn generate_cycle(spec: &SynthSpec, class: Condition, seed: u64) -> Result<(Signal, Decomposition)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = align(
        rng.random_range(spec.cycle_len.0..=spec.cycle_len.1),
        spec.boundary_grid,
    );
    let (values, truth) = cycle_values(spec, class, n, &mut rng);
    let timestamps: Vec<f64> = (0..n).map(|i| i as f64 * spec.sample_period).collect();
    Ok((Signal::new(timestamps, values)?, truth))
}

/// Ground truth of one corpus cycle.
#[derive(Debug, Clone)]
pub struct CycleTruth {
    pub trace_id: String,
    pub phase_index: usize,
    pub truth: Decomposition,
}

const WORKLOADS: [&str; 8] = [
    "camera", "storage", "stream", "batch", "encode", "archive", "scan", "mix",
];

/// Emits `scenarios` traces per class, each holding `cycles_per_scenario`
/// cycle-op phases separated by idle gaps.
///
/// Cycle lengths are drawn from a class-independent stream, so per-class
/// instance counts are identical by construction.
pub fn generate_corpus(
    spec: &SynthSpec,
    scenarios: usize,
    cycles_per_scenario: usize,
    seed: u64,
) -> Result<Vec<Trace>> {
    generate_corpus_with_truth(spec, scenarios, cycles_per_scenario, seed).map(|(t, _)| t)
}

/// [`generate_corpus`] plus the ground-truth decomposition of every cycle.
pub fn generate_corpus_with_truth(
    spec: &SynthSpec,
    scenarios: usize,
    cycles_per_scenario: usize,
    seed: u64,
) -> Result<(Vec<Trace>, Vec<CycleTruth>)> {
    spec.validate()?;
    let mut traces = Vec::new();
    let mut truths = Vec::new();
    for scenario_idx in 0..scenarios {
        let workload = if scenario_idx < WORKLOADS.len() {
            WORKLOADS[scenario_idx].to_string()
        } else {
            format!("wl{scenario_idx}")
        };
        // class-independent geometry stream keeps classes balanced
        let mut geometry =
            rng_for(seed, stable_hash(&format!("geometry:{scenario_idx}")));
        let cycle_lens: Vec<usize> = (0..cycles_per_scenario)
            .map(|_| {
                align(
                    geometry.random_range(spec.cycle_len.0..=spec.cycle_len.1),
                    spec.boundary_grid,
                )
            })
            .collect();
        let gap_lens: Vec<usize> = (0..=cycles_per_scenario)
            .map(|_| geometry.random_range(spec.gap_len.0..=spec.gap_len.1))
            .collect();

        for class in Condition::ALL {
            let meta = ScenarioMeta {
                workload: workload.clone(),
                core_type: "big".into(),
                condition: class,
                rounds: 1,
            };
            let trace_id = meta.scenario_id();
            let mut idle_rng =
                rng_for(seed, stable_hash(&format!("idle:{trace_id}")));
            let idle_noise = Normal::new(0.0, 0.004).unwrap();

            let mut values = Vec::new();
            let mut phase_marks = Vec::new();
            let push_gap = |values: &mut Vec<f64>, len: usize, rng: &mut ChaCha8Rng| {
                for _ in 0..len {
                    values.push(spec.idle_level + idle_noise.sample(rng));
                }
            };

            push_gap(&mut values, gap_lens[0], &mut idle_rng);
            for cycle in 0..cycles_per_scenario {
                let mut cycle_rng = rng_for(
                    seed,
                    stable_hash(&format!("cycle:{trace_id}:{cycle}")),
                );
                let n = cycle_lens[cycle];
                let (cycle_vals, truth) = cycle_values(spec, class, n, &mut cycle_rng);
                let start = values.len();
                values.extend_from_slice(&cycle_vals);
                phase_marks.push(PhaseMark {
                    start,
                    end: values.len(),
                    kind: "cycle-op".into(),
                });
                truths.push(CycleTruth {
                    trace_id: trace_id.clone(),
                    phase_index: phase_marks.len() - 1,
                    truth,
                });
                push_gap(&mut values, gap_lens[cycle + 1], &mut idle_rng);
            }

            let timestamps: Vec<f64> = (0..values.len())
                .map(|i| i as f64 * spec.sample_period)
                .collect();
            let trace = Trace {
                id: trace_id,
                meta,
                signal: Signal::new(timestamps, values)?,
                phase_marks,
            };
            trace.validate()?;
            traces.push(trace);
        }
    }
    Ok((traces, truths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{collect_phases, WindowProfile};
    use crate::signal::recompose;

    #[test]
    fn zero_noise_single_level_yields_constant_signal() {
        let mut spec = SynthSpec::desk(0.0);
        for profile in [&mut spec.normal, &mut spec.nofan, &mut spec.undervolt] {
            profile.level_palette = vec![0.7];
            profile.peak_rate = 0.0;
            profile.lf_amplitude = 0.0;
            profile.hf_std = 0.0;
        }
        let (signal, truth) = generate_cycle(&spec, Condition::Normal, 1).unwrap();
        for v in signal.values() {
            assert!((v - 0.7).abs() < 1e-12);
        }
        assert!(truth.peak_indices.is_empty());
    }

    #[test]
    fn ground_truth_recomposes_to_the_signal() {
        let spec = SynthSpec::desk(0.5);
        for seed in [1u64, 2, 3] {
            let (signal, truth) = generate_cycle(&spec, Condition::NoFan, seed).unwrap();
            let rebuilt = recompose(&truth);
            for i in 0..signal.len() {
                assert!((rebuilt[i] - signal.values()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec::desk(0.25);
        let a = generate_cycle(&spec, Condition::UnderVolt, 9).unwrap();
        let b = generate_cycle(&spec, Condition::UnderVolt, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let ca = generate_corpus(&spec, 2, 3, 5).unwrap();
        let cb = generate_corpus(&spec, 2, 3, 5).unwrap();
        assert_eq!(ca.len(), cb.len());
        for (x, y) in ca.iter().zip(cb.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn corpus_counts_match_arithmetic() {
        // 3 classes x 2 scenarios x 10 cycles -> 6 traces, 60 phases
        let spec = SynthSpec::desk(0.5);
        let (traces, truths) = generate_corpus_with_truth(&spec, 2, 10, 7).unwrap();
        assert_eq!(traces.len(), 6);
        let phases: usize = traces.iter().map(|t| t.phase_marks.len()).sum();
        assert_eq!(phases, 60);
        assert_eq!(truths.len(), 60);
    }

    #[test]
    fn classes_are_balanced_by_construction() {
        let spec = SynthSpec::desk(0.5);
        let traces = generate_corpus(&spec, 2, 4, 13).unwrap();
        let phases = collect_phases(&traces, "cycle-op");
        let profile = WindowProfile { window_size: 100, shift: 10 };
        let mut counts = [0usize; 3];
        for p in &phases {
            counts[p.meta.condition.index()] += profile.count(p.signal.len());
        }
        assert_eq!(counts[0], counts[1]);
        assert_eq!(counts[1], counts[2]);
    }

    #[test]
    fn overlap_controls_shared_palette_fraction() {
        let disjoint = SynthSpec::desk(0.0);
        let shared: Vec<f64> = disjoint
            .normal
            .level_palette
            .iter()
            .filter(|v| disjoint.nofan.level_palette.contains(v))
            .copied()
            .collect();
        assert!(shared.is_empty());

        let half = SynthSpec::desk(0.5);
        let shared: Vec<f64> = half
            .normal
            .level_palette
            .iter()
            .filter(|v| half.nofan.level_palette.contains(v))
            .copied()
            .collect();
        assert_eq!(shared.len(), 2);
        assert_eq!(half.normal.level_palette.len(), 4);
    }
}
