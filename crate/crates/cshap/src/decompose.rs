//! Construction of the five concepts from a signal, left to right:
//! segment levels from changepoints, outlier peaks, then the multiplicative
//! scale with its low- and high-frequency parts.
//!
//! Every stage is conservative by construction: `peaks + filtered` equals the
//! level-removed signal at every index, `scale * (lf + hf)` equals the
//! peak-filtered signal at every index, and the full chain reproduces the
//! input exactly everywhere outside the resampled halo around level changes.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::changepoint::{pelt, ChangePoints, CpdParams};
use crate::error::Result;
use crate::signal::{Decomposition, Signal};
use crate::stats::{mean, median, moving_average_centered, quantile, std_dev};

/// Outlier rule for the Peaks concept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PeakRule {
    /// Tukey fences: outside `[Q1 - k*IQR, Q3 + k*IQR]`.
    Tukey { k: f64 },
    /// Literal reading "below the first quartile or above the third
    /// quartile"; marks roughly half the points. Kept for fidelity
    /// experiments only.
    LiteralQuartile,
}

impl Default for PeakRule {
    fn default() -> Self {
        PeakRule::Tukey { k: 1.5 }
    }
}

/// Parameters of the full decomposition pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    pub cpd: CpdParams,
    /// Half-width (in time steps) of the resampled region around each level
    /// change.
    pub resample_halo: usize,
    /// Moving-average width applied to resampled residuals.
    pub resample_smooth_window: usize,
    pub peak_rule: PeakRule,
    /// Moving-average width applied to peak-replacement noise.
    pub peak_noise_smooth_window: usize,
    /// Moving-average width of the low-frequency component.
    pub lf_window: usize,
    pub rng_seed: u64,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            cpd: CpdParams::default(),
            resample_halo: 20,
            resample_smooth_window: 20,
            peak_rule: PeakRule::default(),
            peak_noise_smooth_window: 20,
            lf_window: 75,
            rng_seed: 0,
        }
    }
}

/// Piecewise-constant segment means plus the level-removed residual.
///
/// Residuals within `resample_halo` of each boundary are redrawn from a
/// normal distribution fit to the preceding segment's residual, then smoothed
/// by a centered moving average; only the redrawn positions are altered, and
/// they are reported in the returned index set.
pub fn extract_levels(
    x: &[f64],
    cps: &ChangePoints,
    p: &DecomposeParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>, BTreeSet<usize>) {
    let n = x.len();
    let segments = cps.segments(n);
    let mut levels = vec![0.0; n];
    let mut seg_means = Vec::with_capacity(segments.len());
    for &(a, b) in &segments {
        let m = mean(&x[a..b]);
        seg_means.push(m);
        levels[a..b].fill(m);
    }
    let mut filtered: Vec<f64> = x.iter().zip(levels.iter()).map(|(v, l)| v - l).collect();

    let mut resampled = BTreeSet::new();
    for (seg_idx, &(_, boundary)) in segments.iter().enumerate() {
        if boundary == n {
            break; // sentinel end, not a level change
        }
        let (pa, pb) = segments[seg_idx];
        let residual: Vec<f64> = x[pa..pb].iter().map(|v| v - seg_means[seg_idx]).collect();
        let noise = Normal::new(mean(&residual), std_dev(&residual).max(0.0))
            .unwrap_or_else(|_| Normal::new(0.0, 0.0).unwrap());
        let lo = boundary.saturating_sub(p.resample_halo);
        let hi = (boundary + p.resample_halo).min(n);
        for i in lo..hi {
            filtered[i] = noise.sample(rng);
            resampled.insert(i);
        }
    }

    if !resampled.is_empty() {
        let smoothed = moving_average_centered(&filtered, p.resample_smooth_window);
        for &i in &resampled {
            filtered[i] = smoothed[i];
        }
    }

    (levels, filtered, resampled)
}

fn peak_fences(x: &[f64], rule: PeakRule) -> (f64, f64) {
    let q1 = quantile(x, 0.25);
    let q3 = quantile(x, 0.75);
    match rule {
        PeakRule::Tukey { k } => {
            let iqr = q3 - q1;
            (q1 - k * iqr, q3 + k * iqr)
        }
        PeakRule::LiteralQuartile => (q1, q3),
    }
}

/// Splits outliers from the series: `x = peaks + filtered` at every index.
///
/// Outlier positions are replaced by the series median plus smoothed noise
/// whose deviation matches the peak-filtered signal, so the filtered series
/// stays plausible. Series shorter than four points (or constant) carry no
/// peaks.
pub fn extract_peaks(
    x: &[f64],
    p: &DecomposeParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>, BTreeSet<usize>) {
    let n = x.len();
    let mut peaks = vec![0.0; n];
    let mut filtered = x.to_vec();
    if n < 4 {
        return (peaks, filtered, BTreeSet::new());
    }

    let (lo, hi) = peak_fences(x, p.peak_rule);
    let peak_indices: BTreeSet<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < lo || **v > hi)
        .map(|(i, _)| i)
        .collect();
    if peak_indices.is_empty() {
        return (peaks, filtered, peak_indices);
    }

    let kept: Vec<f64> = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !peak_indices.contains(i))
        .map(|(_, v)| *v)
        .collect();
    let replacement_base = if kept.is_empty() { median(x) } else { median(&kept) };
    let noise_std = std_dev(&kept).max(0.0);
    let noise_dist = Normal::new(0.0, noise_std).unwrap_or_else(|_| Normal::new(0.0, 0.0).unwrap());
    let raw_noise: Vec<f64> = (0..n).map(|_| noise_dist.sample(rng)).collect();
    let smooth_noise = moving_average_centered(&raw_noise, p.peak_noise_smooth_window);

    for &i in &peak_indices {
        let replacement = replacement_base + smooth_noise[i];
        peaks[i] = x[i] - replacement;
        filtered[i] = replacement;
    }
    (peaks, filtered, peak_indices)
}

/// Amplitude normalizer plus low/high-frequency split of the remaining
/// signal; guarantees `x = scale * (lf + hf)` elementwise.
pub fn extract_scale_lf_hf(x: &[f64], p: &DecomposeParams) -> (f64, Vec<f64>, Vec<f64>) {
    let max_abs = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = if max_abs > 0.0 { max_abs } else { 1.0 };
    let normalized: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let lf = moving_average_centered(&normalized, p.lf_window);
    let hf: Vec<f64> = normalized.iter().zip(lf.iter()).map(|(v, l)| v - l).collect();
    (scale, lf, hf)
}

/// Runs the full pipeline: changepoints, levels, peaks, then scale/LF/HF.
pub fn decompose(s: &Signal, p: &DecomposeParams, rng: &mut ChaCha8Rng) -> Result<Decomposition> {
    let cps = pelt(s.values(), &p.cpd)?;
    let (levels, level_filtered, resampled_indices) = extract_levels(s.values(), &cps, p, rng);
    let (peaks, peak_filtered, peak_indices) = extract_peaks(&level_filtered, p, rng);
    let (scale, lf, hf) = extract_scale_lf_hf(&peak_filtered, p);
    Ok(Decomposition {
        levels,
        peaks,
        scale,
        lf,
        hf,
        resampled_indices,
        peak_indices,
    })
}

/// [`decompose`] with a fresh RNG derived from `p.rng_seed` and `salt`.
///
/// The salt keeps per-window decompositions independent yet reproducible when
/// windows are processed in parallel or in any order.
pub fn decompose_seeded(s: &Signal, p: &DecomposeParams, salt: u64) -> Result<Decomposition> {
    let mut rng = rng_for(p.rng_seed, salt);
    decompose(s, p, &mut rng)
}

/// Deterministic per-task RNG: a SplitMix64 mix of seed and salt.
pub fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// FNV-1a hash of a string; a stable salt for per-item RNG derivation.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Debug dump of a decomposition as columnar text
/// (`index,original,levels,peaks,lf,hf,scale`), for plotting.
pub fn write_components(path: &Path, signal: &Signal, d: &Decomposition) -> Result<()> {
    let mut out = String::from("index,original,levels,peaks,lf,hf,scale\n");
    for i in 0..d.len() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            signal.values()[i],
            d.levels[i],
            d.peaks[i],
            d.lf[i],
            d.hf[i],
            d.scale
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::recompose;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn noisy_step(lens: &[usize], levels: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut out = Vec::new();
        for (len, level) in lens.iter().zip(levels.iter()) {
            for _ in 0..*len {
                out.push(level + noise.sample(&mut r));
            }
        }
        out
    }

    fn signal_from(values: Vec<f64>) -> Signal {
        let ts: Vec<f64> = (0..values.len()).map(|i| i as f64 * 1e-3).collect();
        Signal::new(ts, values).unwrap()
    }

    #[test]
    fn levels_without_changepoints_is_global_mean() {
        let x = noisy_step(&[300], &[2.0], 0.1, 1);
        let p = DecomposeParams::default();
        let (levels, filtered, resampled) =
            extract_levels(&x, &ChangePoints::default(), &p, &mut rng(2));
        let m = mean(&x);
        assert!(resampled.is_empty());
        for i in 0..x.len() {
            assert!((levels[i] - m).abs() < 1e-12);
            assert!((filtered[i] - (x[i] - m)).abs() < 1e-12);
        }
    }

    #[test]
    fn levels_recover_exact_step() {
        let mut x = vec![1.0; 100];
        x.extend(vec![5.0; 100]);
        let cps = ChangePoints::new(vec![100]);
        let p = DecomposeParams::default();
        let (levels, filtered, resampled) = extract_levels(&x, &cps, &p, &mut rng(3));
        for i in 0..200 {
            let want = if i < 100 { 1.0 } else { 5.0 };
            assert!((levels[i] - want).abs() < 1e-12);
            if !resampled.contains(&i) {
                assert!(filtered[i].abs() < 1e-12);
            }
        }
        // halo of 20 on each side of the boundary
        assert_eq!(resampled.len(), 40);
    }

    #[test]
    fn filtered_untouched_outside_resampled_indices() {
        let x = noisy_step(&[500, 500], &[0.0, 3.0], 0.2, 4);
        let cps = ChangePoints::new(vec![500]);
        let p = DecomposeParams::default();
        let (levels, filtered, resampled) = extract_levels(&x, &cps, &p, &mut rng(5));
        for i in 0..x.len() {
            if !resampled.contains(&i) {
                assert!((filtered[i] - (x[i] - levels[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn injected_spike_is_detected_and_replaced() {
        let mut x = noisy_step(&[500], &[0.0], 0.1, 6);
        x[250] += 1.0; // 10 sigma
        let p = DecomposeParams::default();
        let (peaks, filtered, idx) = extract_peaks(&x, &p, &mut rng(7));
        assert!(idx.contains(&250), "spike not flagged: {idx:?}");
        let (lo, hi) = peak_fences(&x, p.peak_rule);
        assert!(filtered[250] >= lo && filtered[250] <= hi);
        assert!(peaks[250] != 0.0);
    }

    #[test]
    fn peaks_plus_filtered_reconstructs_input() {
        let mut x = noisy_step(&[400], &[1.0], 0.3, 8);
        x[10] += 5.0;
        x[200] -= 4.0;
        let p = DecomposeParams::default();
        let (peaks, filtered, _) = extract_peaks(&x, &p, &mut rng(9));
        for i in 0..x.len() {
            assert!((x[i] - peaks[i] - filtered[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        let x = vec![4.2; 100];
        let p = DecomposeParams::default();
        let (peaks, filtered, idx) = extract_peaks(&x, &p, &mut rng(10));
        assert!(idx.is_empty());
        assert_eq!(filtered, x);
        assert!(peaks.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tukey_outlier_rate_on_standard_normal() {
        // ~0.7% of N(0,1) samples fall outside the k=1.5 fences
        let p = DecomposeParams::default();
        let mut fractions = Vec::new();
        for seed in 0..8 {
            let mut r = rng(1000 + seed);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let x: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut r)).collect();
            let (_, _, idx) = extract_peaks(&x, &p, &mut rng(2000 + seed));
            fractions.push(idx.len() as f64 / x.len() as f64);
        }
        let avg = mean(&fractions);
        assert!(
            (avg - 0.007).abs() < 0.004,
            "outlier fraction {avg} outside 0.7% +- 0.4%"
        );
    }

    #[test]
    fn scale_lf_hf_degenerate_and_constant_cases() {
        let p = DecomposeParams::default();
        let (scale, lf, hf) = extract_scale_lf_hf(&[0.0; 50], &p);
        assert_eq!(scale, 1.0);
        assert!(lf.iter().all(|v| *v == 0.0));
        assert!(hf.iter().all(|v| *v == 0.0));

        let (scale, lf, hf) = extract_scale_lf_hf(&[-3.0; 50], &p);
        assert!((scale - 3.0).abs() < 1e-12);
        for i in 0..50 {
            assert!((lf[i] - (-1.0)).abs() < 1e-12);
            assert!(hf[i].abs() < 1e-12);
        }
    }

    #[test]
    fn scale_times_lf_plus_hf_is_exact() {
        let x = noisy_step(&[300], &[0.0], 0.7, 11);
        let p = DecomposeParams::default();
        let (scale, lf, hf) = extract_scale_lf_hf(&x, &p);
        for i in 0..x.len() {
            assert!((x[i] - scale * (lf[i] + hf[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_conserves_signal_outside_resampled() {
        let x = noisy_step(&[800, 800, 800], &[1.0, 4.0, 2.0], 0.05, 12);
        let s = signal_from(x);
        let p = DecomposeParams::default();
        let d = decompose(&s, &p, &mut rng(13)).unwrap();
        d.validate().unwrap();
        let rebuilt = recompose(&d);
        for i in 0..s.len() {
            if !d.resampled_indices.contains(&i) {
                assert!(
                    (rebuilt[i] - s.values()[i]).abs() < 1e-12,
                    "index {i}: {} vs {}",
                    rebuilt[i],
                    s.values()[i]
                );
            }
        }
    }

    #[test]
    fn decompose_recovers_well_separated_structure() {
        // big grid-aligned level steps, small fluctuation: segment means and
        // the amplitude normalizer should come back nearly exactly
        let mut spec = crate::synth::SynthSpec::desk(0.0);
        for profile in [&mut spec.normal, &mut spec.nofan, &mut spec.undervolt] {
            profile.level_palette = vec![0.2, 0.7, 1.2];
            profile.segment_len = (400, 800);
            profile.peak_rate = 0.001;
            profile.scale_range = (0.04, 0.05);
        }
        spec.cycle_len = (2400, 3200);
        let p = DecomposeParams::default();
        for seed in [1u64, 2, 3] {
            let (signal, truth) =
                crate::synth::generate_cycle(&spec, crate::dataset::Condition::Normal, seed)
                    .unwrap();
            let d = decompose(&signal, &p, &mut rng(seed)).unwrap();
            let min_step = 0.5;
            let rmse = (truth
                .levels
                .iter()
                .zip(d.levels.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / truth.levels.len() as f64)
                .sqrt();
            assert!(
                rmse <= 0.05 * min_step,
                "seed {seed}: levels RMSE {rmse} above 5% of the step height"
            );
            let scale_err = (d.scale - truth.scale).abs() / truth.scale;
            assert!(
                scale_err <= 0.10,
                "seed {seed}: scale off by {:.1}% ({} vs {})",
                100.0 * scale_err,
                d.scale,
                truth.scale
            );
        }
    }

    #[test]
    fn decompose_constant_signal() {
        let s = signal_from(vec![2.5; 400]);
        let p = DecomposeParams::default();
        let d = decompose(&s, &p, &mut rng(14)).unwrap();
        assert!(d.peak_indices.is_empty());
        assert!(d.resampled_indices.is_empty());
        for i in 0..400 {
            assert!((d.levels[i] - 2.5).abs() < 1e-12);
            assert!(d.hf[i].abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_is_deterministic_under_seed() {
        let x = noisy_step(&[600, 600], &[0.0, 2.0], 0.2, 15);
        let s = signal_from(x);
        let p = DecomposeParams::default();
        let a = decompose_seeded(&s, &p, 99).unwrap();
        let b = decompose_seeded(&s, &p, 99).unwrap();
        assert_eq!(a, b);
    }
}
