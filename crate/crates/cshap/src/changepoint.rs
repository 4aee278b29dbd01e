//! Penalized changepoint detection: PELT with an RBF (kernel) segment cost.
//!
//! Candidate boundaries are restricted to a stride-`subsample` grid. Segment
//! costs are estimated from the points on that grid and scaled back to
//! raw-resolution length, so a penalty calibrated against full-length kernel
//! costs keeps its meaning regardless of the stride. Pruning is exact for
//! this cost: splitting a segment never increases within-segment scatter, so
//! PELT returns the same objective value as the unpruned dynamic program.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::median;

/// RBF kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Median pairwise distance of the subsampled points (fallback 1.0 for
    /// constant series).
    MedianHeuristic,
    Fixed(f64),
}

/// Parameters of the penalized detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpdParams {
    /// Stride of the candidate-boundary grid, in raw samples.
    pub subsample: usize,
    /// Penalty added per changepoint.
    pub penalty: f64,
    pub bandwidth: Bandwidth,
    /// Minimum segment length in subsampled units.
    pub min_segment_length: usize,
}

impl Default for CpdParams {
    fn default() -> Self {
        CpdParams {
            subsample: 40,
            penalty: 50.0,
            bandwidth: Bandwidth::MedianHeuristic,
            min_segment_length: 2,
        }
    }
}

impl CpdParams {
    pub fn validate(&self) -> Result<()> {
        if self.subsample == 0 {
            return Err(Error::Config("subsample must be >= 1".into()));
        }
        if self.min_segment_length == 0 {
            return Err(Error::Config("min_segment_length must be >= 1".into()));
        }
        if !(self.penalty >= 0.0) {
            return Err(Error::Config(format!(
                "penalty must be nonnegative, got {}",
                self.penalty
            )));
        }
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !(b > 0.0) {
                return Err(Error::Config(format!("bandwidth must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// Detected boundaries at original resolution, strictly increasing, each in
/// `(0, n)`; the series end acts as an implicit sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChangePoints {
    indices: Vec<usize>,
}

impl ChangePoints {
    pub fn new(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        ChangePoints { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Segment bounds `[(0, c1), (c1, c2), ..., (ck, n)]`.
    pub fn segments(&self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.indices.len() + 1);
        let mut start = 0;
        for &c in &self.indices {
            out.push((start, c));
            start = c;
        }
        out.push((start, n));
        out
    }
}

/// RBF segment cost on a (subsampled) series:
/// `c(a, b) = (b - a) - (1 / (b - a)) * sum_{i,j in [a,b)} k(x_i, x_j)`
/// with `k(u, v) = exp(-(u - v)^2 / (2 * bandwidth^2))`.
///
/// A singleton segment costs exactly zero. Rejects empty segments.
pub fn rbf_segment_cost(x: &[f64], a: usize, b: usize, bandwidth: f64) -> Result<f64> {
    if a >= b || b > x.len() {
        return Err(Error::Data(format!(
            "invalid segment [{a}, {b}) for series of length {}",
            x.len()
        )));
    }
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let len = (b - a) as f64;
    let mut acc = 0.0;
    for i in a..b {
        for j in a..b {
            let d = x[i] - x[j];
            acc += (-d * d * inv).exp();
        }
    }
    Ok(len - acc / len)
}

/// Median pairwise distance of a series; 1.0 when degenerate.
pub fn median_heuristic_bandwidth(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(x.len() * (x.len() - 1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            dists.push((x[i] - x[j]).abs());
        }
    }
    let m = median(&dists);
    if m.is_finite() && m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Precomputed Gram prefix sums over an evaluation grid, giving O(1) segment
/// costs during the dynamic programs. Costs are scaled by the grid stride so
/// they estimate the full-resolution kernel cost.
struct RbfCost {
    /// `(m + 1) x (m + 1)` prefix matrix, row-major:
    /// `prefix[i * (m + 1) + j] = sum of k(x_p, x_q) for p < i, q < j`.
    prefix: Vec<f64>,
    m: usize,
    scale: f64,
}

impl RbfCost {
    fn new(sub: &[f64], bandwidth: f64, scale: f64) -> Self {
        let m = sub.len();
        let inv = 1.0 / (2.0 * bandwidth * bandwidth);
        let w = m + 1;
        let mut prefix = vec![0.0; w * w];
        for p in 0..m {
            for q in 0..m {
                let d = sub[p] - sub[q];
                let k = (-d * d * inv).exp();
                prefix[(p + 1) * w + (q + 1)] = k + prefix[p * w + (q + 1)]
                    + prefix[(p + 1) * w + q]
                    - prefix[p * w + q];
            }
        }
        RbfCost { prefix, m, scale }
    }

    /// Scaled cost of the subsampled segment `[a, b)`.
    fn cost(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a < b && b <= self.m);
        let w = self.m + 1;
        let block = self.prefix[b * w + b] - self.prefix[a * w + b] - self.prefix[b * w + a]
            + self.prefix[a * w + a];
        let len = (b - a) as f64;
        self.scale * (len - block / len)
    }
}

fn subsampled(x: &[f64], stride: usize) -> Vec<f64> {
    x.iter().step_by(stride).copied().collect()
}

/// Gram prefix size cap; bounds cost-model memory at a few tens of MB.
const MAX_COST_POINTS: usize = 3000;

/// Densest evaluation stride that divides the candidate stride and keeps the
/// Gram prefix within budget. Short series get full-resolution costs.
fn cost_stride(subsample: usize, n: usize) -> usize {
    (1..=subsample)
        .filter(|d| subsample % d == 0)
        .find(|d| n / d <= MAX_COST_POINTS)
        .unwrap_or(subsample)
}

/// Candidate boundaries sit on the `subsample` grid; segment costs are
/// estimated from a denser evaluation grid so that subsample-scale noise
/// clusters cannot fake a distribution change.
struct CostModel {
    rbf: RbfCost,
    /// DP positions in evaluation-grid units: the candidate boundaries plus
    /// the series end.
    positions: Vec<usize>,
    /// Raw samples per evaluation point.
    stride: usize,
    /// Minimum segment length in evaluation units.
    min_eval: usize,
}

fn build_cost_model(x: &[f64], p: &CpdParams) -> Option<CostModel> {
    let coarse = subsampled(x, p.subsample);
    if coarse.len() < 2 {
        return None;
    }
    let bandwidth = match p.bandwidth {
        Bandwidth::MedianHeuristic => median_heuristic_bandwidth(&coarse),
        Bandwidth::Fixed(b) => b,
    };
    let stride = cost_stride(p.subsample, x.len());
    let fine = subsampled(x, stride);
    let rbf = RbfCost::new(&fine, bandwidth, stride as f64);
    let grid_step = p.subsample / stride;
    let m = fine.len();
    let mut positions: Vec<usize> = (0..)
        .map(|k| k * grid_step)
        .take_while(|&t| t < m)
        .collect();
    positions.push(m);
    Some(CostModel {
        rbf,
        positions,
        stride,
        min_eval: p.min_segment_length * grid_step,
    })
}

impl CostModel {
    fn end(&self) -> usize {
        *self.positions.last().unwrap()
    }

    fn whole_series_cost(&self) -> f64 {
        self.rbf.cost(0, self.end())
    }

    fn boundaries_to_raw(&self, prev: &[usize]) -> Vec<usize> {
        let mut cps = Vec::new();
        let mut ti = self.positions.len() - 1;
        while ti > 0 {
            let si = prev[ti];
            if si > 0 {
                cps.push(self.positions[si] * self.stride);
            }
            ti = si;
        }
        cps.reverse();
        cps
    }
}

/// Exact minimizer of `sum of segment costs + penalty * #changepoints` over
/// boundaries on the subsample grid, with PELT pruning.
///
/// Series shorter than two subsampled points yield no changepoints.
pub fn pelt(x: &[f64], p: &CpdParams) -> Result<ChangePoints> {
    pelt_with_objective(x, p).map(|(cps, _)| cps)
}

/// [`pelt`] plus the achieved objective value, for cross-checks against the
/// unpruned dynamic program.
pub fn pelt_with_objective(x: &[f64], p: &CpdParams) -> Result<(ChangePoints, f64)> {
    p.validate()?;
    let Some(model) = build_cost_model(x, p) else {
        return Ok((ChangePoints::default(), 0.0));
    };
    if model.end() < 2 * model.min_eval {
        return Ok((ChangePoints::default(), model.whole_series_cost()));
    }
    let np = model.positions.len();
    let mut best = vec![f64::INFINITY; np];
    let mut prev = vec![0usize; np];
    best[0] = -p.penalty;
    let mut admissible: Vec<usize> = vec![0];
    let mut next_adm = 1;

    for ti in 1..np {
        let t = model.positions[ti];
        while next_adm < np - 1 && model.positions[next_adm] + model.min_eval <= t {
            if model.positions[next_adm] >= model.min_eval {
                admissible.push(next_adm);
            }
            next_adm += 1;
        }
        if t < model.min_eval {
            continue;
        }
        let mut best_val = f64::INFINITY;
        let mut best_s = 0;
        for &si in &admissible {
            let val = best[si] + model.rbf.cost(model.positions[si], t) + p.penalty;
            if val < best_val {
                best_val = val;
                best_s = si;
            }
        }
        best[ti] = best_val;
        prev[ti] = best_s;
        // PELT pruning; exact because splitting never increases kernel scatter.
        admissible.retain(|&si| best[si] + model.rbf.cost(model.positions[si], t) <= best[ti]);
    }

    Ok((ChangePoints::new(model.boundaries_to_raw(&prev)), best[np - 1]))
}

/// Unpruned optimal-partition dynamic program over the same objective.
/// Reference implementation for verifying [`pelt`]'s pruning.
pub fn exhaustive_segmentation(x: &[f64], p: &CpdParams) -> Result<(ChangePoints, f64)> {
    p.validate()?;
    let Some(model) = build_cost_model(x, p) else {
        return Ok((ChangePoints::default(), 0.0));
    };
    if model.end() < 2 * model.min_eval {
        return Ok((ChangePoints::default(), model.whole_series_cost()));
    }
    let np = model.positions.len();
    let mut best = vec![f64::INFINITY; np];
    let mut prev = vec![0usize; np];
    best[0] = -p.penalty;

    for ti in 1..np {
        let t = model.positions[ti];
        if t < model.min_eval {
            continue;
        }
        let mut best_val = f64::INFINITY;
        let mut best_s = 0;
        for si in 0..np - 1 {
            let s = model.positions[si];
            if s + model.min_eval > t || (si > 0 && s < model.min_eval) {
                continue;
            }
            if !best[si].is_finite() {
                continue;
            }
            let val = best[si] + model.rbf.cost(s, t) + p.penalty;
            if val < best_val {
                best_val = val;
                best_s = si;
            }
        }
        best[ti] = best_val;
        prev[ti] = best_s;
    }

    Ok((ChangePoints::new(model.boundaries_to_raw(&prev)), best[np - 1]))
}

/// Objective value of an arbitrary segmentation under the same cost model.
/// Boundaries must sit on the subsample grid.
pub fn segmentation_objective(x: &[f64], p: &CpdParams, cps: &ChangePoints) -> Result<f64> {
    p.validate()?;
    let Some(model) = build_cost_model(x, p) else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    let mut start = 0;
    for &c in cps.indices() {
        if c % p.subsample != 0 {
            return Err(Error::Data(format!(
                "boundary {c} is not on the stride-{} grid",
                p.subsample
            )));
        }
        let b = c / model.stride;
        total += model.rbf.cost(start, b);
        start = b;
    }
    total += model.rbf.cost(start, model.end());
    Ok(total + p.penalty * cps.count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn step_signal(lens: &[usize], levels: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut out = Vec::new();
        for (len, level) in lens.iter().zip(levels.iter()) {
            for _ in 0..*len {
                out.push(level + noise.sample(&mut rng));
            }
        }
        out
    }

    #[test]
    fn cost_of_constant_segment_is_zero() {
        let x = [5.0, 5.0, 5.0];
        let c = rbf_segment_cost(&x, 0, 3, 1.0).unwrap();
        assert!(c.abs() < 1e-12, "got {c}");
    }

    #[test]
    fn cost_vanishes_as_bandwidth_grows() {
        let x = [0.0, 3.0];
        let c = rbf_segment_cost(&x, 0, 2, 1e9).unwrap();
        assert!(c.abs() < 1e-9, "got {c}");
    }

    #[test]
    fn cost_rejects_empty_segment() {
        let x = [1.0, 2.0];
        assert!(rbf_segment_cost(&x, 1, 1, 1.0).is_err());
        assert!(rbf_segment_cost(&x, 0, 3, 1.0).is_err());
    }

    #[test]
    fn prefix_route_matches_direct_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
        let bw = 1.7;
        let fast = RbfCost::new(&x, bw, 1.0);
        for a in 0..10 {
            for b in a + 1..=10 {
                let direct = rbf_segment_cost(&x, a, b, bw).unwrap();
                assert!(
                    (fast.cost(a, b) - direct).abs() < 1e-12,
                    "segment [{a},{b})"
                );
            }
        }
    }

    #[test]
    fn constant_signal_has_no_changepoints() {
        let x = vec![2.0; 4000];
        let cps = pelt(&x, &CpdParams::default()).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn two_level_step_detected_once_at_the_boundary() {
        let x = step_signal(&[1000, 1000], &[0.0, 10.0], 0.1, 42);
        let cps = pelt(&x, &CpdParams::default()).unwrap();
        assert_eq!(cps.count(), 1, "expected exactly one changepoint, got {:?}", cps.indices());
        let c = cps.indices()[0] as i64;
        assert!((c - 1000).abs() <= 40, "boundary at {c}");
    }

    #[test]
    fn pelt_objective_matches_exhaustive_dp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for case in 0..6 {
            let n_segments = rng.random_range(1..5usize);
            let lens: Vec<usize> = (0..n_segments).map(|_| rng.random_range(200..800)).collect();
            let levels: Vec<f64> = (0..n_segments).map(|_| rng.random_range(-4.0..4.0)).collect();
            let x = step_signal(&lens, &levels, 0.3, 100 + case);
            let p = CpdParams {
                subsample: 10,
                ..CpdParams::default()
            };
            let (fast_cps, fast_obj) = pelt_with_objective(&x, &p).unwrap();
            let (slow_cps, slow_obj) = exhaustive_segmentation(&x, &p).unwrap();
            assert!(
                (fast_obj - slow_obj).abs() < 1e-9,
                "case {case}: {fast_obj} vs {slow_obj}"
            );
            assert_eq!(fast_cps, slow_cps, "case {case}");
            let recomputed = segmentation_objective(&x, &p, &fast_cps).unwrap();
            assert!((recomputed - fast_obj).abs() < 1e-9);
        }
    }

    #[test]
    fn higher_penalty_never_finds_more_changepoints() {
        let x = step_signal(&[600, 500, 700], &[0.0, 4.0, -2.0], 0.5, 21);
        let mut last = usize::MAX;
        for penalty in [1.0, 10.0, 50.0, 200.0, 2000.0] {
            let p = CpdParams {
                subsample: 20,
                penalty,
                ..CpdParams::default()
            };
            let count = pelt(&x, &p).unwrap().count();
            assert!(count <= last, "penalty {penalty} produced {count} > {last}");
            last = count;
        }
    }

    #[test]
    fn deterministic_for_identical_input() {
        let x = step_signal(&[500, 500], &[1.0, 2.0], 0.2, 5);
        let p = CpdParams::default();
        assert_eq!(pelt(&x, &p).unwrap(), pelt(&x, &p).unwrap());
    }

    #[test]
    fn short_series_yields_empty() {
        let x = vec![1.0; 39];
        let cps = pelt(&x, &CpdParams::default()).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn segments_respect_minimum_length() {
        let x = step_signal(&[400, 400, 400], &[0.0, 6.0, 0.0], 0.2, 77);
        let p = CpdParams::default();
        let cps = pelt(&x, &p).unwrap();
        let min_raw = p.subsample * p.min_segment_length;
        for (a, b) in cps.segments(x.len()) {
            assert!(b - a >= min_raw, "segment [{a},{b}) shorter than {min_raw}");
        }
    }
}
