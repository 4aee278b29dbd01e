//! Small numeric helpers shared across the pipeline.

/// Arithmetic mean; 0.0 for an empty slice.
pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation; 0.0 for fewer than two points.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64;
    var.sqrt()
}

/// Quantile with linear interpolation between order statistics.
///
/// `p` is clamped to [0, 1]. Panics on an empty slice.
pub fn quantile(x: &[f64], p: f64) -> f64 {
    assert!(!x.is_empty(), "quantile of empty slice");
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let p = p.clamp(0.0, 1.0);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Centered moving average of nominal width `w`.
///
/// The window around index `i` covers offsets `-(w-1)/2 ..= w/2` and shrinks
/// at the series edges, so no phase shift is introduced and edge values stay
/// finite.
pub fn moving_average_centered(x: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let n = x.len();
    let left = (w - 1) / 2;
    let right = w / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(left);
        let hi = (i + right).min(n.saturating_sub(1));
        let window = &x[lo..=hi];
        out.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert!((quantile(&x, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&x, 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn moving_average_of_constant_is_constant() {
        let x = vec![3.5; 50];
        for v in moving_average_centered(&x, 20) {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_average_window_shape() {
        // width 3 over [0,1,2,3]: edges shrink to 2 points
        let x = [0.0, 1.0, 2.0, 3.0];
        let got = moving_average_centered(&x, 3);
        let want = [0.5, 1.0, 2.0, 2.5];
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn std_dev_population() {
        let x = [1.0, 3.0];
        assert!((std_dev(&x) - 1.0).abs() < 1e-12);
    }
}
