//! Slow baseline (tonic level) estimation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TonicParams {
    /// Pre-smoothing moving average width, seconds.
    pub smooth_s: f64,
    /// Width of the blocks whose minima anchor the baseline, seconds.
    pub minima_window_s: f64,
    /// Final moving average width, seconds.
    pub average_s: f64,
}

impl Default for TonicParams {
    fn default() -> Self {
        TonicParams {
            smooth_s: 1.0,
            minima_window_s: 10.0,
            average_s: 30.0,
        }
    }
}

/// Centered moving average, truncated at the edges. O(n).
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 || width <= 1 {
        return x.to_vec();
    }
    let half_lo = (width - 1) / 2;
    let half_hi = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    // Shifting by the first value keeps the prefix sums small.
    let shift = x[0];
    for &v in x {
        acc += v - shift;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi + 1).min(n);
            shift + (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Tonic estimate: block minima of the smoothed signal, linearly
/// interpolated between their positions, averaged, then clamped to the
/// smoothed signal.
pub fn estimate_tonic(signal: &[f64], rate_hz: f64, params: &TonicParams) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let samples = |s: f64| ((s * rate_hz).round() as usize).max(1);
    let smoothed = moving_average(signal, samples(params.smooth_s));

    let block = samples(params.minima_window_s);
    let anchors: Vec<(usize, f64)> = (0..n)
        .step_by(block)
        .map(|start| {
            let end = (start + block).min(n);
            smoothed[start..end]
                .iter()
                .enumerate()
                .fold((start, f64::INFINITY), |acc, (i, &v)| {
                    if v < acc.1 {
                        (start + i, v)
                    } else {
                        acc
                    }
                })
        })
        .collect();

    let mut baseline = vec![0.0; n];
    let (first, last) = (anchors[0], anchors[anchors.len() - 1]);
    for (i, b) in baseline.iter_mut().enumerate() {
        if i <= first.0 {
            *b = first.1;
        } else if i >= last.0 {
            *b = last.1;
        }
    }
    for w in anchors.windows(2) {
        let ((i0, v0), (i1, v1)) = (w[0], w[1]);
        let span = (i1 - i0) as f64;
        for (k, b) in baseline[i0..=i1].iter_mut().enumerate() {
            *b = v0 + (v1 - v0) * k as f64 / span;
        }
    }

    let mut tonic = moving_average(&baseline, samples(params.average_s));
    for (t, &s) in tonic.iter_mut().zip(&smoothed) {
        *t = t.min(s);
    }
    tonic
}

/// Robust noise level: MAD of first differences, scaled for Gaussian noise.
pub fn noise_sd(signal: &[f64]) -> f64 {
    noise_sd_from_diffs(signal.windows(2).map(|w| w[1] - w[0]).collect())
}

/// As [`noise_sd`], from first differences already taken (possibly pooled
/// over several segments).
pub fn noise_sd_from_diffs(mut diffs: Vec<f64>) -> f64 {
    if diffs.len() < 2 {
        return 0.0;
    }
    diffs.iter_mut().for_each(|d| *d = d.abs());
    let mid = diffs.len() / 2;
    let (_, median, _) = diffs.select_nth_unstable_by(mid, f64::total_cmp);
    *median / (0.674_489_750_196_081_7 * std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_of_constant_is_constant() {
        let x = vec![2.5; 50];
        assert_eq!(moving_average(&x, 7), x);
    }

    #[test]
    fn moving_average_edges_truncate() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = moving_average(&x, 3);
        assert_eq!(m, vec![1.5, 2.0, 3.0, 4.0, 4.5]);
    }

    #[test]
    fn flat_signal_tonic_is_exact() {
        let x = vec![2.0; 1000];
        let t = estimate_tonic(&x, 4.0, &TonicParams::default());
        assert!(t.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn tonic_follows_linear_drift_below_signal() {
        let x: Vec<f64> = (0..2400).map(|i| 1.0 + i as f64 * 1e-4).collect();
        let t = estimate_tonic(&x, 4.0, &TonicParams::default());
        let smoothed = moving_average(&x, 4);
        for ((a, b), s) in t.iter().zip(&x).zip(&smoothed) {
            assert!(*a <= *s);
            // Truncated edge averages sit a fraction of a sample step above.
            assert!(*a <= *b + 2e-4);
            assert!(b - a < 0.01);
        }
    }

    #[test]
    fn noise_sd_of_clean_ramp_is_zero() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(noise_sd(&x), 1.0 / (0.674_489_750_196_081_7 * std::f64::consts::SQRT_2));
        assert_eq!(noise_sd(&[1.0; 10]), 0.0);
    }
}
