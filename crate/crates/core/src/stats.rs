//! Order statistics, moments and kernel density estimates shared by the
//! analysis modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Percentile by linear interpolation between closest ranks:
/// rank = p/100 · (n − 1) on the sorted values.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("percentile of empty list".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Parameter(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

/// As [`percentile`], for input that is already sorted ascending and non-empty.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Which denominator a standard deviation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdKind {
    /// n − 1
    #[default]
    Sample,
    /// n
    Population,
}

/// Two-pass standard deviation. `None` when there are too few values for the
/// requested denominator.
pub fn std_dev(values: &[f64], kind: SdKind) -> Option<f64> {
    let n = values.len();
    let denom = match kind {
        SdKind::Sample if n >= 2 => (n - 1) as f64,
        SdKind::Population if n >= 1 => n as f64,
        _ => return None,
    };
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / denom).sqrt())
}

/// Boxplot statistics with linear-interpolation quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub mean: f64,
}

impl FiveNumber {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("summary of empty list".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = percentile_sorted(&sorted, 25.0);
        let q3 = percentile_sorted(&sorted, 75.0);
        Ok(FiveNumber {
            n: sorted.len(),
            min: sorted[0],
            q1,
            median: percentile_sorted(&sorted, 50.0),
            q3,
            max: sorted[sorted.len() - 1],
            iqr: q3 - q1,
            mean: mean(&sorted).unwrap_or(f64::NAN),
        })
    }
}

/// Bandwidth selection for the Gaussian KDE.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Bandwidth {
    /// 0.9 · min(sd, IQR/1.34) · n^(−1/5)
    #[default]
    Silverman,
    Fixed(f64),
}

/// Density curve sampled on an even grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl KdeCurve {
    /// Grid location of the density maximum.
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        self.x[i]
    }

    pub fn trapezoid_area(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

pub const KDE_GRID_POINTS: usize = 256;

/// Gaussian KDE evaluated on `grid_points` evenly spaced points spanning
/// `[min, max]` of the data, rescaled so the trapezoid area over that grid is 1.
pub fn gaussian_kde(values: &[f64], bandwidth: Bandwidth, grid_points: usize) -> Result<KdeCurve> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(
            "KDE needs at least two observations".into(),
        ));
    }
    if grid_points < 2 {
        return Err(Error::Parameter("KDE grid needs at least two points".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if !(hi > lo) {
        return Err(Error::InsufficientData("KDE of constant data".into()));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => {
            let sd = std_dev(&sorted, SdKind::Sample).unwrap_or(0.0);
            let iqr = percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * (n as f64).powf(-0.2)
        }
        Bandwidth::Fixed(h) => h,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("KDE bandwidth {h} must be positive")));
    }

    let step = (hi - lo) / (grid_points - 1) as f64;
    let x: Vec<f64> = (0..grid_points).map(|i| lo + step * i as f64).collect();
    let cutoff = 8.0 * h;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut density: Vec<f64> = x
        .iter()
        .map(|&xg| {
            let from = sorted.partition_point(|&v| v < xg - cutoff);
            let to = sorted.partition_point(|&v| v <= xg + cutoff);
            let s: f64 = sorted[from..to]
                .iter()
                .map(|&v| {
                    let u = (xg - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            s * norm
        })
        .collect();

    let area = trapezoid(&x, &density);
    if area > 0.0 {
        density.iter_mut().for_each(|d| *d /= area);
    }
    Ok(KdeCurve {
        bandwidth: h,
        x,
        density,
    })
}
