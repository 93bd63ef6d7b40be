use serde::{Deserialize, Serialize};

use super::decompose::{decompose, DecomposeParams};
use super::irf::IrfParams;
use crate::error::{Error, Result};
use crate::ingest::EdaSeries;

/// Compactness penalty on the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compactness {
    /// mean(√driver): grows when the same mass is spread over more samples.
    #[default]
    MeanSqrtDriver,
    /// mean(driver). With a unit-area kernel this is the mean phasic level
    /// whatever the time constants, so it does not discriminate between them.
    MeanDriver,
}

impl Compactness {
    pub fn eval(self, driver: &[f64]) -> f64 {
        let n = driver.len().max(1) as f64;
        match self {
            Compactness::MeanSqrtDriver => driver.iter().map(|d| d.sqrt()).sum::<f64>() / n,
            Compactness::MeanDriver => driver.iter().sum::<f64>() / n,
        }
    }
}

/// Log-spaced search ranges for the two time constants, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBox {
    pub tau1: (f64, f64),
    pub tau2: (f64, f64),
    pub grid: usize,
    pub refine_grid: usize,
    /// Weight of the compactness penalty.
    pub beta: f64,
    pub penalty: Compactness,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox {
            tau1: (0.2, 2.0),
            tau2: (0.8, 8.0),
            grid: 8,
            refine_grid: 5,
            beta: 0.1,
            penalty: Compactness::default(),
        }
    }
}

impl SearchBox {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi > lo && hi.is_finite();
        if !ok(self.tau1) || !ok(self.tau2) {
            return Err(Error::Parameter(format!(
                "degenerate IRF search box tau1 {:?}, tau2 {:?}",
                self.tau1, self.tau2
            )));
        }
        if self.tau1.0 >= self.tau2.1 {
            return Err(Error::Parameter(format!(
                "IRF search box has no point with tau1 < tau2 (tau1 {:?}, tau2 {:?})",
                self.tau1, self.tau2
            )));
        }
        if self.grid < 2 || !(self.beta >= 0.0) {
            return Err(Error::Parameter("IRF search needs grid >= 2 and beta >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfFit {
    pub params: IrfParams,
    pub objective: f64,
    pub evaluations: usize,
    /// Set when the objective did not depend on the time constants and the
    /// defaults were returned.
    pub flat: bool,
}

/// `residual_rms + beta · penalty(driver)` of the decomposition under `irf`.
pub fn irf_objective(
    series: &EdaSeries,
    irf: IrfParams,
    params: &DecomposeParams,
    beta: f64,
    penalty: Compactness,
) -> Result<f64> {
    let d = decompose(series, irf, params)?;
    Ok(d.residual_rms + beta * penalty.eval(&d.driver))
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Grid search over the box, then one finer grid around the best point.
pub fn optimize_irf(series: &EdaSeries, search: &SearchBox, params: &DecomposeParams) -> Result<IrfFit> {
    search.validate()?;
    let mut evaluations = 0;
    let mut values: Vec<(IrfParams, f64)> = Vec::new();
    let mut last_err = None;
    let mut eval = |t1: f64, t2: f64, values: &mut Vec<(IrfParams, f64)>| {
        if t1 >= t2 {
            return;
        }
        let p = IrfParams { tau1_s: t1, tau2_s: t2 };
        evaluations += 1;
        match irf_objective(series, p, params, search.beta, search.penalty) {
            Ok(j) => values.push((p, j)),
            Err(e) => {
                log::debug!("IRF ({t1}, {t2}) not evaluable: {e}");
                last_err = Some(e);
            }
        }
    };

    let g1 = log_space(search.tau1.0, search.tau1.1, search.grid);
    let g2 = log_space(search.tau2.0, search.tau2.1, search.grid);
    for &t1 in &g1 {
        for &t2 in &g2 {
            eval(t1, t2, &mut values);
        }
    }
    let Some(&(best, _)) = values.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
        return Err(last_err.unwrap_or_else(|| Error::Parameter("IRF search evaluated no point".into())));
    };
    let (jmin, jmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.1), hi.max(v.1)));
    if jmax - jmin <= 1e-6 {
        return Ok(IrfFit {
            params: IrfParams::default(),
            objective: jmin,
            evaluations,
            flat: true,
        });
    }

    // One grid step either side in log space.
    let r1 = (search.tau1.1 / search.tau1.0).powf(1.0 / (search.grid - 1) as f64);
    let r2 = (search.tau2.1 / search.tau2.0).powf(1.0 / (search.grid - 1) as f64);
    let f1 = log_space(best.tau1_s / r1, best.tau1_s * r1, search.refine_grid);
    let f2 = log_space(best.tau2_s / r2, best.tau2_s * r2, search.refine_grid);
    for &t1 in &f1 {
        for &t2 in &f2 {
            eval(t1, t2, &mut values);
        }
    }
    let &(params, objective) = values.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    Ok(IrfFit {
        params,
        objective,
        evaluations,
        flat: false,
    })
}
