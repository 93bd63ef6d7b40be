//! Bateman (bi-exponential) impulse response and the convolution operator
//! built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rise and recovery time constants of the impulse response, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrfParams {
    pub tau1_s: f64,
    pub tau2_s: f64,
}

impl Default for IrfParams {
    fn default() -> Self {
        IrfParams {
            tau1_s: 0.7,
            tau2_s: 2.0,
        }
    }
}

impl IrfParams {
    pub fn new(tau1_s: f64, tau2_s: f64) -> Result<Self> {
        let p = IrfParams { tau1_s, tau2_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1_s > 0.0 && self.tau1_s.is_finite() && self.tau2_s.is_finite()) {
            return Err(Error::Parameter(format!(
                "time constants must be positive and finite (tau1 = {}, tau2 = {})",
                self.tau1_s, self.tau2_s
            )));
        }
        if self.tau1_s >= self.tau2_s {
            return Err(Error::Parameter(format!(
                "tau1 ({}) must be smaller than tau2 ({})",
                self.tau1_s, self.tau2_s
            )));
        }
        Ok(())
    }

    /// Continuous response `(e^{-t/τ2} − e^{-t/τ1}) / (τ2 − τ1)`; zero for t < 0.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        ((-t / self.tau2_s).exp() - (-t / self.tau1_s).exp()) / (self.tau2_s - self.tau1_s)
    }

    /// Time of the continuous response maximum, `τ1τ2/(τ2−τ1)·ln(τ2/τ1)`.
    pub fn peak_time_s(&self) -> f64 {
        self.tau1_s * self.tau2_s / (self.tau2_s - self.tau1_s) * (self.tau2_s / self.tau1_s).ln()
    }
}

/// Sum over k ≥ 0 of the continuous response sampled at kΔ, times Δ.
///
/// At 4 Hz with the default constants this is ≈ 0.99622 rather than 1; the
/// sampled kernel is divided by it so that a driver of area A produces a
/// conductance response of area A.
pub fn discrete_gain(params: &IrfParams, rate_hz: f64) -> f64 {
    let dt = 1.0 / rate_hz;
    let a1 = (-dt / params.tau1_s).exp();
    let a2 = (-dt / params.tau2_s).exp();
    dt / (params.tau2_s - params.tau1_s) * (1.0 / (1.0 - a2) - 1.0 / (1.0 - a1))
}

/// Sampled, unit-area Bateman kernel covering `[0, duration_s]`.
pub fn bateman_irf(params: &IrfParams, duration_s: f64, rate_hz: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::Parameter(format!("rate {rate_hz} Hz must be positive")));
    }
    if !(duration_s >= 10.0 * params.tau2_s) {
        return Err(Error::Parameter(format!(
            "kernel duration {duration_s} s must cover 10·tau2 = {} s",
            10.0 * params.tau2_s
        )));
    }
    let gain = discrete_gain(params, rate_hz);
    let n = (duration_s * rate_hz).floor() as usize + 1;
    Ok((0..n).map(|k| params.eval(k as f64 / rate_hz) / gain).collect())
}

/// Causal convolution with the unit-area sampled kernel:
/// `phasic[n] = Δ · Σ_{k≥0} h[k] · driver[n − k]`.
///
/// The kernel is a difference of two geometric sequences, so both the
/// operator and its adjoint run as a pair of first-order recursions in O(n)
/// with no truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrfOperator {
    pub params: IrfParams,
    pub rate_hz: f64,
    a1: f64,
    a2: f64,
    scale: f64,
}

/// Recursion state carried between consecutive blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IrfState {
    s1: f64,
    s2: f64,
}

impl IrfOperator {
    pub fn new(params: IrfParams, rate_hz: f64) -> Result<Self> {
        params.validate()?;
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::Parameter(format!("rate {rate_hz} Hz must be positive")));
        }
        let dt = 1.0 / rate_hz;
        let gain = discrete_gain(&params, rate_hz);
        Ok(IrfOperator {
            params,
            rate_hz,
            a1: (-dt / params.tau1_s).exp(),
            a2: (-dt / params.tau2_s).exp(),
            scale: dt / (params.tau2_s - params.tau1_s) / gain,
        })
    }

    /// Per-sample kernel weight Δ·h[k]; these sum to 1 over k ≥ 0.
    pub fn weight(&self, k: usize) -> f64 {
        self.scale * (self.a2.powi(k as i32) - self.a1.powi(k as i32))
    }

    /// Upper bound on the operator norm (the kernel's l1 norm).
    pub fn norm_bound(&self) -> f64 {
        1.0
    }

    /// Number of samples after which the kernel weight falls below `rel` of its peak.
    pub fn support_len(&self, rel: f64) -> usize {
        let peak = (0..4 * self.rate_hz as usize * 10)
            .map(|k| self.weight(k))
            .fold(0.0, f64::max);
        let mut k = (self.params.peak_time_s() * self.rate_hz) as usize;
        while self.weight(k) > rel * peak {
            k += 1;
        }
        k
    }

    pub fn forward(&self, driver: &[f64], out: &mut [f64]) {
        self.forward_from(IrfState::default(), driver, out);
    }

    /// Forward pass starting from a carried state; returns the final state.
    pub fn forward_from(&self, state: IrfState, driver: &[f64], out: &mut [f64]) -> IrfState {
        debug_assert_eq!(driver.len(), out.len());
        let (mut s1, mut s2) = (state.s1, state.s2);
        for (o, &d) in out.iter_mut().zip(driver) {
            s1 = self.a1 * s1 + d;
            s2 = self.a2 * s2 + d;
            *o = self.scale * (s2 - s1);
        }
        IrfState { s1, s2 }
    }

    /// Advances a state over `driver` without producing output.
    pub fn advance(&self, state: IrfState, driver: &[f64]) -> IrfState {
        let (mut s1, mut s2) = (state.s1, state.s2);
        for &d in driver {
            s1 = self.a1 * s1 + d;
            s2 = self.a2 * s2 + d;
        }
        IrfState { s1, s2 }
    }

    /// Free response of a carried state over the next `out.len()` samples.
    pub fn carry(&self, state: IrfState, out: &mut [f64]) {
        let (mut s1, mut s2) = (state.s1, state.s2);
        for o in out.iter_mut() {
            s1 *= self.a1;
            s2 *= self.a2;
            *o = self.scale * (s2 - s1);
        }
    }

    /// Adjoint: `out[m] = Σ_{n≥m} Δ·h[n − m] · r[n]`.
    pub fn adjoint(&self, residual: &[f64], out: &mut [f64]) {
        debug_assert_eq!(residual.len(), out.len());
        let (mut u1, mut u2) = (0.0, 0.0);
        for (o, &r) in out.iter_mut().zip(residual).rev() {
            u1 = self.a1 * u1 + r;
            u2 = self.a2 * u2 + r;
            *o = self.scale * (u2 - u1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irf_is_zero_at_origin() {
        let p = IrfParams::default();
        assert_eq!(p.eval(0.0), 0.0);
        let k = bateman_irf(&p, 20.0, 4.0).unwrap();
        assert_eq!(k[0], 0.0);
        assert!(k.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn continuous_integral_is_one() {
        // Composite Simpson on [0, 60 s]; the tail beyond is e^{-30}-small.
        let p = IrfParams::default();
        let n = 600_000;
        let h = 60.0 / n as f64;
        let mut s = p.eval(0.0) + p.eval(60.0);
        for i in 1..n {
            s += p.eval(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn peak_time_matches_derivative_root() {
        let p = IrfParams::default();
        let tp = p.peak_time_s();
        assert!((tp - 1.1305776725370373).abs() < 1e-12);
        let deriv = |t: f64| (-t / p.tau1_s).exp() / p.tau1_s - (-t / p.tau2_s).exp() / p.tau2_s;
        assert!(deriv(tp).abs() < 1e-12);
    }

    #[test]
    fn raw_sampled_formula_misses_unit_area_at_4hz() {
        // Euler-Maclaurin: trapezoid error ≈ Δ²/12 · IRF'(0) ≈ 3.7e-3.
        let p = IrfParams::default();
        let g = discrete_gain(&p, 4.0);
        assert!((g - 0.996_291_370_8).abs() < 1e-9, "{g}");
        // Over [0, 10·τ2] only, the raw samples give ≈ 0.99622.
        let raw: Vec<f64> = (0..=80).map(|k| p.eval(k as f64 / 4.0)).collect();
        let area: f64 = raw.windows(2).map(|w| 0.125 * (w[0] + w[1])).sum();
        assert!((area - 0.99622).abs() < 1e-5, "{area}");
        assert!((area - 1.0).abs() > 1e-3);
    }

    #[test]
    fn normalized_kernel_has_unit_trapezoid_area() {
        let p = IrfParams::default();
        let k = bateman_irf(&p, 10.0 * p.tau2_s, 4.0).unwrap();
        let area: f64 = k.windows(2).map(|w| 0.125 * (w[0] + w[1])).sum();
        assert!((area - 1.0).abs() < 1e-3, "{area}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(IrfParams::new(2.0, 0.7).is_err());
        assert!(IrfParams::new(1.0, 1.0).is_err());
        assert!(bateman_irf(&IrfParams::default(), 5.0, 4.0).is_err());
        assert!(bateman_irf(&IrfParams::default(), 20.0, 0.0).is_err());
    }

    #[test]
    fn operator_matches_direct_convolution() {
        let op = IrfOperator::new(IrfParams::default(), 4.0).unwrap();
        let driver: Vec<f64> = (0..300).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let mut fast = vec![0.0; driver.len()];
        op.forward(&driver, &mut fast);
        for n in 0..driver.len() {
            let direct: f64 = (0..=n).map(|k| op.weight(k) * driver[n - k]).sum();
            assert!((fast[n] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity() {
        let op = IrfOperator::new(IrfParams::new(0.5, 3.0).unwrap(), 4.0).unwrap();
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..200).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut kx = vec![0.0; 200];
        let mut kty = vec![0.0; 200];
        op.forward(&x, &mut kx);
        op.adjoint(&y, &mut kty);
        let lhs: f64 = kx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&kty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn carried_state_continues_the_convolution() {
        let op = IrfOperator::new(IrfParams::default(), 4.0).unwrap();
        let driver: Vec<f64> = (0..100).map(|i| if i % 17 == 3 { 1.0 } else { 0.0 }).collect();
        let mut whole = vec![0.0; 100];
        op.forward(&driver, &mut whole);
        let state = op.advance(IrfState::default(), &driver[..60]);
        let mut tail = vec![0.0; 40];
        op.forward_from(state, &driver[60..], &mut tail);
        for (a, b) in whole[60..].iter().zip(&tail) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut free = vec![0.0; 40];
        op.carry(state, &mut free);
        let mut only_new = vec![0.0; 40];
        op.forward(&driver[60..], &mut only_new);
        for i in 0..40 {
            assert!((free[i] + only_new[i] - tail[i]).abs() < 1e-12);
        }
    }
}
