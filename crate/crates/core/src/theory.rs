//! Closed-form predictions for the symmetric pair with `m = [1, ..., 1]`.
//!
//! Backward time `tau` runs from `0` at `t = t_f` to `t_f` at `t = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::{speciation_time, ClassLabel};
use crate::scores::ln_cosh;

fn check_dim(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    Ok((d as f64).sqrt())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::NonPositiveSigma2(sigma2));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// Exact unguided mean of `q` at backward time `tau`, started from mean `q0`
/// at `t_f`.
pub fn mean_closed_form(q0: f64, t_f: f64, tau: f64, d: usize, sigma2: f64) -> Result<f64> {
    let sd = check_dim(d)?;
    check_sigma2(sigma2)?;
    check_time(t_f)?;
    if !(0.0..=t_f).contains(&tau) {
        return Err(Error::BackwardTimeOutOfRange { tau, t_f });
    }
    let tail = (sigma2 - 1.0) * (-2.0 * t_f).exp();
    let den = 1.0 + tail;
    Ok(q0 * tau.exp() * ((-2.0 * tau).exp() + tail) / den
        + sd * (-(t_f - tau)).exp() * -(-2.0 * tau).exp_m1() / den)
}

/// Unguided continuation of the mean after guidance stops at forward time
/// `t1`, given the overshoot `delta_q` measured there.
pub fn interrupted_mean_prediction(
    t: f64,
    t1: f64,
    delta_q: f64,
    d: usize,
    sigma2: f64,
) -> Result<f64> {
    let sd = check_dim(d)?;
    check_sigma2(sigma2)?;
    check_time(t)?;
    if t > t1 {
        return Err(Error::AfterSwitch { t, t1 });
    }
    let ratio = (1.0 + (sigma2 - 1.0) * (-2.0 * t).exp()) / (1.0 + (sigma2 - 1.0) * (-2.0 * t1).exp());
    Ok(sd * (-t).exp() + delta_q * (t - t1).exp() * ratio)
}

/// Mean of `q(0)` when guidance stops exactly at the speciation time.
pub fn interrupted_final_mean(delta_q: f64, d: usize, sigma2: f64) -> Result<f64> {
    let sd = check_dim(d)?;
    check_sigma2(sigma2)?;
    let df = d as f64;
    Ok(sd * (1.0 + delta_q * (sigma2 / df) / (1.0 + (sigma2 - 1.0) / df)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialEval {
    pub v_class: f64,
    pub v_extra: f64,
    /// `v_class + 2 omega v_extra`, whose negative slope is the regime-I drift.
    pub v_total: f64,
}

/// Effective potential of the regime-I `q` dynamics at unit variance.
pub fn effective_potential(q: f64, t: f64, d: usize, omega: f64, c: ClassLabel) -> Result<PotentialEval> {
    check_time(t)?;
    let e = (-(t - speciation_time(d)?)).exp();
    let c = c.sign();
    let v_class = 0.5 * q * q - 2.0 * c * q * e;
    let v_extra = -c * q * e + ln_cosh(q * e);
    Ok(PotentialEval {
        v_class,
        v_extra,
        v_total: v_class + 2.0 * omega * v_extra,
    })
}

/// Drift of `q` under standard guidance at unit variance:
/// `-q + 2 c e (1 + omega) - 2 omega e tanh(q e)`, `e = sqrt(d) e^{-t}`.
pub fn regime1_drift(q: f64, t: f64, d: usize, omega: f64, c: ClassLabel) -> Result<f64> {
    check_time(t)?;
    let e = check_dim(d)? * (-t).exp();
    let c = c.sign();
    Ok(-q + 2.0 * c * e * (1.0 + omega) - 2.0 * omega * e * (q * e).tanh())
}

/// `sqrt(d) e^{-t} (1 + omega)`, the ceiling for the guided mean.
pub fn mean_upper_bound(t: f64, d: usize, omega: f64) -> Result<f64> {
    check_time(t)?;
    Ok(check_dim(d)? * (-t).exp() * (1.0 + omega))
}

/// OU time of DDPM step `t_prime`: `-1/2 ln prod_{s <= t'} (1 - beta_s)` with
/// `beta` linear from `beta_start` (step 1) to `beta_end` (step `n_steps`).
pub fn ddpm_time_reparam(t_prime: usize, beta_start: f64, beta_end: f64, n_steps: usize) -> Result<f64> {
    if n_steps == 0 || t_prime > n_steps {
        return Err(Error::StepOutOfRange {
            step: t_prime,
            n_steps,
        });
    }
    let ok = |b: f64| b.is_finite() && b > 0.0 && b < 1.0;
    if !(ok(beta_start) && ok(beta_end)) {
        return Err(Error::InvalidSchedule(format!(
            "betas must lie in (0, 1), got {beta_start}, {beta_end}"
        )));
    }
    let slope = if n_steps > 1 {
        (beta_end - beta_start) / (n_steps - 1) as f64
    } else {
        0.0
    };
    let sum: f64 = (0..t_prime)
        .map(|i| (-(beta_start + slope * i as f64)).ln_1p())
        .sum();
    Ok(-0.5 * sum)
}

/// [`ddpm_time_reparam`] with the usual linear schedule, 1e-4 to 2e-2 over 1000 steps.
pub fn ddpm_time_default(t_prime: usize) -> Result<f64> {
    ddpm_time_reparam(t_prime, 1e-4, 2e-2, 1000)
}
