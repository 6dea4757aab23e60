//! Exact conditional and unconditional scores of a noised Gaussian mixture.
//!
//! At forward time `t` each component `i` is `N(mu_i e^{-t}, gamma_t I)`, so
//!
//! ```text
//! S(x, c) = (-x + mu_c e^{-t}) / gamma_t
//! S(x)    = -x / gamma_t + (e^{-t} / gamma_t) * sum_i p_i(x) mu_i
//! ```
//!
//! with `p_i` the posterior class probabilities. The symmetric pair reduces
//! the posterior mean to `m tanh(x.m e^{-t} / gamma_t)` and the orthogonal
//! quad to a ratio of sinh/cosh terms. All saturating quantities are
//! evaluated in a form that cannot overflow or cancel catastrophically.

use crate::error::{Error, Result};
use crate::mixture::{dot, gamma_unchecked, norm, ClassLabel, MixtureKind, MixtureSpec};

/// A score vector together with the tanh argument that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEval {
    pub vector: Vec<f64>,
    /// `x.m e^{-t} / gamma_t` for the symmetric pair; for other kinds the
    /// logit of the selected (or first) component direction. Diagnostic only.
    pub aux_tanh_arg: f64,
}

/// `1 - tanh(a)` without cancellation: `2 e^{-2a} / (1 + e^{-2a})`.
#[inline]
pub fn one_minus_tanh(a: f64) -> f64 {
    if a >= 0.0 {
        let z = (-2.0 * a).exp();
        2.0 * z / (1.0 + z)
    } else {
        2.0 / (1.0 + (2.0 * a).exp())
    }
}

/// `c - tanh(a)` for `c = ±1`.
#[inline]
pub fn sign_minus_tanh(c: f64, a: f64) -> f64 {
    if c > 0.0 {
        one_minus_tanh(a)
    } else {
        -one_minus_tanh(-a)
    }
}

/// `ln cosh(a)` as `|a| + ln(1 + e^{-2|a|}) - ln 2`.
#[inline]
pub fn ln_cosh(a: f64) -> f64 {
    let b = a.abs();
    b + (-2.0 * b).exp().ln_1p() - std::f64::consts::LN_2
}

/// Time-dependent scalars shared by every score formula.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Clock {
    /// `e^{-t}`
    pub decay: f64,
    pub gamma: f64,
    /// `e^{-t} / gamma_t`
    pub k: f64,
}

impl Clock {
    #[inline]
    pub fn new(t: f64, sigma2: f64) -> Self {
        let decay = (-t).exp();
        let gamma = gamma_unchecked(t, sigma2);
        Clock {
            decay,
            gamma,
            k: decay / gamma,
        }
    }
}

fn check_inputs(x: &[f64], t: f64, spec: &MixtureSpec) -> Result<Clock> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    spec.check_state(x)?;
    Ok(Clock::new(t, spec.sigma2()))
}

/// Posterior class probabilities `p_i(x)` at time `t`, via log-sum-exp.
pub(crate) fn posteriors_into(x: &[f64], clock: Clock, spec: &MixtureSpec, p: &mut [f64]) {
    let centers = spec.centers();
    let e2 = clock.decay * clock.decay;
    let mut max = f64::NEG_INFINITY;
    for (pi, mu) in p.iter_mut().zip(centers) {
        *pi = clock.k * dot(x, mu) - 0.5 * e2 * dot(mu, mu) / clock.gamma;
        if *pi > max {
            max = *pi;
        }
    }
    let mut sum = 0.0;
    for pi in p.iter_mut() {
        *pi = (*pi - max).exp();
        sum += *pi;
    }
    for pi in p.iter_mut() {
        *pi /= sum;
    }
}

/// `S(x, c)` written into `out`; returns the class logit `x.mu_c e^{-t}/gamma_t`.
pub(crate) fn cond_into(x: &[f64], clock: Clock, mu: &[f64], out: &mut [f64]) -> f64 {
    for ((o, xi), mi) in out.iter_mut().zip(x).zip(mu) {
        *o = (-xi + mi * clock.decay) / clock.gamma;
    }
    clock.k * dot(x, mu)
}

/// `S(x)` written into `out`; returns the diagnostic tanh argument.
pub(crate) fn uncond_into(x: &[f64], clock: Clock, spec: &MixtureSpec, out: &mut [f64]) -> f64 {
    let means = spec.mean_vectors();
    match spec.kind() {
        MixtureKind::SymmetricPair => {
            let m = &means[0];
            let a = clock.k * dot(x, m);
            let th = a.tanh();
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(m) {
                *o = -xi / clock.gamma + mi * clock.k * th;
            }
            a
        }
        MixtureKind::GeneralPair => {
            let mut p = [0.0; 2];
            posteriors_into(x, clock, spec, &mut p);
            let (m1, m2) = (&means[0], &means[1]);
            for (i, o) in out.iter_mut().enumerate() {
                *o = -x[i] / clock.gamma + clock.k * (p[0] * m1[i] + p[1] * m2[i]);
            }
            // Half the logit gap equals x.m e^{-t}/gamma when m1 = -m2 = m.
            let e2 = clock.decay * clock.decay;
            0.5 * (clock.k * (dot(x, m1) - dot(x, m2))
                - 0.5 * e2 * (dot(m1, m1) - dot(m2, m2)) / clock.gamma)
        }
        MixtureKind::OrthogonalQuad => {
            let (m1, m2) = (&means[0], &means[1]);
            // u = m1 + m2, v = m1 - m2; the pair (±u) contributes sinh/cosh
            // of a = x.u k, the pair (±v) of b = x.v k, with cross weights
            // e^{∓ m1.m2 e^{-2t} / gamma}.
            let x_m1 = dot(x, m1);
            let x_m2 = dot(x, m2);
            let a = clock.k * (x_m1 + x_m2);
            let b = clock.k * (x_m1 - x_m2);
            let eps = dot(m1, m2) * clock.decay * clock.decay / clock.gamma;
            let la = ln_cosh(a) - eps;
            let lb = ln_cosh(b) + eps;
            let top = la.max(lb);
            let lse = top + ((la - top).exp() + (lb - top).exp()).ln();
            let cu = a.tanh() * (la - lse).exp();
            let cv = b.tanh() * (lb - lse).exp();
            for (i, o) in out.iter_mut().enumerate() {
                let u = m1[i] + m2[i];
                let v = m1[i] - m2[i];
                *o = -x[i] / clock.gamma + clock.k * (cu * u + cv * v);
            }
            a
        }
    }
}

/// `S(x, c) - S(x)` written into `out`; returns its Euclidean norm.
///
/// Computed as `k * sum_{i != c} p_i (mu_c - mu_i)` so the difference never
/// comes from subtracting two nearly equal scores.
pub(crate) fn diff_into(
    x: &[f64],
    clock: Clock,
    c: ClassLabel,
    spec: &MixtureSpec,
    out: &mut [f64],
) -> f64 {
    match spec.kind() {
        MixtureKind::SymmetricPair => {
            let m = &spec.mean_vectors()[0];
            let a = clock.k * dot(x, m);
            let f = clock.k * sign_minus_tanh(c.sign(), a);
            for (o, mi) in out.iter_mut().zip(m) {
                *o = mi * f;
            }
            f.abs() * norm(m)
        }
        _ => {
            let centers = spec.centers();
            let mut p = [0.0; 4];
            let p = &mut p[..centers.len()];
            posteriors_into(x, clock, spec, p);
            let mu_c = &centers[c.index()];
            out.iter_mut().for_each(|o| *o = 0.0);
            for (i, (pi, mu)) in p.iter().zip(centers).enumerate() {
                if i == c.index() {
                    continue;
                }
                for ((o, a), b) in out.iter_mut().zip(mu_c).zip(mu) {
                    *o += pi * (a - b);
                }
            }
            out.iter_mut().for_each(|o| *o *= clock.k);
            norm(out)
        }
    }
}

/// Score of class `c` at forward time `t`.
pub fn cond_score(x: &[f64], t: f64, c: ClassLabel, spec: &MixtureSpec) -> Result<ScoreEval> {
    let clock = check_inputs(x, t, spec)?;
    let mu = spec.center(c)?;
    let mut vector = vec![0.0; x.len()];
    let aux_tanh_arg = cond_into(x, clock, mu, &mut vector);
    Ok(ScoreEval {
        vector,
        aux_tanh_arg,
    })
}

/// Score of the full mixture at forward time `t`.
pub fn uncond_score(x: &[f64], t: f64, spec: &MixtureSpec) -> Result<ScoreEval> {
    let clock = check_inputs(x, t, spec)?;
    let mut vector = vec![0.0; x.len()];
    let aux_tanh_arg = uncond_into(x, clock, spec, &mut vector);
    Ok(ScoreEval {
        vector,
        aux_tanh_arg,
    })
}

/// `S(x, c) - S(x)` and its norm.
pub fn score_diff(
    x: &[f64],
    t: f64,
    c: ClassLabel,
    spec: &MixtureSpec,
) -> Result<(Vec<f64>, f64)> {
    let clock = check_inputs(x, t, spec)?;
    spec.check_label(c)?;
    let mut v = vec![0.0; x.len()];
    let n = diff_into(x, clock, c, spec, &mut v);
    Ok((v, n))
}

/// `log P_t(x)` including the normalization, by log-sum-exp over components.
pub fn log_density(x: &[f64], t: f64, spec: &MixtureSpec) -> Result<f64> {
    let clock = check_inputs(x, t, spec)?;
    let d = spec.dim() as f64;
    let log_norm = -0.5 * d * (2.0 * std::f64::consts::PI * clock.gamma).ln();
    let terms: Vec<f64> = spec
        .centers()
        .iter()
        .zip(spec.weights())
        .map(|(mu, w)| {
            let sq: f64 = x
                .iter()
                .zip(mu)
                .map(|(xi, mi)| (xi - mi * clock.decay).powi(2))
                .sum();
            w.ln() + log_norm - 0.5 * sq / clock.gamma
        })
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln())
}

/// Max-norm gap between the unconditional scores of a general pair with
/// `m1 = -m2 = m` and the symmetric pair with mean `m`.
pub fn pair_reduction_check(
    spec_general: &MixtureSpec,
    spec_symmetric: &MixtureSpec,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    if spec_general.kind() != MixtureKind::GeneralPair {
        return Err(Error::MismatchedSpecs("first spec is not a general pair".into()));
    }
    if spec_symmetric.kind() != MixtureKind::SymmetricPair {
        return Err(Error::MismatchedSpecs("second spec is not a symmetric pair".into()));
    }
    if spec_general.sigma2() != spec_symmetric.sigma2() {
        return Err(Error::MismatchedSpecs("sigma2 differs".into()));
    }
    let m = &spec_symmetric.mean_vectors()[0];
    let g = spec_general.mean_vectors();
    let neg_m: Vec<f64> = m.iter().map(|v| -v).collect();
    if g[0] != *m || g[1] != neg_m {
        return Err(Error::MismatchedSpecs("general pair is not m1 = -m2 = m".into()));
    }
    let a = uncond_score(x, t, spec_general)?;
    let b = uncond_score(x, t, spec_symmetric)?;
    Ok(a.vector
        .iter()
        .zip(&b.vector)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max))
}
