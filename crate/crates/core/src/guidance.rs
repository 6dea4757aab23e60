//! Guidance rules of the form
//!
//! ```text
//! S_guided(x, c) = S(x, c) + [S(x, c) - S(x)] * phi_t(|S(x, c) - S(x)|)
//! ```
//!
//! Constant `phi = omega` is standard classifier-free guidance. The
//! non-linear rules switch themselves off wherever the score difference
//! vanishes as long as `s * phi_t(s) -> 0` when `s -> 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{norm, ou_scale_and_variance, ClassLabel, MixtureKind, MixtureSpec};
use crate::scores::{cond_into, diff_into, Clock, ScoreEval};

/// One segment of a piecewise-constant guidance schedule: weight `omega`
/// applies from forward time `from` up to the next knot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightKnot {
    pub from: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuidanceSpec {
    #[default]
    None,
    Standard {
        omega: f64,
    },
    /// `phi(s) = omega * s^alpha`
    PowerLaw {
        omega: f64,
        alpha: f64,
    },
    /// `phi(s) = omega * s^gamma * (s(t) sigma2_ou(t))^gamma`
    RescaledPowerLaw {
        omega: f64,
        gamma_exp: f64,
    },
    /// `phi = omega` for `t` in `[t1, t2)`, zero elsewhere.
    LimitedInterval {
        omega: f64,
        interval: [f64; 2],
    },
    /// Knots sorted by `from`, the first at `from = 0`.
    WeightTable {
        weight_table: Vec<WeightKnot>,
    },
    /// `phi = omega` while `t > switch_time`, zero afterwards.
    Interrupted {
        omega: f64,
        switch_time: f64,
    },
}

fn check_omega(omega: f64, out: &mut Vec<Error>) {
    if !(omega.is_finite() && omega >= 0.0) {
        out.push(Error::InvalidOmega(omega));
    }
}

impl GuidanceSpec {
    pub fn standard(omega: f64) -> Self {
        GuidanceSpec::Standard { omega }
    }

    pub fn power_law(omega: f64, alpha: f64) -> Self {
        GuidanceSpec::PowerLaw { omega, alpha }
    }

    pub fn rescaled_power_law(omega: f64, gamma_exp: f64) -> Self {
        GuidanceSpec::RescaledPowerLaw { omega, gamma_exp }
    }

    pub fn interrupted(omega: f64, switch_time: f64) -> Self {
        GuidanceSpec::Interrupted { omega, switch_time }
    }

    /// Every violated invariant. `t_f`, when known, bounds interval ends.
    pub fn violations(&self, t_f: Option<f64>) -> Vec<Error> {
        let mut out = Vec::new();
        match self {
            GuidanceSpec::None => {}
            GuidanceSpec::Standard { omega } => check_omega(*omega, &mut out),
            GuidanceSpec::PowerLaw { omega, alpha } => {
                check_omega(*omega, &mut out);
                if !(alpha.is_finite() && *alpha > -1.0) {
                    out.push(Error::InvalidAlpha(*alpha));
                }
            }
            GuidanceSpec::RescaledPowerLaw { omega, gamma_exp } => {
                check_omega(*omega, &mut out);
                if !(gamma_exp.is_finite() && *gamma_exp > 0.0) {
                    out.push(Error::InvalidGammaExponent(*gamma_exp));
                }
            }
            GuidanceSpec::LimitedInterval {
                omega,
                interval: [lo, hi],
            } => {
                check_omega(*omega, &mut out);
                let upper_ok = t_f.is_none_or(|tf| *hi <= tf);
                if !(*lo >= 0.0 && lo < hi && hi.is_finite() && upper_ok) {
                    out.push(Error::InvalidInterval(*lo, *hi));
                }
            }
            GuidanceSpec::WeightTable { weight_table } => {
                if weight_table.is_empty() {
                    out.push(Error::InvalidWeightTable("table is empty".into()));
                } else if weight_table[0].from != 0.0 {
                    out.push(Error::InvalidWeightTable("first knot must start at t = 0".into()));
                } else if weight_table.windows(2).any(|w| !(w[0].from < w[1].from)) {
                    out.push(Error::InvalidWeightTable(
                        "knot times must be strictly increasing".into(),
                    ));
                }
                if weight_table
                    .iter()
                    .any(|k| !(k.omega.is_finite() && k.omega >= 0.0 && k.from.is_finite()))
                {
                    out.push(Error::InvalidWeightTable(
                        "weights must be finite and non-negative".into(),
                    ));
                }
            }
            GuidanceSpec::Interrupted { omega, switch_time } => {
                check_omega(*omega, &mut out);
                let below = t_f.is_none_or(|tf| *switch_time < tf);
                if !(switch_time.is_finite() && *switch_time >= 0.0 && below) {
                    out.push(Error::InvalidSwitchTime(*switch_time));
                }
            }
        }
        out
    }

    pub fn validate(&self, t_f: Option<f64>) -> Result<()> {
        match self.violations(t_f).into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Forward times where the weight jumps; the sampler records there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            GuidanceSpec::LimitedInterval {
                interval: [lo, hi], ..
            } => vec![*lo, *hi],
            GuidanceSpec::WeightTable { weight_table } => {
                weight_table.iter().map(|k| k.from).collect()
            }
            GuidanceSpec::Interrupted { switch_time, .. } => vec![*switch_time],
            _ => Vec::new(),
        }
    }

    /// Weight of the guidance term for a score difference of norm `s`.
    #[inline]
    pub(crate) fn weight(&self, s: f64, t: f64) -> f64 {
        match *self {
            GuidanceSpec::None => 0.0,
            GuidanceSpec::Standard { omega } => omega,
            GuidanceSpec::PowerLaw { omega, alpha } => omega * s.powf(alpha),
            GuidanceSpec::RescaledPowerLaw { omega, gamma_exp } => {
                // (s * s(t) sigma2_ou(t))^gamma in one power keeps it finite
                // where s^gamma underflows and the schedule factor overflows.
                omega * (s * (-t).exp() * (2.0 * t).exp_m1()).powf(gamma_exp)
            }
            GuidanceSpec::LimitedInterval {
                omega,
                interval: [lo, hi],
            } => {
                if t >= lo && t < hi {
                    omega
                } else {
                    0.0
                }
            }
            GuidanceSpec::WeightTable { ref weight_table } => weight_table
                .iter()
                .rev()
                .find(|k| k.from <= t)
                .map_or(0.0, |k| k.omega),
            GuidanceSpec::Interrupted { omega, switch_time } => {
                if t > switch_time {
                    omega
                } else {
                    0.0
                }
            }
        }
    }

    /// Scale of the guidance term `[S(x,c) - S(x)] * phi`. The term is zero
    /// when the difference is exactly zero, even if `phi` diverges there.
    #[inline]
    pub(crate) fn term_scale(&self, s: f64, t: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            self.weight(s, t)
        }
    }
}

/// Schedule factor `(s(t) sigma2_ou(t))^gamma` of the rescaled power law.
pub fn rescale_factor(t: f64, gamma_exp: f64) -> Result<f64> {
    let (s, v) = ou_scale_and_variance(t)?;
    Ok((s * v).powf(gamma_exp))
}

/// `phi_t(s)` for guidance rule `g`.
///
/// `sched_scale` is the rescaled power law's schedule factor (see
/// [`rescale_factor`]) and is ignored by every other rule. For the power law
/// with `alpha < 0` the weight diverges at `s = 0`; only the product
/// `s * phi` is used downstream and that is defined as zero there.
pub fn phi_weight(s: f64, t: f64, g: &GuidanceSpec, sched_scale: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::NegativeNorm(s));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(match *g {
        GuidanceSpec::RescaledPowerLaw { omega, gamma_exp } => {
            omega * s.powf(gamma_exp) * sched_scale
        }
        _ => g.weight(s, t),
    })
}

/// Reusable buffers for allocation-free guided score evaluation.
#[derive(Debug, Clone)]
pub(crate) struct GuidedWorkspace {
    diff: Vec<f64>,
}

impl GuidedWorkspace {
    pub fn new(dim: usize) -> Self {
        GuidedWorkspace {
            diff: vec![0.0; dim],
        }
    }

    /// Guided score into `out`; returns `|S(x,c) - S(x)|`.
    #[inline]
    pub fn guided_into(
        &mut self,
        x: &[f64],
        t: f64,
        c: ClassLabel,
        spec: &MixtureSpec,
        g: &GuidanceSpec,
        out: &mut [f64],
    ) -> f64 {
        let clock = Clock::new(t, spec.sigma2());
        cond_into(x, clock, &spec.centers()[c.index()], out);
        let s = diff_into(x, clock, c, spec, &mut self.diff);
        let w = g.term_scale(s, t);
        if w != 0.0 {
            for (o, d) in out.iter_mut().zip(&self.diff) {
                *o += w * d;
            }
        }
        s
    }
}

/// Guided score `S(x,c) + [S(x,c) - S(x)] phi_t(|S(x,c) - S(x)|)`.
pub fn guided_score(
    x: &[f64],
    t: f64,
    c: ClassLabel,
    spec: &MixtureSpec,
    g: &GuidanceSpec,
) -> Result<ScoreEval> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    spec.check_state(x)?;
    spec.check_label(c)?;
    g.validate(None)?;
    let mut ws = GuidedWorkspace::new(x.len());
    let mut vector = vec![0.0; x.len()];
    ws.guided_into(x, t, c, spec, g, &mut vector);
    let clock = Clock::new(t, spec.sigma2());
    let aux_tanh_arg = clock.k * crate::mixture::dot(x, &spec.centers()[c.index()]);
    Ok(ScoreEval {
        vector,
        aux_tanh_arg,
    })
}

/// `[S(x,c) - S(x)] * phi` on its own, with its norm.
pub fn guidance_term(
    x: &[f64],
    t: f64,
    c: ClassLabel,
    spec: &MixtureSpec,
    g: &GuidanceSpec,
) -> Result<(Vec<f64>, f64)> {
    let (mut v, s) = crate::scores::score_diff(x, t, c, spec)?;
    let w = g.term_scale(s, t);
    v.iter_mut().for_each(|d| *d *= w);
    let n = norm(&v);
    Ok((v, n))
}

fn symmetric_mean_norm(spec: &MixtureSpec) -> Result<f64> {
    if spec.kind() != MixtureKind::SymmetricPair {
        return Err(Error::UnsupportedMixture(
            "inertness bound is defined for the symmetric pair".into(),
        ));
    }
    Ok(norm(&spec.mean_vectors()[0]))
}

/// `(|m| e^{-t}/gamma_t) exp(-2 |m|^2 e^{-2t}/gamma_t)`: the score difference
/// scale after speciation, evaluated on the unguided mean path
/// `q = |m| e^{-t}`. `|m| = sqrt(d)` for the default mean.
pub fn regime2_inertness_bound(t: f64, spec: &MixtureSpec) -> Result<f64> {
    let m = symmetric_mean_norm(spec)?;
    inertness_bound_at(m * (-t).exp(), t, spec)
}

/// Same bound with the trajectory's projected coordinate `q` substituted:
/// `(|m| e^{-t}/gamma_t) exp(-2 q |m| e^{-t}/gamma_t)`.
pub fn inertness_bound_at(q: f64, t: f64, spec: &MixtureSpec) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let m = symmetric_mean_norm(spec)?;
    let clock = Clock::new(t, spec.sigma2());
    Ok(m * clock.k * (-2.0 * q * m * clock.k).exp())
}
