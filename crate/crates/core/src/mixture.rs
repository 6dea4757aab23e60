//! Data distributions and the scalar clock of the Ornstein-Uhlenbeck forward
//! process `dx = -x dt + sqrt(2) dB`.
//!
//! Every component of a mixture is an isotropic Gaussian `N(m_i, sigma2 I)`.
//! After forward time `t` it becomes `N(m_i e^{-t}, gamma(t) I)` with
//! `gamma(t) = 1 + (sigma2 - 1) e^{-2t}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const ORTHOGONALITY_TOL: f64 = 1e-9;

/// `1 - e^{-2t}`, the variance injected by the forward process up to `t`.
pub fn delta(t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(delta_unchecked(t))
}

/// `1 + (sigma2 - 1) e^{-2t}`, the per-coordinate variance of a noised component.
pub fn gamma(t: f64, sigma2: f64) -> Result<f64> {
    check_time(t)?;
    check_sigma2(sigma2)?;
    Ok(gamma_unchecked(t, sigma2))
}

/// Forward time `ln(d) / 2` at which backward trajectories commit to a class.
pub fn speciation_time(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(0.5 * (d as f64).ln())
}

/// Scale `s(t) = e^{-t}` and variance `sigma2_ou(t) = e^{2t} - 1` of the OU
/// kernel written as `x = s(t) (a + sqrt(sigma2_ou) z)`.
///
/// `s^2 * sigma2_ou == delta(t)` holds exactly in exact arithmetic.
pub fn ou_scale_and_variance(t: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    Ok((( -t).exp(), (2.0 * t).exp_m1()))
}

#[inline]
pub(crate) fn delta_unchecked(t: f64) -> f64 {
    -(-2.0 * t).exp_m1()
}

#[inline]
pub(crate) fn gamma_unchecked(t: f64, sigma2: f64) -> f64 {
    1.0 + (sigma2 - 1.0) * (-2.0 * t).exp()
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::NonPositiveSigma2(sigma2));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureKind {
    /// Two components at `+m` and `-m`.
    SymmetricPair,
    /// Two components at arbitrary `m1`, `m2`.
    GeneralPair,
    /// Four components at `±m1 ± m2` with `m1 ⟂ m2`.
    OrthogonalQuad,
}

impl MixtureKind {
    pub fn n_components(self) -> usize {
        match self {
            MixtureKind::SymmetricPair | MixtureKind::GeneralPair => 2,
            MixtureKind::OrthogonalQuad => 4,
        }
    }

    fn n_mean_vectors(self) -> usize {
        match self {
            MixtureKind::SymmetricPair => 1,
            MixtureKind::GeneralPair | MixtureKind::OrthogonalQuad => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            MixtureKind::SymmetricPair => "symmetric_pair",
            MixtureKind::GeneralPair => "general_pair",
            MixtureKind::OrthogonalQuad => "orthogonal_quad",
        }
    }
}

/// Index of a mixture component.
///
/// For a symmetric pair, index 0 is the `+m` class (`c = +1`) and index 1 is
/// the `-m` class (`c = -1`). For an orthogonal quad the components are
/// ordered `m1+m2, m1-m2, -m1+m2, -m1-m2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub usize);

impl ClassLabel {
    pub const PLUS: ClassLabel = ClassLabel(0);
    pub const MINUS: ClassLabel = ClassLabel(1);

    pub fn from_sign(c: i8) -> Option<Self> {
        match c {
            1 => Some(Self::PLUS),
            -1 => Some(Self::MINUS),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.0
    }

    /// `+1` for index 0, `-1` otherwise. Only meaningful for pairs.
    pub fn sign(self) -> f64 {
        if self.0 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Serialized form of a [`MixtureSpec`]. Means and weights are optional and
/// fall back to the defaults of each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRepr {
    pub kind: MixtureKind,
    pub dim: usize,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_vectors: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MixtureRepr {
    /// Every invariant this representation violates, in a fixed order.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if self.dim < 1 {
            out.push(Error::InvalidDimension(self.dim));
        }
        if check_sigma2(self.sigma2).is_err() {
            out.push(Error::NonPositiveSigma2(self.sigma2));
        }
        let means = self.resolved_means();
        let expected = self.kind.n_mean_vectors();
        if means.len() != expected {
            out.push(Error::MeanCount {
                kind: self.kind.name(),
                expected,
                got: means.len(),
            });
        }
        for (index, m) in means.iter().enumerate() {
            if m.len() != self.dim {
                out.push(Error::MeanLength {
                    index,
                    len: m.len(),
                    dim: self.dim,
                });
            }
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            out.push(Error::NonFiniteMean);
        }
        if let Some(w) = &self.weights {
            let n = self.kind.n_components();
            if w.len() != n {
                out.push(Error::InvalidWeights(format!(
                    "expected {n} weights, got {}",
                    w.len()
                )));
            } else if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                out.push(Error::InvalidWeights("negative or non-finite weight".into()));
            } else if (w.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SUM_TOL {
                out.push(Error::InvalidWeights(format!(
                    "sum is {}",
                    w.iter().sum::<f64>()
                )));
            } else if w.iter().any(|v| (v - 1.0 / n as f64).abs() > WEIGHT_SUM_TOL) {
                out.push(Error::UnequalWeights(w.clone()));
            }
        }
        if self.kind == MixtureKind::OrthogonalQuad
            && means.len() == 2
            && means[0].len() == means[1].len()
        {
            let dot = dot(&means[0], &means[1]);
            let tol = ORTHOGONALITY_TOL * norm(&means[0]) * norm(&means[1]);
            if dot.abs() > tol {
                out.push(Error::NotOrthogonal { dot, tol });
            }
        }
        out
    }

    fn resolved_means(&self) -> Vec<Vec<f64>> {
        if let Some(m) = &self.mean_vectors {
            return m.clone();
        }
        let d = self.dim;
        match self.kind {
            MixtureKind::SymmetricPair => vec![vec![1.0; d]],
            MixtureKind::GeneralPair => vec![vec![1.0; d], vec![-1.0; d]],
            MixtureKind::OrthogonalQuad => {
                let half = d.div_ceil(2);
                let m1 = (0..d).map(|i| if i < half { 1.0 } else { 0.0 }).collect();
                let m2 = (0..d).map(|i| if i < half { 0.0 } else { 1.0 }).collect();
                vec![m1, m2]
            }
        }
    }
}

/// The data distribution: an equal-weight mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct MixtureSpec {
    kind: MixtureKind,
    dim: usize,
    sigma2: f64,
    mean_vectors: Vec<Vec<f64>>,
    /// Component centers at t = 0, expanded from `mean_vectors`.
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MixtureRepr> for MixtureSpec {
    type Error = Error;

    fn try_from(repr: MixtureRepr) -> Result<Self> {
        if let Some(e) = repr.violations().into_iter().next() {
            return Err(e);
        }
        let mean_vectors = repr.resolved_means();
        let centers = match repr.kind {
            MixtureKind::SymmetricPair => {
                let m = &mean_vectors[0];
                vec![m.clone(), m.iter().map(|v| -v).collect()]
            }
            MixtureKind::GeneralPair => mean_vectors.clone(),
            MixtureKind::OrthogonalQuad => {
                let (m1, m2) = (&mean_vectors[0], &mean_vectors[1]);
                [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                    .iter()
                    .map(|(a, b)| m1.iter().zip(m2).map(|(x, y)| a * x + b * y).collect())
                    .collect()
            }
        };
        let n = repr.kind.n_components();
        Ok(MixtureSpec {
            kind: repr.kind,
            dim: repr.dim,
            sigma2: repr.sigma2,
            mean_vectors,
            centers,
            weights: vec![1.0 / n as f64; n],
        })
    }
}

impl From<MixtureSpec> for MixtureRepr {
    fn from(spec: MixtureSpec) -> Self {
        MixtureRepr {
            kind: spec.kind,
            dim: spec.dim,
            sigma2: spec.sigma2,
            mean_vectors: Some(spec.mean_vectors),
            weights: Some(spec.weights),
        }
    }
}

impl MixtureSpec {
    /// Symmetric pair with `m = [1, ..., 1]`, so `|m| = sqrt(d)`.
    pub fn symmetric(dim: usize, sigma2: f64) -> Result<Self> {
        MixtureRepr {
            kind: MixtureKind::SymmetricPair,
            dim,
            sigma2,
            mean_vectors: None,
            weights: None,
        }
        .try_into()
    }

    pub fn symmetric_with_mean(m: Vec<f64>, sigma2: f64) -> Result<Self> {
        MixtureRepr {
            kind: MixtureKind::SymmetricPair,
            dim: m.len(),
            sigma2,
            mean_vectors: Some(vec![m]),
            weights: None,
        }
        .try_into()
    }

    pub fn general_pair(m1: Vec<f64>, m2: Vec<f64>, sigma2: f64) -> Result<Self> {
        MixtureRepr {
            kind: MixtureKind::GeneralPair,
            dim: m1.len(),
            sigma2,
            mean_vectors: Some(vec![m1, m2]),
            weights: None,
        }
        .try_into()
    }

    pub fn orthogonal_quad(m1: Vec<f64>, m2: Vec<f64>, sigma2: f64) -> Result<Self> {
        MixtureRepr {
            kind: MixtureKind::OrthogonalQuad,
            dim: m1.len(),
            sigma2,
            mean_vectors: Some(vec![m1, m2]),
            weights: None,
        }
        .try_into()
    }

    pub fn kind(&self) -> MixtureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The stored mean vectors (`m`, or `m1, m2`).
    pub fn mean_vectors(&self) -> &[Vec<f64>] {
        &self.mean_vectors
    }

    pub fn n_components(&self) -> usize {
        self.centers.len()
    }

    /// Center of component `c` at t = 0.
    pub fn center(&self, c: ClassLabel) -> Result<&[f64]> {
        self.check_label(c)?;
        Ok(&self.centers[c.0])
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn check_label(&self, c: ClassLabel) -> Result<()> {
        if c.0 >= self.n_components() {
            return Err(Error::LabelOutOfRange {
                label: c.0,
                n_components: self.n_components(),
            });
        }
        Ok(())
    }

    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Unit vector defining the projected coordinate `q = x . axis`.
    ///
    /// Symmetric pair: `m / |m|`. General pair: `(m1 - m2) / |m1 - m2|`.
    /// Orthogonal quad: `m1 / |m1|`.
    pub fn projection_axis(&self) -> Vec<f64> {
        let raw: Vec<f64> = match self.kind {
            MixtureKind::SymmetricPair | MixtureKind::OrthogonalQuad => {
                self.mean_vectors[0].clone()
            }
            MixtureKind::GeneralPair => self.mean_vectors[0]
                .iter()
                .zip(&self.mean_vectors[1])
                .map(|(a, b)| a - b)
                .collect(),
        };
        let n = norm(&raw);
        if n == 0.0 {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            return e;
        }
        raw.into_iter().map(|v| v / n).collect()
    }

    /// A unit vector orthogonal to every mean vector, if one exists.
    pub fn transverse_axis(&self) -> Option<Vec<f64>> {
        // Gram-Schmidt of the canonical basis against the mean span.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for m in &self.mean_vectors {
            let mut v = m.clone();
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= p * bi);
            }
            let n = norm(&v);
            if n > 1e-12 {
                basis.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        for i in 0..self.dim {
            let mut v = vec![0.0; self.dim];
            v[i] = 1.0;
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= p * bi);
            }
            let n = norm(&v);
            if n > 1e-6 {
                return Some(v.into_iter().map(|x| x / n).collect());
            }
        }
        None
    }
}

/// Diffusion clock: horizon, number of Euler steps, recording stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_f: f64,
    pub steps: usize,
    pub record_stride: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            t_f: 8.0,
            steps: 800,
            record_stride: 10,
        }
    }
}

impl Schedule {
    pub fn new(t_f: f64, steps: usize, record_stride: usize) -> Result<Self> {
        let s = Schedule {
            t_f,
            steps,
            record_stride,
        };
        s.validate()?;
        Ok(s)
    }

    /// Schedule with step `dt` over `[0, t_f]`; `t_f / dt` must be an integer.
    pub fn with_dt(t_f: f64, dt: f64, record_stride: usize) -> Result<Self> {
        let steps = (t_f / dt).round();
        if !(steps >= 1.0) || ((steps * dt) - t_f).abs() > 1e-9 * t_f.max(1.0) {
            return Err(Error::InvalidSchedule(format!(
                "t_f = {t_f} is not a whole number of steps of {dt}"
            )));
        }
        Schedule::new(t_f, steps as usize, record_stride)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f.is_finite() && self.t_f > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "t_f must be positive, got {}",
                self.t_f
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidSchedule("steps must be positive".into()));
        }
        if self.record_stride == 0 || !self.steps.is_multiple_of(self.record_stride) {
            return Err(Error::InvalidSchedule(format!(
                "record_stride {} must divide steps {}",
                self.record_stride, self.steps
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_f / self.steps as f64
    }

    /// Forward time after `step` backward steps, `t_f (L - step) / L`.
    ///
    /// Computed from integers so that grid times compare exactly with
    /// decimal switch times such as `0.69`.
    #[inline]
    pub fn time_at(&self, step: usize) -> f64 {
        self.t_f * (self.steps - step) as f64 / self.steps as f64
    }

    /// Step index whose grid time equals `t` (within 1e-9), if any.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        let k = ((self.t_f - t) / self.dt()).round();
        if !(0.0..=self.steps as f64).contains(&k) {
            return None;
        }
        let k = k as usize;
        ((self.time_at(k) - t).abs() <= 1e-9 * self.t_f.max(1.0)).then_some(k)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
