//! Euler–Maruyama integration of the backward SDE
//!
//! ```text
//! x <- x + dt (x + 2 S_guided(x, t)) + sqrt(2 dt) xi
//! ```
//!
//! from `t = t_f` down to `t = 0`, in full dimension or in the projected
//! one-dimensional coordinates of the symmetric pair. The drift of the step
//! leaving grid time `t_k` is evaluated at `t_k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::guidance::{GuidanceSpec, GuidedWorkspace};
use crate::mixture::{dot, norm, ClassLabel, MixtureKind, MixtureSpec, Schedule};
use crate::scores::{sign_minus_tanh, Clock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    #[default]
    FullState,
    /// `q = x.m/|m|` alone; symmetric pair only.
    ProjectedQ,
    /// A unit direction orthogonal to `m`; symmetric pair only.
    Transverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Stochastic,
    /// No noise: the scheme integrates the drift ODE.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `x(t_f) ~ N(0, I)`.
    #[default]
    StandardNormal,
    /// Start at `value` along the recorded axis, zero elsewhere.
    Fixed { value: f64 },
}

fn default_n_traj() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub spec: MixtureSpec,
    #[serde(default)]
    pub guidance: GuidanceSpec,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub target_class: ClassLabel,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub initial: InitialCondition,
    /// Extra forward times to record besides the stride grid. Times that do
    /// not fall on the step grid are ignored.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_record_times: Vec<f64>,
    #[serde(default)]
    pub keep_final_states: bool,
}

impl SimPlan {
    pub fn new(spec: MixtureSpec, guidance: GuidanceSpec, schedule: Schedule) -> Self {
        SimPlan {
            spec,
            guidance,
            schedule,
            target_class: ClassLabel::PLUS,
            n_traj: default_n_traj(),
            seed: 0,
            mode: SimMode::FullState,
            noise: NoiseMode::Stochastic,
            initial: InitialCondition::StandardNormal,
            extra_record_times: Vec::new(),
            keep_final_states: false,
        }
    }

    pub fn with_n_traj(mut self, n: usize) -> Self {
        self.n_traj = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_class(mut self, c: ClassLabel) -> Self {
        self.target_class = c;
        self
    }

    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if let Err(e) = self.schedule.validate() {
            out.push(e);
        }
        out.extend(self.guidance.violations(Some(self.schedule.t_f)));
        if let Err(e) = self.spec.check_label(self.target_class) {
            out.push(e);
        }
        if self.n_traj == 0 {
            out.push(Error::InvalidPlan("n_traj must be at least 1".into()));
        }
        if self.mode != SimMode::FullState && self.spec.kind() != MixtureKind::SymmetricPair {
            out.push(Error::InvalidPlan(format!(
                "{:?} mode needs a symmetric pair, got {:?}",
                self.mode,
                self.spec.kind()
            )));
        }
        if let InitialCondition::Fixed { value } = self.initial {
            if !value.is_finite() {
                out.push(Error::InvalidPlan("fixed initial value must be finite".into()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Hex SHA-256 of the plan's canonical JSON.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("plan serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Step indices at which the state is recorded, ascending.
    pub fn record_steps(&self) -> Vec<usize> {
        let sched = &self.schedule;
        let mut steps: Vec<usize> = (0..=sched.steps).step_by(sched.record_stride).collect();
        let extra = self
            .guidance
            .breakpoints()
            .into_iter()
            .chain(self.extra_record_times.iter().copied());
        steps.extend(extra.filter_map(|t| sched.step_of(t)));
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// Recorded backward trajectories.
///
/// Matrices are row-major with one row per trajectory and one column per
/// recorded time; `times` descends from `t_f` to `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub q: Vec<f64>,
    pub score_diff: Option<Vec<f64>>,
    pub final_states: Option<Vec<f64>>,
    pub dim: usize,
    pub seed: u64,
    pub fingerprint: String,
}

impl TrajectoryEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn q_at(&self, traj: usize, i: usize) -> f64 {
        self.q[traj * self.n_times() + i]
    }

    pub fn q_column(&self, i: usize) -> Vec<f64> {
        column(&self.q, self.n_times(), i)
    }

    pub fn score_diff_column(&self, i: usize) -> Option<Vec<f64>> {
        self.score_diff
            .as_ref()
            .map(|sd| column(sd, self.n_times(), i))
    }

    /// Samples of `q(0)`.
    pub fn final_q(&self) -> Vec<f64> {
        self.q_column(self.n_times() - 1)
    }

    /// Column whose time equals `t` to within `1e-9`.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.times.first().copied().unwrap_or(1.0).max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }
}

fn column(m: &[f64], n_cols: usize, i: usize) -> Vec<f64> {
    m.chunks_exact(n_cols).map(|row| row[i]).collect()
}

struct TrajRecord {
    q: Vec<f64>,
    score_diff: Vec<f64>,
    final_state: Vec<f64>,
}

/// Per-trajectory random stream: the seed picks the key, the trajectory
/// index picks the stream, so results do not depend on scheduling.
fn traj_rng(seed: u64, traj: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Runner<'a> {
    plan: &'a SimPlan,
    record: Vec<bool>,
    n_rec: usize,
    dt: f64,
    noise_scale: f64,
    axis: Vec<f64>,
    /// Grid time and clock of every step, shared by all trajectories.
    times: Vec<f64>,
    clocks: Vec<Clock>,
}

impl<'a> Runner<'a> {
    fn new(plan: &'a SimPlan) -> Self {
        let steps = plan.record_steps();
        let mut record = vec![false; plan.schedule.steps + 1];
        for &s in &steps {
            record[s] = true;
        }
        let dt = plan.schedule.dt();
        let noise_scale = match plan.noise {
            NoiseMode::Stochastic => (2.0 * dt).sqrt(),
            NoiseMode::Frozen => 0.0,
        };
        let axis = match plan.mode {
            SimMode::Transverse => Vec::new(),
            _ => plan.spec.projection_axis(),
        };
        let times: Vec<f64> = (0..=plan.schedule.steps)
            .map(|k| plan.schedule.time_at(k))
            .collect();
        let clocks = times
            .iter()
            .map(|&t| Clock::new(t, plan.spec.sigma2()))
            .collect();
        Runner {
            plan,
            record,
            n_rec: steps.len(),
            dt,
            noise_scale,
            axis,
            times,
            clocks,
        }
    }

    fn fail(&self, traj: usize, step: usize) -> Error {
        Error::NumericFailure {
            traj,
            step,
            t: self.plan.schedule.time_at(step),
        }
    }

    fn initial_scalar(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.plan.initial {
            InitialCondition::StandardNormal => normal(rng),
            InitialCondition::Fixed { value } => value,
        }
    }

    fn full(&self, traj: usize) -> Result<TrajRecord> {
        let plan = self.plan;
        let sched = &plan.schedule;
        let spec = &plan.spec;
        let d = spec.dim();
        let mut rng = traj_rng(plan.seed, traj);
        let mut x: Vec<f64> = match plan.initial {
            InitialCondition::StandardNormal => (0..d).map(|_| normal(&mut rng)).collect(),
            InitialCondition::Fixed { value } => self.axis.iter().map(|a| a * value).collect(),
        };
        let mut ws = GuidedWorkspace::new(d);
        let mut s_guided = vec![0.0; d];
        let mut q = Vec::with_capacity(self.n_rec);
        let mut sd = Vec::with_capacity(self.n_rec);
        for step in 0..=sched.steps {
            let t = sched.time_at(step);
            let s = ws.guided_into(&x, t, plan.target_class, spec, &plan.guidance, &mut s_guided);
            if self.record[step] {
                let qv = dot(&x, &self.axis);
                if !qv.is_finite() {
                    return Err(self.fail(traj, step));
                }
                q.push(qv);
                sd.push(s);
            }
            if step == sched.steps {
                break;
            }
            let mut acc = 0.0;
            for (xi, si) in x.iter_mut().zip(&s_guided) {
                let xi_new = *xi + self.dt * (*xi + 2.0 * si);
                *xi = if self.noise_scale > 0.0 {
                    xi_new + self.noise_scale * normal(&mut rng)
                } else {
                    xi_new
                };
                acc += *xi;
            }
            if !acc.is_finite() {
                return Err(self.fail(traj, step + 1));
            }
        }
        Ok(TrajRecord {
            q,
            score_diff: sd,
            final_state: if plan.keep_final_states { x } else { Vec::new() },
        })
    }

    fn projected(&self, traj: usize) -> Result<TrajRecord> {
        let plan = self.plan;
        let sched = &plan.schedule;
        let m = norm(&plan.spec.mean_vectors()[0]);
        let c = plan.target_class.sign();
        let mut rng = traj_rng(plan.seed, traj);
        let mut qv = self.initial_scalar(&mut rng);
        let mut q = Vec::with_capacity(self.n_rec);
        let mut sd = Vec::with_capacity(self.n_rec);
        for step in 0..=sched.steps {
            let (t, clock) = (self.times[step], self.clocks[step]);
            let mk = m * clock.k;
            let delta = sign_minus_tanh(c, qv * mk);
            let s = mk * delta.abs();
            if self.record[step] {
                q.push(qv);
                sd.push(s);
            }
            if step == sched.steps {
                break;
            }
            let w = plan.guidance.term_scale(s, t);
            let drift = qv * (1.0 - 2.0 / clock.gamma) + 2.0 * mk * (c + w * delta);
            qv += self.dt * drift;
            if self.noise_scale > 0.0 {
                qv += self.noise_scale * normal(&mut rng);
            }
            if !qv.is_finite() {
                return Err(self.fail(traj, step + 1));
            }
        }
        Ok(TrajRecord {
            q,
            score_diff: sd,
            final_state: if plan.keep_final_states { vec![qv] } else { Vec::new() },
        })
    }

    fn transverse(&self, traj: usize) -> Result<TrajRecord> {
        let plan = self.plan;
        let sched = &plan.schedule;
        let mut rng = traj_rng(plan.seed, traj);
        let mut p = self.initial_scalar(&mut rng);
        let mut q = Vec::with_capacity(self.n_rec);
        for step in 0..=sched.steps {
            if self.record[step] {
                q.push(p);
            }
            if step == sched.steps {
                break;
            }
            let gamma = self.clocks[step].gamma;
            p += self.dt * p * (1.0 - 2.0 / gamma);
            if self.noise_scale > 0.0 {
                p += self.noise_scale * normal(&mut rng);
            }
            if !p.is_finite() {
                return Err(self.fail(traj, step + 1));
            }
        }
        Ok(TrajRecord {
            q,
            score_diff: Vec::new(),
            final_state: if plan.keep_final_states { vec![p] } else { Vec::new() },
        })
    }

    fn run(&self, traj: usize) -> Result<TrajRecord> {
        match self.plan.mode {
            SimMode::FullState => self.full(traj),
            SimMode::ProjectedQ => self.projected(traj),
            SimMode::Transverse => self.transverse(traj),
        }
    }
}

fn assemble(plan: &SimPlan, runner: &Runner, records: Vec<TrajRecord>) -> TrajectoryEnsemble {
    let times = plan
        .record_steps()
        .into_iter()
        .map(|s| plan.schedule.time_at(s))
        .collect();
    let n = records.len();
    let mut q = Vec::with_capacity(n * runner.n_rec);
    let with_sd = plan.mode != SimMode::Transverse;
    let mut sd = Vec::with_capacity(if with_sd { n * runner.n_rec } else { 0 });
    let mut fin = Vec::new();
    for r in records {
        q.extend_from_slice(&r.q);
        sd.extend_from_slice(&r.score_diff);
        fin.extend_from_slice(&r.final_state);
    }
    let dim = match plan.mode {
        SimMode::FullState => plan.spec.dim(),
        _ => 1,
    };
    TrajectoryEnsemble {
        times,
        n_traj: n,
        q,
        score_diff: with_sd.then_some(sd),
        final_states: plan.keep_final_states.then_some(fin),
        dim,
        seed: plan.seed,
        fingerprint: plan.fingerprint(),
    }
}

/// Runs `plan` on `workers` threads (`None` uses the global pool). The
/// result is bitwise identical for any worker count.
pub fn simulate_with_workers(plan: &SimPlan, workers: Option<usize>) -> Result<TrajectoryEnsemble> {
    plan.validate()?;
    let runner = Runner::new(plan);
    let work = || {
        (0..plan.n_traj)
            .into_par_iter()
            .map(|i| runner.run(i))
            .collect::<Result<Vec<_>>>()
    };
    let records = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidPlan(format!("cannot start worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(assemble(plan, &runner, records))
}

pub fn simulate(plan: &SimPlan) -> Result<TrajectoryEnsemble> {
    simulate_with_workers(plan, None)
}

fn with_mode(plan: &SimPlan, mode: SimMode) -> SimPlan {
    let mut p = plan.clone();
    p.mode = mode;
    p
}

/// Full `d`-dimensional simulation; `q` is the projection on the class axis.
pub fn simulate_full(plan: &SimPlan) -> Result<TrajectoryEnsemble> {
    simulate(&with_mode(plan, SimMode::FullState))
}

/// One-dimensional `q` dynamics of the symmetric pair.
pub fn simulate_projected_q(plan: &SimPlan) -> Result<TrajectoryEnsemble> {
    simulate(&with_mode(plan, SimMode::ProjectedQ))
}

/// Transverse coordinate of the symmetric pair, which guidance never touches.
pub fn simulate_transverse(plan: &SimPlan) -> Result<TrajectoryEnsemble> {
    simulate(&with_mode(plan, SimMode::Transverse))
}
