//! Experiment configuration: a JSON document naming either a preset or an
//! explicit simulation plan, plus run-level settings.
//!
//! Precedence is flags over file over preset defaults. A run manifest is
//! itself a valid config: its `config` field is picked up when present.

use std::path::{Path, PathBuf};

use cfglab::mixture::MixtureRepr;
use cfglab::{GuidanceSpec, Schedule, SimPlan};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;
use crate::presets::{self, Preset};

pub const SMOKE_N_TRAJ: usize = 100;
pub const DEFAULT_BINS: usize = 80;
pub const OUT_ENV: &str = "CFGLAB_OUT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// A full simulation plan in its JSON form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoke: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Write the per-trajectory CSV. Unset means only when it stays small.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_ensemble: Option<bool>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub n_traj: Option<usize>,
    pub smoke: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut v: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        if let Some(inner) = v.get_mut("config").map(Value::take) {
            v = inner;
        }
        serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// File contents (if any) with the command-line values applied on top.
    pub fn assemble(ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &ov.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if ov.preset.is_some() {
            cfg.preset = ov.preset.clone();
        }
        cfg.seed = ov.seed.or(cfg.seed);
        cfg.workers = ov.workers.or(cfg.workers);
        cfg.out = ov.out.clone().or(cfg.out);
        cfg.n_traj = ov.n_traj.or(cfg.n_traj);
        if ov.smoke {
            cfg.smoke = Some(true);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Preset(&'static Preset),
    Experiment(Box<SimPlan>),
}

/// A config with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub source: Source,
    pub seed: u64,
    pub n_traj: usize,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub bins: usize,
    pub write_ensemble: Option<bool>,
    pub smoke: bool,
}

impl Resolved {
    /// The config that reproduces this run, with all defaults made explicit.
    pub fn effective(&self) -> ExperimentConfig {
        let (preset, experiment) = match &self.source {
            Source::Preset(p) => (Some(p.name.to_string()), None),
            Source::Experiment(plan) => {
                (None, Some(serde_json::to_value(plan).expect("plan serializes")))
            }
        };
        ExperimentConfig {
            preset,
            experiment,
            seed: Some(self.seed),
            workers: self.workers,
            out: Some(self.out.clone()),
            n_traj: Some(self.n_traj),
            smoke: Some(self.smoke),
            bins: Some(self.bins),
            write_ensemble: self.write_ensemble,
        }
    }
}

fn check_source(cfg: &ExperimentConfig) -> Result<(), CliError> {
    match (&cfg.preset, &cfg.experiment) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "config names both a preset and an explicit experiment; give exactly one".into(),
        )),
        (None, None) => Err(CliError::Config(
            "config needs either a preset or an explicit experiment".into(),
        )),
        _ => Ok(()),
    }
}

fn lookup(name: &str) -> Result<&'static Preset, CliError> {
    presets::find(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset '{name}' (see `cfglab list-presets`)"
        ))
    })
}

pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, CliError> {
    check_source(cfg)?;
    let smoke = cfg.smoke.unwrap_or(false);
    let (source, default_n, default_seed, label) = match (&cfg.preset, &cfg.experiment) {
        (Some(name), _) => {
            let p = lookup(name)?;
            (Source::Preset(p), p.default_n_traj, 0, p.name.to_string())
        }
        (_, Some(v)) => {
            let plan: SimPlan = serde_json::from_value(v.clone())
                .map_err(|e| CliError::Config(format!("experiment: {e}")))?;
            let (n, s) = (plan.n_traj, plan.seed);
            (Source::Experiment(Box::new(plan)), n, s, "experiment".to_string())
        }
        _ => unreachable!(),
    };
    let n_traj = cfg
        .n_traj
        .unwrap_or(if smoke { SMOKE_N_TRAJ } else { default_n });
    if n_traj == 0 {
        return Err(CliError::Config("n_traj must be at least 1".into()));
    }
    if cfg.workers == Some(0) {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    let bins = cfg.bins.unwrap_or(DEFAULT_BINS);
    if bins == 0 {
        return Err(CliError::Config("bins must be at least 1".into()));
    }
    let out = match &cfg.out {
        Some(o) => o.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("cfglab-out"))
            .join(label),
    };
    let mut source = source;
    let seed = cfg.seed.unwrap_or(default_seed);
    if let Source::Experiment(plan) = &mut source {
        plan.n_traj = n_traj;
        plan.seed = seed;
    }
    Ok(Resolved {
        source,
        seed,
        n_traj,
        workers: cfg.workers,
        out,
        bins,
        write_ensemble: cfg.write_ensemble,
        smoke,
    })
}

/// Every problem found in a config, without simulating anything.
pub fn validation_report(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = check_source(cfg) {
        out.push(e.to_string());
    }
    if cfg.n_traj == Some(0) {
        out.push("n_traj must be at least 1".into());
    }
    if cfg.workers == Some(0) {
        out.push("workers must be at least 1".into());
    }
    if cfg.bins == Some(0) {
        out.push("bins must be at least 1".into());
    }
    if let Some(name) = &cfg.preset {
        match lookup(name) {
            Ok(p) => {
                let n = cfg.n_traj.unwrap_or(SMOKE_N_TRAJ).max(1);
                for job in p.jobs(n, cfg.seed.unwrap_or(0)) {
                    for e in job.plan.violations() {
                        out.push(format!("{}: {e}", job.label));
                    }
                }
            }
            Err(e) => out.push(e.to_string()),
        }
    }
    if let Some(v) = &cfg.experiment {
        out.extend(experiment_findings(v));
    }
    out
}

fn experiment_findings(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let field = |name: &str| v.get(name).cloned();

    match field("spec") {
        None => out.push("experiment.spec: missing".into()),
        Some(s) => match serde_json::from_value::<MixtureRepr>(s) {
            Ok(repr) => out.extend(repr.violations().iter().map(|e| format!("spec: {e}"))),
            Err(e) => out.push(format!("experiment.spec: {e}")),
        },
    }
    let schedule = match field("schedule") {
        None => Some(Schedule::default()),
        Some(s) => match serde_json::from_value::<Schedule>(s) {
            Ok(s) => Some(s),
            Err(e) => {
                out.push(format!("experiment.schedule: {e}"));
                None
            }
        },
    };
    if let Some(Err(e)) = schedule.map(|s| s.validate()) {
        out.push(format!("schedule: {e}"));
    }
    if let Some(g) = field("guidance") {
        match serde_json::from_value::<GuidanceSpec>(g) {
            Ok(g) => out.extend(
                g.violations(schedule.map(|s| s.t_f))
                    .iter()
                    .map(|e| format!("guidance: {e}")),
            ),
            Err(e) => out.push(format!("experiment.guidance: {e}")),
        }
    }
    if !out.is_empty() {
        return out;
    }
    // Components are individually sound: check how they combine.
    match serde_json::from_value::<SimPlan>(v.clone()) {
        Ok(plan) => out.extend(plan.violations().iter().map(|e| format!("plan: {e}"))),
        Err(e) => out.push(format!("experiment: {e}")),
    }
    out
}
