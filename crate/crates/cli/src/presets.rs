//! Named experiments. Each preset expands into a list of simulation jobs
//! that share one seed, so curves inside a preset use common random numbers.

use cfglab::{GuidanceSpec, MixtureSpec, Schedule, SimMode, SimPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Fig2Hist,
    Fig2Traj,
    Fig3ScoreDiff,
    Fig3NonlinScoreDiff,
    Fig4Potentials,
    Fig8InterruptedMean,
    Fig9InterruptedHist,
    Fig11RplBias,
    OracleReport,
}

#[derive(Debug)]
pub struct Preset {
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    pub figure: &'static str,
    pub description: &'static str,
    pub default_n_traj: usize,
    pub kind: Kind,
}

pub static PRESETS: &[Preset] = &[
    Preset {
        name: "fig2_hist",
        aliases: &[],
        figure: "Figure 2 (left)",
        description: "final q histograms, d in {2, 200} x omega in {0, 0.2, 15}, full state",
        default_n_traj: 10_000,
        kind: Kind::Fig2Hist,
    },
    Preset {
        name: "fig2_traj",
        aliases: &[],
        figure: "Figure 2 (right)",
        description: "mean q curves for d in {2, 200}: unguided, omega=15, and omega=15 stopped just above t_s",
        default_n_traj: 10_000,
        kind: Kind::Fig2Traj,
    },
    Preset {
        name: "fig3_scorediff",
        aliases: &[],
        figure: "Figure 3 (left)",
        description: "score-difference curves for d in {1, 5, 20, 50, 200}, omega=5, with onset times",
        default_n_traj: 10_000,
        kind: Kind::Fig3ScoreDiff,
    },
    Preset {
        name: "fig3_nonlin_scorediff",
        aliases: &[],
        figure: "Figure 3 (middle)",
        description: "score-difference curves under power-law guidance, d=200, omega=5, seven exponents",
        default_n_traj: 10_000,
        kind: Kind::Fig3NonlinScoreDiff,
    },
    Preset {
        name: "fig4_potentials",
        aliases: &[],
        figure: "Figure 4",
        description: "class, guidance and total potentials of the q dynamics on a (t, q) grid",
        default_n_traj: 1,
        kind: Kind::Fig4Potentials,
    },
    Preset {
        name: "fig8_interrupted_mean",
        aliases: &[],
        figure: "Figure 8",
        description: "mean q curves with guidance stopped at t1 in {0.69, 1.38, 3.19}, against the unguided continuation",
        default_n_traj: 200_000,
        kind: Kind::Fig8InterruptedMean,
    },
    Preset {
        name: "fig9_interrupted_hist",
        aliases: &["fig9_interrupted"],
        figure: "Figure 9",
        description: "final q histograms for always-on guidance and stops at t1 in {0.69, 1.38, 3.19}",
        default_n_traj: 200_000,
        kind: Kind::Fig9InterruptedHist,
    },
    Preset {
        name: "fig11_rpl_bias",
        aliases: &[],
        figure: "Figures 11-12",
        description: "mean q curves and final bias/JSD for standard, power-law and rescaled power-law guidance",
        default_n_traj: 50_000,
        kind: Kind::Fig11RplBias,
    },
    Preset {
        name: "oracle_report",
        aliases: &[],
        figure: "closed-form checks",
        description: "simulated statistics against closed-form predictions, with pass/fail per tolerance",
        default_n_traj: 20_000,
        kind: Kind::OracleReport,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name || p.aliases.contains(&name))
}

/// Which per-job files to write besides the stats CSV.
#[derive(Debug, Clone, Copy, Default)]
pub struct Files {
    pub histogram: bool,
    pub score_curve: bool,
}

#[derive(Debug, Clone)]
pub struct Job {
    pub label: String,
    pub plan: SimPlan,
    pub files: Files,
}

pub const SWITCH_TIMES: [f64; 3] = [0.69, 1.38, 3.19];
pub const FIG3_DIMS: [usize; 5] = [1, 5, 20, 50, 200];
pub const FIG3_ALPHAS: [f64; 7] = [-0.5, -0.3, -0.1, 0.0, 0.2, 0.5, 0.9];

/// Dimension, variance and horizon of the switching experiments.
pub const SWITCH_SETUP: (usize, f64, f64) = (16, 4.0, 5.0);
pub const SWITCH_OMEGA: f64 = 8.0;

fn sym(d: usize, sigma2: f64) -> MixtureSpec {
    MixtureSpec::symmetric(d, sigma2).expect("preset mixture is valid")
}

fn plan(d: usize, sigma2: f64, t_f: f64, g: GuidanceSpec, mode: SimMode, n: usize, seed: u64) -> SimPlan {
    let steps = (t_f * 100.0).round() as usize;
    let sched = Schedule::new(t_f, steps, 10).expect("preset schedule is valid");
    SimPlan::new(sym(d, sigma2), g, sched)
        .with_mode(mode)
        .with_n_traj(n)
        .with_seed(seed)
}

fn job(label: String, plan: SimPlan, files: Files) -> Job {
    Job { label, plan, files }
}

/// First point of the 0.01 grid strictly above the speciation time.
pub fn switch_above_speciation(d: usize) -> f64 {
    let ts = 0.5 * (d as f64).ln();
    ((ts * 100.0).floor() + 1.0) / 100.0
}

pub fn switch_plan(t1: Option<f64>, n: usize, seed: u64) -> SimPlan {
    let (d, s2, tf) = SWITCH_SETUP;
    let g = match t1 {
        None => GuidanceSpec::standard(SWITCH_OMEGA),
        Some(t1) => GuidanceSpec::interrupted(SWITCH_OMEGA, t1),
    };
    plan(d, s2, tf, g, SimMode::ProjectedQ, n, seed)
}

impl Preset {
    pub fn jobs(&self, n: usize, seed: u64) -> Vec<Job> {
        let hist = Files {
            histogram: true,
            score_curve: false,
        };
        let curve = Files {
            histogram: false,
            score_curve: true,
        };
        let plain = Files::default();
        match self.kind {
            Kind::Fig2Hist => {
                let mut out = Vec::new();
                for d in [2, 200] {
                    for w in [0.0, 0.2, 15.0] {
                        let p = plan(d, 1.0, 8.0, GuidanceSpec::standard(w), SimMode::FullState, n, seed);
                        out.push(job(format!("d{d}_w{w}"), p, hist));
                    }
                }
                out
            }
            Kind::Fig2Traj => {
                let mut out = Vec::new();
                for d in [2, 200] {
                    let t1 = switch_above_speciation(d);
                    let runs = [
                        ("w0".to_string(), GuidanceSpec::None),
                        ("w15".to_string(), GuidanceSpec::standard(15.0)),
                        (format!("w15_stop{t1}"), GuidanceSpec::interrupted(15.0, t1)),
                    ];
                    for (name, g) in runs {
                        let mut p = plan(d, 1.0, 8.0, g, SimMode::ProjectedQ, n, seed);
                        p.extra_record_times = vec![t1];
                        out.push(job(format!("d{d}_{name}"), p, plain));
                    }
                }
                out
            }
            Kind::Fig3ScoreDiff => FIG3_DIMS
                .iter()
                .map(|&d| {
                    let p = plan(d, 1.0, 8.0, GuidanceSpec::standard(5.0), SimMode::FullState, n, seed);
                    job(format!("d{d}"), p, curve)
                })
                .collect(),
            Kind::Fig3NonlinScoreDiff => FIG3_ALPHAS
                .iter()
                .map(|&a| {
                    let p = plan(200, 1.0, 8.0, GuidanceSpec::power_law(5.0, a), SimMode::FullState, n, seed);
                    job(format!("alpha{a}"), p, curve)
                })
                .collect(),
            Kind::Fig4Potentials => Vec::new(),
            Kind::Fig8InterruptedMean => {
                let (d, s2, tf) = SWITCH_SETUP;
                let mut out = vec![
                    job("always".into(), switch_plan(None, n, seed), plain),
                    job("off".into(), plan(d, s2, tf, GuidanceSpec::None, SimMode::ProjectedQ, n, seed), plain),
                ];
                for t1 in SWITCH_TIMES {
                    out.push(job(format!("stop{t1}"), switch_plan(Some(t1), n, seed), plain));
                }
                out
            }
            Kind::Fig9InterruptedHist => {
                let mut out = vec![job("always".into(), switch_plan(None, n, seed), hist)];
                for t1 in SWITCH_TIMES {
                    out.push(job(format!("stop{t1}"), switch_plan(Some(t1), n, seed), hist));
                }
                out
            }
            Kind::Fig11RplBias => fig11_guidances()
                .into_iter()
                .map(|(label, g)| {
                    job(label, plan(16, 4.0, 5.0, g, SimMode::ProjectedQ, n, seed), hist)
                })
                .collect(),
            Kind::OracleReport => {
                let (d, s2, tf) = SWITCH_SETUP;
                let mk = |g, mode| plan(d, s2, tf, g, mode, n, seed);
                vec![
                    job("unguided".into(), mk(GuidanceSpec::None, SimMode::ProjectedQ), plain),
                    job(
                        "unguided_frozen".into(),
                        mk(GuidanceSpec::None, SimMode::ProjectedQ)
                            .with_n_traj(1)
                            .with_noise(cfglab::NoiseMode::Frozen)
                            .with_initial(cfglab::InitialCondition::Fixed { value: 0.0 }),
                        plain,
                    ),
                    job("guided_w8".into(), mk(GuidanceSpec::standard(8.0), SimMode::ProjectedQ), plain),
                    job("stop1.38".into(), switch_plan(Some(1.38), n, seed), plain),
                    job("transverse_w8".into(), mk(GuidanceSpec::standard(8.0), SimMode::Transverse), plain),
                ]
            }
        }
    }
}

pub fn fig11_guidances() -> Vec<(String, GuidanceSpec)> {
    let mut out = Vec::new();
    for w in [0.0, 8.0, 16.0] {
        out.push((format!("standard_w{w}"), GuidanceSpec::standard(w)));
    }
    for w in [0.5, 1.5] {
        out.push((format!("power_law_w{w}"), GuidanceSpec::power_law(w, -0.75)));
    }
    for w in [8.0, 16.0] {
        out.push((format!("rescaled_w{w}"), GuidanceSpec::rescaled_power_law(w, 4.0)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_found() {
        for (i, p) in PRESETS.iter().enumerate() {
            assert!(find(p.name).is_some());
            assert!(PRESETS[i + 1..].iter().all(|q| q.name != p.name));
        }
        assert_eq!(find("fig9_interrupted").unwrap().name, "fig9_interrupted_hist");
        assert!(find("fig10").is_none());
    }

    #[test]
    fn job_labels_are_unique() {
        for p in PRESETS {
            let jobs = p.jobs(10, 1);
            for (i, j) in jobs.iter().enumerate() {
                assert!(jobs[i + 1..].iter().all(|k| k.label != j.label), "{}", j.label);
                assert_eq!(j.plan.seed, 1);
            }
        }
    }

    #[test]
    fn switch_lands_on_the_grid_above_ts() {
        for d in [2, 16, 200] {
            let t1 = switch_above_speciation(d);
            let ts = 0.5 * (d as f64).ln();
            assert!(t1 > ts && t1 - ts <= 0.01 + 1e-12);
            let p = switch_plan(Some(t1), 1, 0);
            assert!(p.schedule.step_of(t1).is_some());
        }
    }
}
