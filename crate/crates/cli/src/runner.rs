//! Executes a resolved config: simulates each job, writes its files, then
//! the preset's summary tables and the run manifest.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use cfglab::analysis::{histogram, moments, onset_time, end_to_peak_ratio, PointSet};
use cfglab::theory::{
    effective_potential, interrupted_mean_prediction, mean_closed_form, mean_upper_bound,
    regime1_drift,
};
use cfglab::{
    ensemble_stats, knn_jsd, score_diff_curve, simulate_with_workers, ClassLabel, GuidanceSpec,
    SimPlan, SummaryStats,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{ExperimentConfig, Resolved, Source};
use crate::error::CliError;
use crate::output::{fmt_f, fmt_opt, FileEntry, OutDir};
use crate::presets::{Files, Job, Kind, SWITCH_SETUP, SWITCH_TIMES};

/// Largest ensemble (trajectories x recorded times) written as CSV unless
/// the config asks for it explicitly.
pub const ENSEMBLE_ROW_LIMIT: usize = 1_000_000;

pub const MANIFEST: &str = "manifest.json";

struct JobResult {
    label: String,
    plan: SimPlan,
    stats: SummaryStats,
    score_curve: Option<SummaryStats>,
    final_q: Vec<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: ExperimentConfig,
    version: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    figure: Option<&'static str>,
    started_unix_s: f64,
    wall_time_s: f64,
    notes: Vec<&'static str>,
    files: &'a [FileEntry],
}

/// Runs the experiment and returns the lines to print.
pub fn run(r: &Resolved) -> Result<Vec<String>, CliError> {
    let clock = Instant::now();
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let mut out = OutDir::create(&r.out)?;
    let jobs = match &r.source {
        Source::Preset(p) => p.jobs(r.n_traj, r.seed),
        Source::Experiment(plan) => vec![Job {
            label: "experiment".into(),
            plan: (**plan).clone(),
            files: Files {
                histogram: true,
                score_curve: true,
            },
        }],
    };
    for job in &jobs {
        job.plan.validate().map_err(|e| CliError::Config(format!("{}: {e}", job.label)))?;
    }
    let mut results = Vec::with_capacity(jobs.len());
    for job in jobs {
        results.push(run_job(r, &mut out, job)?);
    }
    let mut lines = Vec::new();
    let mut notes = Vec::new();
    if let Source::Preset(p) = &r.source {
        lines.extend(finish(p.kind, r, &mut out, &results)?);
        if p.kind == Kind::Fig11RplBias {
            notes.push("jsd: k-NN estimate (k = 1) clipped to [0, ln 2]");
        }
    }
    let figure = match &r.source {
        Source::Preset(p) => Some(p.figure),
        Source::Experiment(_) => None,
    };
    let manifest = Manifest {
        config: r.effective(),
        version: env!("CARGO_PKG_VERSION"),
        seed: r.seed,
        figure,
        started_unix_s: started,
        wall_time_s: clock.elapsed().as_secs_f64(),
        notes,
        files: &out.files,
    };
    out.json(MANIFEST, &manifest)?;
    lines.push(format!(
        "wrote {} data files and {MANIFEST} to {} in {:.1} s",
        out.files.len(),
        r.out.display(),
        manifest.wall_time_s
    ));
    Ok(lines)
}

fn run_job(r: &Resolved, out: &mut OutDir, job: Job) -> Result<JobResult, CliError> {
    let e = simulate_with_workers(&job.plan, r.workers)?;
    let fp = e.fingerprint.clone();
    let stats = ensemble_stats(&e)?;
    out.stats(&format!("{}_stats.csv", job.label), &stats, Some(&fp))?;
    let small = e.n_traj.saturating_mul(e.n_times()) <= ENSEMBLE_ROW_LIMIT;
    if r.write_ensemble.unwrap_or(small) {
        out.ensemble(&format!("{}_ensemble.csv", job.label), &e)?;
    }
    let final_q = e.final_q();
    if job.files.histogram {
        let h = histogram(&final_q, r.bins, None)?;
        out.histogram(&format!("{}_hist.csv", job.label), &h, Some(&fp))?;
    }
    let score_curve = match (job.files.score_curve, e.score_diff.is_some()) {
        (true, true) => {
            let c = score_diff_curve(&e)?;
            out.stats(&format!("{}_scorediff.csv", job.label), &c, Some(&fp))?;
            Some(c)
        }
        _ => None,
    };
    Ok(JobResult {
        label: job.label,
        plan: job.plan,
        stats,
        score_curve,
        final_q,
    })
}

/// `(kind, omega, exponent, switch time)` of a guidance rule.
fn describe(g: &GuidanceSpec) -> (&'static str, f64, Option<f64>, Option<f64>) {
    match g {
        GuidanceSpec::None => ("none", 0.0, None, None),
        GuidanceSpec::Standard { omega } => ("standard", *omega, None, None),
        GuidanceSpec::PowerLaw { omega, alpha } => ("power_law", *omega, Some(*alpha), None),
        GuidanceSpec::RescaledPowerLaw { omega, gamma_exp } => {
            ("rescaled_power_law", *omega, Some(*gamma_exp), None)
        }
        GuidanceSpec::LimitedInterval { omega, .. } => ("limited_interval", *omega, None, None),
        GuidanceSpec::WeightTable { .. } => ("weight_table", f64::NAN, None, None),
        GuidanceSpec::Interrupted { omega, switch_time } => {
            ("interrupted", *omega, None, Some(*switch_time))
        }
    }
}

fn by_label<'a>(results: &'a [JobResult], label: &str) -> &'a JobResult {
    results
        .iter()
        .find(|j| j.label == label)
        .expect("preset job present")
}

fn render(header: &[&str], rows: &[Vec<String>]) -> Vec<String> {
    let short = |s: &String| match s.parse::<f64>() {
        Ok(v) if s.contains('e') => format!("{v:.4}"),
        _ => s.clone(),
    };
    let mut lines = vec![header.join("  ")];
    lines.extend(rows.iter().map(|r| r.iter().map(short).collect::<Vec<_>>().join("  ")));
    lines
}

fn finish(kind: Kind, r: &Resolved, out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    match kind {
        Kind::Fig2Hist | Kind::Fig9InterruptedHist => final_summary(out, res),
        Kind::Fig2Traj => realignment(out, res),
        Kind::Fig3ScoreDiff | Kind::Fig3NonlinScoreDiff => onsets(out, res),
        Kind::Fig4Potentials => potentials(out),
        Kind::Fig8InterruptedMean => predictions(out, res),
        Kind::Fig11RplBias => bias_table(r, out, res),
        Kind::OracleReport => oracle_report(out, res),
    }
}

fn final_summary(out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    let header = ["label", "d", "kind", "omega", "switch_time", "mean", "std", "sem", "n"];
    let mut rows = Vec::new();
    for j in res {
        let m = moments(&j.final_q)?;
        let (kind, omega, _, t1) = describe(&j.plan.guidance);
        rows.push(vec![
            j.label.clone(),
            j.plan.spec.dim().to_string(),
            kind.to_string(),
            fmt_f(omega),
            fmt_opt(t1),
            fmt_f(m.mean),
            fmt_f(m.variance.sqrt()),
            fmt_f(m.sem),
            m.n.to_string(),
        ]);
    }
    out.table("summary.csv", &header, rows.clone(), None)?;
    Ok(render(&header, &rows))
}

fn realignment(out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    let header = ["d", "switch_time", "t", "gap", "sem", "relative_gap"];
    let mut rows = Vec::new();
    for d in [2usize, 200] {
        let stop = res
            .iter()
            .find(|j| j.plan.spec.dim() == d && j.label.contains("stop"))
            .expect("preset job present");
        let base = by_label(res, &format!("d{d}_w0"));
        let (_, _, _, t1) = describe(&stop.plan.guidance);
        let t1 = t1.expect("interrupted job");
        for t in [t1, 0.0] {
            let (a, b) = (stop.stats.index_of(t), base.stats.index_of(t));
            let (Some(a), Some(b)) = (a, b) else {
                return Err(CliError::Config(format!("time {t} not recorded")));
            };
            let gap = stop.stats.mean[a] - base.stats.mean[b];
            let sem = stop.stats.sem[a].hypot(base.stats.sem[b]);
            rows.push(vec![
                d.to_string(),
                fmt_f(t1),
                fmt_f(t),
                fmt_f(gap),
                fmt_f(sem),
                fmt_f(gap / base.stats.mean[b]),
            ]);
        }
    }
    out.table("realignment.csv", &header, rows.clone(), None)?;
    Ok(render(&header, &rows))
}

fn onsets(out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    let header = ["label", "d", "alpha", "onset_time", "peak", "peak_time", "end_to_peak"];
    let mut rows = Vec::new();
    for j in res {
        let Some(c) = &j.score_curve else { continue };
        let (peak_i, peak) = c
            .mean
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        let (_, _, alpha, _) = describe(&j.plan.guidance);
        rows.push(vec![
            j.label.clone(),
            j.plan.spec.dim().to_string(),
            fmt_f(alpha.unwrap_or(0.0)),
            fmt_opt(onset_time(c, 0.1)),
            fmt_f(peak),
            fmt_f(c.times[peak_i]),
            fmt_f(end_to_peak_ratio(c)),
        ]);
    }
    out.table("onsets.csv", &header, rows.clone(), None)?;
    Ok(render(&header, &rows))
}

/// Dimension whose speciation time `ln(d)/2` is closest to 0.5.
const POTENTIAL_DIM: usize = 3;
const POTENTIAL_OMEGA: f64 = 2.0;

fn potentials(out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let header = ["t", "q", "v_class", "v_extra", "v_total"];
    let mut rows = Vec::new();
    for ti in 0..=8 {
        let t = ti as f64;
        for qi in -200..=200 {
            let q = qi as f64 * 0.025;
            let v = effective_potential(q, t, POTENTIAL_DIM, POTENTIAL_OMEGA, ClassLabel::PLUS)?;
            rows.push(vec![fmt_f(t), fmt_f(q), fmt_f(v.v_class), fmt_f(v.v_extra), fmt_f(v.v_total)]);
        }
    }
    let n = rows.len();
    out.table("potentials.csv", &header, rows, None)?;
    Ok(vec![format!(
        "potentials for d = {POTENTIAL_DIM}, omega = {POTENTIAL_OMEGA}, c = +1: {n} grid points"
    )])
}

/// Standard error of `prediction(t)` inherited from the mean at the switch.
fn prediction_gain(t: f64, t1: f64, sigma2: f64) -> f64 {
    let g = |s: f64| 1.0 + (sigma2 - 1.0) * (-2.0 * s).exp();
    (t - t1).exp() * g(t) / g(t1)
}

fn predictions(out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    let (d, s2, _) = SWITCH_SETUP;
    let sd = (d as f64).sqrt();
    let header = ["t", "mean", "sem", "prediction", "prediction_sem", "z"];
    let mut lines = vec!["switch_time  mean(q0)  prediction  worst|z|".to_string()];
    for t1 in SWITCH_TIMES {
        let j = by_label(res, &format!("stop{t1}"));
        let s = &j.stats;
        let i1 = s.index_of(t1).expect("switch time recorded");
        let dq = s.mean[i1] - sd * (-t1).exp();
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for i in i1..s.times.len() {
            let t = s.times[i];
            let pred = interrupted_mean_prediction(t, t1, dq, d, s2)?;
            let pse = prediction_gain(t, t1, s2) * s.sem[i1];
            let se = s.sem[i].hypot(pse);
            let z = if se > 0.0 { (s.mean[i] - pred) / se } else { 0.0 };
            if i > i1 {
                worst = worst.max(z.abs());
            }
            rows.push(vec![fmt_f(t), fmt_f(s.mean[i]), fmt_f(s.sem[i]), fmt_f(pred), fmt_f(pse), fmt_f(z)]);
        }
        let last = rows.last().expect("rows");
        lines.push(format!("{t1}  {}  {}  {worst:.2}", short(&last[1]), short(&last[3])));
        out.table(&format!("prediction_stop{t1}.csv"), &header, rows, Some(&j.plan.fingerprint()))?;
    }
    Ok(lines)
}

fn short(s: &str) -> String {
    s.parse::<f64>().map(|v| format!("{v:.4}")).unwrap_or_default()
}

fn bias_table(r: &Resolved, out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    let target = 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    rng.set_stream(u64::MAX);
    let law = Normal::new(target, 2.0).expect("valid normal");
    let reference: Vec<f64> = (0..r.n_traj).map(|_| law.sample(&mut rng)).collect();
    let reference = PointSet::from_scalars(&reference);
    let header = ["label", "kind", "omega", "exponent", "mean", "variance", "sem", "bias", "jsd"];
    let mut rows = Vec::new();
    for j in res {
        let m = moments(&j.final_q)?;
        let (kind, omega, exponent, _) = describe(&j.plan.guidance);
        let jsd = if j.final_q.len() > 1 {
            Some(knn_jsd(&PointSet::from_scalars(&j.final_q), &reference, 1)?)
        } else {
            None
        };
        rows.push(vec![
            j.label.clone(),
            kind.to_string(),
            fmt_f(omega),
            fmt_opt(exponent),
            fmt_f(m.mean),
            fmt_f(m.variance),
            fmt_f(m.sem),
            fmt_f((m.mean - target).abs()),
            fmt_opt(jsd),
        ]);
    }
    out.table("summary.csv", &header, rows.clone(), None)?;
    Ok(render(&header, &rows))
}

struct Check {
    name: &'static str,
    t: f64,
    simulated: f64,
    theory: f64,
    sem: f64,
    tolerance: String,
    pass: bool,
}

fn oracle_report(out: &mut OutDir, res: &[JobResult]) -> Result<Vec<String>, CliError> {
    let (d, s2, tf) = SWITCH_SETUP;
    let sd = (d as f64).sqrt();
    let mut checks = Vec::new();

    // Unguided mean against the closed form at every recorded time; the
    // worst time is reported.
    let un = &by_label(res, "unguided").stats;
    let mut worst: Option<(f64, Check)> = None;
    for (i, &t) in un.times.iter().enumerate() {
        let want = mean_closed_form(0.0, tf, tf - t, d, s2)?;
        let z = if un.sem[i] > 0.0 { (un.mean[i] - want).abs() / un.sem[i] } else { 0.0 };
        if worst.as_ref().is_none_or(|(wz, _)| z > *wz) {
            let check = Check {
                name: "unguided_mean_closed_form",
                t,
                simulated: un.mean[i],
                theory: want,
                sem: un.sem[i],
                tolerance: "3 sem".into(),
                pass: z <= 3.0,
            };
            worst = Some((z, check));
        }
    }
    checks.extend(worst.map(|(_, c)| c));

    let frozen = by_label(res, "unguided_frozen");
    let dt = frozen.plan.schedule.dt();
    let mut err = (0.0f64, 0.0, 0.0, 0.0);
    for (i, &t) in frozen.stats.times.iter().enumerate() {
        let want = mean_closed_form(0.0, tf, tf - t, d, s2)?;
        let e = (frozen.stats.mean[i] - want).abs();
        if e >= err.0 {
            err = (e, t, frozen.stats.mean[i], want);
        }
    }
    checks.push(Check {
        name: "frozen_closed_form",
        t: err.1,
        simulated: err.2,
        theory: err.3,
        sem: 0.0,
        tolerance: format!("{} abs", 5.0 * dt),
        pass: err.0 <= 5.0 * dt,
    });

    // Guided mean between the unguided mean and the upper bound.
    let g = &by_label(res, "guided_w8").stats;
    let mut lo = (f64::INFINITY, 0usize);
    let mut hi = (f64::NEG_INFINITY, 0usize);
    for i in 0..g.times.len() {
        let se = g.sem[i].hypot(un.sem[i]);
        if se > 0.0 {
            let z = (g.mean[i] - un.mean[i]) / se;
            if z < lo.0 {
                lo = (z, i);
            }
        }
        if g.sem[i] > 0.0 {
            let z = (g.mean[i] - mean_upper_bound(g.times[i], d, 8.0)?) / g.sem[i];
            if z > hi.0 {
                hi = (z, i);
            }
        }
    }
    let i = lo.1;
    checks.push(Check {
        name: "guided_above_unguided",
        t: g.times[i],
        simulated: g.mean[i],
        theory: un.mean[i],
        sem: g.sem[i].hypot(un.sem[i]),
        tolerance: "-3 sem".into(),
        pass: lo.0 >= -3.0,
    });
    let i = hi.1;
    checks.push(Check {
        name: "guided_below_upper_bound",
        t: g.times[i],
        simulated: g.mean[i],
        theory: mean_upper_bound(g.times[i], d, 8.0)?,
        sem: g.sem[i],
        tolerance: "+3 sem".into(),
        pass: hi.0 <= 3.0,
    });

    let t1 = 1.38;
    let s = &by_label(res, "stop1.38").stats;
    let i1 = s.index_of(t1).expect("switch time recorded");
    let dq = s.mean[i1] - sd * (-t1).exp();
    let i0 = s.times.len() - 1;
    let pred = interrupted_mean_prediction(0.0, t1, dq, d, s2)?;
    let se = s.sem[i0].hypot(prediction_gain(0.0, t1, s2) * s.sem[i1]);
    checks.push(Check {
        name: "interrupted_mean_prediction",
        t: 0.0,
        simulated: s.mean[i0],
        theory: pred,
        sem: se,
        tolerance: "3 sem".into(),
        pass: (s.mean[i0] - pred).abs() <= 3.0 * se,
    });

    let p = moments(&by_label(res, "transverse_w8").final_q)?;
    checks.push(Check {
        name: "transverse_mean",
        t: 0.0,
        simulated: p.mean,
        theory: 0.0,
        sem: p.sem,
        tolerance: "3 sem".into(),
        pass: p.mean.abs() <= 3.0 * p.sem,
    });
    checks.push(Check {
        name: "transverse_variance",
        t: 0.0,
        simulated: p.variance,
        theory: s2,
        sem: p.variance * (2.0 / (p.n.max(2) - 1) as f64).sqrt(),
        tolerance: "5% rel".into(),
        pass: (p.variance / s2 - 1.0).abs() <= 0.05,
    });

    // The regime-I drift is minus the slope of the effective potential.
    let mut worst = (0.0f64, 0.0, 0.0, 0.0);
    for &(q, t) in &[(-2.0, 0.5), (0.3, 1.0), (1.7, 2.0), (4.0, 3.0)] {
        let h = 1e-5;
        let v = |q| effective_potential(q, t, d, 8.0, ClassLabel::PLUS).map(|v| v.v_total);
        let slope = -(v(q + h)? - v(q - h)?) / (2.0 * h);
        let drift = regime1_drift(q, t, d, 8.0, ClassLabel::PLUS)?;
        let e = (slope - drift).abs() / (1.0 + drift.abs());
        if e >= worst.0 {
            worst = (e, t, slope, drift);
        }
    }
    checks.push(Check {
        name: "potential_slope_is_drift",
        t: worst.1,
        simulated: worst.2,
        theory: worst.3,
        sem: 0.0,
        tolerance: "1e-8 rel".into(),
        pass: worst.0 <= 1e-8,
    });

    let header = ["check", "t", "simulated", "theory", "sem", "tolerance", "pass"];
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                fmt_f(c.t),
                fmt_f(c.simulated),
                fmt_f(c.theory),
                fmt_f(c.sem),
                c.tolerance.clone(),
                if c.pass { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    out.table("oracle_report.csv", &header, rows.clone(), None)?;
    let mut lines = render(&header, &rows);
    let n_pass = checks.iter().filter(|c| c.pass).count();
    lines.push(format!("{n_pass}/{} checks pass", checks.len()));
    Ok(lines)
}
