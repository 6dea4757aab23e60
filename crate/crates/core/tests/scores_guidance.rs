use cfglab::guidance::{guidance_term, inertness_bound_at, WeightKnot};
use cfglab::*;
use proptest::prelude::*;

fn sym(d: usize, sigma2: f64) -> MixtureSpec {
    MixtureSpec::symmetric(d, sigma2).unwrap()
}

/// Guided score of the symmetric pair written out by hand:
/// `(-x + (1 + w) c m e^{-t} - w m e^{-t} tanh(x.m e^{-t}/G)) / G`.
fn symmetric_closed_form(x: &[f64], t: f64, c: f64, w: f64, sigma2: f64) -> Vec<f64> {
    let g = 1.0 + (sigma2 - 1.0) * (-2.0 * t).exp();
    let e = (-t).exp();
    let a: f64 = x.iter().sum::<f64>() * e / g;
    x.iter()
        .map(|xi| (-xi + (1.0 + w) * c * e - w * e * a.tanh()) / g)
        .collect()
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0..6.0f64, 1..7)
}

proptest! {
    #[test]
    fn standard_guidance_matches_tanh_form(x in state(), t in 0.0..6.0f64, w in 0.0..20.0f64, s2 in 0.2..5.0f64, plus in any::<bool>()) {
        let spec = sym(x.len(), s2);
        let c = if plus { ClassLabel::PLUS } else { ClassLabel::MINUS };
        let got = guided_score(&x, t, c, &spec, &GuidanceSpec::standard(w)).unwrap().vector;
        let want = symmetric_closed_form(&x, t, c.sign(), w, s2);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn standard_guidance_is_linear_in_omega(x in state(), t in 0.0..6.0f64, w1 in 0.0..10.0f64, w2 in 0.0..10.0f64) {
        let spec = MixtureSpec::general_pair(x.iter().map(|v| v.sin()).collect(), x.iter().map(|v| -v.cos()).collect(), 1.5).unwrap();
        let s = |w: f64| guided_score(&x, t, ClassLabel::PLUS, &spec, &GuidanceSpec::standard(w)).unwrap().vector;
        let (a, b, z, ab) = (s(w1), s(w2), s(0.0), s(w1 + w2));
        for i in 0..x.len() {
            prop_assert!((a[i] + b[i] - z[i] - ab[i]).abs() <= 1e-10 * (1.0 + ab[i].abs()));
        }
    }

    #[test]
    fn full_interval_equals_standard(x in state(), t in 0.0..7.99f64, w in 0.0..20.0f64) {
        let spec = sym(x.len(), 2.0);
        let li = GuidanceSpec::LimitedInterval { omega: w, interval: [0.0, 8.0] };
        let a = guided_score(&x, t, ClassLabel::PLUS, &spec, &li).unwrap().vector;
        let b = guided_score(&x, t, ClassLabel::PLUS, &spec, &GuidanceSpec::standard(w)).unwrap().vector;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn score_difference_is_posterior_weighted(x in state(), t in 0.0..5.0f64) {
        // Classes of a symmetric pair have opposite differences and the
        // conditional minus unconditional score reproduces them.
        let spec = sym(x.len(), 1.0);
        let (dp, np) = score_diff(&x, t, ClassLabel::PLUS, &spec).unwrap();
        let (dm, nm) = score_diff(&x, t, ClassLabel::MINUS, &spec).unwrap();
        prop_assert!(np >= 0.0 && nm >= 0.0);
        let cond = cond_score(&x, t, ClassLabel::PLUS, &spec).unwrap().vector;
        let unc = uncond_score(&x, t, &spec).unwrap().vector;
        for i in 0..x.len() {
            prop_assert!((cond[i] - unc[i] - dp[i]).abs() <= 1e-12 * (1.0 + cond[i].abs() + unc[i].abs()));
            prop_assert!(dp[i] * dm[i] <= 0.0);
        }
    }

    #[test]
    fn general_pair_reduces_to_symmetric(m in prop::collection::vec(-3.0..3.0f64, 1..6), t in 0.0..5.0f64, s2 in 0.3..4.0f64, shift in -4.0..4.0f64) {
        let neg: Vec<f64> = m.iter().map(|v| -v).collect();
        let g = MixtureSpec::general_pair(m.clone(), neg, s2).unwrap();
        let s = MixtureSpec::symmetric_with_mean(m.clone(), s2).unwrap();
        let x: Vec<f64> = m.iter().map(|v| v * shift + 0.3).collect();
        prop_assert!(pair_reduction_check(&g, &s, &x, t).unwrap() < 1e-12);
    }

    #[test]
    fn quad_posteriors_sum_consistently(x in prop::collection::vec(-5.0..5.0f64, 2..2usize + 1), t in 0.0..4.0f64) {
        // With orthogonal means the unconditional score is the posterior
        // average of the four conditional scores.
        let spec = MixtureSpec::orthogonal_quad(vec![1.5, 0.0], vec![0.0, 0.7], 1.2).unwrap();
        let unc = uncond_score(&x, t, &spec).unwrap().vector;
        let mut recon = [0.0; 2];
        let mut total = 0.0;
        for c in 0..4 {
            let mu = spec.center(ClassLabel(c)).unwrap();
            let g = gamma(t, 1.2).unwrap();
            let e = (-t).exp();
            let logw: f64 = -0.5 * x.iter().zip(mu).map(|(a, b)| (a - b * e).powi(2)).sum::<f64>() / g;
            let w = logw.exp();
            total += w;
            let sc = cond_score(&x, t, ClassLabel(c), &spec).unwrap().vector;
            for i in 0..2 {
                recon[i] += w * sc[i];
            }
        }
        for i in 0..2 {
            prop_assert!((recon[i] / total - unc[i]).abs() <= 1e-9 * (1.0 + unc[i].abs()));
        }
    }

    #[test]
    fn weight_table_looks_up_segments(t in 0.0..10.0f64, w0 in 0.0..5.0f64, w1 in 0.0..5.0f64) {
        let g = GuidanceSpec::WeightTable { weight_table: vec![
            WeightKnot { from: 0.0, omega: w0 },
            WeightKnot { from: 3.0, omega: w1 },
        ] };
        let phi = phi_weight(0.2, t, &g, 1.0).unwrap();
        prop_assert_eq!(phi, if t < 3.0 { w0 } else { w1 });
    }
}

#[test]
fn switch_off_for_every_kind() {
    let spec = sym(4, 1.0);
    let t: f64 = 0.5;
    let k = (-t).exp();
    let kinds = [
        GuidanceSpec::standard(0.0),
        GuidanceSpec::power_law(3.0, -0.75),
        GuidanceSpec::power_law(3.0, 0.0),
        GuidanceSpec::power_law(3.0, 0.9),
        GuidanceSpec::rescaled_power_law(3.0, 0.5),
        GuidanceSpec::rescaled_power_law(3.0, 4.0),
        GuidanceSpec::interrupted(3.0, 0.2),
    ];
    for g in &kinds {
        let mut prev = f64::INFINITY;
        for e in 1..=12 {
            let s = 10f64.powi(-e);
            let r = s / (2.0 * k);
            let a = 0.5 * ((2.0 - r) / r).ln();
            let x = vec![a / (4.0 * k); 4];
            let (_, norm) = guidance_term(&x, t, ClassLabel::PLUS, &spec, g).unwrap();
            assert!(norm <= prev, "{g:?}: {norm} after {prev}");
            prev = norm;
        }
        assert!(prev < 1e-2, "{g:?}: {prev}");
    }
}

#[test]
fn rescaled_factor_is_two_sinh() {
    for t in [0.0, 0.3, 1.0, 4.0] {
        let f = guidance::rescale_factor(t, 1.0).unwrap();
        assert!((f - 2.0 * f64::sinh(t)).abs() <= 1e-13 * (1.0 + f));
    }
}

#[test]
fn committed_paths_are_inert() {
    // On recorded paths where x.m e^{-t}/G > 25 the guidance term is below
    // 2 w times the bound evaluated at the path's own q.
    let w = 6.0;
    let spec = sym(200, 1.0);
    let plan = SimPlan::new(spec.clone(), GuidanceSpec::standard(w), Schedule::default())
        .with_n_traj(300)
        .with_seed(12);
    let e = simulate_full(&plan).unwrap();
    let sd = e.score_diff.as_ref().unwrap();
    let m = (200f64).sqrt();
    let mut checked = 0;
    for traj in 0..e.n_traj {
        for (i, &t) in e.times.iter().enumerate() {
            let q = e.q_at(traj, i);
            let g = gamma(t, 1.0).unwrap();
            if q * m * (-t).exp() / g > 25.0 {
                let term = w * sd[traj * e.n_times() + i];
                // Equality up to rounding: 1 - tanh a = 2e^{-2a}/(1 + e^{-2a}).
                let bound = 2.0 * w * inertness_bound_at(q, t, &spec).unwrap();
                assert!(term <= bound * (1.0 + 1e-9), "{term} > {bound}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn validation_names_each_violation() {
    let bad_alpha = GuidanceSpec::power_law(1.0, -1.5).violations(None);
    assert!(matches!(bad_alpha[..], [Error::InvalidAlpha(_)]));
    assert!(bad_alpha[0].to_string().contains("alpha > -1"));
    let both = GuidanceSpec::LimitedInterval {
        omega: -2.0,
        interval: [3.0, 1.0],
    }
    .violations(None);
    assert_eq!(both.len(), 2);
}
