//! Analysis routines on synthetic data with known answers.

use lrsd_lab::analysis::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let (u, v): (f64, f64) = (rng.gen(), rng.gen());
    (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

#[test]
fn decay_noiseless_is_exact() {
    let t: Vec<f64> = (0..=80).map(|i| 4.0 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| 2.0 * (-t / 37.0).exp()).collect();
    let e: Vec<f64> = y.iter().map(|y| 1e-3 * y).collect();
    let f = fit_decay(&t, &y, &e, 16).unwrap();
    assert!((f.r2 - 1.0).abs() < 1e-12, "R² = {}", f.r2);
    assert!((f.tau.unwrap() - 37.0).abs() < 1e-9, "τ = {:?}", f.tau);
    assert!((f.amplitude.unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn decay_with_additive_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t: Vec<f64> = (0..=80).map(|i| 4.0 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| 2.0 * (-t / 37.0).exp() + 1e-3 * gauss(&mut rng)).collect();
    let e = vec![1e-3; t.len()];
    let f = fit_decay(&t, &y, &e, 16).unwrap();
    let tau = f.tau.unwrap();
    assert!((tau - 37.0).abs() < 2.0, "τ = {tau}, window {:?}", f.window);
    let (ti, tf) = f.window.unwrap();
    assert!(tf - ti >= 32.0);
}

/// Data drawn from the fitted model itself: `ln S` linear in `t` with
/// Gaussian noise of known size.
#[test]
fn decay_error_bars_cover_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 400;
    let mut covered = 0;
    for _ in 0..trials {
        let t: Vec<f64> = (0..=40).map(|i| 8.0 * i as f64).collect();
        let s = 0.02;
        let y: Vec<f64> = t.iter().map(|t| (0.7 - t / 90.0 + s * gauss(&mut rng)).exp()).collect();
        let e: Vec<f64> = y.iter().map(|y| s * y).collect();
        let f = fit_decay(&t, &y, &e, 16).unwrap();
        if (f.tau.unwrap() - 90.0).abs() <= 3.0 * f.tau_err.unwrap() {
            covered += 1;
        }
    }
    assert!(covered as f64 >= 0.99 * trials as f64, "{covered}/{trials}");
}

#[test]
fn decay_needs_enough_span() {
    let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| (-t / 3.0).exp()).collect();
    assert_eq!(fit_decay(&t, &y, &[1e-3; 8], 16), Err(AnalysisError::NoValidWindow));
}

/// Windows ending where the error is large are not admissible.
#[test]
fn decay_respects_error_cut() {
    let t: Vec<f64> = (0..=40).map(|i| 2.0 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| (-t / 20.0).exp()).collect();
    let e: Vec<f64> = y.iter().enumerate().map(|(i, y)| if i > 20 { *y } else { 1e-3 * y }).collect();
    let f = fit_decay(&t, &y, &e, 8).unwrap();
    assert!(f.window.unwrap().1 <= 40.0);
}

const SIZES: [f64; 6] = [16.0, 24.0, 32.0, 48.0, 64.0, 96.0];

fn scaling(f: impl Fn(f64) -> f64) -> ScalingFits {
    let y: Vec<f64> = SIZES.iter().map(|&l| f(l)).collect();
    fit_scaling(&SIZES, &y, &[0.01; 6]).unwrap()
}

#[test]
fn log_growth_is_log_class() {
    let fits = scaling(|l| 3.0 + 0.5 * l.ln());
    assert_eq!(fits.class, FitModel::Log);
    assert!((fits.log.b - 0.5).abs() < 1e-9);
}

#[test]
fn constant_is_area_class() {
    assert_eq!(scaling(|_| 4.2).class, FitModel::Area);
}

#[test]
fn power_law_is_power_class() {
    let fits = scaling(|l| 0.1 * l.powf(0.8));
    assert_eq!(fits.class, FitModel::Power);
    let g = fits.power.gamma.unwrap();
    assert!((g - 0.8).abs() < 0.1, "γ = {g}");
}

#[test]
fn saturating_law_is_area_class() {
    let fits = scaling(|l| 5.0 - 30.0 / l);
    assert_eq!(fits.class, FitModel::Area);
    assert!((fits.area.gamma.unwrap() + 1.0).abs() < 1e-3);
}

#[test]
fn shrinking_log_is_not_growth() {
    let fits = scaling(|l| 1.0 - 0.1 * l.ln());
    assert!(fits.log.chi2_dof < fits.area.chi2_dof);
    assert_eq!(fits.class, FitModel::Area);
}

#[test]
fn scaling_needs_four_sizes() {
    let r = fit_scaling(&[8.0, 16.0, 32.0], &[1.0, 2.0, 3.0], &[0.1; 3]);
    assert!(matches!(r, Err(AnalysisError::DegenerateFit(_))));
    let r = fit_scaling(&[8.0, 8.0, 16.0, 16.0], &[1.0; 4], &[0.1; 4]);
    assert!(matches!(r, Err(AnalysisError::DegenerateFit(_))));
}

/// Dropping any one size keeps the class of well-separated noisy data.
#[test]
fn classification_survives_leaving_one_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sizes = [8.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0];
    let cases: [(FitModel, &dyn Fn(f64) -> f64); 3] = [
        (FitModel::Power, &|l: f64| 0.2 * l.powf(1.0)),
        (FitModel::Area, &|l: f64| 3.0 - 8.0 / l),
        (FitModel::Log, &|l: f64| 1.0 + 2.0 * l.ln()),
    ];
    for (class, f) in cases {
        let err = 0.01;
        let y: Vec<f64> = sizes.iter().map(|&l| f(l) + err * gauss(&mut rng)).collect();
        for skip in 0..sizes.len() {
            let l: Vec<f64> = (0..sizes.len()).filter(|&i| i != skip).map(|i| sizes[i]).collect();
            let yy: Vec<f64> = (0..sizes.len()).filter(|&i| i != skip).map(|i| y[i]).collect();
            let fits = fit_scaling(&l, &yy, &vec![err; l.len()]).unwrap();
            assert_eq!(fits.class, class, "dropping L = {}", sizes[skip]);
        }
    }
}

#[test]
fn scaling_fits_are_deterministic() {
    let y: Vec<f64> = SIZES.iter().map(|l| 1.0 + l.sqrt()).collect();
    let a = fit_scaling(&SIZES, &y, &[0.05; 6]).unwrap();
    let b = fit_scaling(&SIZES, &y, &[0.05; 6]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn transition_sigma_b_is_the_shift() {
    let x: Vec<f64> = (0..=30).map(|i| 1.0 + 0.05 * i as f64).collect();
    let ext: Vec<f64> = x.iter().map(|x| (2.0 * (x - 2.0)).exp()).collect();
    let ext_drop: Vec<f64> = x.iter().map(|x| (2.0 * (x - 2.1)).exp()).collect();
    let area = vec![1.0; x.len()];
    let t = locate_transition(&x, &ext, &area, Some((&ext_drop, &area))).unwrap();
    assert!((t.x_c - 2.0).abs() < 1e-12);
    assert!((t.sigma_b.unwrap() - 0.1).abs() < 1e-12);
    assert!((t.sigma_a - 0.5).abs() < 1e-12);
    assert!((t.sigma - (0.25f64 + 0.01).sqrt()).abs() < 1e-12);
}

/// Power-law growth with an exponent that falls through zero as `x` grows
/// is classified as power below the crossover and area above it.
#[test]
fn scaling_transition_finds_exponent_sign_change() {
    let sizes = [16.0, 32.0, 64.0, 96.0, 128.0, 192.0];
    let points: Vec<ScalingPoint> = (0..=12)
        .map(|i| {
            let x = 1.4 + 0.1 * i as f64;
            let g = 2.0 - x;
            let data = sizes.iter().map(|&l: &f64| (l, 1.0 + l.powf(g), 0.05)).collect();
            ScalingPoint { x, data }
        })
        .collect();
    let (t, fits) = scaling_transition(&points).unwrap();
    assert!((t.x_c - 2.0).abs() < 0.15, "{t:?}");
    assert_eq!(fits[0].class, FitModel::Power);
    assert_eq!(fits.last().unwrap().class, FitModel::Area);
}

#[test]
fn linear_curves_cross_at_threshold() {
    let p: Vec<f64> = (0..=20).map(|i| 0.5 + 0.01 * i as f64).collect();
    let curves: Vec<Curve> =
        [32.0, 64.0, 128.0].iter().map(|&l| Curve { l, x: p.clone(), y: p.iter().map(|p| (p - 0.66) * l).collect() }).collect();
    let c = crossing(&curves).unwrap();
    assert!((c.p_c - 0.66).abs() < 1e-9, "{c:?}");
    assert!(c.sigma < 1e-9);
}

#[test]
fn parallel_curves_do_not_cross() {
    let p: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let curves: Vec<Curve> =
        [1.0, 2.0].iter().map(|&l| Curve { l, x: p.clone(), y: p.iter().map(|p| p + l).collect() }).collect();
    assert_eq!(crossing(&curves), Err(AnalysisError::NoCrossing));
}

/// `τ ∝ L^{z} exp(c (p_c - p) ln² L)`: convex in ln L below p_c and concave above.
#[test]
fn inflection_recovers_critical_point_and_exponent() {
    let sizes = [8.0, 16.0, 32.0, 64.0];
    let points: Vec<ScalingPoint> = (0..10)
        .map(|i| {
            let p = 0.18 + 0.02 * i as f64;
            let data = sizes
                .iter()
                .map(|&l: &f64| {
                    let u = l.ln();
                    (l, (0.22 * u + 3.0 * (0.26 - p) * u * u).exp(), 0.0)
                })
                .collect();
            ScalingPoint { x: p, data }
        })
        .collect();
    let inf = inflection(&points, InflectionScale::LogLog).unwrap();
    assert!((inf.p_c - 0.26).abs() < 1e-9, "{inf:?}");
    assert!((inf.slope - 0.22).abs() < 1e-9, "{inf:?}");
}

fn master(u: f64) -> f64 {
    1.0 + 0.5 * (1.5 * u).tanh() + 0.1 * u
}

fn collapse_data(x_c: f64, x_exp: f64, y_exp: f64) -> Vec<CollapsePoint> {
    let mut out = Vec::new();
    for l in [16.0, 32.0, 64.0f64] {
        for i in 0..=18 {
            let p = 0.18 + 0.01 * i as f64;
            let u = (p - x_c) * l.powf(x_exp);
            out.push(CollapsePoint { l, x: p, y: l.powf(y_exp) * master(u) });
        }
    }
    out
}

#[test]
fn collapse_recovers_exponents() {
    let (x_c, x_exp, y_exp) = (0.26, 0.22 / 0.45, 0.22);
    let data = collapse_data(x_c, x_exp, y_exp);
    let truth = collapse_quality(&data, Ansatz { x_c, x_exp, y_exp }).unwrap();
    let bounds = CollapseBounds { x_c: (0.2, 0.32), x_exp: (0.2, 1.0), y_exp: (0.0, 0.5) };
    let fit = optimize_collapse(&data, bounds, 9).unwrap();
    assert!(fit.quality <= truth + 1e-12);
    let a = fit.ansatz;
    for (got, want) in [(a.x_c, x_c), (a.x_exp, x_exp), (a.y_exp, y_exp)] {
        assert!((got - want).abs() <= 0.05 * want, "{a:?}");
    }
}

#[test]
fn collapse_needs_three_sizes() {
    let data: Vec<CollapsePoint> =
        collapse_data(0.26, 0.5, 0.2).into_iter().filter(|p| p.l != 64.0).collect();
    let a = Ansatz { x_c: 0.26, x_exp: 0.5, y_exp: 0.2 };
    assert!(matches!(collapse_quality(&data, a), Err(AnalysisError::Precondition(_))));
    let single: Vec<CollapsePoint> = data.into_iter().filter(|p| p.l == 16.0).collect();
    assert!(collapse_quality(&single, a).is_err());
}

#[test]
fn wrong_ansatz_collapses_worse() {
    let data = collapse_data(0.26, 0.5, 0.2);
    let good = collapse_quality(&data, Ansatz { x_c: 0.26, x_exp: 0.5, y_exp: 0.2 }).unwrap();
    let bad = collapse_quality(&data, Ansatz { x_c: 0.3, x_exp: 0.5, y_exp: 0.2 }).unwrap();
    assert!(good < 1e-3 && bad > 10.0 * good, "{good} {bad}");
}
