use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use super::*;
use crate::measure1d::Potential1D;

fn gauss() -> Measure1D {
    Measure1D::auto(Potential1D::standard_gaussian()).unwrap()
}

/// Upper normal tail by Simpson's rule.
fn upper_tail(t: f64) -> f64 {
    let n = 20_000;
    let (a, b) = (t, t + 20.0);
    let h = (b - a) / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn bernstein_examples() {
    let c = UniversalConstants::default();
    assert_eq!(bernstein_bound(0.0, &[1.0, 0.0], 1.0, &c), 1.0);
    assert_abs_diff_eq!(bernstein_bound(2.0, &[1.0, 0.0, 0.0], 1.0, &c), (-2.0f64).exp(), epsilon = 1e-15);
    let n = 16;
    let a = vec![1.0 / (n as f64).sqrt(); n];
    for t in [0.5, 1.0, 3.0, 4.0] {
        assert_abs_diff_eq!(bernstein_shape(t, &a, 1.0), t * t, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(bernstein_shape(8.0, &a, 1.0), 8.0 * 4.0, epsilon = 1e-12);
}

#[test]
fn chaos_bound_examples() {
    let c = UniversalConstants::default();
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    assert_eq!(chaos_bound(0.0, &a, 1.0, &c).unwrap(), 1.0);
    assert!(matches!(chaos_bound(1.0, &DMatrix::zeros(3, 3), 1.0, &c), Err(Error::ZeroMatrix)));
    assert_abs_diff_eq!(chaos_bound(1.0, &a, 1.0, &c).unwrap(), (-2.0f64).exp(), epsilon = 1e-14);
    assert_abs_diff_eq!(chaos_bound_subgaussian(1.0, &a, 1.0, &c).unwrap(), (-2.0f64).exp(), epsilon = 1e-14);
}

#[test]
fn linear_tail_examples() {
    assert_eq!(linear_subgaussian_tail(0.0, &[1.0], 1.0), 1.0);
    let b = linear_subgaussian_tail(2.0, &[1.0, 0.0], 1.0);
    assert_abs_diff_eq!(b, (-2.0f64).exp(), epsilon = 1e-15);
    assert!(b >= upper_tail(2.0));
    assert_abs_diff_eq!(upper_tail(2.0), 0.02275, epsilon = 1e-5);
    assert_abs_diff_eq!(linear_subgaussian_tail(3.0, &[0.5, 1.0], 1.0), linear_subgaussian_tail(6.0, &[1.0, 2.0], 1.0), epsilon = 1e-15);
}

#[test]
fn mc_tail_linear_matches_normal() {
    let c = UniversalConstants::default();
    let ts: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
    let r = mc_tail(&TailStatistic::Linear(vec![1.0, 0.0, 0.0]), &gauss(), &ts, McOptions::new(200_000, 3), &c).unwrap();
    for (i, t) in ts.iter().enumerate() {
        assert!((r.empirical[i] - upper_tail(*t)).abs() <= 4.0 * r.stderr[i] + 1e-4, "t={t}");
    }
    // below-median thresholds stay out of the fit
    assert!(!r.fit_window.contains(&0));
    // inverse-CDF sampling for a non-Gaussian family
    let e = Measure1D::auto(Potential1D::two_sided_exp()).unwrap();
    let r = mc_tail(&TailStatistic::Linear(vec![1.0]), &e, &[1.0, 2.0], McOptions::new(100_000, 1), &c).unwrap();
    assert!((r.empirical[0] - 0.5 * (-1.0f64).exp()).abs() < 4.0 * r.stderr[0]);
    assert!(matches!(mc_tail(&TailStatistic::Linear(vec![1.0]), &e, &[1.0], McOptions::new(10, 1), &c), Err(Error::TooFewSamples { .. })));
}

#[test]
fn mc_tail_chaos_pair() {
    let c = UniversalConstants::default();
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    let ts: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
    let r = mc_tail(&TailStatistic::Chaos { a: a.clone(), rho: 1.0 }, &gauss(), &ts, McOptions::new(400_000, 5), &c).unwrap();
    assert!(r.fitted_c >= 0.05, "{}", r.fitted_c);
    for i in &r.fit_window {
        let b = chaos_bound(ts[*i], &a, 1.0, &c).unwrap();
        let envelope = 1.0 * (-r.dominating_c * chaos_shape(ts[*i], hs_norm(&a), op_norm(&a), 1.0)).exp();
        assert!(r.empirical[*i] <= envelope + 1e-12);
        assert!(b > 0.0);
    }
}

#[test]
fn moment_compare_examples() {
    let a = crate::spin::nearest_neighbor(4, 0.5);
    let g = moment_compare(&gauss(), &a, &[2.0, 4.0, 6.0], McOptions::new(200_000, 9)).unwrap();
    assert!((g.alpha - 1.0).abs() < 1e-6);
    for r in &g.rows {
        assert!((r.ratio - 1.0).abs() < 4.0 * r.ratio_stderr + 0.02, "{r:?}");
    }
    let u = Measure1D::auto(Potential1D::uniform(-3f64.sqrt(), 3f64.sqrt())).unwrap();
    let m = moment_compare(&u, &a, &[2.0, 4.0, 6.0], McOptions::new(200_000, 9)).unwrap();
    assert!(m.alpha <= 1.0 + 1e-9);
    for r in &m.rows {
        assert!(r.ratio <= 1.0 + 3.0 * r.ratio_stderr + 0.01, "{r:?}");
    }
    let z = moment_compare(&u, &DMatrix::zeros(3, 3), &[2.0], McOptions::new(100, 1)).unwrap();
    assert_eq!(z.rows[0].ratio, 1.0);
    let e = Measure1D::auto(Potential1D::two_sided_exp()).unwrap();
    assert!(matches!(moment_compare(&e, &a, &[2.0], McOptions::new(100, 1)), Err(Error::NotSubGaussian)));
}

#[test]
fn random_interaction_shape() {
    let a = random_interaction(32, 3.0, 17);
    validate_interaction(&a, 32).unwrap();
    assert_abs_diff_eq!(hs_norm(&a), 3.0, epsilon = 1e-12);
    assert_ne!(a, random_interaction(32, 3.0, 18));
    assert_eq!(a, random_interaction(32, 3.0, 17));
}
