use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::constants::UniversalConstants;
use crate::exec::McOptions;
use crate::measure1d::{D2Route, MeasureStats, Potential1D};

fn gauss() -> Measure1D {
    Measure1D::auto(Potential1D::standard_gaussian()).unwrap()
}

fn expo() -> Measure1D {
    Measure1D::auto(Potential1D::two_sided_exp()).unwrap()
}

fn st(m2: f64, kappa: f64, d1: f64, d2: f64) -> MeasureStats {
    MeasureStats {
        m2,
        m3: 1.0,
        var: m2,
        d1_psi1: d1,
        d2_delta: d2,
        d2_psi1_delta: d2,
        delta: 1.0,
        density_sup: 1.0,
        kappa,
        d2_route: D2Route::Hessian,
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn projection_examples() {
    let g = HyperplaneGeometry::new(2);
    let (e, d) = g.project(&[1.0, 3.0]).unwrap();
    assert_abs_diff_eq!(d, 4.0 / 2f64.sqrt(), epsilon = 1e-14);
    assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-14);
    let g = HyperplaneGeometry::new(5);
    let (e, _) = g.project(&[2.5; 5]).unwrap();
    assert!(e.iter().all(|v| v.abs() < 1e-14));
    let (_, d) = g.project(&[1.0, -2.0, 0.5, 0.5, 0.0]).unwrap();
    assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
    assert!(matches!(g.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

proptest! {
    #[test]
    fn projection_algebra(x in proptest::collection::vec(-10.0f64..10.0, 2..12)) {
        let g = HyperplaneGeometry::new(x.len());
        let (e, d) = g.project(&x).unwrap();
        let n2: f64 = x.iter().map(|v| v * v).sum();
        let e2: f64 = e.iter().map(|v| v * v).sum();
        prop_assert!((n2 - e2 - d * d).abs() < 1e-10 * (1.0 + n2));
        let dot: f64 = e.iter().zip(&g.diag_unit).map(|(a, b)| a * b).sum();
        prop_assert!(dot.abs() < 1e-12 * (1.0 + n2.sqrt()));
        for i in 0..x.len() {
            prop_assert!((e[i] + d * g.diag_unit[i] - x[i]).abs() < 1e-12 * (1.0 + x[i].abs()));
        }
    }

    #[test]
    fn quadratic_ratio_depends_on_diagonal_only(x in proptest::collection::vec(-3.0f64..3.0, 2..8)) {
        let spec = SpinSystemSpec::new(x.len(), gauss()).unwrap().with_w(10.0).unwrap();
        let (_, d) = spec.geometry().project(&x).unwrap();
        let r = ratio_raw(&spec, &x).unwrap();
        prop_assert!((r.ln() - d * d / 2.0).abs() < 1e-9);
    }
}

#[test]
fn hamiltonian_examples() {
    let h = Hamiltonian::new(Potential1D::new("x^2/2", |x| 0.5 * x * x), None, None);
    assert_abs_diff_eq!(h.eval(&[1.0, 1.0]).unwrap(), 1.0);
    let zero = Potential1D::new("zero", |_| 0.0);
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    let h = Hamiltonian::new(zero.clone(), Some(a), None);
    assert_abs_diff_eq!(h.eval(&[1.0, 1.0]).unwrap(), -1.0);
    let h = Hamiltonian::new(zero, None, Some(vec![1.0, 0.0]));
    assert_abs_diff_eq!(h.eval(&[2.0, 3.0]).unwrap(), 2.0);
    assert!(matches!(h.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn ratio_raw_examples() {
    let spec = SpinSystemSpec::new(3, gauss()).unwrap().with_w(0.5).unwrap();
    assert_abs_diff_eq!(ratio_raw(&spec, &[1.0, -0.5, -0.5]).unwrap(), 1.0, epsilon = 1e-14);
    assert_eq!(ratio_raw(&spec, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
    let x = [0.3, 0.1, -0.2];
    let d = 0.2 / 3f64.sqrt();
    assert_abs_diff_eq!(ratio_raw(&spec, &x).unwrap(), (d * d / 2.0).exp(), epsilon = 1e-13);
}

#[test]
fn interaction_validation_and_norms() {
    let spec = SpinSystemSpec::new(3, gauss()).unwrap();
    let asym = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(spec.clone().with_interaction(asym), Err(Error::InvalidSpec(_))));
    let diag = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(spec.clone().with_interaction(diag), Err(Error::InvalidSpec(_))));
    assert!(matches!(spec.clone().with_boundary(vec![1.0]), Err(Error::DimensionMismatch { .. })));
    for a in [nearest_neighbor(6, 0.3), mean_field(6, 0.7)] {
        let op = op_norm(&a);
        let hs = hs_norm(&a);
        assert!(op <= hs + 1e-12 && hs <= 6f64.sqrt() * op + 1e-12);
    }
    // mean field: eigenvalues (n-1) v and -v
    assert_abs_diff_eq!(op_norm(&mean_field(6, 0.6)), 0.5, epsilon = 1e-12);
}

#[test]
fn ze_examples() {
    let spec = SpinSystemSpec::new(4, gauss()).unwrap();
    let z = estimate_ze(&spec, McOptions::new(100_000, 7)).unwrap();
    assert!((z.value - 1.0 / (2.0 * PI).sqrt()).abs() < 4.0 * z.stderr + 0.004, "{z:?}");
    let spec = SpinSystemSpec::new(1, expo()).unwrap();
    let z = estimate_ze(&spec, McOptions::new(200_000, 3)).unwrap();
    // the kernel smooths the cusp: compare with the smoothed site density
    let h = z.bandwidth;
    let smoothed = simpson(|t| (-0.5 * (t / h).powi(2)).exp() / (h * (2.0 * PI).sqrt()) * 0.5 * (-t.abs()).exp(), 0.0, 12.0 * h, 4000) * 2.0;
    assert!((z.value - smoothed).abs() < 4.0 * z.stderr, "{z:?} vs {smoothed}");
    assert!((z.value - 0.5).abs() < 0.06);
    let spec = SpinSystemSpec::new(64, expo()).unwrap();
    let z = estimate_ze(&spec, McOptions::new(100_000, 5)).unwrap();
    assert!((z.value - 1.0 / (4.0 * PI).sqrt()).abs() < 0.01, "{z:?}");
    assert!(matches!(estimate_ze(&spec, McOptions::new(10, 1)), Err(Error::TooFewSamples { .. })));
}

#[test]
fn lp_ratio_normalization() {
    for (site, n) in [(gauss(), 2), (expo(), 3), (gauss(), 16)] {
        let spec = SpinSystemSpec::new(n, site).unwrap();
        let r = mc_lp_ratio(&spec, 1.0, McOptions::new(100_000, 11)).unwrap();
        assert!((r.value - 1.0).abs() <= 3.0 * r.stderr, "{r:?}");
    }
}

#[test]
fn lp_ratio_gaussian_quadrature() {
    let spec = SpinSystemSpec::new(2, gauss()).unwrap();
    let r = mc_lp_ratio(&spec, 4.0, McOptions::new(200_000, 13)).unwrap();
    let num = simpson(|d| (2.0 * d * d).exp() * (-0.5 * d * d).exp() / (2.0 * PI).sqrt(), -1.0, 1.0, 2000);
    let zhat = 2.0 / (2.0 * PI).sqrt();
    let exact = num.powf(0.25) / zhat;
    assert!((r.value - exact).abs() <= 3.0 * r.stderr, "{} vs {exact} ({})", r.value, r.stderr);
}

#[test]
fn lp_ratio_vanishing_slab() {
    let spec = SpinSystemSpec::new(2, gauss()).unwrap().with_w(1e-9).unwrap();
    match mc_lp_ratio(&spec, 4.0, McOptions::new(10_000, 1)) {
        Err(Error::ZeDegenerate { .. }) => {}
        Ok(r) => assert!(!r.value.is_finite() || r.stderr > 0.5 * r.value, "{r:?}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn w0_examples() {
    assert_abs_diff_eq!(choose_w0(&st(1.0, 0.0, 2.0, 0.0), W0Variant::OneSided).unwrap(), 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(choose_w0(&st(1.0, 0.0, 1.0, 0.0), W0Variant::OneSided).unwrap(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(choose_w0(&st(4.0, 0.0, 1.0, 3.0), W0Variant::TwoSided).unwrap(), 0.5, epsilon = 1e-15);
    assert!(matches!(choose_w0(&st(f64::NAN, 0.0, 1.0, 0.0), W0Variant::OneSided), Err(Error::MissingStats(_))));
}

#[test]
fn moment_bound_examples() {
    let c = UniversalConstants::default();
    let s = st(1.0, 0.0, 1.0, 1.0);
    assert_abs_diff_eq!(moment_bound(MomentVariant::OneSided, 4.0, 1.0, &s, &c).unwrap(), 16f64.exp(), epsilon = 1e-6);
    assert_abs_diff_eq!(moment_bound(MomentVariant::TwoSided, 0.0, 1.0, &s, &c).unwrap(), 1.0);
    let mut c5 = c.clone();
    c5.c5 = 3.0;
    let v = moment_bound(MomentVariant::Interaction { rho: 1.0, op: 0.0, hs: 0.0 }, 4.0, 1.0, &s, &c5).unwrap();
    assert_abs_diff_eq!(v, 3.0);
    let strong = MomentVariant::Interaction { rho: 1.0, op: 1.0, hs: 1.0 };
    assert!(matches!(moment_bound(strong, 4.0, 1.0, &s, &c), Err(Error::InteractionTooStrong(_))));
}

#[test]
fn l4_bound_examples() {
    let c = UniversalConstants::default();
    assert_abs_diff_eq!(l4_ratio_bound(L4Variant::OneSided, &st(1.0, 0.0, 1.0, 0.0), &c).unwrap(), 1.0);
    let two = st(2.0, 0.0, 1.0, 1.0);
    assert_abs_diff_eq!(l4_ratio_bound(L4Variant::TwoSided, &two, &c).unwrap(), 4.0);
    let zero = L4Variant::Interacting { rho: 1.0, op: 0.0, hs: 0.0 };
    assert_abs_diff_eq!(l4_ratio_bound(zero, &two, &c).unwrap(), 4.0);
    let strong = L4Variant::Interacting { rho: 1.0, op: 2.0, hs: 2.0 };
    assert!(matches!(l4_ratio_bound(strong, &two, &c), Err(Error::InteractionTooStrong(_))));
}

#[test]
fn lsi_report_examples() {
    let c = UniversalConstants::default();
    let g = gauss();
    let s = crate::measure1d::stats(&g, 1.0).unwrap();
    let spec = SpinSystemSpec::new(8, g).unwrap();
    let r = lsi_report(&spec, &s, 1.0, LsiVariant::OneSided, &c).unwrap();
    assert!(r.preconditions_passed);
    assert_abs_diff_eq!(r.q, (s.d1_psi1 * s.d1_psi1).max(1.0), epsilon = 1e-9);
    assert_abs_diff_eq!(r.bound, 1.0 / r.q, epsilon = 1e-12);
    let two = lsi_report(&spec, &s, 1.0, LsiVariant::TwoSided, &c).unwrap();
    let inter = lsi_report(&spec, &s, 1.0, LsiVariant::Interacting, &c).unwrap();
    assert_abs_diff_eq!(two.q, inter.q, epsilon = 1e-15);
    let mut neg = s;
    neg.kappa = 0.25;
    assert!(matches!(lsi_report(&spec, &neg, 1.0, LsiVariant::OneSided, &c), Err(Error::CurvatureTooNegative(_))));
    let strong = spec.with_interaction(mean_field(8, 4.0)).unwrap();
    assert!(matches!(lsi_report(&strong, &s, 1.0, LsiVariant::Interacting, &c), Err(Error::InteractionTooStrong(_))));
}

#[test]
fn sg_report_examples() {
    let c = UniversalConstants::default();
    let e = expo();
    let s = crate::measure1d::stats(&e, 1.0).unwrap();
    let spec = SpinSystemSpec::new(4, e).unwrap();
    let rho0 = 0.25;
    let r = sg_report(&spec, &s, rho0, &c).unwrap();
    assert_abs_diff_eq!(r.lipschitz_bound.unwrap(), rho0 / (2.0 + 1.0 / rho0).ln().powi(2), epsilon = 1e-14);
    assert!(r.q >= 1.0);
    assert_abs_diff_eq!(r.upper, rho0);
    let mut unit = s;
    unit.var = 1.0;
    unit.d1_psi1 = 0.5;
    let r = sg_report(&spec, &unit, 2.0, &c).unwrap();
    assert_eq!(r.q, 1.0);
    assert_abs_diff_eq!(r.q_bound, 2.0);
    let dw = Potential1D::new("double well", |x| (x * x - 1.0).powi(2))
        .with_dv(|x| 4.0 * x * (x * x - 1.0))
        .with_d2v(|x| 12.0 * x * x - 4.0);
    let spec = SpinSystemSpec::new(4, Measure1D::auto(dw).unwrap()).unwrap();
    assert!(matches!(sg_report(&spec, &s, 1.0, &c), Err(Error::NotLogConcave { .. })));
}

#[test]
fn clt_examples() {
    let c = UniversalConstants::default();
    let s = crate::measure1d::stats(&gauss(), 1.0).unwrap();
    let (be, _) = clt_bounds(&s, 100, &c).unwrap();
    assert_abs_diff_eq!(be, 2.0 * (2.0 / PI).sqrt() / 10.0, epsilon = 1e-8);
    let (be2, loc2) = clt_bounds(&s, 100_000_000, &c).unwrap();
    assert!(be2 < 1e-3 && loc2 < 1e-2);
    let e = crate::measure1d::stats(&expo(), 1.0).unwrap();
    let (be, loc) = clt_bounds(&e, 1, &c).unwrap();
    assert_abs_diff_eq!(be, 6.0 / 2f64.powf(1.5), epsilon = 1e-8);
    assert_abs_diff_eq!(loc, 6.0 / 2f64.powf(1.5) / 2f64.sqrt(), epsilon = 1e-6);
}

#[test]
fn kawasaki_gaussian_variance() {
    let n = 4;
    let spec = SpinSystemSpec::new(n, gauss()).unwrap();
    let cfg = KawasakiConfig::new(100_000, 1.0);
    let t = kawasaki_sampler(&spec, &cfg, 21).unwrap();
    assert!(t.acceptance > 0.05 && t.acceptance < 0.95, "{}", t.acceptance);
    let x1 = t.series(Observable::Coord(0)).unwrap();
    let m = x1.iter().sum::<f64>() / x1.len() as f64;
    let v = x1.iter().map(|x| (x - m).powi(2)).sum::<f64>() / x1.len() as f64;
    assert!((v - 0.75).abs() < 0.03, "{v}");
}

#[test]
fn kawasaki_drift() {
    let spec = SpinSystemSpec::new(5, expo()).unwrap().with_s(0.37);
    let cfg = KawasakiConfig::new(1_000_000, 1.0).with_burn_in(1000).with_observables(vec![]);
    let t = kawasaki_sampler(&spec, &cfg, 1).unwrap();
    assert!(t.max_drift <= 1e-12, "{}", t.max_drift);
}

#[test]
fn kawasaki_interacting_energy_is_consistent() {
    let spec = SpinSystemSpec::new(5, gauss())
        .unwrap()
        .with_interaction(nearest_neighbor(5, 0.2))
        .unwrap()
        .with_boundary(vec![0.1, 0.0, -0.3, 0.0, 0.2])
        .unwrap()
        .with_s(0.5);
    let cfg = KawasakiConfig::new(2000, 1.0).with_observables(vec![Observable::Energy]);
    let t = kawasaki_sampler(&spec, &cfg, 4).unwrap();
    let direct = spec.hamiltonian().eval(&t.final_state).unwrap();
    assert_abs_diff_eq!(*t.values[0].last().unwrap(), direct, epsilon = 1e-9);
}

#[test]
fn kawasaki_stationarity_ks() {
    let s = 1.0;
    let spec = SpinSystemSpec::new(2, expo()).unwrap().with_s(s);
    let t = kawasaki_sampler(&spec, &KawasakiConfig::new(100_000, 1.0), 9).unwrap();
    let mut x: Vec<f64> = t.series(Observable::Coord(0)).unwrap().to_vec();
    x.sort_by(f64::total_cmp);
    // exact marginal of x1 on {x1 + x2 = 2s}
    let dens = |u: f64| (-u.abs() - (2.0 * s - u).abs()).exp();
    let (lo, hi) = (-30.0, 32.0);
    let grid = 62_000;
    let h = (hi - lo) / grid as f64;
    let mut cdf = vec![0.0; grid + 1];
    for k in 1..=grid {
        let (a, b) = (lo + h * (k - 1) as f64, lo + h * k as f64);
        cdf[k] = cdf[k - 1] + (dens(a) + 4.0 * dens(0.5 * (a + b)) + dens(b)) * h / 6.0;
    }
    let z = cdf[grid];
    let f = |u: f64| {
        let k = (((u - lo) / h) as usize).min(grid - 1);
        let frac = (u - lo) / h - k as f64;
        (cdf[k] + frac * (cdf[k + 1] - cdf[k])) / z
    };
    let m = x.len() as f64;
    let ks = x
        .iter()
        .enumerate()
        .map(|(i, &u)| (f(u) - i as f64 / m).abs().max((f(u) - (i + 1) as f64 / m).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "{ks}");
}

#[test]
fn simplex_examples() {
    assert_abs_diff_eq!(simplex_ratio_bound(2, 1.0), 0.5);
    assert_abs_diff_eq!(1.0 / (1.0 + simplex_ratio_bound(2, 1.0)), 2.0 / 3.0);
    assert_abs_diff_eq!(simplex_volume(4), 1.0 / 24.0);
    assert!(simplex_ratio_bound(6, 1e3) < 1e-12);
    let spec = SpinSystemSpec::new(2, expo()).unwrap().with_s(1.0);
    let r = simplex_mass(&spec, 200_000, 3, crate::exec::Execution::Parallel).unwrap();
    // n = 2, s = 1: the mass is exactly 2/3
    assert!((r.estimate - 2.0 / 3.0).abs() < 4.0 * r.stderr + 1e-3, "{r:?}");
    assert_abs_diff_eq!(simplex_mass_exact(2, 1.0), 2.0 / 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(simplex_mass_exact(2, 2.0), 0.8, epsilon = 1e-15);
    assert!(simplex_mass_exact(5, 1e6) > 1.0 - 1e-5);
    // the union bound undercounts for n >= 3; the exact mass sits below 1/(1+ratio)
    assert!(simplex_mass_exact(3, 1.0) < 1.0 / (1.0 + simplex_ratio_bound(3, 1.0)));
    for s in [1.0, 50.0] {
        let spec = SpinSystemSpec::new(3, expo()).unwrap().with_s(s);
        let r = simplex_mass(&spec, 400_000, 1, crate::exec::Execution::Parallel).unwrap();
        assert!((r.estimate - r.exact).abs() < 4.0 * r.stderr + 2e-3, "{r:?}");
    }
    assert!(matches!(simplex_mass(&SpinSystemSpec::new(2, gauss()).unwrap().with_s(1.0), 100, 1, crate::exec::Execution::Parallel), Err(Error::InvalidSpec(_))));
}
