use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::exec::Execution;
use crate::spin::{run_chains, KawasakiConfig, SpinSystemSpec};

fn gauss() -> Measure1D {
    Measure1D::auto(Potential1D::standard_gaussian()).unwrap()
}

fn expo() -> Measure1D {
    Measure1D::auto(Potential1D::two_sided_exp()).unwrap()
}

fn unif() -> Measure1D {
    Measure1D::auto(Potential1D::uniform(-1.0, 1.0)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn chains(site: Measure1D, n: usize, s: f64, sweeps: usize, scale: f64, seed: u64, k: usize) -> Vec<Trace> {
    let spec = SpinSystemSpec::new(n, site).unwrap().with_s(s);
    let obs = (0..n).map(Observable::Coord).collect();
    let cfg = KawasakiConfig::new(sweeps, scale).with_observables(obs);
    run_chains(&spec, &cfg, seed, k, Execution::default()).unwrap()
}

#[test]
fn gap_1d_analytic_oracles() {
    let g = gap_1d(&gauss(), 2000).unwrap();
    assert!(rel(g.value, 1.0) < 0.02, "gauss {g:?}");
    let u = gap_1d(&unif(), 2000).unwrap();
    assert!(rel(u.value, PI * PI / 4.0) < 0.02, "uniform {u:?}");
    let e = gap_1d(&expo(), 2000).unwrap();
    assert!(rel(e.value, 0.25) < 0.03, "expo {e:?}");
    assert_eq!(g.method, GapMethod::Eig1d);
    assert_eq!(g.meta, 2000);
}

#[test]
fn gap_1d_refinement_within_error() {
    for m in [gauss(), expo(), unif()] {
        let a = gap_1d(&m, 1000).unwrap();
        let b = gap_1d(&m, 2000).unwrap();
        assert!((a.value - b.value).abs() <= a.error * (1.0 + 1e-9), "{a:?} {b:?}");
    }
}

#[test]
fn gap_1d_power_sites_are_finite() {
    for p in [1.5, 3.0] {
        let g = gap_1d(&Measure1D::auto(Potential1D::power(p)).unwrap(), 2000).unwrap();
        assert!(g.value > 0.0 && g.value.is_finite() && g.error < 0.01 * g.value, "p={p} {g:?}");
    }
}

#[test]
fn gap_scales_as_inverse_length_squared() {
    for (m, lambda) in [(gauss(), 2.0), (expo(), 0.5), (unif(), 3.0)] {
        let base = gap_1d(&m, 2000).unwrap();
        let d = gap_1d(&m.dilate(lambda).unwrap(), 2000).unwrap();
        let tol = (base.error + d.error * lambda * lambda) / base.value + 1e-6;
        assert!(rel(d.value * lambda * lambda, base.value) <= tol.max(1e-3), "lambda={lambda}: {base:?} {d:?}");
    }
}

#[test]
fn small_grid_is_a_validation_error() {
    let e = gap_1d(&gauss(), 150).unwrap_err();
    assert!(e.is_validation());
}

#[test]
fn hyperplane_reduction() {
    for s in [0.0, 1.5] {
        let g = gap_hyperplane_n2(&gauss(), s, 2000).unwrap();
        assert!(rel(g.value, 1.0) < 0.02, "s={s} {g:?}");
    }
    let e0 = gap_hyperplane_n2(&expo(), 0.0, 2000).unwrap();
    assert!(e0.value >= 0.05, "{e0:?}");
    for s in [0.0, 1.0, 2.0, 4.0, 8.0] {
        let g = gap_hyperplane_n2(&expo(), s, 2000).unwrap();
        let band = g.value * (1.0 + s * s);
        assert!((0.02..=50.0).contains(&band), "s={s}: {band}");
    }
}

#[test]
fn hyperplane_potential_for_gaussian_is_standard() {
    let w = hyperplane_potential_n2(&Potential1D::standard_gaussian(), 0.7);
    let c = w.v(0.0);
    for t in [-2.0, 0.3, 1.1] {
        assert!(((w.v(t) - c) - 0.5 * t * t).abs() < 1e-12);
    }
}

#[test]
fn uniform_hyperplane_support() {
    // x = (s + t/sqrt2, s - t/sqrt2) in [-1, 1]^2 confines t to |t| <= sqrt2 (1 - |s|)
    let w = hyperplane_potential_n2(&Potential1D::uniform(-1.0, 1.0), 0.5);
    let r = std::f64::consts::SQRT_2;
    assert!((w.support.0 + 0.5 * r).abs() < 1e-12 && (w.support.1 - 0.5 * r).abs() < 1e-12);
    let g = gap_hyperplane_n2(&unif(), 0.5, 2000).unwrap();
    let len = r;
    assert!(rel(g.value, (PI / len).powi(2)) < 0.02, "{g:?}");
}

#[test]
fn rayleigh_gaussian_is_one() {
    for n in [2, 4] {
        let tr = chains(gauss(), n, 0.0, 40_000, 1.0, 11, 4);
        let g = gap_rayleigh_linear(&tr, n).unwrap();
        assert!((g.value - 1.0).abs() < 4.0 * g.error + 0.02, "n={n} {g:?}");
        assert!(g.has_flag(GapFlag::UpperBound));
        // exchangeability
        let h = gap_rayleigh_coord(&tr, n, n - 1).unwrap();
        assert!((g.value - h.value).abs() < 4.0 * (g.error + h.error), "{g:?} {h:?}");
    }
}

#[test]
fn rayleigh_rejects_short_traces() {
    let tr = chains(gauss(), 2, 0.0, 100, 1.0, 1, 1);
    assert!(matches!(gap_rayleigh_linear(&tr, 2), Err(Error::TraceTooShort { .. })));
}

#[test]
fn autocorr_iid_hits_noise_ceiling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let g = gap_autocorr_series(&[&x], 200).unwrap();
    assert!(g.has_flag(GapFlag::NoiseCeiling) && g.has_flag(GapFlag::Proxy), "{g:?}");
    assert!(g.value > 2.0);
}

#[test]
fn autocorr_recovers_ar1_rate() {
    let phi: f64 = 0.95;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x = vec![0.0; 200_000];
    for t in 1..x.len() {
        let z: f64 = StandardNormal.sample(&mut rng);
        x[t] = phi * x[t - 1] + (1.0 - phi * phi).sqrt() * z;
    }
    let g = gap_autocorr_series(&[&x], 500).unwrap();
    let want = -phi.ln();
    assert!(rel(g.value, want) < 0.1, "{g:?} want {want}");
    assert!(g.error > 0.0 && g.error < 0.1 * want, "{g:?}");
}

#[test]
fn autocorr_flat_series_has_no_decay() {
    let x = vec![1.0; 1000];
    assert!(matches!(gap_autocorr_series(&[&x], 50), Err(Error::NoDecay)));
}

#[test]
fn autocorr_requires_long_trace() {
    let phi: f64 = 0.999;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = vec![0.0; 5000];
    for t in 1..x.len() {
        let z: f64 = StandardNormal.sample(&mut rng);
        x[t] = phi * x[t - 1] + z;
    }
    assert!(matches!(gap_autocorr_series(&[&x], 2000), Err(Error::TraceTooShort { .. })));
}

#[test]
fn autocorr_kawasaki_seed_stable() {
    let rates: Vec<f64> = (0..4)
        .map(|seed| {
            let tr = chains(gauss(), 2, 0.0, 20_000, 0.5, 100 + seed, 2);
            gap_autocorr(&tr, Observable::Coord(0), 500).unwrap().value
        })
        .collect();
    let mean = rates.iter().sum::<f64>() / 4.0;
    let sd = (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!(mean > 0.0 && sd / mean < 0.3, "{rates:?}");
}

#[test]
fn sandwich_gaussian_and_exponential() {
    let tr = chains(gauss(), 4, 0.0, 40_000, 1.0, 5, 4);
    let r = sandwich_small_n(&gauss(), 4, &tr, (0.01, 100.0)).unwrap();
    assert!(r.in_band);
    assert!((r.var_ratio - 0.75).abs() < 0.05, "{r:?}");

    let tr = chains(expo(), 8, 0.0, 40_000, 1.5, 6, 4);
    let r = sandwich_small_n(&expo(), 8, &tr, (0.01, 100.0)).unwrap();
    assert!(r.in_band && (0.2..=5.0).contains(&r.var_ratio), "{r:?}");
}

#[test]
fn sandwich_n2_agrees_with_exact_reduction() {
    for s in [0.0, 1.0] {
        let tr = chains(expo(), 2, s, 40_000, 1.5, 8, 4);
        let r = sandwich_small_n(&expo(), 2, &tr, (0.01, 100.0)).unwrap();
        let ratio = r.n2_ratio.unwrap();
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "s={s} {r:?}");
        // the Rayleigh quotient bounds the gap from above
        let exact = r.n2_exact.as_ref().unwrap();
        assert!(exact.value <= r.rayleigh.value + 3.0 * r.rayleigh.error, "{r:?}");
    }
}

#[test]
fn sandwich_rejects_off_centre_site() {
    let m = gauss().translate(1.0).unwrap();
    let tr = chains(m.clone(), 2, 1.0, 2000, 1.0, 1, 1);
    assert!(sandwich_small_n(&m, 2, &tr, (0.01, 100.0)).unwrap_err().is_validation());
}

#[test]
fn tensorization_pairs() {
    let gg = tensorization_check(&gauss(), &gauss(), 200).unwrap();
    assert!(rel(gg.gap_2d, 1.0) < 0.03 && gg.rel_diff < 0.05, "{gg:?}");
    assert!(rel(gg.gap_2d, gg.gap_m1.value) < 0.05);
    let gu = tensorization_check(&gauss(), &unif(), 200).unwrap();
    assert!(rel(gu.gap_2d, 1.0) < 0.03 && gu.rel_diff < 0.05, "{gu:?}");
}

