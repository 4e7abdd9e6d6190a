use serde::Serialize;

use super::measure::{log_integral, Measure1D};
use super::potential::{Potential1D, Smoothness};
use crate::error::{Error, Result};
use crate::quad;

const PSI1_CAP: f64 = 1e6;
const SUP_POINTS: usize = 33;

/// Golden-section minimizer of `f` on `[a, b]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..120 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid minimum of `f` on `[lo, hi]` followed by local refinement.
pub(crate) fn scan_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let h = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    for i in 0..n {
        let x = lo + h * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let (x, v) = golden_min(&f, (best.0 - h).max(lo), (best.0 + h).min(hi));
    if v < best.1 {
        (x, v)
    } else {
        best
    }
}

/// `log E exp(|Y|/lambda)`, `+inf` when the integral diverges.
fn log_mgf_abs<Y: Fn(f64) -> f64>(m: &Measure1D, y: &Y, lambda: f64) -> f64 {
    let p = m.potential();
    let u = |x: f64| p.v(x) - y(x).abs() / lambda;
    match log_integral(&u, p.support, &p.kinks, m.window(), false) {
        Ok(li) => li.log_z - m.log_z(),
        Err(_) => f64::INFINITY,
    }
}

/// Orlicz norm `inf { lambda > 0 : E exp(|Y|/lambda) <= e }`.
pub fn psi1_norm<Y: Fn(f64) -> f64>(m: &Measure1D, y: Y) -> Result<f64> {
    let mean_abs = m.expect(|x| y(x).abs());
    if mean_abs == 0.0 {
        return Ok(0.0);
    }
    if !mean_abs.is_finite() {
        return Err(Error::NotSubExponential(f64::INFINITY));
    }
    // Jensen: E exp(|Y|/lambda) >= exp(E|Y|/lambda), so the norm is >= E|Y|.
    let mut lo = mean_abs;
    let mut hi = mean_abs;
    loop {
        let phi = log_mgf_abs(m, &y, hi);
        if phi <= 1.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > PSI1_CAP {
            return Err(Error::NotSubExponential(PSI1_CAP));
        }
    }
    if hi == mean_abs {
        return Ok(hi);
    }
    while hi / lo - 1.0 > 1e-12 {
        let mid = (lo * hi).sqrt();
        if log_mgf_abs(m, &y, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// How the second-order parameters were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum D2Route {
    Hessian,
    /// Finite-difference surrogate `W_2^eps` for non-C2 potentials.
    WEps { eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureStats {
    pub m2: f64,
    pub m3: f64,
    pub var: f64,
    pub d1_psi1: f64,
    pub d2_delta: f64,
    pub d2_psi1_delta: f64,
    pub delta: f64,
    pub density_sup: f64,
    pub kappa: f64,
    pub d2_route: D2Route,
}

/// Supremum of the density, refined around the mode.
pub fn density_sup(m: &Measure1D) -> f64 {
    let p = m.potential();
    let mut best = m.nodes().map(|(x, _)| m.density(x)).fold(0.0, f64::max);
    let (lo, hi) = m.window();
    let span = (hi - lo) / 2048.0;
    let c = m.mode();
    let (x, _) = golden_min(|x| p.v(x), (c - span).max(lo), (c + span).min(hi));
    best = best.max(m.density(x)).max(m.density(c));
    for &k in &p.kinks {
        if k >= lo && k <= hi {
            best = best.max(m.density(k));
        }
    }
    best
}

/// `max(0, -inf V'')`, using the declared bound when there is one.
pub fn kappa(p: &Potential1D, window: (f64, f64)) -> f64 {
    if p.hessian_lower.is_finite() {
        return (-p.hessian_lower).max(0.0);
    }
    let (lo, hi) = window;
    let (_, min) = if p.has_d2v() {
        scan_min(|x| p.d2v(x).unwrap_or(f64::INFINITY), lo, hi, 4001)
    } else {
        let h = (hi - lo) / 4000.0;
        scan_min(|x| (p.v(x + h) - 2.0 * p.v(x) + p.v(x - h)) / (h * h), lo + h, hi - h, 3999)
    };
    (-min).max(0.0)
}

/// Moments, Orlicz and curvature parameters of a site measure at window
/// half-width `delta`.
pub fn stats(m: &Measure1D, delta: f64) -> Result<MeasureStats> {
    if !(delta > 0.0) {
        return Err(Error::InvalidBound(format!("delta must be positive, got {delta}")));
    }
    let p = m.potential();
    if !p.has_dv() {
        return Err(Error::MissingDerivative("dv"));
    }
    let d1_psi1 = psi1_norm(m, |x| p.dv(x).unwrap_or(0.0))?;
    let (slo, shi) = p.support;
    let offsets: Vec<f64> = (0..SUP_POINTS)
        .map(|i| -delta + 2.0 * delta * i as f64 / (SUP_POINTS - 1) as f64)
        .collect();
    let (route, y0): (D2Route, Box<dyn Fn(f64) -> f64 + '_>) = if p.smoothness == Smoothness::C2 && p.has_d2v() {
        let f = move |x: f64| {
            offsets
                .iter()
                .map(|o| (x + o).clamp(slo, shi))
                .map(|t| p.d2v(t).unwrap_or(0.0).abs())
                .fold(0.0, f64::max)
        };
        (D2Route::Hessian, Box::new(f))
    } else {
        let eps = match p.lipschitz {
            Some(l) if l > 0.0 => delta.min(1.0 / l),
            _ => delta,
        };
        let w = WDecomposition::new(p.clone(), eps);
        let f = move |x: f64| {
            offsets
                .iter()
                .map(|o| x + o)
                .filter(|t| *t >= slo && t + eps <= shi)
                .map(|t| w.w2(t).abs())
                .fold(0.0, f64::max)
        };
        (D2Route::WEps { eps }, Box::new(f))
    };
    let d2_delta = m.expect(&y0);
    let d2_psi1_delta = psi1_norm(m, &y0)?;
    Ok(MeasureStats {
        m2: m.moment(2.0),
        m3: m.moment(3.0),
        var: m.variance(),
        d1_psi1,
        d2_delta,
        d2_psi1_delta,
        delta,
        density_sup: density_sup(m),
        kappa: kappa(p, m.window()),
        d2_route: route,
    })
}

/// Bakry–Émery: `inf V''` when positive.
pub fn bakry_emery_lsi(p: &Potential1D) -> Option<f64> {
    let rho = if p.hessian_lower.is_finite() {
        p.hessian_lower
    } else if p.has_d2v() && p.smoothness != Smoothness::Lipschitz {
        let (lo, hi) = p.probe_window();
        let (lo, hi) = if p.support.0.is_finite() || p.support.1.is_finite() {
            (lo, hi)
        } else {
            (5.0 * lo, 5.0 * hi)
        };
        scan_min(|x| p.d2v(x).unwrap_or(f64::INFINITY), lo, hi, 20001).1
    } else {
        return None;
    };
    (rho > 0.0).then_some(rho)
}

/// Holley–Stroock perturbation: `rho / (l1 l2)`.
pub fn holley_stroock(rho: f64, l1: f64, l2: f64) -> Result<f64> {
    if !(l1 >= 1.0) || !(l2 >= 1.0) {
        return Err(Error::InvalidBound(format!("Holley-Stroock factors must be >= 1, got ({l1}, {l2})")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidBound(format!("rho must be positive, got {rho}")));
    }
    Ok(rho / (l1 * l2))
}

/// Uniform-in-tilt bounds for an `(alpha, beta, omega)` weakly Gaussian site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeaklyGaussianCertificate {
    pub rho_lower: f64,
    pub kappa: f64,
    pub d2_upper: f64,
}

pub fn weakly_gaussian_certificate(alpha: f64, beta: f64, omega: f64) -> Result<WeaklyGaussianCertificate> {
    if !(alpha > 0.0) || !(beta > 0.0) || !(omega >= 0.0) {
        return Err(Error::NotWeaklyGaussian(format!(
            "need alpha > 0, beta > 0, omega >= 0; got ({alpha}, {beta}, {omega})"
        )));
    }
    let rho = alpha * (-omega).exp();
    let kappa = rho / 8.0;
    Ok(WeaklyGaussianCertificate { rho_lower: rho, kappa, d2_upper: beta.max(kappa) })
}

/// Validates the decomposition carried by `p` and returns its certificate.
pub fn certify_weakly_gaussian(p: &Potential1D) -> Result<WeaklyGaussianCertificate> {
    let d = p
        .decomposition
        .as_ref()
        .ok_or_else(|| Error::NotWeaklyGaussian(format!("{} has no convex decomposition", p.label)))?;
    p.validate()?;
    let (lo, hi) = p.probe_window();
    let beta = if p.hessian_upper.is_finite() {
        p.hessian_upper
    } else {
        -scan_min(|x| -p.d2v(x).unwrap_or(0.0), lo, hi, 4001).1
    };
    let cert = weakly_gaussian_certificate(d.alpha, beta, d.omega)?;
    let lower = if p.hessian_lower.is_finite() {
        p.hessian_lower
    } else {
        scan_min(|x| p.d2v(x).unwrap_or(f64::INFINITY), lo, hi, 4001).1
    };
    if lower < -cert.kappa - 1e-12 {
        return Err(Error::NotWeaklyGaussian(format!(
            "inf V'' = {lower} is below -alpha exp(-omega)/8 = {}",
            -cert.kappa
        )));
    }
    Ok(cert)
}

/// Total-variation distance by quadrature on the union of windows.
pub fn tv_distance(m1: &Measure1D, m2: &Measure1D) -> f64 {
    let (a1, b1) = m1.window();
    let (a2, b2) = m2.window();
    let f = |x: f64| {
        let d1 = if x >= a1 && x <= b1 { m1.density(x) } else { 0.0 };
        let d2 = if x >= a2 && x <= b2 { m2.density(x) } else { 0.0 };
        0.5 * (d1 - d2).abs()
    };
    let mut breaks = vec![a1, b1, a2, b2, m1.mode(), m2.mode()];
    breaks.extend(m1.potential().kinks.iter().chain(&m2.potential().kinks));
    let (lo, hi) = (a1.min(a2), b1.max(b2));
    breaks.retain(|x| *x >= lo && *x <= hi);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    quad::integrate(&f, &breaks, 1e-14).clamp(0.0, 1.0)
}

/// `(∫ (dmu2/dmu1)^p dmu1)^{1/p}`.
pub fn lp_density_ratio(mu2: &Measure1D, mu1: &Measure1D, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidBound(format!("exponent must exceed 1, got {p}")));
    }
    let (v1, v2) = (mu1.potential(), mu2.potential());
    let (s1, s2) = (v1.support, v2.support);
    if s2.0 < s1.0 || s2.1 > s1.1 {
        let x = if s2.0 < s1.0 { s2.0 } else { s2.1 };
        return Err(Error::NotAbsolutelyContinuous(x));
    }
    let (z1, z2) = (mu1.log_z(), mu2.log_z());
    let u = |x: f64| {
        let a = v2.v(x);
        if a == f64::INFINITY {
            return f64::INFINITY;
        }
        p * (a + z2) - (p - 1.0) * (v1.v(x) + z1)
    };
    let mut kinks = v1.kinks.clone();
    kinks.extend(&v2.kinks);
    let li = log_integral(&u, s2, &kinks, mu2.window(), false)
        .map_err(|e| Error::Diverges(format!("L^{p} density ratio: {e}")))?;
    Ok((li.log_z / p).exp())
}

/// Splitting `V(x+eps) - V(x) = eps W1(x) + eps^2/2 W2(x)` with
/// `W1 = (1 - exp(-W))/eps`.
#[derive(Clone, Debug)]
pub struct WDecomposition {
    potential: Potential1D,
    pub eps: f64,
}

impl WDecomposition {
    pub fn new(potential: Potential1D, eps: f64) -> Self {
        assert!(eps != 0.0, "eps must be nonzero");
        WDecomposition { potential, eps }
    }

    pub fn w(&self, x: f64) -> f64 {
        self.potential.v(x + self.eps) - self.potential.v(x)
    }

    pub fn w1(&self, x: f64) -> f64 {
        -(-self.w(x)).exp_m1() / self.eps
    }

    pub fn w2(&self, x: f64) -> f64 {
        let w = self.w(x);
        // w + expm1(-w) = w^2/2 - w^3/6 + ..., cancellation-free for small w
        let r = if w.abs() < 1e-3 {
            w * w * (0.5 - w / 6.0 + w * w / 24.0 - w * w * w / 120.0)
        } else {
            w + (-w).exp_m1()
        };
        2.0 * r / (self.eps * self.eps)
    }

    /// `W(x) - eps W1(x) - eps^2/2 W2(x)`.
    pub fn residual(&self, x: f64) -> f64 {
        let e = self.eps;
        self.w(x) - e * self.w1(x) - 0.5 * e * e * self.w2(x)
    }

    /// `∫ W1 dmu`, which vanishes exactly.
    pub fn centering(&self, m: &Measure1D) -> f64 {
        let (lo, hi) = m.window();
        let mut breaks = vec![lo, hi, m.mode()];
        for k in &self.potential.kinks {
            breaks.push(*k);
            breaks.push(k - self.eps);
        }
        breaks.retain(|x| *x >= lo && *x <= hi);
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        let f = |x: f64| {
            let d = m.density(x);
            if d == 0.0 {
                0.0
            } else {
                self.w1(x) * d
            }
        };
        quad::integrate(&f, &breaks, 1e-14)
    }
}

pub fn w_decompose(potential: &Potential1D, eps: f64) -> WDecomposition {
    WDecomposition::new(potential.clone(), eps)
}

/// Checks from the log-concave facts suite, all about the barycenter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogConcaveFacts {
    /// `f(barycenter) / ||f||_inf`, at least `1/e` for log-concave laws.
    pub center_ratio: f64,
    /// `||f||_inf^2 Var`.
    pub sup2_var: f64,
    /// `(p, q, M_q^{1/q} / ((q/p) M_p^{1/p}))` for central moments.
    pub reverse_holder: Vec<(f64, f64, f64)>,
}

pub fn log_concave_facts(m: &Measure1D) -> LogConcaveFacts {
    let b = m.barycenter();
    let sup = density_sup(m);
    let central = |p: f64| m.expect(|x| (x - b).abs().powf(p)).powf(1.0 / p);
    let reverse_holder = [(1.0, 2.0), (2.0, 4.0)]
        .iter()
        .map(|&(p, q)| (p, q, central(q) / ((q / p) * central(p))))
        .collect();
    LogConcaveFacts { center_ratio: m.density(b) / sup, sup2_var: sup * sup * m.variance(), reverse_holder }
}
