//! Concentration profiles and the constant formulas that transfer
//! concentration, log-Sobolev and spectral-gap bounds between measures.

use std::sync::Arc;

use serde::Serialize;

use crate::constants::UniversalConstants;
use crate::error::{Error, Result};
use crate::measure1d::{log_integral, Measure1D};

type Bound = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Analytic,
    Empirical,
}

/// A non-increasing bound `r -> K(r)` with values in `[0, 1/2]`.
#[derive(Clone)]
pub struct ConcentrationProfile {
    bound: Bound,
    pub kind: ProfileKind,
    /// Radius below which the bound is only the trivial `1/2`.
    pub support_note: Option<f64>,
}

impl std::fmt::Debug for ConcentrationProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConcentrationProfile")
            .field("kind", &self.kind)
            .field("support_note", &self.support_note)
            .finish_non_exhaustive()
    }
}

impl ConcentrationProfile {
    pub fn analytic<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ConcentrationProfile { bound: Arc::new(f), kind: ProfileKind::Analytic, support_note: None }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let v = (self.bound)(r);
        if v.is_nan() {
            0.5
        } else {
            v.clamp(0.0, 0.5)
        }
    }

    pub fn table(&self, radii: &[f64]) -> Vec<(f64, f64)> {
        radii.iter().map(|&r| (r, self.eval(r))).collect()
    }

    pub fn is_non_increasing(&self, radii: &[f64]) -> bool {
        radii.windows(2).all(|w| w[1] < w[0] || self.eval(w[1]) <= self.eval(w[0]) + 1e-15)
    }
}

/// `M(eps)` on `(0, 1/4]`, right-continuous and non-increasing.
#[derive(Clone)]
pub struct DensityTailModel {
    m: Bound,
}

impl DensityTailModel {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(m: F) -> Result<Self> {
        let model = DensityTailModel { m: Arc::new(m) };
        let grid: Vec<f64> = (1..=200).map(|i| 0.25 * i as f64 / 200.0).collect();
        for w in grid.windows(2) {
            let (a, b) = (model.m(w[0]), model.m(w[1]));
            if !(a > 0.0) || !(b > 0.0) || b > a * (1.0 + 1e-12) {
                return Err(Error::InvalidSpec("density tail model must be positive and non-increasing".into()));
            }
        }
        Ok(model)
    }

    pub fn m(&self, eps: f64) -> f64 {
        (self.m)(eps)
    }

    /// `beta(eps) = eps / M(eps)`, with `beta(0) = 0`.
    pub fn beta(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            0.0
        } else {
            eps / self.m(eps)
        }
    }

    /// Pessimistic inverse `inf { eps : beta(eps) >= x }` on `[0, 1/4]`.
    pub fn beta_inv(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.beta(0.25) < x {
            return 0.25;
        }
        bisect_increasing(|e| self.beta(e) >= x, 0.0, 0.25)
    }
}

/// Smallest point of `[lo, hi]` where the monotone predicate turns true.
fn bisect_increasing<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `inf { r > 0 : K(r) < eps }`, or `+inf` if the profile never drops below `eps`.
pub fn pessimistic_inverse(profile: &ConcentrationProfile, eps: f64) -> f64 {
    let below = |r: f64| profile.eval(r) < eps;
    if below(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while !below(hi) {
        hi *= 2.0;
        if hi > 1e15 {
            return f64::INFINITY;
        }
    }
    bisect_increasing(below, 0.0, hi)
}

/// Pointwise transfer `K2(r) <= 2 beta^{-1}(K1(r/2))` above the threshold
/// `2 K1^{-1}(beta(1/4))`.
pub fn transfer_pointwise(k1: &ConcentrationProfile, m: &DensityTailModel) -> ConcentrationProfile {
    let threshold = 2.0 * pessimistic_inverse(k1, m.beta(0.25));
    let (k1c, mc) = (k1.clone(), m.clone());
    let f = move |r: f64| {
        if r < threshold {
            0.5
        } else {
            2.0 * mc.beta_inv(k1c.eval(0.5 * r))
        }
    };
    ConcentrationProfile { bound: Arc::new(f), kind: ProfileKind::Analytic, support_note: Some(threshold) }
}

/// Inverse of an increasing function on `[0, inf)` by bisection.
fn increasing_inverse<F: Fn(f64) -> f64>(f: F, y: f64) -> f64 {
    if y <= f(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while f(hi) < y {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    bisect_increasing(|x| f(x) >= y, 0.0, hi)
}

/// Integral transfer `K2(r) <= 2 K1(r/2) F^{-1}(L / K1(r/2))` with `F(x) = x G(x)`.
pub fn transfer_integral<G>(k1: &ConcentrationProfile, g: G, l: f64) -> ConcentrationProfile
where
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let k1c = k1.clone();
    let f = move |r: f64| {
        if !l.is_finite() {
            return 0.5;
        }
        let k = k1c.eval(0.5 * r);
        if k == 0.0 {
            return 0.0;
        }
        2.0 * k * increasing_inverse(|x| x * g(x), l / k)
    };
    ConcentrationProfile { bound: Arc::new(f), kind: ProfileKind::Analytic, support_note: None }
}

/// Gaussian concentration implied by `LSI(rho)`.
pub fn profile_from_lsi(rho: f64) -> ConcentrationProfile {
    let r0 = (2.0 * std::f64::consts::LN_2 / rho).sqrt();
    ConcentrationProfile::analytic(move |r| {
        let d = (r - r0).max(0.0);
        (-0.5 * rho * d * d).exp()
    })
}

/// Exponential concentration implied by `SG(rho)`.
pub fn profile_from_sg(rho: f64, consts: &UniversalConstants) -> ConcentrationProfile {
    let c = consts.c_gm * rho.sqrt();
    ConcentrationProfile::analytic(move |r| (-c * r).exp())
}

/// `theta = 1 - 4 p kappa / ((p - 1) rho)`.
pub fn ls_theta(rho: f64, kappa: f64, p: f64) -> f64 {
    1.0 - 4.0 * p * kappa / ((p - 1.0) * rho)
}

/// Log-Sobolev constant multiplier under an `L^p` density-ratio bound `L`.
pub fn ls_transfer_constant(rho: f64, kappa: f64, l: f64, p: f64, consts: &UniversalConstants) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidBound(format!("p must exceed 1, got {p}")));
    }
    if !(l >= 1.0) {
        return Err(Error::InvalidL(l));
    }
    if !(rho > 0.0) || !(kappa >= 0.0) {
        return Err(Error::InvalidBound(format!("need rho > 0 and kappa >= 0, got ({rho}, {kappa})")));
    }
    let base = consts.c_ls * rho * (p - 1.0) / p;
    if kappa == 0.0 {
        return Ok(base / (1.0 + l.ln()));
    }
    let theta = ls_theta(rho, kappa, p);
    if !(theta > 0.0) {
        return Err(Error::CurvatureTooNegative(format!(
            "rho = {rho} must exceed 4 p kappa/(p-1) = {}",
            4.0 * p * kappa / (p - 1.0)
        )));
    }
    Ok(base * (-consts.big_c_ls * (1.0 + l.ln()) / theta).exp())
}

/// Hypothesis form for the spectral-gap transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgCase {
    /// `sup dmu2/dmu1 <= L`.
    SupRatio,
    /// `sup dmu1/dmu2 <= L`.
    InvSupRatio,
    /// Total-variation form.
    Tv,
}

/// Gap multiplier `C_i(L)^2`.
pub fn sg_transfer_tv(case: SgCase, l: f64, consts: &UniversalConstants) -> Result<f64> {
    if !(l > 1.0) {
        return Err(Error::InvalidL(l));
    }
    let c = consts.c_sg;
    let ci = match case {
        SgCase::SupRatio => c / (1.0 + l.ln()),
        SgCase::InvSupRatio => c / (l * l),
        SgCase::Tv => c / (l * l * (1.0 + l.ln())),
    };
    Ok(ci * ci)
}

/// `1 - (1 - delta) / max(1, D)`.
pub fn tv_from_density_tail(d: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) || !(d > 0.0) {
        return Err(Error::InvalidBound(format!("need D > 0 and delta in [0, 1), got ({d}, {delta})")));
    }
    Ok(1.0 - (1.0 - delta) / d.max(1.0))
}

/// Gap multiplier `C(L, p)^2` under an `L^p` density-ratio bound.
pub fn sg_transfer_lp(l: f64, p: f64, consts: &UniversalConstants) -> Result<f64> {
    if !(l >= 1.0) {
        return Err(Error::InvalidL(l));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidBound(format!("p must exceed 1, got {p}")));
    }
    let c = consts.c_sg * (p - 1.0) / p / (1.0 + l.ln());
    Ok(c * c)
}

/// Gap multiplier `c / log(8L)^2` under the median-type hypothesis.
pub fn sg_transfer_median(l: f64, consts: &UniversalConstants) -> Result<f64> {
    if !(l >= 7.0 / 8.0) {
        return Err(Error::InvalidL(l));
    }
    let lg = (8.0 * l).ln();
    Ok(consts.c_sg / (lg * lg))
}

/// Cauchy–Schwarz bound on `||dmu2/dmu1||_p^p` for `mu2 ∝ f g mu1`, from
/// `(∫f^{2p}, ∫f^{-2})` and `(∫g^{2p}, ∫g^{-2})`.
pub fn superimpose_lp_bound(f_moments: (f64, f64), g_moments: (f64, f64), p: f64) -> Result<f64> {
    let all = [f_moments.0, f_moments.1, g_moments.0, g_moments.1];
    if all.iter().any(|m| !(*m > 0.0) || !m.is_finite()) || !(p > 1.0) {
        return Err(Error::InvalidBound("moments must be positive and finite, p > 1".into()));
    }
    Ok((f_moments.0 * g_moments.0).sqrt() * (f_moments.1 * g_moments.1).powf(0.5 * p))
}

/// `∫ exp(q log_f) dmu` by adaptive quadrature.
pub fn power_moment<F: Fn(f64) -> f64>(mu: &Measure1D, log_f: F, q: f64) -> Result<f64> {
    let p = mu.potential();
    let u = |x: f64| p.v(x) - q * log_f(x);
    let li = log_integral(&u, p.support, &p.kinks, mu.window(), false)
        .map_err(|e| Error::Diverges(format!("moment of order {q}: {e}")))?;
    Ok((li.log_z - mu.log_z()).exp())
}

/// Both moment pairs for `superimpose_lp_bound`, computed by quadrature.
pub fn superimpose_moments<F, G>(mu: &Measure1D, log_f: F, log_g: G, p: f64) -> Result<((f64, f64), (f64, f64))>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    Ok((
        (power_moment(mu, &log_f, 2.0 * p)?, power_moment(mu, &log_f, -2.0)?),
        (power_moment(mu, &log_g, 2.0 * p)?, power_moment(mu, &log_g, -2.0)?),
    ))
}

const MIN_PROFILE_SAMPLES: usize = 1000;

/// Half-space estimate of the concentration profile of a point cloud: for
/// each direction, the mass beyond the median hyperplane shifted by `r`,
/// maximized over directions and both sides.
pub fn empirical_profile(samples: &[Vec<f64>], directions: &[Vec<f64>]) -> Result<ConcentrationProfile> {
    if samples.len() < MIN_PROFILE_SAMPLES {
        return Err(Error::TooFewSamples { got: samples.len(), need: MIN_PROFILE_SAMPLES });
    }
    let d = samples[0].len();
    let mut proj: Vec<(f64, Vec<f64>)> = Vec::with_capacity(directions.len());
    for u in directions {
        if u.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.len() });
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidSpec("zero direction".into()));
        }
        let mut y = Vec::with_capacity(samples.len());
        for x in samples {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            y.push(x.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / norm);
        }
        y.sort_by(|a, b| a.total_cmp(b));
        let n = y.len();
        let med = if n % 2 == 1 { y[n / 2] } else { 0.5 * (y[n / 2 - 1] + y[n / 2]) };
        proj.push((med, y));
    }
    let proj = Arc::new(proj);
    let f = move |r: f64| {
        proj.iter()
            .map(|(med, y)| {
                let n = y.len() as f64;
                let above = y.len() - y.partition_point(|v| *v <= med + r);
                let below = y.partition_point(|v| *v < med - r);
                above.max(below) as f64 / n
            })
            .fold(0.0, f64::max)
    };
    Ok(ConcentrationProfile { bound: Arc::new(f), kind: ProfileKind::Empirical, support_note: None })
}
