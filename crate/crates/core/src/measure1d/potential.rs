use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interp::Hermite;

pub type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    C2,
    C1,
    Lipschitz,
}

/// `V = v_conv + v_pert` with `v_conv'' >= alpha` and `osc(v_pert) <= omega`.
#[derive(Clone)]
pub struct ConvexDecomposition {
    pub v_conv: Func,
    pub d2v_conv: Func,
    pub v_pert: Func,
    pub alpha: f64,
    pub omega: f64,
}

/// Known closed-form families. Used for labelling and by a few exact oracles.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Gaussian { sigma: f64 },
    TwoSidedExp,
    Power { p: f64 },
    Uniform { a: f64, b: f64 },
    WeaklyGaussian { alpha: f64, amplitude: f64, width: f64 },
    Tabulated,
    Custom,
}

/// A single-site potential `V`, so that the measure is `exp(-V(x)) dx`.
#[derive(Clone)]
pub struct Potential1D {
    v: Func,
    dv: Option<Func>,
    d2v: Option<Func>,
    pub smoothness: Smoothness,
    pub lipschitz: Option<f64>,
    /// Declared lower bound on `V''` (`-kappa`), `-inf` when unknown.
    pub hessian_lower: f64,
    /// Declared upper bound on `V''`, `+inf` when unknown.
    pub hessian_upper: f64,
    pub support: (f64, f64),
    /// Points where `V'` or `V''` may jump.
    pub kinks: Vec<f64>,
    pub decomposition: Option<ConvexDecomposition>,
    pub family: Family,
    pub label: String,
}

impl fmt::Debug for Potential1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential1D")
            .field("label", &self.label)
            .field("smoothness", &self.smoothness)
            .field("support", &self.support)
            .field("hessian_lower", &self.hessian_lower)
            .finish_non_exhaustive()
    }
}

fn arc<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Func {
    Arc::new(f)
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Potential1D {
    /// Bare potential with no derivative information.
    pub fn new<F>(label: impl Into<String>, v: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Potential1D {
            v: arc(v),
            dv: None,
            d2v: None,
            smoothness: Smoothness::Lipschitz,
            lipschitz: None,
            hessian_lower: f64::NEG_INFINITY,
            hessian_upper: f64::INFINITY,
            support: (f64::NEG_INFINITY, f64::INFINITY),
            kinks: Vec::new(),
            decomposition: None,
            family: Family::Custom,
            label: label.into(),
        }
    }

    pub fn with_dv<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, dv: F) -> Self {
        self.dv = Some(arc(dv));
        if self.smoothness == Smoothness::Lipschitz && self.kinks.is_empty() {
            self.smoothness = Smoothness::C1;
        }
        self
    }

    pub fn with_d2v<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, d2v: F) -> Self {
        self.d2v = Some(arc(d2v));
        if self.kinks.is_empty() {
            self.smoothness = Smoothness::C2;
        }
        self
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    pub fn with_hessian_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.hessian_lower = lower;
        self.hessian_upper = upper;
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (lo, hi);
        self
    }

    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn with_decomposition(mut self, d: ConvexDecomposition) -> Self {
        self.decomposition = Some(d);
        self
    }

    pub fn standard_gaussian() -> Self {
        Self::gaussian(1.0)
    }

    /// Centered normal with standard deviation `sigma` (normalized potential).
    pub fn gaussian(sigma: f64) -> Self {
        let s2 = sigma * sigma;
        let c = (sigma * (2.0 * PI).sqrt()).ln();
        let mut p = Potential1D::new(format!("gaussian({sigma})"), move |x| 0.5 * x * x / s2 + c)
            .with_dv(move |x| x / s2)
            .with_d2v(move |_| 1.0 / s2)
            .with_hessian_bounds(1.0 / s2, 1.0 / s2);
        p.family = Family::Gaussian { sigma };
        p
    }

    /// Density `exp(-|x|)/2`.
    pub fn two_sided_exp() -> Self {
        let mut p = Potential1D::new("two_sided_exp", |x: f64| x.abs() + std::f64::consts::LN_2)
            .with_kinks(vec![0.0])
            .with_dv(sign0)
            .with_smoothness(Smoothness::Lipschitz)
            .with_lipschitz(1.0)
            .with_hessian_bounds(0.0, f64::INFINITY);
        p.family = Family::TwoSidedExp;
        p
    }

    /// `V = |x|^p`, unnormalized.
    pub fn power(pw: f64) -> Self {
        assert!(pw >= 1.0, "power potential needs p >= 1");
        let mut p = Potential1D::new(format!("power({pw})"), move |x: f64| x.abs().powf(pw))
            .with_kinks(if pw < 2.0 { vec![0.0] } else { Vec::new() })
            .with_dv(move |x: f64| pw * x.abs().powf(pw - 1.0) * sign0(x));
        if pw > 1.0 {
            p = p.with_d2v(move |x: f64| {
                if x == 0.0 && pw < 2.0 {
                    f64::INFINITY
                } else {
                    pw * (pw - 1.0) * x.abs().powf(pw - 2.0)
                }
            });
        }
        p.smoothness = if pw >= 2.0 {
            Smoothness::C2
        } else if pw > 1.0 {
            Smoothness::C1
        } else {
            Smoothness::Lipschitz
        };
        if pw == 1.0 {
            p.lipschitz = Some(1.0);
        }
        let upper = if pw == 2.0 { 2.0 } else { f64::INFINITY };
        p = p.with_hessian_bounds(0.0, upper);
        p.family = Family::Power { p: pw };
        p
    }

    /// Gaussian, two-sided exponential, `|x|^1.5`, `|x|^3` and uniform on
    /// `[-1, 1]`: the log-concave test corpus.
    pub fn log_concave_corpus() -> Vec<Potential1D> {
        vec![
            Self::standard_gaussian(),
            Self::two_sided_exp(),
            Self::power(1.5),
            Self::power(3.0),
            Self::uniform(-1.0, 1.0),
        ]
    }

    /// Uniform law on `[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Self {
        let mut p = Potential1D::new(format!("uniform({a},{b})"), |_| 0.0)
            .with_dv(|_| 0.0)
            .with_d2v(|_| 0.0)
            .with_hessian_bounds(0.0, 0.0)
            .with_support(a, b)
            .with_lipschitz(0.0);
        p.family = Family::Uniform { a, b };
        p
    }

    /// `V = alpha x^2/2 + amplitude * exp(-x^2 / (2 width^2))`.
    pub fn weakly_gaussian(alpha: f64, amplitude: f64, width: f64) -> Self {
        let w2 = width * width;
        let bump = move |x: f64| amplitude * (-0.5 * x * x / w2).exp();
        let d2bump = move |x: f64| bump(x) * (x * x / (w2 * w2) - 1.0 / w2);
        // extremes of (x^2/w^2 - 1) exp(-x^2/(2w^2)) are -1 at 0 and 2e^{-3/2} at x^2 = 3w^2
        let hi_factor = 2.0 * (-1.5f64).exp() / w2;
        let lo_factor = -1.0 / w2;
        let (lo, hi) = if amplitude >= 0.0 {
            (amplitude * lo_factor, amplitude * hi_factor)
        } else {
            (amplitude * hi_factor, amplitude * lo_factor)
        };
        let mut p = Potential1D::new(format!("weakly_gaussian({alpha},{amplitude},{width})"), move |x| {
            0.5 * alpha * x * x + bump(x)
        })
        .with_dv(move |x| alpha * x - bump(x) * x / w2)
        .with_d2v(move |x| alpha + d2bump(x))
        .with_hessian_bounds(alpha + lo, alpha + hi)
        .with_decomposition(ConvexDecomposition {
            v_conv: arc(move |x| 0.5 * alpha * x * x),
            d2v_conv: arc(move |_| alpha),
            v_pert: arc(bump),
            alpha,
            omega: amplitude.abs(),
        });
        p.family = Family::WeaklyGaussian { alpha, amplitude, width };
        p
    }

    /// Tabulated potential. With `dv` given the interpolant is cubic Hermite
    /// through those slopes, otherwise monotone cubic on the values.
    pub fn tabulated(x: Vec<f64>, v: Vec<f64>, dv: Option<Vec<f64>>, d2v: Option<Vec<f64>>) -> Result<Self> {
        if x.len() < 3 || x.len() != v.len() {
            return Err(Error::InvalidSpec("tabulated potential needs >= 3 matching (x, V) pairs".into()));
        }
        if !x.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpec("tabulated x must be strictly increasing".into()));
        }
        for extra in [&dv, &d2v].into_iter().flatten() {
            if extra.len() != x.len() {
                return Err(Error::InvalidSpec("tabulated derivative column length mismatch".into()));
            }
        }
        let (lo, hi) = (x[0], x[x.len() - 1]);
        let h = Arc::new(match dv {
            Some(d) => Hermite::new(x.clone(), v, d),
            None => Hermite::monotone(x.clone(), v),
        });
        let (h1, h2) = (h.clone(), h.clone());
        let mut p = Potential1D::new("tabulated", move |t| h1.eval(t))
            .with_dv(move |t| h2.derivative(t))
            .with_support(lo, hi);
        if let Some(d2) = d2v {
            let h3 = Hermite::monotone(x, d2);
            p = p.with_d2v(move |t| h3.eval(t));
        }
        p.family = Family::Tabulated;
        Ok(p)
    }

    pub fn v(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return f64::INFINITY;
        }
        (self.v)(x)
    }

    pub fn dv(&self, x: f64) -> Option<f64> {
        self.dv.as_ref().map(|f| f(x))
    }

    pub fn d2v(&self, x: f64) -> Option<f64> {
        self.d2v.as_ref().map(|f| f(x))
    }

    pub fn has_dv(&self) -> bool {
        self.dv.is_some()
    }

    pub fn has_d2v(&self) -> bool {
        self.d2v.is_some()
    }

    /// `V'` from the declared derivative, else a central difference.
    pub fn dv_or_fd(&self, x: f64) -> f64 {
        match &self.dv {
            Some(f) => f(x),
            None => {
                let h = 1e-6 * x.abs().max(1.0);
                (self.v(x + h) - self.v(x - h)) / (2.0 * h)
            }
        }
    }

    /// Declared or sampled convexity.
    pub fn is_convex_declared(&self) -> bool {
        self.hessian_lower >= 0.0
    }

    /// Potential of the Cramér tilt: `V(x) - a x`.
    pub fn tilted(&self, a: f64) -> Self {
        let mut p = self.clone();
        let (v, dv) = (self.v.clone(), self.dv.clone());
        p.v = arc(move |x| v(x) - a * x);
        p.dv = dv.map(|d| arc(move |x| d(x) - a));
        p.decomposition = self.decomposition.clone().map(|d| {
            let vc = d.v_conv.clone();
            ConvexDecomposition { v_conv: arc(move |x| vc(x) - a * x), ..d }
        });
        p.label = format!("{}^{a}", self.label);
        p
    }

    /// Potential of `X + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut p = self.clone();
        let (v, dv, d2v) = (self.v.clone(), self.dv.clone(), self.d2v.clone());
        p.v = arc(move |x| v(x - c));
        p.dv = dv.map(|d| arc(move |x| d(x - c)));
        p.d2v = d2v.map(|d| arc(move |x| d(x - c)));
        p.support = (self.support.0 + c, self.support.1 + c);
        p.kinks = self.kinks.iter().map(|k| k + c).collect();
        p.decomposition = self.decomposition.clone().map(|d| {
            let (vc, dc, vp) = (d.v_conv.clone(), d.d2v_conv.clone(), d.v_pert.clone());
            ConvexDecomposition {
                v_conv: arc(move |x| vc(x - c)),
                d2v_conv: arc(move |x| dc(x - c)),
                v_pert: arc(move |x| vp(x - c)),
                ..d
            }
        });
        p.label = format!("{}+{c}", self.label);
        p
    }

    /// Potential of `lambda X` (up to an additive constant).
    pub fn dilated(&self, lambda: f64) -> Self {
        assert!(lambda > 0.0);
        let mut p = self.clone();
        let (v, dv, d2v) = (self.v.clone(), self.dv.clone(), self.d2v.clone());
        let l2 = lambda * lambda;
        p.v = arc(move |x| v(x / lambda));
        p.dv = dv.map(|d| arc(move |x| d(x / lambda) / lambda));
        p.d2v = d2v.map(|d| arc(move |x| d(x / lambda) / l2));
        p.support = (self.support.0 * lambda, self.support.1 * lambda);
        p.kinks = self.kinks.iter().map(|k| k * lambda).collect();
        p.hessian_lower = self.hessian_lower / l2;
        p.hessian_upper = self.hessian_upper / l2;
        p.lipschitz = self.lipschitz.map(|l| l / lambda);
        p.decomposition = None;
        p.label = format!("{}*{lambda}", self.label);
        p
    }

    /// Restriction to `[lo, hi]` intersected with the current support.
    pub fn restricted(&self, lo: f64, hi: f64) -> Self {
        let mut p = self.clone();
        p.support = (lo.max(self.support.0), hi.min(self.support.1));
        p.label = format!("{}|[{lo},{hi}]", self.label);
        p
    }

    /// Probe window used by validation and curvature scans.
    pub fn probe_window(&self) -> (f64, f64) {
        let lo = if self.support.0.is_finite() { self.support.0 } else { -10.0 };
        let hi = if self.support.1.is_finite() { self.support.1 } else { 10.0 };
        (lo, hi)
    }

    /// Checks the declared derivative, curvature and decomposition data.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.probe_window();
        let probes: Vec<f64> = (0..97).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 97.0).collect();
        let away = |x: f64| self.kinks.iter().all(|k| (x - k).abs() > 1e-3);
        if self.smoothness == Smoothness::C2 {
            let (Some(dv), Some(d2v)) = (&self.dv, &self.d2v) else {
                return Err(Error::MissingDerivative("C2 potential requires dv and d2v"));
            };
            for &x in probes.iter().filter(|&&x| away(x)) {
                let h = 1e-5 * x.abs().max(1.0);
                let fd = (dv(x + h) - dv(x - h)) / (2.0 * h);
                let d2 = d2v(x);
                if (fd - d2).abs() > 1e-4 * (1.0 + d2.abs()) {
                    return Err(Error::InvalidSpec(format!(
                        "{}: d2v disagrees with finite difference of dv at x={x} ({d2} vs {fd})",
                        self.label
                    )));
                }
            }
        }
        if self.hessian_lower.is_finite() {
            if let Some(d2v) = &self.d2v {
                for &x in probes.iter().filter(|&&x| away(x)) {
                    if d2v(x) < self.hessian_lower - 1e-9 {
                        return Err(Error::InvalidSpec(format!(
                            "{}: V''({x}) = {} below declared lower bound {}",
                            self.label,
                            d2v(x),
                            self.hessian_lower
                        )));
                    }
                }
            }
        }
        if let Some(d) = &self.decomposition {
            self.check_decomposition(d, &probes)?;
        }
        Ok(())
    }

    fn check_decomposition(&self, d: &ConvexDecomposition, probes: &[f64]) -> Result<()> {
        let bad = |msg: String| Err(Error::NotWeaklyGaussian(format!("{}: {msg}", self.label)));
        if !(d.alpha > 0.0) || !(d.omega >= 0.0) {
            return bad(format!("alpha={} must be > 0 and omega={} >= 0", d.alpha, d.omega));
        }
        let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in probes {
            let sum = (d.v_conv)(x) + (d.v_pert)(x);
            let v = (self.v)(x);
            if (sum - v).abs() > 1e-9 * (1.0 + v.abs()) {
                return bad(format!("v_conv + v_pert != v at x={x}"));
            }
            if (d.d2v_conv)(x) < d.alpha - 1e-9 {
                return bad(format!("v_conv''({x}) < alpha"));
            }
            let p = (d.v_pert)(x);
            pmin = pmin.min(p);
            pmax = pmax.max(p);
        }
        if pmax - pmin > d.omega + 1e-9 {
            return bad(format!("oscillation of v_pert {} exceeds omega {}", pmax - pmin, d.omega));
        }
        Ok(())
    }
}
