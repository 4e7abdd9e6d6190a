use std::sync::{Mutex, OnceLock};

use super::potential::Potential1D;
use crate::error::{Error, Result};
use crate::quad;

/// Required drop of the potential at a free window edge before the tail
/// test is attempted.
const EDGE_DROP: f64 = 36.0;
/// Relative tail mass allowed beyond a free window edge.
const TAIL_TOL: f64 = 1e-13;
const QUAD_TOL: f64 = 1e-13;
const SCAN: usize = 2049;
const MAX_REACH: f64 = 1e9;
const FAR_PROBE: f64 = 1e7;

/// Result of integrating `exp(-u)` with an automatically chosen window.
#[derive(Clone, Debug)]
pub(crate) struct LogIntegral {
    pub log_z: f64,
    pub window: (f64, f64),
    pub argmin: f64,
    pub panels: Vec<(f64, f64)>,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

struct Scan {
    umin: f64,
    argmin: f64,
    mass: f64,
}

fn scan<U: Fn(f64) -> f64>(u: &U, lo: f64, hi: f64) -> Scan {
    let h = (hi - lo) / (SCAN - 1) as f64;
    let vals: Vec<(f64, f64)> = (0..SCAN)
        .map(|i| {
            let x = if i + 1 == SCAN { hi } else { lo + h * i as f64 };
            (x, finite_or_inf(u(x)))
        })
        .collect();
    let (argmin, umin) = vals
        .iter()
        .copied()
        .fold((lo, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    let mass = vals.iter().map(|&(_, v)| (-(v - umin)).exp()).sum::<f64>() * h;
    Scan { umin, argmin, mass }
}

/// Whether the mass of `exp(-u)` beyond `edge` (direction `dir`) is negligible.
fn tail_ok<U: Fn(f64) -> f64>(u: &U, edge: f64, dir: f64, s: &Scan, reach: f64) -> bool {
    let ue = finite_or_inf(u(edge));
    if ue == f64::INFINITY {
        return true;
    }
    let drop = ue - s.umin;
    if drop < EDGE_DROP {
        return false;
    }
    let d = 1e-3 * reach.max(1e-3);
    let slope = (ue - finite_or_inf(u(edge - dir * d))) / d;
    if !(slope > 0.0) {
        return false;
    }
    if (-drop).exp() / slope > TAIL_TOL * s.mass {
        return false;
    }
    // the potential must not come back down further out
    let mut step = reach.max(1.0);
    while step < FAR_PROBE {
        let x = edge + dir * step;
        if finite_or_inf(u(x)) - s.umin < EDGE_DROP {
            return false;
        }
        step *= 2.0;
    }
    true
}

/// `log ∫ exp(-u)` over `support`, growing the window from `guess` until
/// both tails are negligible. `fixed` disables growth.
pub(crate) fn log_integral<U: Fn(f64) -> f64>(
    u: &U,
    support: (f64, f64),
    kinks: &[f64],
    guess: (f64, f64),
    fixed: bool,
) -> Result<LogIntegral> {
    let (slo, shi) = support;
    if !(shi > slo) {
        return Err(Error::DegenerateWindow(slo, shi));
    }
    let (mut lo, mut hi) = (guess.0.max(slo), guess.1.min(shi));
    if !(hi > lo) {
        if fixed {
            return Err(Error::DegenerateWindow(guess.0, guess.1));
        }
        let c = if slo.is_finite() && shi.is_finite() {
            0.5 * (slo + shi)
        } else if slo.is_finite() {
            slo + 1.0
        } else if shi.is_finite() {
            shi - 1.0
        } else {
            0.0
        };
        lo = (c - 1.0).max(slo);
        hi = (c + 1.0).min(shi);
    }
    let s = loop {
        let s = scan(u, lo, hi);
        if !s.umin.is_finite() {
            return Err(Error::NonIntegrable(format!("potential is infinite on [{lo}, {hi}]")));
        }
        let reach = hi - lo;
        let left = lo <= slo || tail_ok(u, lo, -1.0, &s, reach);
        let right = hi >= shi || tail_ok(u, hi, 1.0, &s, reach);
        if left && right {
            break s;
        }
        if fixed {
            return Err(Error::NonIntegrable(format!("tail mass beyond [{lo}, {hi}] is not negligible")));
        }
        let grow = reach.max(1.0);
        if !left {
            lo = (lo - grow).max(slo);
        }
        if !right {
            hi = (hi + grow).min(shi);
        }
        if lo < -MAX_REACH || hi > MAX_REACH {
            return Err(Error::NonIntegrable(format!("no decaying tail within |x| <= {MAX_REACH:e}")));
        }
    };
    let mut breaks: Vec<f64> = (0..=32).map(|i| lo + (hi - lo) * i as f64 / 32.0).collect();
    breaks.extend(kinks.iter().copied().filter(|k| *k > lo && *k < hi));
    breaks.push(s.argmin.clamp(lo, hi));
    if lo < 0.0 && hi > 0.0 {
        breaks.push(0.0);
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    let g = |x: f64| (-(finite_or_inf(u(x)) - s.umin)).exp();
    let panels = quad::adaptive_panels(&g, &breaks, QUAD_TOL);
    let z: f64 = panels.iter().map(|&(a, b)| quad::panel_integral(&g, a, b)).sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::NonIntegrable("quadrature of exp(-V) is not positive and finite".into()));
    }
    Ok(LogIntegral { log_z: z.ln() - s.umin, window: (lo, hi), argmin: s.argmin, panels })
}

/// Inverse-CDF table: `x` against log CDF (left half) and log survival
/// (right half).
#[derive(Clone, Debug)]
pub(crate) struct InverseCdf {
    lcdf: crate::interp::Hermite,
    lsf: crate::interp::Hermite,
    lcdf_range: (f64, f64),
    lsf_range: (f64, f64),
}

impl InverseCdf {
    pub fn quantile(&self, u: f64) -> f64 {
        if u < 0.5 {
            let l = u.ln().clamp(self.lcdf_range.0, self.lcdf_range.1);
            self.lcdf.eval(l)
        } else {
            let l = (1.0 - u).ln().clamp(self.lsf_range.0, self.lsf_range.1);
            self.lsf.eval(l)
        }
    }
}

/// A normalized probability measure `exp(-V) dx` on a truncation window.
pub struct Measure1D {
    potential: Potential1D,
    window: (f64, f64),
    log_z: f64,
    panels: Vec<(f64, f64)>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    barycenter: f64,
    variance: f64,
    argmax: f64,
    moments: Mutex<Vec<(f64, f64)>>,
    sampler: OnceLock<InverseCdf>,
}

impl Clone for Measure1D {
    fn clone(&self) -> Self {
        let moments = self.moments.lock().map(|m| m.clone()).unwrap_or_default();
        let sampler = OnceLock::new();
        if let Some(s) = self.sampler.get() {
            let _ = sampler.set(s.clone());
        }
        Measure1D {
            potential: self.potential.clone(),
            window: self.window,
            log_z: self.log_z,
            panels: self.panels.clone(),
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            barycenter: self.barycenter,
            variance: self.variance,
            argmax: self.argmax,
            moments: Mutex::new(moments),
            sampler,
        }
    }
}

impl std::fmt::Debug for Measure1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Measure1D")
            .field("potential", &self.potential.label)
            .field("window", &self.window)
            .field("log_z", &self.log_z)
            .field("barycenter", &self.barycenter)
            .field("variance", &self.variance)
            .finish()
    }
}

impl Measure1D {
    /// Normalizes `exp(-V)` on the given window. The window is not grown.
    pub fn normalize(potential: Potential1D, window: (f64, f64)) -> Result<Self> {
        if !(window.1 > window.0) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(Error::DegenerateWindow(window.0, window.1));
        }
        let li = log_integral(&|x| potential.v(x), potential.support, &potential.kinks, window, true)?;
        Ok(Self::from_integral(potential, li))
    }

    /// Normalizes with an automatically grown window.
    pub fn auto(potential: Potential1D) -> Result<Self> {
        Self::auto_from(potential, (-1.0, 1.0))
    }

    /// As [`Measure1D::auto`], starting the window search from `guess`.
    pub fn auto_from(potential: Potential1D, guess: (f64, f64)) -> Result<Self> {
        let li = log_integral(&|x| potential.v(x), potential.support, &potential.kinks, guess, false)?;
        Ok(Self::from_integral(potential, li))
    }

    fn from_integral(potential: Potential1D, li: LogIntegral) -> Self {
        let mut nodes = Vec::with_capacity(li.panels.len() * quad::ORDER);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for &(a, b) in &li.panels {
            for (x, w) in quad::panel_nodes(a, b) {
                nodes.push(x);
                weights.push(w * (-(potential.v(x)) - li.log_z).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        let barycenter = nodes.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / total;
        let variance = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| (x - barycenter).powi(2) * w)
            .sum::<f64>()
            / total;
        Measure1D {
            argmax: li.argmin,
            window: li.window,
            log_z: li.log_z,
            panels: li.panels,
            nodes,
            weights,
            barycenter,
            variance,
            potential,
            moments: Mutex::new(Vec::new()),
            sampler: OnceLock::new(),
        }
    }

    pub fn potential(&self) -> &Potential1D {
        &self.potential
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn barycenter(&self) -> f64 {
        self.barycenter
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Approximate location of the density maximum.
    pub fn mode(&self) -> f64 {
        self.argmax
    }

    pub fn density(&self, x: f64) -> f64 {
        (-(self.potential.v(x)) - self.log_z).exp()
    }

    /// Quadrature nodes and probability weights.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E g(X)` on the measure's own quadrature grid.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }

    /// Total mass on the grid (1 up to rounding).
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `M_p = E|X|^p`.
    pub fn moment(&self, p: f64) -> f64 {
        if let Ok(cache) = self.moments.lock() {
            if let Some(&(_, m)) = cache.iter().find(|(q, _)| *q == p) {
                return m;
            }
        }
        let m = self.expect(|x| x.abs().powf(p));
        if let Ok(mut cache) = self.moments.lock() {
            cache.push((p, m));
        }
        m
    }

    /// Cramér tilt `mu^a`, density multiplied by `exp(a x)`.
    pub fn tilt(&self, a: f64) -> Result<Measure1D> {
        if a == 0.0 {
            return Ok(self.clone());
        }
        let p = self.potential.tilted(a);
        Measure1D::auto_from(p, self.window).map_err(|e| match e {
            Error::NonIntegrable(_) => Error::TiltDiverges(a),
            other => other,
        })
    }

    /// Law of `X + c`.
    pub fn translate(&self, c: f64) -> Result<Measure1D> {
        let p = self.potential.shifted(c);
        Measure1D::auto_from(p, (self.window.0 + c, self.window.1 + c))
    }

    /// Law of `lambda X`.
    pub fn dilate(&self, lambda: f64) -> Result<Measure1D> {
        let p = self.potential.dilated(lambda);
        Measure1D::auto_from(p, (self.window.0 * lambda, self.window.1 * lambda))
    }

    /// Tilt followed by translation to zero barycenter.
    pub fn recentred_tilt(&self, a: f64) -> Result<Measure1D> {
        let t = self.tilt(a)?;
        t.translate(-t.barycenter)
    }

    /// The `a` whose tilt has barycenter `s`.
    pub fn invert_tilt(&self, s: f64) -> Result<f64> {
        let (slo, shi) = self.potential.support;
        if !(s > slo && s < shi) {
            return Err(Error::OutOfRange(s));
        }
        let tol = 1e-12 * (1.0 + s.abs());
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut a = 0.0;
        let mut cur = self.clone();
        for _ in 0..300 {
            let r = cur.barycenter - s;
            if r.abs() <= tol {
                return Ok(a);
            }
            if r < 0.0 {
                lo = a;
            } else {
                hi = a;
            }
            let mut next = a - r / cur.variance.max(1e-300);
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    lo + (1.0 + lo.abs())
                } else {
                    hi - (1.0 + hi.abs())
                };
            }
            loop {
                if next.abs() > 1e8 || (hi - lo) <= 1e-15 * (1.0 + a.abs()) {
                    return Err(Error::OutOfRange(s));
                }
                match self.tilt(next) {
                    Ok(m) => {
                        cur = m;
                        a = next;
                        break;
                    }
                    Err(Error::TiltDiverges(_)) => {
                        if next > a {
                            hi = next;
                        } else {
                            lo = next;
                        }
                        next = 0.5 * (a + next);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Err(Error::MaxIterations(300))
    }

    fn inverse_cdf(&self) -> &InverseCdf {
        self.sampler.get_or_init(|| build_inverse_cdf(self))
    }

    /// Inverse CDF at `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.inverse_cdf().quantile(u)
    }

    /// CDF by quadrature.
    pub fn cdf(&self, x: f64) -> f64 {
        let f = |t: f64| self.density(t);
        let mut acc = 0.0;
        for &(a, b) in &self.panels {
            if b <= x {
                acc += quad::panel_integral(&f, a, b);
            } else {
                if a < x {
                    acc += quad::panel_integral(&f, a, x);
                }
                break;
            }
        }
        acc.min(1.0)
    }

    /// Draws one sample by inversion.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Restriction to `[lo, hi]`, renormalized.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Measure1D> {
        let p = self.potential.restricted(lo, hi);
        let w = (lo.max(self.window.0), hi.min(self.window.1));
        Measure1D::auto_from(p, w)
    }
}

fn build_inverse_cdf(m: &Measure1D) -> InverseCdf {
    const SUB: usize = 4;
    let f = |t: f64| m.density(t);
    let pm: Vec<f64> = m.panels.iter().map(|&(a, b)| quad::panel_integral(&f, a, b)).collect();
    let mut suffix = vec![0.0; pm.len() + 1];
    for k in (0..pm.len()).rev() {
        suffix[k] = suffix[k + 1] + pm[k];
    }
    let total = suffix[0];
    let mut before = 0.0;
    let mut pts: Vec<(f64, f64, f64)> = Vec::with_capacity(pm.len() * SUB + 1);
    let last = m.panels.len() - 1;
    for (k, &(a, b)) in m.panels.iter().enumerate() {
        // geometric refinement towards hard window edges
        let mut offsets: Vec<f64> = (0..SUB).map(|j| j as f64 / SUB as f64).collect();
        if k == 0 {
            offsets.splice(1..1, (12..=200).rev().map(|j| 0.5f64.powf(j as f64 / 4.0)));
        }
        if k == last {
            offsets.extend((12..=200).map(|j| 1.0 - 0.5f64.powf(j as f64 / 4.0)));
        }
        for (j, off) in offsets.into_iter().enumerate() {
            let x = a + (b - a) * off;
            let (left, right) = if j == 0 {
                (0.0, pm[k])
            } else {
                (quad::panel_integral(&f, a, x), quad::panel_integral(&f, x, b))
            };
            pts.push((x, (before + left) / total, (suffix[k + 1] + right) / total));
        }
        before += pm[k];
    }
    let half = 0.5f64.ln();
    let mid = m.quantile_by_bisection(0.5);
    let fmid = m.density(mid);
    // x against log p, with exact slopes dx/dlog p = +-p / f
    let build = |it: &mut dyn Iterator<Item = (f64, f64)>, sign: f64| {
        let (mut xs, mut ls, mut ds) = (Vec::new(), Vec::<f64>::new(), Vec::new());
        for (x, p) in it {
            let f = m.density(x);
            if p > 0.0 && p < 0.5 && f > 0.0 {
                let l = p.ln();
                if ls.last().is_none_or(|&q| l > q) {
                    ls.push(l);
                    xs.push(x);
                    ds.push(sign * p / f);
                }
            }
        }
        if ls.is_empty() {
            ls.push(half - 1.0);
            xs.push(mid);
            ds.push(0.0);
        }
        ls.push(half);
        xs.push(mid);
        ds.push(sign * 0.5 / fmid);
        let range = (ls[0], half);
        (crate::interp::Hermite::new(ls, xs, ds), range)
    };
    let (lcdf, lcdf_range) = build(&mut pts.iter().map(|&(x, c, _)| (x, c)), 1.0);
    let (lsf, lsf_range) = build(&mut pts.iter().rev().map(|&(x, _, s)| (x, s)), -1.0);
    InverseCdf { lcdf, lsf, lcdf_range, lsf_range }
}

impl Measure1D {
    fn quantile_by_bisection(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = self.window;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}
