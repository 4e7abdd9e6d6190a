//! Deviation bounds for linear forms and order-2 chaoses, with Monte-Carlo
//! tail and moment comparisons.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::constants::UniversalConstants;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, stream_rng, McOptions};
use crate::measure1d::{psi1_norm, Family, Measure1D};
use crate::spin::{hs_norm, op_norm, validate_interaction};

/// Bernstein bound `exp(-c min(t^2/(|a|_2^2 D^2), t/(|a|_inf D)))` for
/// `P(|sum a_i X_i| >= t)` with `D = |X|_{Psi_1}`.
pub fn bernstein_bound(t: f64, a: &[f64], d_psi1: f64, consts: &UniversalConstants) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (-consts.c_bern * bernstein_shape(t, a, d_psi1)).exp()
}

fn bernstein_shape(t: f64, a: &[f64], d: f64) -> f64 {
    let l2 = a.iter().map(|v| v * v).sum::<f64>();
    let linf = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if linf == 0.0 {
        return f64::INFINITY;
    }
    (t * t / (l2 * d * d)).min(t / (linf * d))
}

/// `min(rho^2 t^2 / |A|_HS^2, rho t / |A|_op)`.
fn chaos_shape(t: f64, hs: f64, op: f64, rho: f64) -> f64 {
    (rho * rho * t * t / (hs * hs)).min(rho * t / op)
}

/// Order-2 chaos bound `C2 exp(-c2 min(rho^2 t^2/|A|_HS^2, rho t/|A|_op))`
/// for sites satisfying a log-Sobolev inequality with constant `rho`.
pub fn chaos_bound(t: f64, a: &DMatrix<f64>, rho: f64, consts: &UniversalConstants) -> Result<f64> {
    validate_interaction(a, a.nrows())?;
    let (hs, op) = (hs_norm(a), op_norm(a));
    if hs == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidBound(format!("rho must be positive, got {rho}")));
    }
    if t <= 0.0 {
        return Ok(consts.big_c2_chaos);
    }
    Ok(consts.big_c2_chaos * (-consts.c2_chaos * chaos_shape(t, hs, op, rho)).exp())
}

/// The same bound for `alpha`-sub-Gaussian sites:
/// `min(t^2/(alpha^4 |A|_HS^2), t/(alpha^2 |A|_op))` in the exponent.
pub fn chaos_bound_subgaussian(t: f64, a: &DMatrix<f64>, alpha: f64, consts: &UniversalConstants) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidBound(format!("alpha must be positive, got {alpha}")));
    }
    chaos_bound(t, a, 1.0 / (alpha * alpha), consts)
}

/// Chernoff bound `exp(-rho t^2 / (2 sum alpha_i^2))`.
pub fn linear_subgaussian_tail(t: f64, alpha: &[f64], rho: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let l2 = alpha.iter().map(|v| v * v).sum::<f64>();
    if l2 == 0.0 {
        return 0.0;
    }
    (-rho * t * t / (2.0 * l2)).exp()
}

/// Statistic whose upper tail `P(S >= t)` is sampled.
#[derive(Clone, Debug)]
pub enum TailStatistic {
    /// `sum a_i X_i`, compared with the Bernstein bound.
    Linear(Vec<f64>),
    /// `sum_{i,j} a_ij X_i X_j`; `rho` is the site log-Sobolev constant.
    Chaos { a: DMatrix<f64>, rho: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct TailBound {
    pub thresholds: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Least-squares `c` in `-log(p/C_front) ~ c * shape(t)` over the fit window.
    pub fitted_c: f64,
    /// Largest `c` with `C_front exp(-c shape) >= p` on the fit window.
    pub dominating_c: f64,
    /// Crossover of the best `min(q t^2, l t)` fit to `-log p`.
    pub fitted_crossover: Option<f64>,
    /// Analytic crossover of the quadratic and linear regimes.
    pub analytic_crossover: f64,
    /// Thresholds used by the fits.
    pub fit_window: Vec<usize>,
}

pub(crate) const MIN_TAIL_REPS: usize = 100_000;
const MIN_EXCEED: f64 = 30.0;

/// Draws from the site, exactly for Gaussian families.
pub(crate) fn draw_site<R: Rng + ?Sized>(site: &Measure1D, rng: &mut R) -> f64 {
    match site.potential().family {
        Family::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
        _ => site.sample(rng),
    }
}

/// Monte-Carlo exceedance frequencies of the statistic under i.i.d. sites,
/// with the matching analytic bound and fitted constants.
pub fn mc_tail(stat: &TailStatistic, site: &Measure1D, thresholds: &[f64], opts: McOptions, consts: &UniversalConstants) -> Result<TailBound> {
    if opts.samples < MIN_TAIL_REPS {
        return Err(Error::TooFewSamples { got: opts.samples, need: MIN_TAIL_REPS });
    }
    let n = match stat {
        TailStatistic::Linear(a) => a.len(),
        TailStatistic::Chaos { a, .. } => {
            validate_interaction(a, a.nrows())?;
            a.nrows()
        }
    };
    let (shape, front, c_const, crossover): (Box<dyn Fn(f64) -> f64>, f64, f64, f64) = match stat {
        TailStatistic::Linear(a) => {
            let d = psi1_norm(site, |x| x)?;
            let a2 = a.clone();
            let l2 = a.iter().map(|v| v * v).sum::<f64>();
            let linf = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            (Box::new(move |t| bernstein_shape(t, &a2, d)), 1.0, consts.c_bern, l2 * d / linf)
        }
        TailStatistic::Chaos { a, rho } => {
            let (hs, op) = (hs_norm(a), op_norm(a));
            if hs == 0.0 {
                return Err(Error::ZeroMatrix);
            }
            let rho = *rho;
            (Box::new(move |t| chaos_shape(t, hs, op, rho)), consts.big_c2_chaos, consts.c2_chaos, hs * hs / (rho * op))
        }
    };
    let k = thresholds.len();
    let counts = map_ordered(opts.exec, opts.chunks(), |(idx, len)| {
        let mut rng = stream_rng(opts.seed, idx as u64);
        let mut x = vec![0.0; n];
        let mut c = vec![0u64; k];
        for _ in 0..len {
            for xi in x.iter_mut() {
                *xi = draw_site(site, &mut rng);
            }
            let s = match stat {
                TailStatistic::Linear(a) => a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>(),
                TailStatistic::Chaos { a, .. } => {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let col = a.column(j);
                        let mut r = 0.0;
                        for i in 0..n {
                            r += col[i] * x[i];
                        }
                        acc += r * x[j];
                    }
                    acc
                }
            };
            for (ci, t) in c.iter_mut().zip(thresholds) {
                if s >= *t {
                    *ci += 1;
                }
            }
        }
        c
    });
    let mut total = vec![0u64; k];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let m = opts.samples as f64;
    let empirical: Vec<f64> = total.iter().map(|&c| c as f64 / m).collect();
    let stderr: Vec<f64> = empirical.iter().map(|p| (p * (1.0 - p) / m).sqrt()).collect();
    let bound_values: Vec<f64> = thresholds.iter().map(|&t| if t <= 0.0 { front } else { front * (-c_const * shape(t)).exp() }).collect();
    let fit_window: Vec<usize> = (0..k)
        .filter(|&i| thresholds[i] > 0.0 && total[i] as f64 >= MIN_EXCEED && empirical[i] <= 0.5)
        .collect();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut dominating_c = f64::INFINITY;
    for &i in &fit_window {
        let y = -(empirical[i] / front).ln();
        let x = shape(thresholds[i]);
        sxy += x * y;
        sxx += x * x;
        dominating_c = dominating_c.min(y / x);
    }
    let fitted_c = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let pts: Vec<(f64, f64)> = fit_window.iter().map(|&i| (thresholds[i], -empirical[i].ln())).collect();
    Ok(TailBound {
        thresholds: thresholds.to_vec(),
        bound_values,
        empirical,
        stderr,
        fitted_c,
        dominating_c: if dominating_c.is_finite() { dominating_c.max(0.0) } else { 0.0 },
        fitted_crossover: fit_crossover(&pts),
        analytic_crossover: crossover,
        fit_window,
    })
}

/// Best crossover `tau` of `y ~ l min(t^2/tau, t)` by least squares over a
/// log grid; `None` when the best `tau` sits at the grid edge.
fn fit_crossover(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 4 {
        return None;
    }
    let tmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let (lo, hi) = ((tmin / 4.0).ln(), (tmax * 4.0).ln());
    let grid = 400;
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for g in 0..=grid {
        let tau = (lo + (hi - lo) * g as f64 / grid as f64).exp();
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(t, y) in pts {
            let x = (t * t / tau).min(t);
            sxy += x * y;
            sxx += x * x;
        }
        let l = sxy / sxx;
        let sse: f64 = pts.iter().map(|&(t, y)| (y - l * (t * t / tau).min(t)).powi(2)).sum();
        if sse < best.0 {
            best = (sse, g, tau);
        }
    }
    if best.1 == 0 || best.1 == grid {
        None
    } else {
        Some(best.2)
    }
}

/// `(p, |Q|_p site, |Q|_p Gaussian, ratio)`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub p: f64,
    pub site_norm: f64,
    pub gaussian_norm: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentComparison {
    /// `max_{k <= 5} |X|_{2k} / |G|_{2k}`.
    pub alpha: f64,
    pub alpha_ratios: Vec<f64>,
    pub rows: Vec<MomentRow>,
    /// `max ratio / alpha^2`.
    pub constant: f64,
}

const ALPHA_K: usize = 5;
const MOMENT_BATCHES: usize = 20;

/// `|X|_{2k} / |G|_{2k}` for `k = 1..=5`.
pub fn subgaussian_ratios(site: &Measure1D) -> Vec<f64> {
    let mut out = Vec::with_capacity(ALPHA_K);
    let mut dfact = 1.0;
    for k in 1..=ALPHA_K {
        dfact *= (2 * k - 1) as f64;
        let p = 2.0 * k as f64;
        let c = site.barycenter();
        let m = site.expect(|x| (x - c).abs().powf(p));
        out.push((m / dfact).powf(1.0 / p));
    }
    out
}

/// Compares chaos `p`-norms under the site law against Gaussian sites.
pub fn moment_compare(site: &Measure1D, a: &DMatrix<f64>, p_list: &[f64], opts: McOptions) -> Result<MomentComparison> {
    let n = a.nrows();
    validate_interaction(a, n)?;
    let ratios = subgaussian_ratios(site);
    let k = ratios.len();
    let grows = ratios.windows(2).skip(1).all(|w| w[1] > w[0] * (1.0 + 1e-9)) && ratios[k - 1] > 1.1 * ratios[1];
    if grows {
        return Err(Error::NotSubGaussian);
    }
    let alpha = ratios.iter().copied().fold(0.0, f64::max);
    if hs_norm(a) == 0.0 {
        let rows = p_list.iter().map(|&p| MomentRow { p, site_norm: 0.0, gaussian_norm: 0.0, ratio: 1.0, ratio_stderr: 0.0 }).collect();
        return Ok(MomentComparison { alpha, alpha_ratios: ratios, rows, constant: 1.0 / (alpha * alpha) });
    }
    let center = site.barycenter();
    let sd = site.std_dev();
    let gauss = Measure1D::auto(crate::measure1d::Potential1D::gaussian(sd))?;
    // per-batch sums of |Q|^p for both laws
    let batch = opts.samples / MOMENT_BATCHES;
    let sums = map_ordered(opts.exec, (0..MOMENT_BATCHES as u64).collect(), |b| {
        let mut rs = stream_rng(opts.seed, 2 * b);
        let mut rg = stream_rng(opts.seed, 2 * b + 1);
        let mut x = vec![0.0; n];
        let mut out = vec![(0.0, 0.0); p_list.len()];
        let q = |x: &[f64]| {
            let mut acc = 0.0;
            for j in 0..n {
                let mut r = 0.0;
                for i in 0..n {
                    r += a[(i, j)] * x[i];
                }
                acc += r * x[j];
            }
            acc
        };
        for _ in 0..batch {
            for xi in x.iter_mut() {
                *xi = draw_site(site, &mut rs) - center;
            }
            let qs = q(&x).abs();
            for xi in x.iter_mut() {
                *xi = draw_site(&gauss, &mut rg);
            }
            let qg = q(&x).abs();
            for (o, p) in out.iter_mut().zip(p_list) {
                o.0 += qs.powf(*p);
                o.1 += qg.powf(*p);
            }
        }
        out
    });
    let mut rows = Vec::with_capacity(p_list.len());
    let mut constant: f64 = 0.0;
    for (j, &p) in p_list.iter().enumerate() {
        let (mut ts, mut tg) = (0.0, 0.0);
        let mut batch_ratios = Vec::with_capacity(MOMENT_BATCHES);
        for s in &sums {
            ts += s[j].0;
            tg += s[j].1;
            batch_ratios.push((s[j].0 / s[j].1).powf(1.0 / p));
        }
        let tot = (batch * MOMENT_BATCHES) as f64;
        let (site_norm, gaussian_norm) = ((ts / tot).powf(1.0 / p), (tg / tot).powf(1.0 / p));
        let ratio = site_norm / gaussian_norm;
        let mb = batch_ratios.iter().sum::<f64>() / MOMENT_BATCHES as f64;
        let var = batch_ratios.iter().map(|r| (r - mb).powi(2)).sum::<f64>() / (MOMENT_BATCHES - 1) as f64;
        constant = constant.max(ratio / (alpha * alpha));
        rows.push(MomentRow { p, site_norm, gaussian_norm, ratio, ratio_stderr: (var / MOMENT_BATCHES as f64).sqrt() });
    }
    Ok(MomentComparison { alpha, alpha_ratios: ratios, rows, constant })
}

/// Symmetric zero-diagonal matrix with i.i.d. standard normal entries in
/// `(M + M^T)/2`, rescaled to Hilbert-Schmidt norm `hs`.
pub fn random_interaction(n: usize, hs: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, u64::MAX);
    let m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut a = (&m + m.transpose()) * 0.5;
    for i in 0..n {
        a[(i, i)] = 0.0;
    }
    // exact symmetry after rounding
    for i in 0..n {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    let norm = a.norm();
    if norm > 0.0 {
        a *= hs / norm;
        for i in 0..n {
            for j in 0..i {
                a[(j, i)] = a[(i, j)];
            }
        }
    }
    a
}

#[cfg(test)]
mod tests;
