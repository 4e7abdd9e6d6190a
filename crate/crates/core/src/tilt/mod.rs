//! Reduction of the weakly interacting conserved model with mean spin `s`
//! and boundary field `b` to the zero-spin model, via per-site tilts and
//! translations solving a fixed-point system.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::interp::Hermite;
use crate::measure1d::Measure1D;
use crate::spin::{op_norm, validate_interaction};

const CACHE_POINTS: usize = 2048;
const M2_GRID: usize = 257;
const M2_SAFETY: f64 = 1.05;
/// Central mass of the site law whose quantile range bounds the tilt grid.
const RANGE_MASS: f64 = 0.999;
const U0_TOL: f64 = 1e-12;

/// Barycenter `F(a)` of the tilt and its derivative `Var`.
struct FCache {
    a_range: (f64, f64),
    interp: Hermite,
}

pub struct TiltProblem {
    pub site: Arc<Measure1D>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub s: f64,
    /// `sup_a Var(mu^a)`, estimated over a bounded range of tilts unless given.
    pub m2_bar: f64,
    pub exec: Execution,
    cache: OnceLock<Result<FCache>>,
}

impl std::fmt::Debug for TiltProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TiltProblem")
            .field("n", &self.b.len())
            .field("s", &self.s)
            .field("m2_bar", &self.m2_bar)
            .finish_non_exhaustive()
    }
}

/// Tilts whose barycenters span the central `RANGE_MASS` of the site law.
fn tilt_range(site: &Measure1D) -> Result<(f64, f64)> {
    let tail = 0.5 * (1.0 - RANGE_MASS);
    let (qlo, qhi) = (site.quantile(tail), site.quantile(1.0 - tail));
    Ok((site.invert_tilt(qlo)?, site.invert_tilt(qhi)?))
}

/// `M2_SAFETY * max Var(mu^a)` over the tilt range.
pub fn estimate_m2_bar(site: &Measure1D, exec: Execution) -> Result<f64> {
    let (lo, hi) = tilt_range(site)?;
    let grid: Vec<f64> = (0..M2_GRID).map(|k| lo + (hi - lo) * k as f64 / (M2_GRID - 1) as f64).collect();
    let vars = map_ordered(exec, grid, |a| site.tilt(a).map(|m| m.variance()));
    let mut best: f64 = 0.0;
    for v in vars {
        best = best.max(v?);
    }
    Ok(M2_SAFETY * best)
}

impl TiltProblem {
    pub fn new(site: impl Into<Arc<Measure1D>>, a: DMatrix<f64>, b: Vec<f64>, s: f64) -> Result<Self> {
        let site = site.into();
        let m2_bar = estimate_m2_bar(&site, Execution::default())?;
        Self::with_m2_bar(site, a, b, s, m2_bar)
    }

    pub fn with_m2_bar(site: impl Into<Arc<Measure1D>>, a: DMatrix<f64>, b: Vec<f64>, s: f64, m2_bar: f64) -> Result<Self> {
        let n = b.len();
        validate_interaction(&a, n)?;
        if !(m2_bar > 0.0) || !m2_bar.is_finite() {
            return Err(Error::InvalidSpec(format!("m2_bar must be positive and finite, got {m2_bar}")));
        }
        let op = op_norm(&a);
        if !(op < 1.0 / (2.0 * m2_bar)) {
            return Err(Error::InteractionTooStrong(format!(
                "|A|_op = {op} is not below 1/(2 m2_bar) = {}",
                1.0 / (2.0 * m2_bar)
            )));
        }
        Ok(TiltProblem { site: site.into(), a, b, s, m2_bar, exec: Execution::default(), cache: OnceLock::new() })
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    fn cache(&self) -> Result<&FCache> {
        self.cache
            .get_or_init(|| {
                let (lo, hi) = tilt_range(&self.site)?;
                let grid: Vec<f64> =
                    (0..CACHE_POINTS).map(|k| lo + (hi - lo) * k as f64 / (CACHE_POINTS - 1) as f64).collect();
                let vals = map_ordered(self.exec, grid.clone(), |a| self.site.tilt(a).map(|m| (m.barycenter(), m.variance())));
                let mut y = Vec::with_capacity(CACHE_POINTS);
                let mut d = Vec::with_capacity(CACHE_POINTS);
                for v in vals {
                    let (f, var) = v?;
                    y.push(f);
                    d.push(var);
                }
                Ok(FCache { a_range: (lo, hi), interp: Hermite::new(grid, y, d) })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `(F(z), F'(z))`, exactly or from the cached interpolant.
    fn f_and_slope(&self, z: f64, exact: bool) -> Result<(f64, f64)> {
        if !exact {
            let c = self.cache()?;
            if z >= c.a_range.0 && z <= c.a_range.1 {
                return Ok((c.interp.eval(z), c.interp.derivative(z)));
            }
        }
        let m = self.site.tilt(z)?;
        Ok((m.barycenter(), m.variance()))
    }

    /// Per-site tilts `z_i = u0 - b_i + 2 (A t)_i`.
    pub fn tilts(&self, u0: f64, t: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let at: f64 = (0..n).map(|j| self.a[(i, j)] * t[j]).sum();
                u0 - self.b[i] + 2.0 * at
            })
            .collect()
    }

    fn check_t(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: t.len() });
        }
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSpec("translation vector must be finite".into()));
        }
        Ok(())
    }

    fn solve_u0_with(&self, t: &[f64], exact: bool, guess: Option<f64>) -> Result<f64> {
        self.check_t(t)?;
        let n = self.n();
        let target = self.s * n as f64;
        let (slo, shi) = self.site.potential().support;
        if !(self.s > slo && self.s < shi) {
            return Err(Error::Unreachable(self.s));
        }
        let base = self.tilts(0.0, t);
        // returns None on divergence, with the sign of u telling which side
        let eval = |u: f64| -> Result<Option<(f64, f64)>> {
            let mut sum = 0.0;
            let mut slope = 0.0;
            for z in &base {
                match self.f_and_slope(z + u, exact) {
                    Ok((f, d)) => {
                        sum += f;
                        slope += d;
                    }
                    Err(Error::TiltDiverges(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(Some((sum - target, slope)))
        };
        let tol = U0_TOL * (1.0 + target.abs());
        let mut u = match guess {
            Some(g) => g,
            None => self.site.invert_tilt(self.s).unwrap_or(0.0) - base.iter().sum::<f64>() / n as f64,
        };
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut step = 1.0;
        for _ in 0..400 {
            let (r, d) = match eval(u)? {
                Some(v) => v,
                None => {
                    // diverged: pull back towards the finite side
                    let mid = base.iter().sum::<f64>() / n as f64;
                    if u + mid > 0.0 {
                        hi = u;
                    } else {
                        lo = u;
                    }
                    u = if lo.is_finite() && hi.is_finite() { 0.5 * (lo + hi) } else if lo.is_finite() { lo + 0.5 * (u - lo) } else { hi - 0.5 * (hi - u) };
                    if !lo.is_finite() && !hi.is_finite() {
                        return Err(Error::Unreachable(self.s));
                    }
                    continue;
                }
            };
            if r.abs() <= tol {
                return Ok(u);
            }
            if r < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let mut next = u - r / d.max(1e-300);
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    step *= 2.0;
                    lo + step
                } else {
                    step *= 2.0;
                    hi - step
                };
            }
            if next.abs() > 1e8 || (lo.is_finite() && hi.is_finite() && hi - lo <= 1e-15 * (1.0 + u.abs())) {
                if r.abs() <= 1e3 * tol {
                    return Ok(u);
                }
                return Err(Error::Unreachable(self.s));
            }
            u = next;
        }
        Err(Error::MaxIterations(400))
    }

    fn g_with(&self, t: &[f64], exact: bool, guess: Option<f64>) -> Result<(f64, Vec<f64>)> {
        let u0 = self.solve_u0_with(t, exact, guess)?;
        let z = self.tilts(u0, t);
        let mut out = Vec::with_capacity(z.len());
        for zi in z {
            out.push(self.f_and_slope(zi, exact)?.0);
        }
        Ok((u0, out))
    }
}

/// Barycenter `F(z)` of the tilt `mu^z`.
pub fn barycenter_map(problem: &TiltProblem, z: f64) -> Result<f64> {
    Ok(problem.f_and_slope(z, true)?.0)
}

/// `F(z)` from the cached interpolant where available.
pub fn barycenter_map_cached(problem: &TiltProblem, z: f64) -> Result<f64> {
    Ok(problem.f_and_slope(z, false)?.0)
}

/// The `u0` placing `G(t)` on `E_s`.
pub fn solve_u0(problem: &TiltProblem, t: &[f64]) -> Result<f64> {
    let rough = problem.solve_u0_with(t, false, None)?;
    problem.solve_u0_with(t, true, Some(rough))
}

/// `G(t)_i = F(z_i(u0(t), t))`, evaluated exactly.
pub fn g_map(problem: &TiltProblem, t: &[f64]) -> Result<(f64, Vec<f64>)> {
    let u0 = solve_u0(problem, t)?;
    problem.g_with(t, true, Some(u0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiltSolution {
    pub u0: f64,
    pub t: Vec<f64>,
    /// `|G(t) - t|_2` with exact quadrature.
    pub residual: f64,
    pub iterations: usize,
    /// Largest observed step ratio `|t^{k+1} - t^k| / |t^k - t^{k-1}|`.
    pub contraction_observed: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

const STALL_STEPS: usize = 5;

/// Banach iteration `t <- G(t)` from `(s, ..., s)`.
pub fn fixed_point_solve(problem: &TiltProblem, tol: f64, max_iter: usize) -> Result<TiltSolution> {
    fixed_point_solve_from(problem, vec![problem.s; problem.n()], tol, max_iter)
}

/// Banach iteration from a given starting point.
pub fn fixed_point_solve_from(problem: &TiltProblem, t0: Vec<f64>, tol: f64, max_iter: usize) -> Result<TiltSolution> {
    problem.check_t(&t0)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidBound(format!("tol must be positive, got {tol}")));
    }
    let mut t = t0;
    let mut prev_step: Option<f64> = None;
    let mut contraction: f64 = 0.0;
    let mut stalls = 0;
    let mut u0 = None;
    // cached F first, exact F once the iteration has settled
    let mut exact = false;
    for it in 1..=max_iter {
        let (u, next) = problem.g_with(&t, exact, u0)?;
        let step = dist(&next, &t);
        let floor = 1e-13 * (1.0 + t.iter().map(|v| v * v).sum::<f64>().sqrt());
        if let Some(p) = prev_step {
            if p > floor && step > floor {
                let ratio = step / p;
                contraction = contraction.max(ratio);
                if ratio >= 1.0 {
                    stalls += 1;
                    if stalls >= STALL_STEPS {
                        return Err(Error::NoContraction(ratio));
                    }
                } else {
                    stalls = 0;
                }
            }
        }
        t = next;
        u0 = Some(u);
        prev_step = Some(step);
        if step <= tol.max(floor) {
            if !exact {
                exact = true;
                prev_step = None;
                continue;
            }
            let (u, g) = problem.g_with(&t, true, u0)?;
            return Ok(TiltSolution { u0: u, residual: dist(&g, &t), t, iterations: it, contraction_observed: contraction });
        }
        if !exact && step <= 1e3 * tol {
            exact = true;
            prev_step = None;
        }
    }
    Err(Error::MaxIterations(max_iter))
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianReport {
    pub matrix: DMatrix<f64>,
    /// `Diag(F') - F' F'^T / |F'|_1`.
    pub middle: DMatrix<f64>,
    pub op_norm: f64,
    /// `2 m2_bar |A|_op`.
    pub bound: f64,
}

/// `dG/dt = (Diag(F'(z)) - F'(z) F'(z)^T / |F'(z)|_1) 2A`.
pub fn jacobian(problem: &TiltProblem, t: &[f64]) -> Result<JacobianReport> {
    let u0 = solve_u0(problem, t)?;
    let z = problem.tilts(u0, t);
    let n = z.len();
    let mut fp = Vec::with_capacity(n);
    for zi in z {
        fp.push(problem.f_and_slope(zi, true)?.1);
    }
    let l1: f64 = fp.iter().sum();
    let middle = DMatrix::from_fn(n, n, |i, j| if i == j { fp[i] } else { 0.0 } - fp[i] * fp[j] / l1);
    let matrix = &middle * (&problem.a * 2.0);
    let op = matrix.clone().svd(false, false).singular_values.iter().fold(0.0, |m: f64, v| m.max(*v));
    Ok(JacobianReport { matrix, middle, op_norm: op, bound: 2.0 * problem.m2_bar * op_norm(&problem.a) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroSpinReduction {
    /// Per-site tilts `u_i = u0 - b_i + 2 (A t)_i`.
    pub u: Vec<f64>,
    pub solution: TiltSolution,
}

/// Per-site tilts making the model at mean spin `s` a translate of the
/// zero-spin model with sites `mu^{u_i}`.
pub fn reduce_to_zero_spin(problem: &TiltProblem) -> Result<ZeroSpinReduction> {
    let solution = fixed_point_solve(problem, 1e-12, 10_000)?;
    let u = problem.tilts(solution.u0, &solution.t);
    Ok(ZeroSpinReduction { u, solution })
}

/// For `n = 2`: sup-distance between the conditioned density along `E_s`
/// (in the coordinate `y = x_1 - t_1`) and the zero-spin density built from
/// the recentred tilted sites.
pub fn verify_reduction_n2(problem: &TiltProblem, red: &ZeroSpinReduction) -> Result<f64> {
    if problem.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: problem.n() });
    }
    let t = &red.solution.t;
    let v = problem.site.potential();
    let a12 = problem.a[(0, 1)];
    let (b1, b2) = (problem.b[0], problem.b[1]);
    let original = |y: f64| {
        let (x1, x2) = (y + t[0], -y + t[1]);
        -(v.v(x1) + v.v(x2) + b1 * x1 + b2 * x2 - 2.0 * a12 * x1 * x2)
    };
    let s1 = problem.site.tilt(red.u[0])?;
    let s2 = problem.site.tilt(red.u[1])?;
    // y_i = x_i - t_i under mu^{u_i} recentred (barycenter t_i before the shift)
    let reduced = |y: f64| {
        let (l1, l2) = (s1.density(y + t[0]), s2.density(-y + t[1]));
        l1.ln() + l2.ln() + 2.0 * a12 * y * (-y)
    };
    let sd = (s1.variance() + s2.variance()).sqrt();
    let (lo, hi) = (-40.0 * sd - 1.0, 40.0 * sd + 1.0);
    let mut breaks = vec![lo, hi];
    for &k in &v.kinks {
        breaks.extend([k - t[0], t[1] - k]);
    }
    breaks.retain(|y| *y >= lo && *y <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let grid = 20_001;
    let ys: Vec<f64> = (0..grid).map(|k| lo + (hi - lo) * k as f64 / (grid - 1) as f64).collect();
    let normalized = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let lv: Vec<f64> = ys.iter().map(|&y| f(y)).collect();
        let mx = lv.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let d: Vec<f64> = lv.iter().map(|l| (l - mx).exp()).collect();
        let z = crate::quad::integrate(&|y: f64| (f(y) - mx).exp(), &breaks, 1e-13);
        d.iter().map(|x| x / z).collect()
    };
    let p = normalized(&original);
    let q = normalized(&reduced);
    Ok(p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests;
