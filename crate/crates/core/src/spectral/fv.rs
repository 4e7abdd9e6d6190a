//! Cell-centred finite-volume discretization of `f -> -(rho f')'/rho`.

use crate::error::{Error, Result};
use crate::measure1d::Measure1D;
use crate::quad;

/// Potential rise past the mode at each free end of the eigen-domain.
/// A Laplace tail cut at distance `L` shifts the Neumann gap by about
/// `pi^2/(L+2)^2`, so the usual normalization window is too short here.
pub(crate) const GAP_DROP: f64 = 80.0;

/// Symmetric tridiagonal matrix `D^{-1/2} K D^{-1/2}`.
#[derive(Clone, Debug)]
pub(crate) struct Tridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// Square roots of the cell masses: the null vector.
    pub ground: Vec<f64>,
}

impl Tridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            let prev = if q == 0.0 { f64::EPSILON * (1.0 + b2.abs()) } else { q };
            q = self.diag[i] - x - b2 / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let n = self.len();
        let mut hi: f64 = 0.0;
        for i in 0..n {
            let mut r = self.diag[i].abs();
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            hi = hi.max(r);
        }
        let mut lo = -f64::EPSILON * hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi.abs() {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Domain of the eigenproblem: the support clipped where `V` has risen by
/// [`GAP_DROP`] above its minimum.
pub(crate) fn gap_window(m: &Measure1D) -> Result<(f64, f64)> {
    let p = m.potential();
    let vmin = p.v(m.mode());
    if !vmin.is_finite() {
        return Err(Error::NonIntegrable(format!("potential is infinite at the mode {}", m.mode())));
    }
    let (wlo, whi) = m.window();
    let width = (whi - wlo).max(1e-6);
    let lo = extend(m, vmin, m.mode(), wlo, -1.0, p.support.0, width)?;
    let hi = extend(m, vmin, m.mode(), whi, 1.0, p.support.1, width)?;
    Ok((lo, hi))
}

fn extend(m: &Measure1D, vmin: f64, mode: f64, from: f64, dir: f64, wall: f64, width: f64) -> Result<f64> {
    let p = m.potential();
    let rise = |x: f64| p.v(x) - vmin;
    let crossing = |mut a: f64, mut b: f64| {
        for _ in 0..100 {
            let c = 0.5 * (a + b);
            if rise(c) >= GAP_DROP {
                b = c;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    };
    if rise(from) >= GAP_DROP {
        // the normalization window overshoots; pull the edge in
        return Ok(crossing(mode, from));
    }
    let mut x = from;
    let mut step = 0.5 * width;
    for _ in 0..80 {
        let mut y = x + dir * step;
        if (y - wall) * dir >= 0.0 {
            y = wall;
        }
        if rise(y) >= GAP_DROP {
            return Ok(crossing(x, y));
        }
        if y == wall {
            return Ok(wall);
        }
        x = y;
        step *= 2.0;
    }
    Err(Error::NonIntegrable(format!("potential does not grow past {x}")))
}

/// Discretizes `m` with `cells` equal cells on `window`.
pub(crate) fn discretize(m: &Measure1D, window: (f64, f64), cells: usize) -> Tridiag {
    let (lo, hi) = window;
    let h = (hi - lo) / cells as f64;
    let kinks = &m.potential().kinks;
    let dens = |x: f64| m.density(x);
    let mut mass = Vec::with_capacity(cells);
    let mut centre = Vec::with_capacity(cells);
    for i in 0..cells {
        let a = lo + h * i as f64;
        let b = if i + 1 == cells { hi } else { a + h };
        let mut cuts = vec![a];
        cuts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        let w: f64 = cuts.windows(2).map(|c| quad::panel_integral(&dens, c[0], c[1])).sum();
        mass.push(w.max(f64::MIN_POSITIVE));
        centre.push(dens(0.5 * (a + b)).max(f64::MIN_POSITIVE));
    }
    let mut diag = vec![0.0; cells];
    let mut off = Vec::with_capacity(cells.saturating_sub(1));
    for i in 0..cells.saturating_sub(1) {
        let c = (centre[i] * centre[i + 1]).sqrt() / h;
        diag[i] += c / mass[i];
        diag[i + 1] += c / mass[i + 1];
        off.push(-c / (mass[i] * mass[i + 1]).sqrt());
    }
    let total: f64 = mass.iter().sum();
    let ground = mass.iter().map(|w| (w / total).sqrt()).collect();
    Tridiag { diag, off, ground }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_matches_dense_eigenvalues() {
        let t = Tridiag { diag: vec![2.0, 3.0, 1.0, 4.0], off: vec![-1.0, 0.5, -0.25], ground: vec![] };
        let mut dense = nalgebra::DMatrix::zeros(4, 4);
        for i in 0..4 {
            dense[(i, i)] = t.diag[i];
            if i < 3 {
                dense[(i, i + 1)] = t.off[i];
                dense[(i + 1, i)] = t.off[i];
            }
        }
        let mut ev: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (k, e) in ev.iter().enumerate() {
            assert!((t.eigenvalue(k) - e).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn ground_state_is_null() {
        let m = Measure1D::auto(crate::Potential1D::standard_gaussian()).unwrap();
        let t = discretize(&m, gap_window(&m).unwrap(), 300);
        let mut y = vec![0.0; 300];
        t.apply(&t.ground, &mut y);
        assert!(y.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-10);
    }
}
