//! Second eigenvalue of the Kronecker sum `T1 (x) I + I (x) T2`.

use rand::Rng;

use super::fv::Tridiag;
use crate::error::{Error, Result};
use crate::exec::stream_rng;

const CG_TOL: f64 = 1e-11;
const INVERSE_STEPS: usize = 200;

struct KronSum<'a> {
    t1: &'a Tridiag,
    t2: &'a Tridiag,
    ground: Vec<f64>,
}

impl KronSum<'_> {
    fn len(&self) -> usize {
        self.t1.len() * self.t2.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (n1, n2) = (self.t1.len(), self.t2.len());
        let mut col = vec![0.0; n1];
        let mut out = vec![0.0; n1];
        // index i * n2 + j
        for j in 0..n2 {
            for i in 0..n1 {
                col[i] = x[i * n2 + j];
            }
            self.t1.apply(&col, &mut out);
            for i in 0..n1 {
                y[i * n2 + j] = out[i];
            }
        }
        let mut row = vec![0.0; n2];
        for i in 0..n1 {
            self.t2.apply(&x[i * n2..(i + 1) * n2], &mut row);
            for j in 0..n2 {
                y[i * n2 + j] += row[j];
            }
        }
    }

    fn deflate(&self, x: &mut [f64]) {
        let d = dot(x, &self.ground);
        for (v, g) in x.iter_mut().zip(&self.ground) {
            *v -= d * g;
        }
    }

    /// Conjugate gradients for `T y = b` on the complement of the ground state.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        self.deflate(&mut r);
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let target = CG_TOL * CG_TOL * rr;
        for _ in 0..20 * n.max(100) {
            if rr <= target {
                return Ok(x);
            }
            self.apply(&p, &mut ap);
            self.deflate(&mut ap);
            let alpha = rr / dot(&p, &ap);
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
        Err(Error::MaxIterations(20 * n.max(100)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let s = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= s);
}

/// Smallest nonzero eigenvalue by deflated inverse iteration.
/// Returns `(eigenvalue, iterations)`.
pub(crate) fn second_eigenvalue(t1: &Tridiag, t2: &Tridiag) -> Result<(f64, usize)> {
    let ground = t1.ground.iter().flat_map(|a| t2.ground.iter().map(move |b| a * b)).collect();
    let op = KronSum { t1, t2, ground };
    let n = op.len();
    let mut rng = stream_rng(0x7e45, 0);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    op.deflate(&mut x);
    normalize(&mut x);
    let mut ax = vec![0.0; n];
    let mut lambda = f64::INFINITY;
    for it in 1..=INVERSE_STEPS {
        let mut y = op.solve(&x)?;
        op.deflate(&mut y);
        normalize(&mut y);
        op.apply(&y, &mut ax);
        let next = dot(&y, &ax);
        x = y;
        if (next - lambda).abs() <= 1e-10 * next.abs() {
            return Ok((next, it));
        }
        lambda = next;
    }
    Err(Error::MaxIterations(INVERSE_STEPS))
}
