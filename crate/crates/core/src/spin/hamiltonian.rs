use nalgebra::DMatrix;

use super::SpinSystemSpec;
use crate::error::{Error, Result};
use crate::measure1d::Potential1D;

/// `H_{A,b}(x) = sum V(x_i) + sum b_i x_i - sum_{i,j} a_ij x_i x_j`.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub potential: Potential1D,
    pub a: Option<DMatrix<f64>>,
    pub b: Option<Vec<f64>>,
}

impl Hamiltonian {
    pub fn new(potential: Potential1D, a: Option<DMatrix<f64>>, b: Option<Vec<f64>>) -> Self {
        Hamiltonian { potential, a, b }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        let n = x.len();
        if let Some(a) = &self.a {
            if a.nrows() != n {
                return Err(Error::DimensionMismatch { expected: a.nrows(), got: n });
            }
        }
        if let Some(b) = &self.b {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: b.len(), got: n });
            }
        }
        Ok(())
    }

    /// `I_A(x)`, summing over both ordered pairs.
    pub fn interaction(&self, x: &[f64]) -> f64 {
        match &self.a {
            None => 0.0,
            Some(a) => {
                let mut acc = 0.0;
                for i in 0..x.len() {
                    let mut row = 0.0;
                    for j in 0..x.len() {
                        row += a[(i, j)] * x[j];
                    }
                    acc += x[i] * row;
                }
                acc
            }
        }
    }

    pub fn boundary(&self, x: &[f64]) -> f64 {
        self.b.as_ref().map_or(0.0, |b| b.iter().zip(x).map(|(bi, xi)| bi * xi).sum())
    }

    pub fn site_energy(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.potential.v(xi)).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.site_energy(x) + self.boundary(x) - self.interaction(x))
    }
}

/// Unnormalized density ratio `exp(H(x) - H(pi_E x)) 1{|pi_D x| <= w}` of
/// the thickened conditioned measure against the product measure.
pub fn ratio_raw(spec: &SpinSystemSpec, x: &[f64]) -> Result<f64> {
    let g = spec.geometry();
    let (e, d) = g.project_affine(x, spec.s)?;
    if d.abs() > spec.w {
        return Ok(0.0);
    }
    let h = spec.hamiltonian();
    Ok((h.eval(x)? - h.eval(&e)?).exp())
}
