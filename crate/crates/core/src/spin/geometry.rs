use crate::error::{Error, Result};

/// The diagonal direction `(1/sqrt n, ..., 1/sqrt n)` and its orthogonal
/// complement `E = { sum x_i = 0 }`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperplaneGeometry {
    pub n: usize,
    pub diag_unit: Vec<f64>,
}

impl HyperplaneGeometry {
    pub fn new(n: usize) -> Self {
        let u = 1.0 / (n as f64).sqrt();
        HyperplaneGeometry { n, diag_unit: vec![u; n] }
    }

    /// `(pi_E(x), pi_D(x))` with `pi_D = sum x_i / sqrt n`.
    pub fn project(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let d = neumaier_sum(x) / (self.n as f64).sqrt();
        let e = x.iter().zip(&self.diag_unit).map(|(xi, u)| xi - d * u).collect();
        Ok((e, d))
    }

    /// Projection onto the affine plane `E_s = { sum x_i = s n }`, together
    /// with the signed diagonal offset from it.
    pub fn project_affine(&self, x: &[f64], s: f64) -> Result<(Vec<f64>, f64)> {
        let (mut e, d) = self.project(x)?;
        for v in &mut e {
            *v += s;
        }
        Ok((e, d - s * (self.n as f64).sqrt()))
    }
}

pub fn project(x: &[f64], geometry: &HyperplaneGeometry) -> Result<(Vec<f64>, f64)> {
    geometry.project(x)
}

/// Compensated sum.
pub(crate) fn neumaier_sum(x: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in x {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
