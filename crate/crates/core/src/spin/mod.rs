//! Conservative spin systems: product and conditioned measures, the
//! diagonal thickening, Hamiltonians, density-ratio estimators, bound
//! evaluators and a conservative Metropolis sampler.

mod bounds;
mod geometry;
mod hamiltonian;
mod kawasaki;
mod ratio;
mod simplex;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use bounds::{
    choose_w0, clt_bounds, l4_ratio_bound, lsi_report, moment_bound, sg_report, L4Variant, LsiReport, LsiVariant,
    MomentVariant, SgReport, W0Variant,
};
pub(crate) use bounds::check_log_concave;
pub use geometry::{project, HyperplaneGeometry};
pub use hamiltonian::{ratio_raw, Hamiltonian};
pub use kawasaki::{kawasaki_sampler, run_chains, KawasakiConfig, Observable, Trace};
pub use ratio::{estimate_ze, mc_lp_ratio, RatioEstimate, ZeEstimate};
pub use simplex::{simplex_mass, simplex_mass_exact, simplex_ratio_bound, simplex_volume, SimplexMass};

use crate::error::{Error, Result};
use crate::measure1d::Measure1D;

/// `(n, site, s, A, b, w)`.
#[derive(Clone, Debug)]
pub struct SpinSystemSpec {
    pub n: usize,
    pub site: Arc<Measure1D>,
    pub s: f64,
    pub a: Option<DMatrix<f64>>,
    pub b: Option<Vec<f64>>,
    pub w: f64,
}

impl SpinSystemSpec {
    pub fn new(n: usize, site: impl Into<Arc<Measure1D>>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        Ok(SpinSystemSpec { n, site: site.into(), s: 0.0, a: None, b: None, w: 1.0 })
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_w(mut self, w: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidSpec(format!("thickening width must be positive, got {w}")));
        }
        self.w = w;
        Ok(self)
    }

    pub fn with_interaction(mut self, a: DMatrix<f64>) -> Result<Self> {
        validate_interaction(&a, self.n)?;
        self.a = Some(a);
        Ok(self)
    }

    pub fn with_boundary(mut self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        self.b = Some(b);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = &self.a {
            validate_interaction(a, self.n)?;
        }
        if let Some(b) = &self.b {
            if b.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
            }
        }
        if !(self.w > 0.0) {
            return Err(Error::InvalidSpec(format!("thickening width must be positive, got {}", self.w)));
        }
        Ok(())
    }

    pub fn op_norm(&self) -> f64 {
        self.a.as_ref().map_or(0.0, op_norm)
    }

    pub fn hs_norm(&self) -> f64 {
        self.a.as_ref().map_or(0.0, hs_norm)
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        Hamiltonian::new(self.site.potential().clone(), self.a.clone(), self.b.clone())
    }

    pub fn geometry(&self) -> HyperplaneGeometry {
        HyperplaneGeometry::new(self.n)
    }
}

/// Exact symmetry and zero diagonal.
pub fn validate_interaction(a: &DMatrix<f64>, n: usize) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.nrows().max(a.ncols()) });
    }
    for i in 0..n {
        if a[(i, i)] != 0.0 {
            return Err(Error::InvalidSpec(format!("interaction matrix must have zero diagonal (a[{i}][{i}] = {})", a[(i, i)])));
        }
        for j in 0..i {
            if a[(i, j)] != a[(j, i)] {
                return Err(Error::InvalidSpec(format!(
                    "interaction matrix must be symmetric (a[{i}][{j}] = {} but a[{j}][{i}] = {})",
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
            if !a[(i, j)].is_finite() {
                return Err(Error::InvalidSpec(format!("interaction entry a[{i}][{j}] is not finite")));
            }
        }
    }
    Ok(())
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().symmetric_eigen().eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Frobenius norm.
pub fn hs_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Open chain with coupling `strength` between neighbours.
pub fn nearest_neighbor(n: usize, strength: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { strength } else { 0.0 })
}

/// `a_ij = strength / n` off the diagonal.
pub fn mean_field(n: usize, strength: f64) -> DMatrix<f64> {
    let v = strength / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i != j { v } else { 0.0 })
}

#[cfg(test)]
mod tests;
