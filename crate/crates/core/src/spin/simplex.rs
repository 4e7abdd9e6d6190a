use serde::Serialize;

use super::kawasaki::{run_chains, KawasakiConfig, Observable};
use super::SpinSystemSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure1d::Family;

/// `Vol(Lambda(m, 1)) = 1/m!`, the volume of `{y >= 0, sum y <= 1}` in `R^m`.
pub fn simplex_volume(m: usize) -> f64 {
    1.0 / (1..=m).map(|k| k as f64).product::<f64>()
}

/// `n! / (2 (s n)^(n-1))`: mass outside the positive orthant relative to
/// the mass inside, for two-sided exponential sites.
pub fn simplex_ratio_bound(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    (1..=n).map(|k| k as f64).product::<f64>() / (2.0 * (s * nf).powi(n as i32 - 1))
}

/// Exact positive-orthant mass of the conditioned two-sided exponential
/// measure on `E_s`, from the closed-form density of a sum of Laplace
/// variables: `1 / sum_k (n-1+k)! / (k! (n-1-k)!) (2 s n)^(-k)`.
pub fn simplex_mass_exact(n: usize, s: f64) -> f64 {
    let big_s = s * n as f64;
    let mut term = 1.0;
    let mut total = 1.0;
    for k in 1..n {
        // ratio of consecutive coefficients: (n-1+k)(n-k) / k
        term *= ((n - 1 + k) as f64) * ((n - k) as f64) / k as f64 / (2.0 * big_s);
        total += term;
    }
    1.0 / total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimplexMass {
    pub estimate: f64,
    pub stderr: f64,
    pub ratio_bound: f64,
    /// `1 / (1 + ratio_bound)`.
    pub mass_lower_bound: f64,
    pub exact: f64,
    pub sweeps: usize,
}

const CHAINS: usize = 8;

/// Positive-orthant mass of the conditioned two-sided exponential measure.
/// `sweeps` are split over independent chains; the standard error comes
/// from the spread of the chain means.
pub fn simplex_mass(spec: &SpinSystemSpec, sweeps: usize, seed: u64, exec: Execution) -> Result<SimplexMass> {
    if spec.site.potential().family != Family::TwoSidedExp {
        return Err(Error::InvalidSpec("simplex mass needs a two-sided exponential site".into()));
    }
    if !(spec.s > 0.0) {
        return Err(Error::InvalidSpec(format!("simplex mass needs s > 0, got {}", spec.s)));
    }
    let per = (sweeps / CHAINS).max(1);
    let cfg = KawasakiConfig::new(per, 1.0).with_observables(vec![Observable::PositiveOrthant]);
    let traces = run_chains(spec, &cfg, seed, CHAINS, exec)?;
    let means: Vec<f64> = traces.iter().map(|t| t.values[0].iter().sum::<f64>() / t.len() as f64).collect();
    let k = means.len() as f64;
    let estimate = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - estimate).powi(2)).sum::<f64>() / (k - 1.0);
    let ratio_bound = simplex_ratio_bound(spec.n, spec.s);
    Ok(SimplexMass {
        estimate,
        stderr: (var / k).sqrt(),
        ratio_bound,
        mass_lower_bound: 1.0 / (1.0 + ratio_bound),
        exact: simplex_mass_exact(spec.n, spec.s),
        sweeps: per * CHAINS,
    })
}
