//! Spectral-gap estimation: a 1D finite-volume eigensolver, the exact
//! two-spin hyperplane reduction, trace-based estimators for Kawasaki
//! chains, and the tensorization and small-n sandwich checks.

mod autocorr;
mod fv;
mod tensor;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure1d::{Measure1D, Potential1D};
use crate::spin::{check_log_concave, Observable, Trace};

pub const MIN_GRID: usize = 200;
/// Grid used for reference 1D gaps inside composite checks.
pub const REFERENCE_GRID: usize = 2000;
/// Richardson errors above this fraction of the value are rejected.
const MAX_RICHARDSON: f64 = 0.1;
const MIN_RAYLEIGH_SAMPLES: usize = 1000;
const RAYLEIGH_BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    Eig1d,
    RayleighLinear,
    Autocorr,
}

impl GapMethod {
    pub fn name(&self) -> &'static str {
        match self {
            GapMethod::Eig1d => "eig1d",
            GapMethod::RayleighLinear => "rayleigh_linear",
            GapMethod::Autocorr => "autocorr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapFlag {
    /// Depends on the sampler, not only on the measure.
    Proxy,
    /// No correlation was resolved; the value is the largest measurable rate.
    NoiseCeiling,
    /// The fit window reached `max_lag` before the correlation decayed.
    WindowAtMaxLag,
    /// A Rayleigh quotient, so an upper bound on the gap up to noise.
    UpperBound,
}

impl GapFlag {
    pub fn name(&self) -> &'static str {
        match self {
            GapFlag::Proxy => "proxy",
            GapFlag::NoiseCeiling => "noise_ceiling",
            GapFlag::WindowAtMaxLag => "window_at_max_lag",
            GapFlag::UpperBound => "upper_bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEstimate {
    pub value: f64,
    pub method: GapMethod,
    /// Grid error for `eig1d`, statistical otherwise.
    pub error: f64,
    /// Grid size, or number of trace samples.
    pub meta: usize,
    pub flags: Vec<GapFlag>,
}

impl GapEstimate {
    pub fn has_flag(&self, f: GapFlag) -> bool {
        self.flags.contains(&f)
    }
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < MIN_GRID {
        return Err(Error::InvalidSpec(format!("grid size {grid} is below {MIN_GRID}")));
    }
    Ok(())
}

/// Gap at a single resolution, with no error estimate.
fn eig_at(m: &Measure1D, window: (f64, f64), cells: usize) -> f64 {
    fv::discretize(m, window, cells).eigenvalue(1)
}

/// Spectral gap of a 1D measure.
///
/// The Dirichlet form is discretized with `grid_size` cells; the error is
/// the difference from a grid half as fine.
pub fn gap_1d(measure: &Measure1D, grid_size: usize) -> Result<GapEstimate> {
    check_grid(grid_size)?;
    let window = fv::gap_window(measure)?;
    let fine = eig_at(measure, window, grid_size);
    let coarse = eig_at(measure, window, grid_size / 2);
    let error = (fine - coarse).abs();
    if !(fine > 0.0) || !fine.is_finite() {
        return Err(Error::GridTooCoarse(f64::INFINITY));
    }
    if error > MAX_RICHARDSON * fine {
        return Err(Error::GridTooCoarse(error / fine));
    }
    Ok(GapEstimate { value: fine, method: GapMethod::Eig1d, error, meta: grid_size, flags: Vec::new() })
}

/// Density of the two-spin conditioned measure in the unit-speed
/// coordinate `t`, where `x = (s + t/sqrt 2, s - t/sqrt 2)`.
pub fn hyperplane_potential_n2(site: &Potential1D, s: f64) -> Potential1D {
    let r = std::f64::consts::SQRT_2;
    let (a, b) = site.support;
    let lo = (r * (a - s)).max(r * (s - b));
    let hi = (r * (b - s)).min(r * (s - a));
    let mut kinks: Vec<f64> = site.kinks.iter().flat_map(|&k| [r * (k - s), r * (s - k)]).collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let p = site.clone();
    let mut w = Potential1D::new(format!("hyperplane2[{}; s={s}]", site.label), move |t| p.v(s + t / r) + p.v(s - t / r))
        .with_kinks(kinks)
        .with_support(lo, hi);
    if site.has_dv() {
        let p = site.clone();
        w = w.with_dv(move |t| (p.dv_or_fd(s + t / r) - p.dv_or_fd(s - t / r)) / r);
    }
    w
}

/// Exact gap of the conditioned measure for `n = 2`.
pub fn gap_hyperplane_n2(site: &Measure1D, s: f64, grid_size: usize) -> Result<GapEstimate> {
    check_grid(grid_size)?;
    let w = hyperplane_potential_n2(site.potential(), s);
    if !(w.support.1 > w.support.0) {
        return Err(Error::OutOfRange(s));
    }
    let guess = (w.support.0.max(-1.0), w.support.1.min(1.0));
    let m = Measure1D::auto_from(w, guess)?;
    gap_1d(&m, grid_size)
}

fn coord_series(traces: &[Trace], coord: usize) -> Result<Vec<&[f64]>> {
    if traces.is_empty() {
        return Err(Error::TraceTooShort { got: 0, need: MIN_RAYLEIGH_SAMPLES });
    }
    traces
        .iter()
        .map(|t| {
            t.series(Observable::Coord(coord))
                .ok_or_else(|| Error::InvalidSpec(format!("trace does not record coordinate {coord}")))
        })
        .collect()
}

fn pooled_variance(series: &[&[f64]]) -> (f64, f64, usize) {
    let total: usize = series.iter().map(|c| c.len()).sum();
    let mean = series.iter().flat_map(|c| c.iter()).sum::<f64>() / total as f64;
    let sq: Vec<f64> = series.iter().flat_map(|c| c.iter()).map(|v| (v - mean).powi(2)).collect();
    let var = sq.iter().sum::<f64>() / total as f64;
    // batch means of the squared deviations, batches taken along each chain
    let per = RAYLEIGH_BATCHES.div_ceil(series.len());
    let mut batches = Vec::new();
    let mut off = 0;
    for c in series {
        for b in 0..per {
            let (s, e) = (off + b * c.len() / per, off + (b + 1) * c.len() / per);
            if e > s {
                batches.push(sq[s..e].iter().sum::<f64>() / (e - s) as f64);
            }
        }
        off += c.len();
    }
    let nb = batches.len() as f64;
    let bm = batches.iter().sum::<f64>() / nb;
    let se = (batches.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (nb - 1.0).max(1.0) / nb).sqrt();
    (var, se, total)
}

/// `((n-1)/n) / Var(x_coord)` from stationary traces.
pub fn gap_rayleigh_coord(traces: &[Trace], n: usize, coord: usize) -> Result<GapEstimate> {
    let series = coord_series(traces, coord)?;
    let total: usize = series.iter().map(|c| c.len()).sum();
    if total < MIN_RAYLEIGH_SAMPLES {
        return Err(Error::TraceTooShort { got: total, need: MIN_RAYLEIGH_SAMPLES });
    }
    if n < 2 {
        return Err(Error::InvalidSpec(format!("need n >= 2, got {n}")));
    }
    let (var, se, total) = pooled_variance(&series);
    if !(var > 0.0) {
        return Err(Error::NoDecay);
    }
    let front = (n - 1) as f64 / n as f64;
    let value = front / var;
    Ok(GapEstimate {
        value,
        method: GapMethod::RayleighLinear,
        error: value * se / var,
        meta: total,
        flags: vec![GapFlag::UpperBound],
    })
}

/// Rayleigh quotient of the first coordinate.
pub fn gap_rayleigh_linear(traces: &[Trace], n: usize) -> Result<GapEstimate> {
    gap_rayleigh_coord(traces, n, 0)
}

/// Autocorrelation decay rate per sweep of `observable`, pooled over chains.
pub fn gap_autocorr(traces: &[Trace], observable: Observable, max_lag: usize) -> Result<GapEstimate> {
    let series: Vec<&[f64]> = traces
        .iter()
        .map(|t| {
            t.series(observable)
                .ok_or_else(|| Error::InvalidSpec(format!("trace does not record {}", observable.name())))
        })
        .collect::<Result<_>>()?;
    autocorr::autocorr_rate(&series, max_lag)
}

/// [`gap_autocorr`] on raw series.
pub fn gap_autocorr_series(chains: &[&[f64]], max_lag: usize) -> Result<GapEstimate> {
    autocorr::autocorr_rate(chains, max_lag)
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub n: usize,
    pub rho_site: GapEstimate,
    pub rayleigh: GapEstimate,
    pub lower: f64,
    pub upper: f64,
    pub in_band: bool,
    pub var_site: f64,
    pub var_conditioned: f64,
    /// Batch-means standard error of `var_conditioned`.
    pub var_stderr: f64,
    /// `Var(X_E^1) / Var(X^1)`.
    pub var_ratio: f64,
    /// Exact reduction, for `n = 2`.
    pub n2_exact: Option<GapEstimate>,
    /// `rayleigh / exact`, for `n = 2`.
    pub n2_ratio: Option<f64>,
}

/// Checks that the conditioned gap lies in `[c/n, C] rho(site)` and compares
/// the one-spin variances. `band = (c, C)`.
pub fn sandwich_small_n(site: &Measure1D, n: usize, traces: &[Trace], band: (f64, f64)) -> Result<SandwichReport> {
    check_log_concave(site)?;
    if site.barycenter().abs() > 1e-6 * (1.0 + site.std_dev()) {
        return Err(Error::InvalidSpec(format!("site barycenter {} is not zero", site.barycenter())));
    }
    if traces.iter().any(|t| t.n != n) {
        return Err(Error::DimensionMismatch { expected: n, got: traces.iter().map(|t| t.n).find(|&m| m != n).unwrap_or(n) });
    }
    let rho_site = gap_1d(site, REFERENCE_GRID)?;
    let rayleigh = gap_rayleigh_linear(traces, n)?;
    let lower = band.0 / n as f64 * rho_site.value;
    let upper = band.1 * rho_site.value;
    let (var_conditioned, var_stderr, _) = pooled_variance(&coord_series(traces, 0)?);
    let var_site = site.variance();
    let (n2_exact, n2_ratio) = if n == 2 {
        let s = traces.first().map_or(0.0, |t| t.s);
        let e = gap_hyperplane_n2(site, s, REFERENCE_GRID)?;
        let r = rayleigh.value / e.value;
        (Some(e), Some(r))
    } else {
        (None, None)
    };
    Ok(SandwichReport {
        n,
        in_band: rayleigh.value >= lower && rayleigh.value <= upper,
        rho_site,
        rayleigh,
        lower,
        upper,
        var_site,
        var_conditioned,
        var_stderr,
        var_ratio: var_conditioned / var_site,
        n2_exact,
        n2_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorizationReport {
    pub gap_2d: f64,
    pub gap_m1: GapEstimate,
    pub gap_m2: GapEstimate,
    pub min_marginal: f64,
    /// `|gap_2d - min_marginal| / min_marginal`.
    pub rel_diff: f64,
    pub grid: usize,
    pub iterations: usize,
}

/// Second eigenvalue of the product generator on a `grid x grid` tensor
/// grid, against the smaller reference 1D gap.
pub fn tensorization_check(m1: &Measure1D, m2: &Measure1D, grid: usize) -> Result<TensorizationReport> {
    if !(50..=1000).contains(&grid) {
        return Err(Error::InvalidSpec(format!("tensor grid {grid} outside [50, 1000]")));
    }
    let gap_m1 = gap_1d(m1, REFERENCE_GRID)?;
    let gap_m2 = gap_1d(m2, REFERENCE_GRID)?;
    let t1 = fv::discretize(m1, fv::gap_window(m1)?, grid);
    let t2 = fv::discretize(m2, fv::gap_window(m2)?, grid);
    for (t, g) in [(&t1, &gap_m1), (&t2, &gap_m2)] {
        let rel = (t.eigenvalue(1) - g.value).abs() / g.value;
        if rel > MAX_RICHARDSON {
            return Err(Error::GridTooCoarse(rel));
        }
    }
    let (gap_2d, iterations) = tensor::second_eigenvalue(&t1, &t2)?;
    let min_marginal = gap_m1.value.min(gap_m2.value);
    Ok(TensorizationReport {
        gap_2d,
        rel_diff: (gap_2d - min_marginal).abs() / min_marginal,
        min_marginal,
        gap_m1,
        gap_m2,
        grid,
        iterations,
    })
}

#[cfg(test)]
mod tests;
