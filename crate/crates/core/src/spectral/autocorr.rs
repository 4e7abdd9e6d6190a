//! Exponential autocorrelation rate of a (possibly multi-chain) series.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{GapEstimate, GapFlag, GapMethod};
use crate::error::{Error, Result};

/// Jackknife blocks.
pub(crate) const BLOCKS: usize = 10;
/// The fit window closes once the autocorrelation drops below this.
const RHO_FLOOR: f64 = 0.05;
/// ... or below this many Bartlett standard errors.
const NOISE_SIGMAS: f64 = 2.0;
/// Required trace length in autocorrelation times.
const MIN_TAUS: f64 = 50.0;

/// Lagged product sums of one block, `sum_{t in block} y_t y_{t+k}`, with
/// pair counts.
struct BlockSums {
    prod: Vec<f64>,
    pairs: Vec<f64>,
}

fn block_sums(planner: &mut FftPlanner<f64>, chain: &[f64], start: usize, end: usize, max_lag: usize) -> BlockSums {
    let ext_end = (end + max_lag).min(chain.len());
    let seg = &chain[start..end];
    let ext = &chain[start..ext_end];
    let m = (seg.len() + ext.len()).next_power_of_two();
    let mut a: Vec<Complex<f64>> = seg.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(m, Complex::new(0.0, 0.0));
    let mut e: Vec<Complex<f64>> = ext.iter().map(|&v| Complex::new(v, 0.0)).collect();
    e.resize(m, Complex::new(0.0, 0.0));
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    fwd.process(&mut a);
    fwd.process(&mut e);
    let mut r: Vec<Complex<f64>> = a.iter().zip(&e).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut r);
    let scale = 1.0 / m as f64;
    let mut prod = Vec::with_capacity(max_lag + 1);
    let mut pairs = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        // t ranges over the block with t + k still inside the chain
        let count = seg.len().min(ext.len().saturating_sub(k));
        pairs.push(count as f64);
        prod.push(if count == 0 { 0.0 } else { r[k].re * scale });
    }
    BlockSums { prod, pairs }
}

fn acf(prod: &[f64], pairs: &[f64]) -> Vec<f64> {
    let c0 = prod[0] / pairs[0];
    prod.iter().zip(pairs).map(|(p, n)| if *n > 0.0 { p / n / c0 } else { f64::NAN }).collect()
}

/// Slope-with-intercept least squares of `ln rho` over lags `1..end`.
fn fit_rate(rho: &[f64], end: usize) -> f64 {
    if end <= 2 {
        return -rho[1].ln();
    }
    let pts: Vec<(f64, f64)> = (1..end).map(|k| (k as f64, rho[k].max(f64::MIN_POSITIVE).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// Decay rate per step of the autocorrelation of `chains`, pooled.
pub(crate) fn autocorr_rate(chains: &[&[f64]], max_lag: usize) -> Result<GapEstimate> {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let shortest = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let per_chain = BLOCKS.div_ceil(chains.len().max(1));
    if chains.is_empty() || shortest < 4 * per_chain || max_lag == 0 {
        return Err(Error::TraceTooShort { got: shortest, need: 4 * per_chain });
    }
    let max_lag = max_lag.min(shortest / 2);
    let mean = chains.iter().flat_map(|c| c.iter()).sum::<f64>() / total as f64;
    let centred: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| v - mean).collect()).collect();

    let mut planner = FftPlanner::new();
    let mut blocks = Vec::new();
    for c in &centred {
        let len = c.len();
        for b in 0..per_chain {
            let start = b * len / per_chain;
            let end = (b + 1) * len / per_chain;
            blocks.push(block_sums(&mut planner, c, start, end, max_lag));
        }
    }
    let mut prod = vec![0.0; max_lag + 1];
    let mut pairs = vec![0.0; max_lag + 1];
    for b in &blocks {
        for k in 0..=max_lag {
            prod[k] += b.prod[k];
            pairs[k] += b.pairs[k];
        }
    }
    if !(prod[0] > 0.0) {
        return Err(Error::NoDecay);
    }
    let rho = acf(&prod, &pairs);

    // window: first lag where rho is small or lost in noise
    let mut end = max_lag + 1;
    let mut bartlett = 1.0;
    for k in 1..=max_lag {
        let noise = NOISE_SIGMAS * (bartlett / total as f64).sqrt();
        if !(rho[k] >= RHO_FLOOR.max(noise)) {
            end = k;
            break;
        }
        bartlett += 2.0 * rho[k] * rho[k];
    }
    let ceiling = 1.0 / RHO_FLOOR.max(NOISE_SIGMAS / (total as f64).sqrt());
    if end == 1 {
        return Ok(GapEstimate {
            value: ceiling.ln(),
            method: GapMethod::Autocorr,
            error: 0.0,
            meta: total,
            flags: vec![GapFlag::Proxy, GapFlag::NoiseCeiling],
        });
    }
    let rate = fit_rate(&rho, end);
    if !(rate > 0.0) {
        return Err(Error::NoDecay);
    }
    let need = (MIN_TAUS / rate).ceil() as usize;
    if shortest < need {
        return Err(Error::TraceTooShort { got: shortest, need });
    }

    let nb = blocks.len() as f64;
    let jack: Vec<f64> = blocks
        .iter()
        .map(|b| {
            let p: Vec<f64> = (0..=max_lag).map(|k| prod[k] - b.prod[k]).collect();
            let q: Vec<f64> = (0..=max_lag).map(|k| pairs[k] - b.pairs[k]).collect();
            fit_rate(&acf(&p, &q), end)
        })
        .collect();
    let jm = jack.iter().sum::<f64>() / nb;
    let error = ((nb - 1.0) / nb * jack.iter().map(|r| (r - jm).powi(2)).sum::<f64>()).sqrt();
    let mut flags = vec![GapFlag::Proxy];
    if end > max_lag {
        flags.push(GapFlag::WindowAtMaxLag);
    }
    Ok(GapEstimate { value: rate, method: GapMethod::Autocorr, error, meta: total, flags })
}
