use serde::Serialize;

use super::hamiltonian::ratio_raw;
use super::SpinSystemSpec;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, stream_rng, McOptions};

pub(crate) const MIN_RATIO_SAMPLES: usize = 10_000;
const BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub bandwidth: f64,
}

/// `(ratio^p estimate, stderr)` for `(∫ (dmu_{E,w}/dmu_n)^p dmu_n)^{1/p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub p: f64,
    pub w: f64,
    pub ze: ZeEstimate,
}

struct Draws {
    diag: Vec<f64>,
    ratio: Vec<f64>,
}

fn draw(spec: &SpinSystemSpec, opts: &McOptions, with_ratio: bool) -> Result<Draws> {
    if spec.a.is_some() {
        return Err(Error::InvalidSpec("i.i.d. product sampling needs a non-interacting spec".into()));
    }
    let n = spec.n;
    let sqrt_n = (n as f64).sqrt();
    let site = &spec.site;
    let chunks = map_ordered(opts.exec, opts.chunks(), |(idx, len)| {
        let mut rng = stream_rng(opts.seed, idx as u64);
        let mut x = vec![0.0; n];
        let mut diag = Vec::with_capacity(len);
        let mut ratio = Vec::with_capacity(if with_ratio { len } else { 0 });
        for _ in 0..len {
            for xi in x.iter_mut() {
                *xi = site.sample(&mut rng);
            }
            diag.push(super::geometry::neumaier_sum(&x) / sqrt_n);
            if with_ratio {
                ratio.push(ratio_raw(spec, &x)?);
            }
        }
        Ok::<_, Error>((diag, ratio))
    });
    let mut out = Draws { diag: Vec::with_capacity(opts.samples), ratio: Vec::new() };
    for c in chunks {
        let (d, r) = c?;
        out.diag.extend(d);
        out.ratio.extend(r);
    }
    Ok(out)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
    (m, var.sqrt())
}

/// Gaussian-kernel density of the diagonal projection at the plane.
fn kde_at(diag: &[f64], at: f64) -> ZeEstimate {
    let m = diag.len();
    let (_, sd) = mean_sd(diag);
    let h = 1.06 * sd * (m as f64).powf(-0.2);
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let k: Vec<f64> = diag.iter().map(|d| norm * (-0.5 * ((d - at) / h).powi(2)).exp()).collect();
    let batch = m / BATCHES;
    let means: Vec<f64> = (0..BATCHES).map(|b| k[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64).collect();
    let (_, bsd) = mean_sd(&means);
    ZeEstimate { value: k.iter().sum::<f64>() / m as f64, stderr: bsd / (BATCHES as f64).sqrt(), bandwidth: h }
}

/// Density at the plane `E_s` of the law of `sum X_i / sqrt n` under the
/// product measure.
pub fn estimate_ze(spec: &SpinSystemSpec, opts: McOptions) -> Result<ZeEstimate> {
    if opts.samples < MIN_RATIO_SAMPLES {
        return Err(Error::TooFewSamples { got: opts.samples, need: MIN_RATIO_SAMPLES });
    }
    let d = draw(spec, &opts, false)?;
    Ok(kde_at(&d.diag, spec.s * (spec.n as f64).sqrt()))
}

/// Monte-Carlo `L^p` norm of `dmu_{E,w}/dmu_n` under `mu_n`.
pub fn mc_lp_ratio(spec: &SpinSystemSpec, p: f64, opts: McOptions) -> Result<RatioEstimate> {
    if opts.samples < MIN_RATIO_SAMPLES {
        return Err(Error::TooFewSamples { got: opts.samples, need: MIN_RATIO_SAMPLES });
    }
    if !(p > 0.0) {
        return Err(Error::InvalidBound(format!("p must be positive, got {p}")));
    }
    spec.validate()?;
    let d = draw(spec, &opts, true)?;
    let ze = kde_at(&d.diag, spec.s * (spec.n as f64).sqrt());
    let zhat = 2.0 * spec.w * ze.value;
    let zse = 2.0 * spec.w * ze.stderr;
    if !(zhat > 3.0 * zse) {
        return Err(Error::ZeDegenerate { value: zhat, stderr: zse });
    }
    let rp: Vec<f64> = d.ratio.iter().map(|r| r.powf(p)).collect();
    let (mean, sd) = mean_sd(&rp);
    let m = rp.len() as f64;
    let value = mean.powf(1.0 / p) / zhat;
    // delta method on log value = log(mean)/p - log(zhat)
    let stderr = if mean > 0.0 {
        let rel_mean = sd / m.sqrt() / mean;
        value * ((rel_mean / p).powi(2) + (zse / zhat).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(RatioEstimate { value, stderr, n_samples: opts.samples, p, w: spec.w, ze })
}
