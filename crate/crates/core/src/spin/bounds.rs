use serde::Serialize;

use super::SpinSystemSpec;
use crate::constants::UniversalConstants;
use crate::error::{Error, Result};
use crate::measure1d::{Measure1D, MeasureStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum W0Variant {
    OneSided,
    TwoSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentVariant {
    OneSided,
    TwoSided,
    /// `rho` is the site log-Sobolev constant.
    Interaction { rho: f64, op: f64, hs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum L4Variant {
    OneSided,
    TwoSided,
    Interacting { rho: f64, op: f64, hs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LsiVariant {
    OneSided,
    TwoSided,
    Interacting,
}

fn finite(v: f64, name: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::MissingStats(name))
    }
}

/// Thickening width `w0` making the ratio moments dimension-free.
pub fn choose_w0(stats: &MeasureStats, variant: W0Variant) -> Result<f64> {
    let m2 = finite(stats.m2, "m2")?;
    let d1 = finite(stats.d1_psi1, "d1_psi1")?;
    let curv = match variant {
        W0Variant::OneSided => finite(stats.kappa, "kappa")?.max(0.0),
        W0Variant::TwoSided => finite(stats.d2_delta, "d2_delta")?,
    };
    let denom = curv + d1 * d1;
    let inv = if denom > 0.0 { 1.0 / denom } else { f64::INFINITY };
    Ok(m2.min(inv).sqrt())
}

/// Upper bound on `∫ (dmu_{E,w}/dmu_n)^p dmu_n`.
pub fn moment_bound(variant: MomentVariant, p: f64, w: f64, stats: &MeasureStats, consts: &UniversalConstants) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::InvalidBound(format!("w must be positive, got {w}")));
    }
    let c = consts.c_moment;
    let d1 = finite(stats.d1_psi1, "d1_psi1")?;
    let w2 = w * w;
    match variant {
        MomentVariant::OneSided => {
            let k = finite(stats.kappa, "kappa")?.max(0.0);
            Ok(c * (c * w2 * (p.abs() * k + p * p * d1 * d1)).exp())
        }
        MomentVariant::TwoSided => {
            let d2 = finite(stats.d2_delta, "d2_delta")?;
            Ok(c * (c * w2 * (p.abs() * d2 + p * p * d1 * d1)).exp())
        }
        MomentVariant::Interaction { rho, op, hs } => {
            if !(rho > 0.0) {
                return Err(Error::InvalidBound(format!("rho must be positive, got {rho}")));
            }
            let thick = 1.0 + consts.c4 * rho.sqrt() * w;
            if p != 0.0 {
                let limit = consts.c3 / thick * rho / p.abs();
                if op > limit {
                    return Err(Error::InteractionTooStrong(format!("|A|_op = {op} exceeds {limit}")));
                }
            }
            Ok(consts.c5 * (p.abs() * op * w2 + consts.c6 * p * p * thick * thick * hs * hs / (rho * rho)).exp())
        }
    }
}

fn interaction_check(rho: f64, op: f64, consts: &UniversalConstants) -> Result<()> {
    if !(rho > 0.0) {
        return Err(Error::InvalidBound(format!("rho must be positive, got {rho}")));
    }
    let limit = consts.c_interaction * rho;
    if op > limit {
        return Err(Error::InteractionTooStrong(format!("|A|_op = {op} exceeds c rho = {limit}")));
    }
    Ok(())
}

/// `L^4` bound on the density ratio at `w = w0`.
pub fn l4_ratio_bound(variant: L4Variant, stats: &MeasureStats, consts: &UniversalConstants) -> Result<f64> {
    let c = consts.c_moment;
    let m2 = finite(stats.m2, "m2")?;
    let d1 = finite(stats.d1_psi1, "d1_psi1")?;
    match variant {
        L4Variant::OneSided => {
            let k = finite(stats.kappa, "kappa")?.max(0.0);
            Ok(c * (m2 * (k + d1 * d1)).sqrt().max(1.0))
        }
        L4Variant::TwoSided => {
            let d2 = finite(stats.d2_delta, "d2_delta")?;
            Ok(c * (m2 * (d2 + d1 * d1)).max(1.0))
        }
        L4Variant::Interacting { rho, op, hs } => {
            interaction_check(rho, op, consts)?;
            let d2 = finite(stats.d2_delta, "d2_delta")?;
            Ok(c * (m2 * (d2 + d1 * d1)).max(1.0) * (c * hs * hs / (rho * rho)).exp())
        }
    }
}

pub(crate) const LARGE_N_NOTE: &str = "holds for n beyond a threshold the theory does not make explicit";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LsiReport {
    pub variant: LsiVariant,
    pub q: f64,
    pub bound: f64,
    pub preconditions_passed: bool,
    pub validity: &'static str,
}

/// Log-Sobolev lower bound on the zero-spin conditioned measure.
pub fn lsi_report(spec: &SpinSystemSpec, stats: &MeasureStats, rho: f64, variant: LsiVariant, consts: &UniversalConstants) -> Result<LsiReport> {
    if !(rho > 0.0) {
        return Err(Error::InvalidBound(format!("rho must be positive, got {rho}")));
    }
    let kappa = finite(stats.kappa, "kappa")?;
    if kappa > rho / 8.0 {
        return Err(Error::CurvatureTooNegative(format!("kappa = {kappa} exceeds rho/8 = {}", rho / 8.0)));
    }
    let m2 = finite(stats.m2, "m2")?;
    let d1 = finite(stats.d1_psi1, "d1_psi1")?;
    let q = match variant {
        LsiVariant::OneSided => (m2 * (kappa.max(0.0) + d1 * d1)).max(1.0),
        LsiVariant::TwoSided => (m2 * (finite(stats.d2_delta, "d2_delta")? + d1 * d1)).max(1.0),
        LsiVariant::Interacting => {
            let op = spec.op_norm();
            interaction_check(rho, op, consts)?;
            let hs = spec.hs_norm();
            (m2 * (finite(stats.d2_delta, "d2_delta")? + d1 * d1)).max(1.0) * (hs * hs / (rho * rho)).exp()
        }
    };
    Ok(LsiReport {
        variant,
        q,
        bound: consts.c_ls * rho / q.powf(consts.c_q_exp),
        preconditions_passed: true,
        validity: LARGE_N_NOTE,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SgReport {
    pub q: f64,
    /// `c rho_s / (1 + log Q)^2`.
    pub q_bound: f64,
    /// `c rho_s / log(2 + L^2/rho_s)^2` when the site potential is Lipschitz.
    pub lipschitz_bound: Option<f64>,
    /// `C rho_s`, valid for every log-concave site.
    pub upper: f64,
    pub validity: &'static str,
}

const LOG_CONCAVE_PROBES: usize = 401;

/// Spectral-gap bounds for the conditioned measure of a log-concave site.
pub fn sg_report(spec: &SpinSystemSpec, stats: &MeasureStats, rho_s: f64, consts: &UniversalConstants) -> Result<SgReport> {
    if !(rho_s > 0.0) {
        return Err(Error::InvalidBound(format!("rho_s must be positive, got {rho_s}")));
    }
    check_log_concave(&spec.site)?;
    let pot = spec.site.potential();
    let var = finite(stats.var, "var")?;
    let d1 = finite(stats.d1_psi1, "d1_psi1")?;
    let q = (var.sqrt() * d1).max(1.0);
    let q_bound = consts.c_sg * rho_s / (1.0 + q.ln()).powi(2);
    let lipschitz_bound = pot.lipschitz.map(|l| consts.c_sg * rho_s / (2.0 + l * l / rho_s).ln().powi(2));
    Ok(SgReport { q, q_bound, lipschitz_bound, upper: consts.big_c_sg * rho_s, validity: LARGE_N_NOTE })
}

/// Probes `V''` across the window unless convexity is declared.
pub(crate) fn check_log_concave(site: &Measure1D) -> Result<()> {
    let pot = site.potential();
    if pot.is_convex_declared() {
        return Ok(());
    }
    let (lo, hi) = site.window();
    let kinks = &pot.kinks;
    for k in 0..LOG_CONCAVE_PROBES {
        let x = lo + (hi - lo) * k as f64 / (LOG_CONCAVE_PROBES - 1) as f64;
        if kinks.iter().any(|&c| (c - x).abs() < 1e-6) {
            continue;
        }
        let v2 = second_derivative(pot, x);
        if v2 < -1e-8 * (1.0 + v2.abs()) {
            return Err(Error::NotLogConcave { x, value: v2 });
        }
    }
    Ok(())
}

fn second_derivative(p: &crate::measure1d::Potential1D, x: f64) -> f64 {
    if let Some(v) = p.d2v(x) {
        return v;
    }
    let h = 1e-4 * (1.0 + x.abs());
    (p.v(x + h) - 2.0 * p.v(x) + p.v(x - h)) / (h * h)
}

/// `(Berry-Esseen, local)` right-hand sides for `n` i.i.d. sites.
pub fn clt_bounds(stats: &MeasureStats, n: usize, consts: &UniversalConstants) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidBound("n must be positive".into()));
    }
    let m2 = finite(stats.m2, "m2")?;
    let m3 = finite(stats.m3, "m3")?;
    let lambda = finite(stats.density_sup, "density_sup")?;
    let c = consts.c_clt;
    let sn = (n as f64).sqrt();
    let shape = m3 / m2.powf(1.5);
    Ok((c * shape / sn, c / m2.sqrt() * shape.max(m3 * lambda.powi(3)) / sn))
}
