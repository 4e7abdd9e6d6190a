use conspin::chaos::{mc_tail, random_interaction, TailStatistic};
use conspin::measure1d::{bakry_emery_lsi, log_concave_facts, stats};
use conspin::spectral::{gap_1d, gap_autocorr, gap_hyperplane_n2, gap_rayleigh_linear, GapEstimate, GapMethod};
use conspin::spin::{choose_w0, lsi_report as lsi, mc_lp_ratio, run_chains, sg_report, KawasakiConfig, LsiVariant, Observable, SpinSystemSpec, W0Variant};
use conspin::tilt::{fixed_point_solve, TiltProblem};
use conspin::transference::{ls_transfer_constant, profile_from_lsi, sg_transfer_lp, transfer_integral};
use conspin::{Error, Execution, McOptions, Measure1D, Potential1D};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::context::{point_seed, CliError, CliResult, Context};

fn num(v: f64) -> String {
    v.to_string()
}

fn status<T>(r: &Result<T, Error>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => e.kind().into(),
    }
}

fn site(ctx: &Context) -> CliResult<Measure1D> {
    Ok(ctx.spec.site.measure()?)
}

/// The `[system]` table with `n` and `s` overridden, or a bare product
/// system when the table is absent.
fn system(ctx: &Context, site: &Measure1D, n: usize, s: f64) -> CliResult<SpinSystemSpec> {
    if ctx.spec.system.is_some() {
        Ok(ctx.spec.spin_system(site, Some(n), Some(s))?)
    } else {
        Ok(SpinSystemSpec::new(n, site.clone())?.with_s(s))
    }
}

fn site_rho(p: &Potential1D, given: Option<f64>) -> CliResult<f64> {
    match given.or_else(|| bakry_emery_lsi(p)) {
        Some(r) if r > 0.0 => Ok(r),
        Some(r) => Err(CliError::Validation(format!("rho must be positive, got {r}"))),
        None => Err(CliError::Validation(format!("site {} has no curvature bound; set rho in the params table", p.label))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapScanParams {
    pub n: Vec<usize>,
    pub s: Vec<f64>,
    pub methods: Vec<String>,
    pub sweeps: usize,
    pub chains: usize,
    pub proposal_scale: f64,
    /// Tune the proposal scale during burn-in; off keeps the dynamics fixed across points.
    pub tune: bool,
    pub max_lag: usize,
    pub grid: usize,
}

impl Default for GapScanParams {
    fn default() -> Self {
        GapScanParams {
            n: vec![2, 4, 8],
            s: vec![0.0, 1.0, 2.0, 4.0],
            methods: vec!["eig1d".into(), "rayleigh_linear".into(), "autocorr".into()],
            sweeps: 100_000,
            chains: 4,
            proposal_scale: 1.0,
            tune: false,
            max_lag: 20_000,
            grid: 2000,
        }
    }
}

fn parse_method(m: &str) -> CliResult<GapMethod> {
    [GapMethod::Eig1d, GapMethod::RayleighLinear, GapMethod::Autocorr]
        .into_iter()
        .find(|g| g.name() == m)
        .ok_or_else(|| CliError::Validation(format!("unknown gap method {m:?}")))
}

fn gap_row(seed: u64, n: usize, s: f64, method: GapMethod, r: Option<&Result<GapEstimate, Error>>) -> Vec<String> {
    let mut row = vec![seed.to_string(), n.to_string(), num(s), method.name().into()];
    match r {
        Some(Ok(g)) => {
            let flags: Vec<&str> = g.flags.iter().map(|f| f.name()).collect();
            row.extend([num(g.value), num(g.error), g.meta.to_string(), flags.join("|"), "ok".into()]);
        }
        Some(Err(e)) => row.extend([String::new(), String::new(), String::new(), String::new(), e.kind().into()]),
        None => row.extend([String::new(), String::new(), String::new(), String::new(), "not_applicable".into()]),
    }
    row
}

pub fn gap_scan(ctx: &mut Context) -> CliResult<()> {
    let p: GapScanParams = ctx.params()?;
    let methods: Vec<GapMethod> = p.methods.iter().map(|m| parse_method(m)).collect::<CliResult<_>>()?;
    if p.chains == 0 || p.sweeps == 0 {
        return Err(CliError::Validation("sweeps and chains must be positive".into()));
    }
    let site = site(ctx)?;
    let mut points = Vec::new();
    for &seed in &ctx.seeds {
        for &n in &p.n {
            for &s in &p.s {
                let spec = system(ctx, &site, n, s)?;
                points.push((seed, points.len() as u64, spec));
            }
        }
    }
    let needs_chains = methods.iter().any(|m| *m != GapMethod::Eig1d);
    let per_chain = p.sweeps.div_ceil(p.chains);
    let rows: Vec<Vec<Vec<String>>> = ctx.pool.install(|| {
        points
            .par_iter()
            .map(|(seed, idx, spec)| {
                let traces = needs_chains.then(|| {
                    let mut cfg = KawasakiConfig::new(per_chain, p.proposal_scale).with_observables(vec![Observable::Coord(0)]);
                    if !p.tune {
                        cfg = cfg.fixed_scale();
                    }
                    run_chains(spec, &cfg, point_seed(*seed, *idx), p.chains, Execution::Parallel)
                });
                methods
                    .iter()
                    .map(|&m| {
                        let r = match m {
                            GapMethod::Eig1d if spec.n == 2 && spec.a.is_none() && spec.b.is_none() => {
                                gap_hyperplane_n2(&spec.site, spec.s, p.grid)
                            }
                            // no exact reduction beyond two free spins
                            GapMethod::Eig1d => return gap_row(*seed, spec.n, spec.s, m, None),
                            GapMethod::RayleighLinear => match traces.as_ref().unwrap() {
                                Ok(t) => gap_rayleigh_linear(t, spec.n),
                                Err(e) => Err(e.clone()),
                            },
                            GapMethod::Autocorr => match traces.as_ref().unwrap() {
                                Ok(t) => gap_autocorr(t, Observable::Coord(0), p.max_lag),
                                Err(e) => Err(e.clone()),
                            },
                        };
                        gap_row(*seed, spec.n, spec.s, m, Some(&r))
                    })
                    .collect()
            })
            .collect()
    });
    let rows: Vec<Vec<String>> = rows.into_iter().flatten().collect();
    let failed = rows.iter().filter(|r| r.last().is_some_and(|s| s != "ok" && s != "not_applicable")).count();
    ctx.note("rows", rows.len());
    ctx.note("failed_points", failed);
    ctx.write_csv("gap_scan.csv", &["seed", "n", "s", "method", "gap", "error", "meta", "flags", "status"], &rows)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsiParams {
    pub rho: Option<f64>,
    pub variants: Vec<String>,
    pub delta: f64,
    pub n: Option<usize>,
    pub grid: usize,
}

impl Default for LsiParams {
    fn default() -> Self {
        LsiParams {
            rho: None,
            variants: vec!["one_sided".into(), "two_sided".into(), "interacting".into()],
            delta: 1.0,
            n: None,
            grid: 2000,
        }
    }
}

pub fn lsi_report(ctx: &mut Context) -> CliResult<()> {
    let p: LsiParams = ctx.params()?;
    let site = site(ctx)?;
    let n = p.n.or(ctx.spec.system.as_ref().map(|s| s.n)).unwrap_or(8);
    let s = ctx.spec.system.as_ref().map_or(0.0, |s| s.s);
    let spec = system(ctx, &site, n, s)?;
    let st = stats(&site, p.delta)?;
    let rho = site_rho(site.potential(), p.rho)?;
    let mut rows = Vec::new();
    for v in &p.variants {
        let variant = match v.as_str() {
            "one_sided" => LsiVariant::OneSided,
            "two_sided" => LsiVariant::TwoSided,
            "interacting" => LsiVariant::Interacting,
            other => return Err(CliError::Validation(format!("unknown LSI variant {other:?}"))),
        };
        let r = lsi(&spec, &st, rho, variant, &ctx.consts)?;
        rows.push(vec![v.clone(), num(rho), num(r.q), num(r.bound), r.preconditions_passed.to_string()]);
    }
    ctx.write_csv("lsi_report.csv", &["variant", "rho", "q", "bound", "preconditions_passed"], &rows)?;
    // spectral-gap side, meaningful for log-concave sites only
    let rho_s = gap_1d(&site, p.grid)?.value;
    let sg = sg_report(&spec, &st, rho_s, &ctx.consts);
    let row = match &sg {
        Ok(r) => vec![num(rho_s), num(r.q), num(r.q_bound), r.lipschitz_bound.map(num).unwrap_or_default(), num(r.upper), status(&sg)],
        Err(_) => vec![num(rho_s), String::new(), String::new(), String::new(), String::new(), status(&sg)],
    };
    ctx.note("stats", st);
    ctx.note("validity", lsi(&spec, &st, rho, LsiVariant::OneSided, &ctx.consts).map(|r| r.validity).unwrap_or(""));
    ctx.write_csv("sg_report.csv", &["rho_site", "q", "q_bound", "lipschitz_bound", "upper", "status"], &[row])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltParams {
    pub tol: f64,
    pub max_iter: usize,
    pub m2_bar: Option<f64>,
}

impl Default for TiltParams {
    fn default() -> Self {
        TiltParams { tol: 1e-12, max_iter: 1000, m2_bar: None }
    }
}

pub fn tilt_solve(ctx: &mut Context) -> CliResult<()> {
    let p: TiltParams = ctx.params()?;
    let site = site(ctx)?;
    let sys = ctx.spec.system_config()?;
    let spec = system(ctx, &site, sys.n, sys.s)?;
    let n = spec.n;
    let a = spec.a.clone().unwrap_or_else(|| DMatrix::zeros(n, n));
    let b = spec.b.clone().unwrap_or_else(|| vec![0.0; n]);
    let problem = match p.m2_bar {
        Some(m) => TiltProblem::with_m2_bar(site, a, b, spec.s, m)?,
        None => TiltProblem::new(site, a, b, spec.s)?,
    };
    let sol = fixed_point_solve(&problem, p.tol, p.max_iter)?;
    let u = problem.tilts(sol.u0, &sol.t);
    let lambda = 2.0 * problem.m2_bar * spec.op_norm();
    let rows: Vec<Vec<String>> = (0..n).map(|i| vec![i.to_string(), num(sol.t[i]), num(u[i])]).collect();
    ctx.write_csv("tilt.csv", &["i", "t", "u"], &rows)?;
    ctx.note("residual", sol.residual);
    ctx.write_json(
        "tilt.json",
        &json!({
            "u0": sol.u0,
            "t": sol.t,
            "u": u,
            "residual": sol.residual,
            "iterations": sol.iterations,
            "contraction_observed": sol.contraction_observed,
            "contraction_bound": lambda,
            "m2_bar": problem.m2_bar,
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    pub p: f64,
    pub rho: Option<f64>,
    /// Fixed `L`; estimated by Monte Carlo per seed when absent.
    pub l: Option<f64>,
    pub samples: usize,
    pub radii: Vec<f64>,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams { p: 4.0, rho: None, l: None, samples: 100_000, radii: (0..=40).map(|k| 0.25 * k as f64).collect() }
    }
}

pub fn transfer_calc(ctx: &mut Context) -> CliResult<()> {
    let p: TransferParams = ctx.params()?;
    if !(p.p > 1.0) {
        return Err(CliError::Validation(format!("p must exceed 1, got {}", p.p)));
    }
    let site = site(ctx)?;
    let sys = ctx.spec.system_config()?;
    let spec = system(ctx, &site, sys.n, sys.s)?;
    let rho = site_rho(site.potential(), p.rho)?;
    let kappa = stats(&site, 1.0)?.kappa.max(0.0);
    let k1 = profile_from_lsi(rho);
    let (mut profile, mut consts) = (Vec::new(), Vec::new());
    for &seed in &ctx.seeds {
        let l = match p.l {
            Some(l) => l,
            None => mc_lp_ratio(&spec, p.p, McOptions::new(p.samples, seed))?.value,
        };
        let pw = p.p;
        let k2 = transfer_integral(&k1, move |x: f64| x.powf(pw - 1.0), l.powf(pw));
        for &r in &p.radii {
            profile.push(vec![seed.to_string(), num(r), num(k1.eval(r)), num(k2.eval(r))]);
        }
        let lm = l.max(1.0);
        let ls = ls_transfer_constant(rho, kappa, lm, p.p, &ctx.consts);
        let sg = sg_transfer_lp(lm, p.p, &ctx.consts);
        consts.push(vec![
            seed.to_string(),
            num(l),
            ls.as_ref().map(|v| num(*v)).unwrap_or_default(),
            sg.as_ref().map(|v| num(*v)).unwrap_or_default(),
            if ls.is_ok() { status(&sg) } else { status(&ls) },
        ]);
    }
    ctx.note("rho", rho);
    ctx.note("kappa", kappa);
    ctx.write_csv("transfer_profile.csv", &["seed", "r", "k1", "k2"], &profile)?;
    ctx.write_csv("transfer_constants.csv", &["seed", "l", "ls_transfer_constant", "sg_transfer_lp", "status"], &consts)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosParams {
    pub n: usize,
    pub hs: f64,
    pub samples: usize,
    pub thresholds: Vec<f64>,
    pub rho: Option<f64>,
}

impl Default for ChaosParams {
    fn default() -> Self {
        ChaosParams { n: 32, hs: 1.0, samples: 1_000_000, thresholds: (1..=24).map(|k| 0.5 * k as f64).collect(), rho: None }
    }
}

pub fn chaos_tail(ctx: &mut Context) -> CliResult<()> {
    let p: ChaosParams = ctx.params()?;
    let site = site(ctx)?;
    let rho = site_rho(site.potential(), p.rho)?;
    // an interaction in [system] takes precedence over random matrices
    let fixed = match &ctx.spec.system {
        Some(sys) if sys.interaction.is_some() => system(ctx, &site, sys.n, 0.0)?.a,
        _ => None,
    };
    let jobs: Vec<(u64, TailStatistic)> = ctx
        .seeds
        .iter()
        .map(|&seed| {
            let a = fixed.clone().unwrap_or_else(|| random_interaction(p.n, p.hs, seed));
            (seed, TailStatistic::Chaos { a, rho })
        })
        .collect();
    let consts = ctx.consts;
    let results: Vec<_> = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|(seed, stat)| mc_tail(stat, &site, &p.thresholds, McOptions::new(p.samples, *seed), &consts))
            .collect()
    });
    let (mut rows, mut fits) = (Vec::new(), Vec::new());
    for ((seed, _), r) in jobs.iter().zip(results) {
        let r = r?;
        for i in 0..r.thresholds.len() {
            rows.push(vec![seed.to_string(), num(r.thresholds[i]), num(r.bound_values[i]), num(r.empirical[i]), num(r.stderr[i])]);
        }
        fits.push(vec![
            seed.to_string(),
            num(r.fitted_c),
            num(r.dominating_c),
            r.fitted_crossover.map(num).unwrap_or_default(),
            num(r.analytic_crossover),
            r.fit_window.len().to_string(),
        ]);
    }
    ctx.write_csv("chaos_tail.csv", &["seed", "t", "bound", "empirical", "stderr"], &rows)?;
    ctx.write_csv("chaos_fit.csv", &["seed", "fitted_c", "dominating_c", "fitted_crossover", "analytic_crossover", "fit_points"], &fits)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioParams {
    pub n: Vec<usize>,
    pub p: f64,
    pub samples: usize,
    pub w: Option<f64>,
}

impl Default for RatioParams {
    fn default() -> Self {
        RatioParams { n: vec![4, 16, 64, 256], p: 4.0, samples: 100_000, w: None }
    }
}

pub fn ratio_scan(ctx: &mut Context) -> CliResult<()> {
    let p: RatioParams = ctx.params()?;
    let site = site(ctx)?;
    let w = match p.w {
        Some(w) => w,
        None => choose_w0(&stats(&site, 1.0)?, W0Variant::TwoSided)?,
    };
    let s = ctx.spec.system.as_ref().map_or(0.0, |s| s.s);
    let mut points = Vec::new();
    for &seed in &ctx.seeds {
        for &n in &p.n {
            let spec = SpinSystemSpec::new(n, site.clone())?.with_s(s).with_w(w)?;
            points.push((seed, points.len() as u64, spec));
        }
    }
    let results: Vec<_> = ctx.pool.install(|| {
        points
            .par_iter()
            .map(|(seed, idx, spec)| mc_lp_ratio(spec, p.p, McOptions::new(p.samples, point_seed(*seed, *idx))))
            .collect()
    });
    let mut rows = Vec::new();
    for ((seed, _, spec), r) in points.iter().zip(results) {
        let mut row = vec![seed.to_string(), spec.n.to_string(), num(p.p), num(w)];
        match &r {
            Ok(e) => row.extend([num(e.value), num(e.stderr), num(e.ze.value)]),
            Err(e) if e.is_validation() => return Err(e.clone().into()),
            Err(_) => row.extend([String::new(), String::new(), String::new()]),
        }
        row.push(status(&r));
        rows.push(row);
    }
    ctx.note("w", w);
    ctx.write_csv("ratio_scan.csv", &["seed", "n", "p", "w", "value", "stderr", "ze", "status"], &rows)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactsParams {
    /// Also run the built-in log-concave corpus.
    pub corpus: bool,
    pub grid: usize,
}

impl Default for FactsParams {
    fn default() -> Self {
        FactsParams { corpus: false, grid: 2000 }
    }
}

pub fn facts_suite(ctx: &mut Context) -> CliResult<()> {
    let p: FactsParams = ctx.params()?;
    let mut sites = vec![site(ctx)?];
    if p.corpus {
        for pot in Potential1D::log_concave_corpus() {
            sites.push(Measure1D::auto(pot)?);
        }
    }
    let rows: Vec<Vec<String>> = ctx.pool.install(|| {
        sites
            .par_iter()
            .map(|m| {
                let label = m.potential().label.clone();
                let gap = gap_1d(m, p.grid);
                let f = log_concave_facts(m);
                let rh = |k: usize| f.reverse_holder.get(k).map(|r| num(r.2)).unwrap_or_default();
                let (g, ge, gv) = match &gap {
                    Ok(g) => (num(g.value), num(g.error), num(g.value * m.variance())),
                    Err(_) => (String::new(), String::new(), String::new()),
                };
                vec![label, g, ge, num(m.variance()), gv, num(f.center_ratio), num(f.sup2_var), rh(0), rh(1), status(&gap)]
            })
            .collect()
    });
    ctx.write_csv(
        "facts_suite.csv",
        &["site", "gap", "gap_error", "var", "gap_var", "center_ratio", "sup2_var", "rh_1_2", "rh_2_4", "status"],
        &rows,
    )
}
