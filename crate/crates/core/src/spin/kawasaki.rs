use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::geometry::neumaier_sum;
use super::{Hamiltonian, SpinSystemSpec};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, stream_rng, Execution};

/// Quantities recorded once per sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Coordinate `x_i` (zero-based).
    Coord(usize),
    SumSquares,
    Energy,
    /// Indicator of `x_i > 0` for every `i`.
    PositiveOrthant,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Coord(i) => format!("x{}", i + 1),
            Observable::SumSquares => "sum_sq".into(),
            Observable::Energy => "energy".into(),
            Observable::PositiveOrthant => "positive".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KawasakiConfig {
    /// Recorded sweeps, after burn-in. One sweep is `n` proposed pair moves.
    pub sweeps: usize,
    /// Burn-in sweeps, discarded; during burn-in the proposal scale is tuned
    /// when `tune` is set. Defaults to a quarter of `sweeps`, i.e. 20% of all.
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub tune: bool,
    pub observables: Vec<Observable>,
    /// Starting point on `E_s`; `(s, ..., s)` by default.
    pub init: Option<Vec<f64>>,
}

impl KawasakiConfig {
    pub fn new(sweeps: usize, proposal_scale: f64) -> Self {
        KawasakiConfig {
            sweeps,
            burn_in: sweeps / 4,
            proposal_scale,
            tune: true,
            observables: vec![Observable::Coord(0), Observable::SumSquares, Observable::Energy],
            init: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn fixed_scale(mut self) -> Self {
        self.tune = false;
        self
    }

    pub fn with_observables(mut self, obs: Vec<Observable>) -> Self {
        self.observables = obs;
        self
    }

    pub fn with_init(mut self, x: Vec<f64>) -> Self {
        self.init = Some(x);
        self
    }
}

/// Per-sweep observable series of a stationary chain.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub n: usize,
    pub s: f64,
    pub observables: Vec<Observable>,
    /// `values[k][t]`: observable `k` after sweep `t`.
    pub values: Vec<Vec<f64>>,
    pub acceptance: f64,
    pub proposal_scale: f64,
    pub burn_in: usize,
    /// Largest `|mean(x) - s|` seen at the end of any sweep.
    pub max_drift: f64,
    pub final_state: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, obs: Observable) -> Option<&[f64]> {
        self.observables.iter().position(|o| *o == obs).map(|k| self.values[k].as_slice())
    }
}

struct Chain<'a> {
    h: &'a Hamiltonian,
    x: Vec<f64>,
    /// `A x`, maintained when there is an interaction.
    ax: Vec<f64>,
    v: Vec<f64>,
    target_sum: f64,
}

impl<'a> Chain<'a> {
    fn new(h: &'a Hamiltonian, x: Vec<f64>, target_sum: f64) -> Self {
        let ax = match &h.a {
            Some(a) => (0..x.len()).map(|i| (0..x.len()).map(|j| a[(i, j)] * x[j]).sum()).collect(),
            None => Vec::new(),
        };
        let v = x.iter().map(|&t| h.potential.v(t)).collect();
        Chain { h, x, ax, v, target_sum }
    }

    /// One pair move; returns whether it was accepted.
    fn step(&mut self, rng: &mut ChaCha8Rng, scale: f64) -> bool {
        let n = self.x.len();
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let eta = rng.random_range(-scale..=scale);
        let (xi, xj) = (self.x[i] + eta, self.x[j] - eta);
        let (vi, vj) = (self.h.potential.v(xi), self.h.potential.v(xj));
        let mut dh = (vi - self.v[i]) + (vj - self.v[j]);
        if let Some(b) = &self.h.b {
            dh += eta * (b[i] - b[j]);
        }
        if let Some(a) = &self.h.a {
            dh -= 2.0 * eta * (self.ax[i] - self.ax[j]) - 2.0 * eta * eta * a[(i, j)];
        }
        if !dh.is_finite() {
            return false;
        }
        if dh > 0.0 && rng.random::<f64>().ln() >= -dh {
            return false;
        }
        self.x[i] = xi;
        self.x[j] = xj;
        self.v[i] = vi;
        self.v[j] = vj;
        if let Some(a) = &self.h.a {
            for k in 0..n {
                self.ax[k] += eta * (a[(k, i)] - a[(k, j)]);
            }
        }
        true
    }

    /// Puts the rounding drift of the coordinate sum back on one site.
    fn recenter(&mut self, site: usize) {
        let drift = neumaier_sum(&self.x) - self.target_sum;
        if drift != 0.0 {
            self.x[site] -= drift;
            self.v[site] = self.h.potential.v(self.x[site]);
            if let Some(a) = &self.h.a {
                for k in 0..self.x.len() {
                    self.ax[k] -= drift * a[(k, site)];
                }
            }
        }
    }

    fn observe(&self, obs: Observable) -> f64 {
        match obs {
            Observable::Coord(i) => self.x[i],
            Observable::SumSquares => self.x.iter().map(|t| t * t).sum(),
            Observable::Energy => {
                let mut e: f64 = self.v.iter().sum();
                if let Some(b) = &self.h.b {
                    e += b.iter().zip(&self.x).map(|(b, x)| b * x).sum::<f64>();
                }
                if self.h.a.is_some() {
                    e -= self.x.iter().zip(&self.ax).map(|(x, ax)| x * ax).sum::<f64>();
                }
                e
            }
            Observable::PositiveOrthant => f64::from(u8::from(self.x.iter().all(|&t| t > 0.0))),
        }
    }
}

const TUNE_EVERY: usize = 50;

fn run(spec: &SpinSystemSpec, cfg: &KawasakiConfig, mut rng: ChaCha8Rng) -> Result<Trace> {
    spec.validate()?;
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidSpec("pair moves need n >= 2".into()));
    }
    if !(cfg.proposal_scale > 0.0) || !cfg.proposal_scale.is_finite() {
        return Err(Error::InvalidBound(format!("proposal scale must be positive, got {}", cfg.proposal_scale)));
    }
    for o in &cfg.observables {
        if let Observable::Coord(i) = o {
            if *i >= n {
                return Err(Error::DimensionMismatch { expected: n, got: *i + 1 });
            }
        }
    }
    let x0 = match &cfg.init {
        Some(x) => {
            if x.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: x.len() });
            }
            let mean = neumaier_sum(x) / n as f64;
            if (mean - spec.s).abs() > 1e-12 * (1.0 + spec.s.abs()) {
                return Err(Error::InvalidSpec(format!("initial point has mean {mean}, not on the plane s = {}", spec.s)));
            }
            x.clone()
        }
        None => vec![spec.s; n],
    };
    let h = spec.hamiltonian();
    let mut chain = Chain::new(&h, x0, spec.s * n as f64);
    if !chain.v.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidSpec("initial point lies outside the site support".into()));
    }
    let mut scale = cfg.proposal_scale;
    let mut window_acc = 0usize;
    for sweep in 0..cfg.burn_in {
        for _ in 0..n {
            window_acc += usize::from(chain.step(&mut rng, scale));
        }
        chain.recenter(sweep % n);
        if cfg.tune && (sweep + 1) % TUNE_EVERY == 0 {
            let rate = window_acc as f64 / (TUNE_EVERY * n) as f64;
            if rate < 0.3 {
                scale *= 0.8;
            } else if rate > 0.5 {
                scale *= 1.25;
            }
            window_acc = 0;
        }
    }
    let mut values = vec![Vec::with_capacity(cfg.sweeps); cfg.observables.len()];
    let mut accepted = 0usize;
    let mut max_drift: f64 = 0.0;
    for sweep in 0..cfg.sweeps {
        for _ in 0..n {
            accepted += usize::from(chain.step(&mut rng, scale));
        }
        chain.recenter(sweep % n);
        max_drift = max_drift.max((neumaier_sum(&chain.x) / n as f64 - spec.s).abs());
        for (k, o) in cfg.observables.iter().enumerate() {
            values[k].push(chain.observe(*o));
        }
    }
    Ok(Trace {
        n,
        s: spec.s,
        observables: cfg.observables.clone(),
        values,
        acceptance: accepted as f64 / (cfg.sweeps.max(1) * n) as f64,
        proposal_scale: scale,
        burn_in: cfg.burn_in,
        max_drift,
        final_state: chain.x,
    })
}

/// Conservative pair-exchange Metropolis chain on `E_s` targeting the
/// conditioned measure with Hamiltonian `H_{A,b}`.
pub fn kawasaki_sampler(spec: &SpinSystemSpec, cfg: &KawasakiConfig, seed: u64) -> Result<Trace> {
    run(spec, cfg, stream_rng(seed, 0))
}

/// Independent chains on streams `0..chains` of `seed`.
pub fn run_chains(spec: &SpinSystemSpec, cfg: &KawasakiConfig, seed: u64, chains: usize, exec: Execution) -> Result<Vec<Trace>> {
    map_ordered(exec, (0..chains as u64).collect(), |k| run(spec, cfg, stream_rng(seed, k))).into_iter().collect()
}
