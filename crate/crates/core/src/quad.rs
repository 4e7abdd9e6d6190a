//! Composite Gauss–Legendre quadrature with adaptive panel bisection.

use std::sync::OnceLock;

/// Points per panel.
pub const ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the three-term Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Nodes and weights of the 16-point rule mapped onto [a, b].
pub fn panel_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule().iter().map(move |&(x, w)| (c + h * x, h * w))
}

pub fn panel_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    panel_nodes(a, b).map(|(x, w)| w * f(x)).sum()
}

/// Adaptive subdivision of `[breaks[0], breaks[last]]`, never crossing a
/// break point. Returns accepted panels, each integrating `f` to within
/// `rel_tol * |total|` against its parent estimate.
pub fn adaptive_panels<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], rel_tol: f64) -> Vec<(f64, f64)> {
    const INIT: usize = 8;
    const MAX_PANELS: usize = 200_000;
    let mut stack: Vec<(f64, f64, f64)> = Vec::new();
    let mut crude = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if !(b > a) {
            continue;
        }
        let h = (b - a) / INIT as f64;
        for k in 0..INIT {
            let lo = a + h * k as f64;
            let hi = if k + 1 == INIT { b } else { lo + h };
            let est = panel_integral(f, lo, hi);
            crude += est.abs();
            stack.push((lo, hi, est));
        }
    }
    let span = breaks.last().copied().unwrap_or(0.0) - breaks.first().copied().unwrap_or(0.0);
    let tol = rel_tol * crude.max(f64::MIN_POSITIVE);
    let mut done = Vec::new();
    while let Some((a, b, whole)) = stack.pop() {
        let m = 0.5 * (a + b);
        let l = panel_integral(f, a, m);
        let r = panel_integral(f, m, b);
        let small = (b - a) <= 1e-13 * span.max(1.0);
        if (whole - (l + r)).abs() <= tol || small || done.len() + stack.len() > MAX_PANELS {
            done.push((a, m));
            done.push((m, b));
        } else {
            stack.push((m, b, r));
            stack.push((a, m, l));
        }
    }
    done.sort_by(|x, y| x.0.total_cmp(&y.0));
    done
}

/// Adaptive integral of `f` over the union of segments in `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], rel_tol: f64) -> f64 {
    adaptive_panels(f, breaks, rel_tol)
        .iter()
        .map(|&(a, b)| panel_integral(f, a, b))
        .sum()
}
