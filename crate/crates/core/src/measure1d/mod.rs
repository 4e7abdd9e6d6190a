//! One-dimensional measures `exp(-V) dx`: normalization, tilts, Orlicz
//! norms, curvature bounds and density-ratio quadrature.

mod functionals;
mod measure;
mod potential;

pub use functionals::{
    bakry_emery_lsi, certify_weakly_gaussian, density_sup, holley_stroock, kappa, log_concave_facts,
    lp_density_ratio, psi1_norm, stats, tv_distance, w_decompose, weakly_gaussian_certificate, D2Route,
    LogConcaveFacts, MeasureStats, WDecomposition, WeaklyGaussianCertificate,
};
pub use measure::Measure1D;
pub(crate) use measure::log_integral;
pub use potential::{ConvexDecomposition, Family, Func, Potential1D, Smoothness};
