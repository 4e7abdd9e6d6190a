//! TOML spec files: site family, spin system, constants and per-command
//! parameters.
//!
//! ```toml
//! schema_version = 1
//! seeds = [1, 2]
//!
//! [site]
//! family = "two_sided_exp"
//!
//! [system]
//! n = 8
//! s = 0.5
//! w = "auto"
//! interaction = { kind = "nearest_neighbor", strength = 0.05 }
//!
//! [constants]
//! c_ls = 0.5
//!
//! [params.gap-scan]
//! sweeps = 100000
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constants::UniversalConstants;
use crate::error::{Error, Result};
use crate::measure1d::{stats, Measure1D, Potential1D};
use crate::spin::{choose_w0, mean_field, nearest_neighbor, SpinSystemSpec, W0Variant};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SiteConfig {
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
    },
    TwoSidedExp,
    Power {
        p: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    WeaklyGaussian {
        alpha: f64,
        amplitude: f64,
        width: f64,
    },
    Tabulated {
        x: Vec<f64>,
        v: Vec<f64>,
        dv: Option<Vec<f64>>,
        d2v: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SiteConfig {
    pub fn potential(&self) -> Result<Potential1D> {
        Ok(match self {
            SiteConfig::Gaussian { sigma } => {
                positive("sigma", *sigma)?;
                Potential1D::gaussian(*sigma)
            }
            SiteConfig::TwoSidedExp => Potential1D::two_sided_exp(),
            SiteConfig::Power { p } => {
                if !(*p >= 1.0) || !p.is_finite() {
                    return Err(Error::InvalidSpec(format!("power site needs p >= 1, got {p}")));
                }
                Potential1D::power(*p)
            }
            SiteConfig::Uniform { a, b } => {
                if !(b > a) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidSpec(format!("uniform site needs a < b, got [{a}, {b}]")));
                }
                Potential1D::uniform(*a, *b)
            }
            SiteConfig::WeaklyGaussian { alpha, amplitude, width } => {
                positive("alpha", *alpha)?;
                positive("width", *width)?;
                if !amplitude.is_finite() {
                    return Err(Error::InvalidSpec(format!("amplitude must be finite, got {amplitude}")));
                }
                Potential1D::weakly_gaussian(*alpha, *amplitude, *width)
            }
            SiteConfig::Tabulated { x, v, dv, d2v } => Potential1D::tabulated(x.clone(), v.clone(), dv.clone(), d2v.clone())?,
        })
    }

    pub fn measure(&self) -> Result<Measure1D> {
        Measure1D::auto(self.potential()?)
    }
}

/// Thickening width: a number, or `"auto"` for the two-sided `w0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WidthConfig {
    Value(f64),
    Keyword(String),
}

impl Default for WidthConfig {
    fn default() -> Self {
        WidthConfig::Keyword("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionConfig {
    Dense { matrix: Vec<Vec<f64>> },
    NearestNeighbor { strength: f64 },
    MeanField { strength: f64 },
}

impl InteractionConfig {
    pub fn matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            InteractionConfig::Dense { matrix } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    let got = matrix.iter().map(Vec::len).find(|&l| l != n).unwrap_or(matrix.len());
                    return Err(Error::DimensionMismatch { expected: n, got });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            InteractionConfig::NearestNeighbor { strength } => Ok(nearest_neighbor(n, *strength)),
            InteractionConfig::MeanField { strength } => Ok(mean_field(n, *strength)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: usize,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub w: WidthConfig,
    pub interaction: Option<InteractionConfig>,
    pub boundary: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub schema_version: u32,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub site: SiteConfig,
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub constants: UniversalConstants,
    /// Raw `[params.<command>]` tables.
    #[serde(default)]
    pub params: toml::Table,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SpecFile = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.message().to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidSpec(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        spec.constants.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parameters for `command`, defaulted when the table is absent.
    pub fn params<T: DeserializeOwned + Default>(&self, command: &str) -> Result<T> {
        match self.params.get(command) {
            None => Ok(T::default()),
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::InvalidSpec(format!("[params.{command}]: {}", e.message()))),
        }
    }

    pub fn system_config(&self) -> Result<&SystemConfig> {
        self.system.as_ref().ok_or_else(|| Error::InvalidSpec("missing [system] table".into()))
    }

    /// Builds the spin system from `[system]`, optionally overriding `n` and `s`.
    pub fn spin_system(&self, site: &Measure1D, n: Option<usize>, s: Option<f64>) -> Result<SpinSystemSpec> {
        let sys = self.system_config()?;
        let n = n.unwrap_or(sys.n);
        let mut spec = SpinSystemSpec::new(n, site.clone())?.with_s(s.unwrap_or(sys.s));
        let w = match &sys.w {
            WidthConfig::Value(w) => *w,
            WidthConfig::Keyword(k) if k == "auto" => choose_w0(&stats(site, 1.0)?, W0Variant::TwoSided)?,
            WidthConfig::Keyword(k) => return Err(Error::InvalidSpec(format!("w must be a number or \"auto\", got {k:?}"))),
        };
        spec = spec.with_w(w)?;
        if let Some(ic) = &sys.interaction {
            spec = spec.with_interaction(ic.matrix(n)?)?;
        }
        if let Some(b) = &sys.boundary {
            spec = spec.with_boundary(b.clone())?;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
schema_version = 1
seeds = [3]

[site]
family = "gaussian"
sigma = 2.0

[system]
n = 4
s = 0.25
w = 0.5
interaction = { kind = "dense", matrix = [[0, 0.1, 0, 0], [0.1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]] }

[constants]
C_ls = 3.0

[params.demo]
grid = 400
"#;

    #[derive(Debug, Default, Deserialize)]
    #[serde(default)]
    struct Demo {
        grid: usize,
        sweeps: usize,
    }

    #[test]
    fn parses_full_file() {
        let f = SpecFile::parse(BASIC).unwrap();
        assert_eq!(f.seeds, vec![3]);
        assert_eq!(f.site, SiteConfig::Gaussian { sigma: 2.0 });
        assert_eq!(f.constants.big_c_ls, 3.0);
        let d: Demo = f.params("demo").unwrap();
        assert_eq!((d.grid, d.sweeps), (400, 0));
        let m = f.site.measure().unwrap();
        assert!((m.variance() - 4.0).abs() < 1e-8);
        let spec = f.spin_system(&m, None, None).unwrap();
        assert_eq!((spec.n, spec.s, spec.w), (4, 0.25, 0.5));
        assert!((spec.op_norm() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_schema_and_unknown_keys() {
        let bad = BASIC.replace("schema_version = 1", "schema_version = 2");
        assert!(SpecFile::parse(&bad).unwrap_err().is_validation());
        let bad = BASIC.replace("sigma = 2.0", "sigma = 2.0\nmu = 1.0");
        assert!(SpecFile::parse(&bad).is_err());
        let bad = BASIC.replace("C_ls = 3.0", "C_ls = -3.0");
        assert!(SpecFile::parse(&bad).is_err());
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let text = BASIC.replace("[0.1, 0, 0, 0], [0, 0, 0, 0]", "[0.2, 0, 0, 0], [0, 0, 0, 0]");
        let f = SpecFile::parse(&text).unwrap();
        let m = f.site.measure().unwrap();
        let e = f.spin_system(&m, None, None).unwrap_err();
        assert!(e.is_validation() && e.to_string().contains("symmetric"), "{e}");
    }

    #[test]
    fn generators_and_auto_width() {
        let text = r#"
schema_version = 1
[site]
family = "two_sided_exp"
[system]
n = 6
interaction = { kind = "mean_field", strength = 0.3 }
"#;
        let f = SpecFile::parse(text).unwrap();
        let m = f.site.measure().unwrap();
        let spec = f.spin_system(&m, Some(8), Some(1.0)).unwrap();
        assert_eq!(spec.n, 8);
        assert!(spec.w > 0.0 && spec.w.is_finite());
        let bad = text.replace("n = 6", "n = 6\nw = \"wide\"");
        assert!(SpecFile::parse(&bad).unwrap().spin_system(&m, None, None).is_err());
    }

    #[test]
    fn site_families_validate() {
        assert!(SiteConfig::Power { p: 0.5 }.potential().is_err());
        assert!(SiteConfig::Uniform { a: 1.0, b: 0.0 }.potential().is_err());
        assert!(SiteConfig::Gaussian { sigma: 0.0 }.potential().is_err());
        assert!(SiteConfig::Power { p: 3.0 }.measure().is_ok());
    }
}
