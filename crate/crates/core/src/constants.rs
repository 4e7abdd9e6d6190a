use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The unspecified universal constants entering the bound formulas.
/// Every field defaults to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniversalConstants {
    pub c_ls: f64,
    #[serde(rename = "C_ls")]
    pub big_c_ls: f64,
    pub c_sg: f64,
    /// Upper constant in `rho_SG(E) <= C rho_s`.
    #[serde(rename = "C_sg")]
    pub big_c_sg: f64,
    pub c_gm: f64,
    pub c_bern: f64,
    pub c2_chaos: f64,
    #[serde(rename = "C2_chaos")]
    pub big_c2_chaos: f64,
    /// Front constant of the moment and L^4 ratio bounds.
    pub c_moment: f64,
    /// Exponent `C` in `rho / Q^C`.
    pub c_q_exp: f64,
    /// Smallness constant `c` in `||A||_op <= c rho`.
    pub c_interaction: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    /// Berry–Esseen and local limit constant.
    pub c_clt: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        UniversalConstants {
            c_ls: 1.0,
            big_c_ls: 1.0,
            c_sg: 1.0,
            big_c_sg: 1.0,
            c_gm: 1.0,
            c_bern: 1.0,
            c2_chaos: 1.0,
            big_c2_chaos: 1.0,
            c_moment: 1.0,
            c_q_exp: 1.0,
            c_interaction: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            c_clt: 1.0,
        }
    }
}

impl UniversalConstants {
    pub const NAMES: [&'static str; 16] = [
        "c_ls",
        "C_ls",
        "c_sg",
        "C_sg",
        "c_gm",
        "c_bern",
        "c2_chaos",
        "C2_chaos",
        "c_moment",
        "c_q_exp",
        "c_interaction",
        "c3",
        "c4",
        "c5",
        "c6",
        "c_clt",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "c_ls" => &mut self.c_ls,
            "C_ls" => &mut self.big_c_ls,
            "c_sg" => &mut self.c_sg,
            "C_sg" => &mut self.big_c_sg,
            "c_gm" => &mut self.c_gm,
            "c_bern" => &mut self.c_bern,
            "c2_chaos" => &mut self.c2_chaos,
            "C2_chaos" => &mut self.big_c2_chaos,
            "c_moment" => &mut self.c_moment,
            "c_q_exp" => &mut self.c_q_exp,
            "c_interaction" => &mut self.c_interaction,
            "c3" => &mut self.c3,
            "c4" => &mut self.c4,
            "c5" => &mut self.c5,
            "c6" => &mut self.c6,
            "c_clt" => &mut self.c_clt,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut c = *self;
        c.slot(name).map(|v| *v)
    }

    /// Overrides one constant by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidSpec(format!("constant {name} must be positive and finite, got {value}")));
        }
        match self.slot(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::InvalidSpec(format!("unknown constant {name}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in Self::NAMES {
            let v = self.get(name).unwrap_or(f64::NAN);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("constant {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `(name, value)` pairs in declaration order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        Self::NAMES.iter().map(|&n| (n, self.get(n).unwrap_or(f64::NAN))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_and_get_roundtrip() {
        let mut c = UniversalConstants::default();
        c.set("C_ls", 2.5).unwrap();
        assert_eq!(c.big_c_ls, 2.5);
        assert_eq!(c.get("C_ls"), Some(2.5));
        assert!(c.set("nope", 1.0).is_err());
        assert!(c.set("c_ls", -1.0).is_err());
    }

    #[test]
    fn serde_keeps_capitalized_names() {
        let c: UniversalConstants = toml::from_str("C2_chaos = 4.0\nc2_chaos = 0.01").unwrap();
        assert_eq!(c.big_c2_chaos, 4.0);
        assert_eq!(c.c2_chaos, 0.01);
        assert_eq!(c.c_ls, 1.0);
    }
}
