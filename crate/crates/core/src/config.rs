use crate::error::{Result, SrhError};
use crate::expr::Expr;
use crate::profiles::ProfileParams;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub tau0: f64,
    pub tau1: f64,
    pub lam0: f64,
    pub lam1: f64,
    /// τ points including τ0; default from dt = dt_factor·h.
    #[serde(default)]
    pub n_tau: Option<usize>,
    pub n_lam: usize,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
}

fn default_dt_factor() -> f64 {
    0.4
}

/// Either a number or the string "auto" (G centred so that Σ Q·G = 0 on the initial slice).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum G0 {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default = "default_q")]
    pub q_fn: String,
    #[serde(default = "default_s")]
    pub s_fn: String,
    pub b0: f64,
    #[serde(default = "default_g0")]
    pub g0: G0,
}

fn default_q() -> String {
    "1 + lambda/2".into()
}
fn default_s() -> String {
    "0.3*sin(lambda)".into()
}
fn default_g0() -> G0 {
    G0::Value(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default)]
    pub series_order: Option<usize>,
    /// Expansion point on the initial slice; default mid-grid.
    #[serde(default)]
    pub series_lambda: Option<f64>,
    #[serde(default = "default_resample")]
    pub resample_n: usize,
    #[serde(default)]
    pub convergence_levels: Option<Vec<usize>>,
    #[serde(default)]
    pub resample_levels: Option<Vec<usize>>,
    #[serde(default = "default_frac")]
    pub rect_frac: f64,
    #[serde(default = "default_closedness")]
    pub closedness_tol: f64,
    #[serde(default = "default_soft")]
    pub rh_tol: f64,
    #[serde(default = "default_soft")]
    pub theta_kappa_tol: f64,
    #[serde(default = "default_true")]
    pub verify: bool,
}

fn default_resample() -> usize {
    65
}
fn default_frac() -> f64 {
    0.9
}
fn default_closedness() -> f64 {
    1e-6
}
fn default_soft() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}

impl Default for Checks {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub profile: ProfileParams,
    pub grid: GridSpec,
    pub seeds: Seeds,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| SrhError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(SrhError::Config(format!("config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        let g = &self.grid;
        if g.n_lam < 33 {
            return Err(SrhError::Config(format!("n_lam = {} < 33", g.n_lam)));
        }
        if !(g.lam1 > g.lam0) || !(g.tau1 >= g.tau0) {
            return Err(SrhError::Config("grid bounds must satisfy lam1 > lam0 and tau1 >= tau0".into()));
        }
        if !(g.dt_factor > 0.0) {
            return Err(SrhError::Config("dt_factor must be positive".into()));
        }
        if matches!(g.n_tau, Some(n) if n < 1) {
            return Err(SrhError::Config("n_tau must be >= 1".into()));
        }
        self.profile.check_window(g.tau0, g.tau1)?;
        Expr::parse(&self.seeds.q_fn)?;
        Expr::parse(&self.seeds.s_fn)?;
        if let Some(n) = self.checks.series_order {
            if n > 12 {
                return Err(SrhError::Order(n));
            }
        }
        if !(self.checks.rect_frac > 0.0 && self.checks.rect_frac <= 1.0) {
            return Err(SrhError::Config("rect_frac must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn q_expr(&self) -> Result<Expr> {
        Expr::parse(&self.seeds.q_fn)
    }

    pub fn s_expr(&self) -> Result<Expr> {
        Expr::parse(&self.seeds.s_fn)
    }

    pub fn with_n_lam(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.grid.n_lam = n;
        c.grid.n_tau = None;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"profile":{"family":"const2","theta":0,"kappa":0},
        "grid":{"tau0":0,"tau1":0.5,"lam0":0,"lam1":2,"n_lam":65},
        "seeds":{"b0":0.01}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.seeds.q_fn, "1 + lambda/2");
        assert_eq!(c.seeds.g0, G0::Value(0.0));
        assert_eq!(c.checks.resample_n, 65);
        assert_eq!(c.grid.dt_factor, 0.4);
    }

    #[test]
    fn auto_g0() {
        let s = BASE.replace(r#""b0":0.01"#, r#""b0":0.01,"g0":"auto""#);
        assert_eq!(RunConfig::from_json(&s).unwrap().seeds.g0, G0::Auto(AutoTag::Auto));
    }

    #[test]
    fn rejects_pole_crossing_and_bad_grids() {
        let s = BASE.replace("const2", "cot").replace(r#""tau1":0.5"#, r#""tau1":4.0"#).replace(r#""tau0":0"#, r#""tau0":3.0"#);
        assert!(matches!(RunConfig::from_json(&s), Err(SrhError::Domain(_))));
        let s = BASE.replace(r#""n_lam":65"#, r#""n_lam":9"#);
        assert!(matches!(RunConfig::from_json(&s), Err(SrhError::Config(_))));
        let s = BASE.replace(r#""b0":0.01"#, r#""b0":0.01,"q_fn":"1+""#);
        assert!(RunConfig::from_json(&s).is_err());
    }
}
