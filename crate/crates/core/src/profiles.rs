//! Coefficient families α(τ) with 2α′ + α² = 4ε, the companion F(τ) and ψ(τ),
//! affine modifications τ̂ = p + τ/c, and the two continuation families.

use crate::error::{Result, SrhError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Evaluations closer than this to a pole are refused.
pub const POLE_GUARD: f64 = 1e-8;

const SIGMA_TERMS: usize = 12;
const SIGMA_SERIES_RADIUS: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Const2,
    Reciprocal,
    Tanh,
    Coth,
    Cot,
    /// α = 2/β_ε with β_ε(τ) = τ·Σ(ετ²).
    EpsContinuation(f64),
    /// α = 2(e^τ − t·e^−τ)/(e^τ + t·e^−τ).
    TContinuation(f64),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Const2 => "const2",
            Family::Reciprocal => "reciprocal",
            Family::Tanh => "tanh",
            Family::Coth => "coth",
            Family::Cot => "cot",
            Family::EpsContinuation(_) => "eps",
            Family::TContinuation(_) => "t",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match self {
            Family::EpsContinuation(e) => Some(*e),
            Family::TContinuation(t) => Some(*t),
            _ => None,
        }
    }

    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        let need = |p: Option<f64>| {
            p.ok_or_else(|| SrhError::Config(format!("family '{name}' needs \"param\"")))
        };
        Ok(match name {
            "const2" => Family::Const2,
            "reciprocal" => Family::Reciprocal,
            "tanh" => Family::Tanh,
            "coth" => Family::Coth,
            "cot" => Family::Cot,
            "eps" => Family::EpsContinuation(need(param)?),
            "t" => Family::TContinuation(need(param)?),
            other => return Err(SrhError::Config(format!("unknown family '{other}'"))),
        })
    }

    /// The five canonical families.
    pub fn canonical() -> [Family; 5] {
        [Family::Const2, Family::Reciprocal, Family::Tanh, Family::Coth, Family::Cot]
    }

    /// ε of the unmodified family.
    pub fn base_eps(&self) -> f64 {
        match self {
            Family::Const2 | Family::Tanh | Family::Coth => 1.0,
            Family::Reciprocal => 0.0,
            Family::Cot => -1.0,
            Family::EpsContinuation(e) => *e,
            Family::TContinuation(_) => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub c: f64,
    pub p: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Affine { c: 1.0, p: 0.0 }
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
    #[serde(default)]
    theta: f64,
    #[serde(default)]
    kappa: f64,
    #[serde(default)]
    affine: Affine,
}

/// θ and κ are the constants of the (possibly modified) profile being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileJson", into = "ProfileJson")]
pub struct ProfileParams {
    pub family: Family,
    pub theta: f64,
    pub kappa: f64,
    pub affine_c: f64,
    pub affine_p: f64,
}

impl TryFrom<ProfileJson> for ProfileParams {
    type Error = SrhError;
    fn try_from(j: ProfileJson) -> Result<Self> {
        let p = ProfileParams {
            family: Family::from_name(&j.family, j.param)?,
            theta: j.theta,
            kappa: j.kappa,
            affine_c: j.affine.c,
            affine_p: j.affine.p,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<ProfileParams> for ProfileJson {
    fn from(p: ProfileParams) -> Self {
        ProfileJson {
            family: p.family.name().to_string(),
            param: p.family.param(),
            theta: p.theta,
            kappa: p.kappa,
            affine: Affine { c: p.affine_c, p: p.affine_p },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEval {
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    /// Infinite where α = 0 (ε ≠ 0).
    pub psi: f64,
    pub eps: f64,
}

impl ProfileEval {
    /// σ = −(Qα′ + F′)/2.
    pub fn sigma(&self, q: f64) -> f64 {
        -0.5 * (q * self.alpha1 + self.f1)
    }

    /// A bare evaluation with the given α, F and zero derivatives; used for fixtures.
    pub fn constant(alpha: f64, f: f64) -> Self {
        ProfileEval { alpha, alpha1: 0.0, alpha2: 0.0, f, f1: 0.0, f2: 0.0, psi: 0.0, eps: alpha * alpha / 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ValidIntervals {
    List(Vec<Interval>),
    /// base shifted by k·period for every integer k.
    Periodic { base: Interval, period: f64 },
}

impl ValidIntervals {
    pub fn containing(&self, t: f64) -> Option<Interval> {
        match self {
            ValidIntervals::List(v) => v.iter().copied().find(|i| i.contains(t)),
            ValidIntervals::Periodic { base, period } => {
                let k = ((t - base.lo) / period).floor();
                let i = Interval { lo: base.lo + k * period, hi: base.hi + k * period };
                i.contains(t).then_some(i)
            }
        }
    }

    /// The intervals meeting [lo, hi].
    pub fn within(&self, lo: f64, hi: f64) -> Vec<Interval> {
        match self {
            ValidIntervals::List(v) => v.iter().copied().filter(|i| i.hi > lo && i.lo < hi).collect(),
            ValidIntervals::Periodic { base, period } => {
                let k0 = ((lo - base.hi) / period).floor() as i64;
                let k1 = ((hi - base.lo) / period).ceil() as i64;
                (k0..=k1)
                    .map(|k| Interval { lo: base.lo + k as f64 * period, hi: base.hi + k as f64 * period })
                    .filter(|i| i.hi > lo && i.lo < hi)
                    .collect()
            }
        }
    }
}

fn tanh_coeffs() -> &'static [f64; SIGMA_TERMS] {
    // tanh z = Σ t_k z^(2k+1), from T′ = 1 − T².
    static C: OnceLock<[f64; SIGMA_TERMS]> = OnceLock::new();
    C.get_or_init(|| {
        let mut t = [0.0; SIGMA_TERMS];
        for k in 0..SIGMA_TERMS {
            let mut s = if k == 0 { 1.0 } else { 0.0 };
            if k >= 1 {
                for i in 0..k {
                    s -= t[i] * t[k - 1 - i];
                }
            }
            t[k] = s / (2 * k + 1) as f64;
        }
        t
    })
}

/// Σ(y) = tanh(√y)/√y, continued to y < 0 as tan(√−y)/√−y.
pub fn sigma_fn(y: f64) -> f64 {
    if y.abs() < SIGMA_SERIES_RADIUS {
        tanh_coeffs().iter().rev().fold(0.0, |acc, c| acc * y + c)
    } else if y > 0.0 {
        let r = y.sqrt();
        r.tanh() / r
    } else {
        let r = (-y).sqrt();
        r.tan() / r
    }
}

/// (Σ(y) − 1)/y.
fn sigma1_fn(y: f64) -> f64 {
    if y.abs() < SIGMA_SERIES_RADIUS {
        tanh_coeffs()[1..].iter().rev().fold(0.0, |acc, c| acc * y + c)
    } else {
        (sigma_fn(y) - 1.0) / y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContinuationKind {
    EpsFamily,
    TFamily,
}

pub fn continuation_alpha(kind: ContinuationKind, param: f64, tau: f64) -> Result<f64> {
    let fam = match kind {
        ContinuationKind::EpsFamily => Family::EpsContinuation(param),
        ContinuationKind::TFamily => Family::TContinuation(param),
    };
    Ok(ProfileParams::new(fam, 0.0, 0.0).eval(tau)?.alpha)
}

struct Base {
    alpha: f64,
    alpha1: f64,
    alpha2: f64,
}

impl ProfileParams {
    pub fn new(family: Family, theta: f64, kappa: f64) -> Self {
        ProfileParams { family, theta, kappa, affine_c: 1.0, affine_p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.affine_c == 0.0 || !self.affine_c.is_finite() || !self.affine_p.is_finite() {
            return Err(SrhError::Config(format!("affine c = {} must be finite and nonzero", self.affine_c)));
        }
        if !self.theta.is_finite() || !self.kappa.is_finite() {
            return Err(SrhError::Config("theta and kappa must be finite".into()));
        }
        if let Some(q) = self.family.param() {
            if !q.is_finite() {
                return Err(SrhError::Config("family param must be finite".into()));
            }
        }
        Ok(())
    }

    /// ε̂ = c²ε.
    pub fn eps(&self) -> f64 {
        self.affine_c * self.affine_c * self.family.base_eps()
    }

    fn base_poles(&self) -> ValidIntervals {
        let all = ValidIntervals::List(vec![Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }]);
        let split = |x: f64| {
            ValidIntervals::List(vec![
                Interval { lo: f64::NEG_INFINITY, hi: x },
                Interval { lo: x, hi: f64::INFINITY },
            ])
        };
        match self.family {
            Family::Const2 | Family::Tanh => all,
            Family::Reciprocal | Family::Coth => split(0.0),
            Family::Cot => ValidIntervals::Periodic { base: Interval { lo: 0.0, hi: PI }, period: PI },
            Family::EpsContinuation(e) if e < 0.0 => {
                let per = PI / (-e).sqrt();
                ValidIntervals::Periodic { base: Interval { lo: 0.0, hi: per }, period: per }
            }
            Family::EpsContinuation(_) => split(0.0),
            Family::TContinuation(t) if t < 0.0 => split(0.5 * (-t).ln()),
            Family::TContinuation(_) => all,
        }
    }

    fn to_hat(&self, t: f64) -> f64 {
        self.affine_p + t / self.affine_c
    }

    /// Maximal pole-free open intervals in the modified variable τ̂.
    pub fn valid_intervals(&self) -> ValidIntervals {
        let map = |i: Interval| {
            let (a, b) = (self.to_hat(i.lo), self.to_hat(i.hi));
            Interval { lo: a.min(b), hi: a.max(b) }
        };
        match self.base_poles() {
            ValidIntervals::List(v) => ValidIntervals::List(v.into_iter().map(map).collect()),
            ValidIntervals::Periodic { base, period } => {
                ValidIntervals::Periodic { base: map(base), period: period / self.affine_c.abs() }
            }
        }
    }

    /// Distance from τ̂ to the nearest pole (∞ if none).
    pub fn pole_distance(&self, tau: f64) -> f64 {
        match self.valid_intervals().containing(tau) {
            Some(i) => (tau - i.lo).min(i.hi - tau),
            None => 0.0,
        }
    }

    /// Fails unless [lo, hi] sits inside one valid interval, clear of the guard band.
    pub fn check_window(&self, lo: f64, hi: f64) -> Result<()> {
        self.validate()?;
        let (a, b) = (lo.min(hi), lo.max(hi));
        match self.valid_intervals().containing(a) {
            Some(i) if a - i.lo > POLE_GUARD && i.hi - b > POLE_GUARD => Ok(()),
            _ => Err(SrhError::Domain(format!(
                "tau window [{a}, {b}] is not inside a pole-free interval of {}",
                self.family.name()
            ))),
        }
    }

    fn base(&self, t: f64) -> Base {
        match self.family {
            Family::Const2 => Base { alpha: 2.0, alpha1: 0.0, alpha2: 0.0 },
            Family::Reciprocal => Base { alpha: 2.0 / t, alpha1: -2.0 / (t * t), alpha2: 4.0 / (t * t * t) },
            Family::Tanh => {
                let (th, ch) = (t.tanh(), t.cosh());
                let sech2 = 1.0 / (ch * ch);
                Base { alpha: 2.0 * th, alpha1: 2.0 * sech2, alpha2: -4.0 * th * sech2 }
            }
            Family::Coth => {
                let (sh, ch) = (t.sinh(), t.cosh());
                Base { alpha: 2.0 * ch / sh, alpha1: -2.0 / (sh * sh), alpha2: 4.0 * ch / (sh * sh * sh) }
            }
            Family::Cot => {
                let (s, c) = t.sin_cos();
                Base { alpha: 2.0 * c / s, alpha1: -2.0 / (s * s), alpha2: 4.0 * c / (s * s * s) }
            }
            Family::EpsContinuation(e) => {
                let y = e * t * t;
                let alpha = if y.abs() < SIGMA_SERIES_RADIUS {
                    2.0 / (t * sigma_fn(y))
                } else if e > 0.0 {
                    let r = e.sqrt();
                    2.0 * r / (r * t).tanh()
                } else {
                    let r = (-e).sqrt();
                    2.0 * r / (r * t).tan()
                };
                // β′ = 1 − εβ², so α′ = −(α² − 4ε)/2.
                let w = alpha * alpha - 4.0 * e;
                Base { alpha, alpha1: -0.5 * w, alpha2: 0.5 * alpha * w }
            }
            Family::TContinuation(tp) => {
                let w = tp * (-2.0 * t).exp();
                let d = 1.0 + w;
                Base {
                    alpha: 2.0 * (1.0 - w) / d,
                    alpha1: 8.0 * w / (d * d),
                    alpha2: -16.0 * w * (1.0 - w) / (d * d * d),
                }
            }
        }
    }

    /// Closed-form evaluation at τ̂.
    pub fn eval(&self, tau: f64) -> Result<ProfileEval> {
        self.validate()?;
        if !tau.is_finite() {
            return Err(SrhError::Domain(format!("tau = {tau}")));
        }
        let dist = self.pole_distance(tau);
        if dist <= POLE_GUARD {
            return Err(SrhError::Domain(format!(
                "tau = {tau} is within {POLE_GUARD:e} of a pole of {}",
                self.family.name()
            )));
        }
        let (c, p) = (self.affine_c, self.affine_p);
        let t = c * (tau - p);
        let b = self.base(t);
        let alpha = c * b.alpha;
        let alpha1 = c * c * b.alpha1;
        let alpha2 = c * c * c * b.alpha2;
        let eps_decl = self.eps();
        let eps = match self.family {
            Family::EpsContinuation(_) | Family::TContinuation(_) => 0.25 * (2.0 * alpha1 + alpha * alpha),
            _ => eps_decl,
        };

        // F = θA + κα.
        let (a0, a1, a2, psi);
        if eps_decl == 0.0 {
            a0 = -2.0 / (3.0 * alpha * alpha);
            a1 = 4.0 * alpha1 / (3.0 * alpha.powi(3));
            a2 = 4.0 * alpha2 / (3.0 * alpha.powi(3)) - 4.0 * alpha1 * alpha1 / alpha.powi(4);
            psi = 2.0 / (3.0 * alpha.powi(3));
        } else {
            let e0 = self.family.base_eps();
            let y = e0 * t * t;
            let (a, ps) = match self.family {
                Family::EpsContinuation(_) if y.abs() < SIGMA_SERIES_RADIUS => {
                    // removable singularity at ε → 0
                    let s1 = sigma1_fn(y);
                    let beta = t * sigma_fn(y);
                    let a_base = t.powi(3) * s1 / (2.0 * beta);
                    (
                        a_base / (c * c) - p * b.alpha / (4.0 * c * e0),
                        p / (4.0 * c * c * e0) - t.powi(3) * s1 / (4.0 * c.powi(3)),
                    )
                }
                _ => ((2.0 - tau * alpha) / (4.0 * eps_decl), (tau - 2.0 / alpha) / (4.0 * eps_decl)),
            };
            a0 = a;
            psi = ps;
            a1 = -0.5 * tau - 0.5 * alpha * a0;
            a2 = -0.5 - 0.5 * alpha1 * a0 + 0.25 * alpha * tau + 0.25 * alpha * alpha * a0;
        }
        let (th, ka) = (self.theta, self.kappa);
        Ok(ProfileEval {
            alpha,
            alpha1,
            alpha2,
            f: th * a0 + ka * alpha,
            f1: th * a1 + ka * alpha1,
            f2: th * a2 + ka * alpha2,
            psi,
            eps,
        })
    }

    /// Composes the modification τ̃ = p + τ̂/c and recomputes θ, κ so that F̃ = F/c.
    pub fn affine_modify(&self, c: f64, p: f64) -> Result<ProfileParams> {
        if c == 0.0 || !c.is_finite() || !p.is_finite() {
            return Err(SrhError::Config(format!("affine c = {c} must be finite and nonzero")));
        }
        let eps = self.eps();
        let kappa = if eps == 0.0 {
            self.kappa / (c * c)
        } else {
            self.kappa / (c * c) + self.theta * p / (4.0 * c * eps)
        };
        let out = ProfileParams {
            family: self.family,
            theta: c * self.theta,
            kappa,
            affine_c: c * self.affine_c,
            affine_p: p + self.affine_p / c,
        };
        out.validate()?;
        Ok(out)
    }

    /// (2α′ + α²)/4 sampled at `taus`; fails if it is not constant to 1e−10.
    pub fn measured_eps(&self, taus: &[f64]) -> Result<f64> {
        let mut v = Vec::with_capacity(taus.len());
        for &t in taus {
            let e = self.eval(t)?;
            v.push((0.25 * (2.0 * e.alpha1 + e.alpha * e.alpha), 1.0 + 0.25 * e.alpha * e.alpha));
        }
        let mean = v.iter().map(|x| x.0).sum::<f64>() / v.len().max(1) as f64;
        for (e, scale) in &v {
            if (e - mean).abs() > 1e-10 * scale {
                return Err(SrhError::Config(format!("eps not constant along tau: {e} vs {mean}")));
            }
        }
        Ok(mean)
    }
}

pub fn eval(params: &ProfileParams, tau: f64) -> Result<ProfileEval> {
    params.eval(tau)
}

pub fn affine_modify(params: &ProfileParams, c: f64, p: f64) -> Result<ProfileParams> {
    params.affine_modify(c, p)
}

pub fn valid_intervals(params: &ProfileParams) -> ValidIntervals {
    params.valid_intervals()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(f: Family) -> ProfileParams {
        ProfileParams::new(f, 0.3, -0.7)
    }

    #[test]
    fn const2_soliton_value() {
        let e = ProfileParams::new(Family::Const2, 2.0, 0.0).eval(0.0).unwrap();
        assert_eq!((e.alpha, e.alpha1, e.eps, e.f), (2.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn reciprocal_psi() {
        let e = ProfileParams::new(Family::Reciprocal, 1.3, 0.2).eval(2.0).unwrap();
        assert_eq!(e.alpha, 1.0);
        assert_eq!(e.eps, 0.0);
        assert_relative_eq!(e.psi, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn coth_eps_is_one() {
        let e = p(Family::Coth).eval(1.0).unwrap();
        let s = 1f64.sinh();
        assert_relative_eq!(2.0 * e.alpha1 + e.alpha * e.alpha, 4.0, epsilon = 1e-14);
        assert_relative_eq!(e.alpha1, -2.0 / (s * s), epsilon = 1e-15);
    }

    #[test]
    fn poles_are_refused() {
        assert!(matches!(p(Family::Cot).eval(PI), Err(SrhError::Domain(_))));
        assert!(matches!(p(Family::Cot).eval(2.0 * PI + 1e-9), Err(SrhError::Domain(_))));
        assert!(matches!(p(Family::Coth).eval(0.0), Err(SrhError::Domain(_))));
        assert!(matches!(p(Family::Reciprocal).eval(-5e-9), Err(SrhError::Domain(_))));
        assert!(p(Family::Cot).eval(PI + 1e-6).is_ok());
    }

    #[test]
    fn zero_c_is_config_error() {
        let mut q = p(Family::Tanh);
        q.affine_c = 0.0;
        assert!(matches!(q.eval(0.5), Err(SrhError::Config(_))));
        assert!(matches!(p(Family::Tanh).affine_modify(0.0, 1.0), Err(SrhError::Config(_))));
    }

    #[test]
    fn tanh_translation_is_t_family() {
        let q = 0.35;
        let m = p(Family::Tanh).affine_modify(1.0, q).unwrap();
        let t = (2.0 * q).exp();
        for tau in [-1.0, 0.1, 0.9, 2.5] {
            let a = m.eval(tau).unwrap().alpha;
            assert_relative_eq!(a, 2.0 * (tau - q).tanh(), epsilon = 1e-14);
            let b = continuation_alpha(ContinuationKind::TFamily, t, tau).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn const2_scaled() {
        let m = p(Family::Const2).affine_modify(2.0, 0.0).unwrap();
        let e = m.eval(0.3).unwrap();
        assert_eq!((e.alpha, e.eps), (4.0, 4.0));
    }

    #[test]
    fn identity_modification() {
        for f in Family::canonical() {
            assert_eq!(p(f).affine_modify(1.0, 0.0).unwrap(), p(f));
        }
    }

    #[test]
    fn modification_rescales_f() {
        let base = p(Family::Coth);
        let (c, pp) = (-1.7, 0.4);
        let m = base.affine_modify(c, pp).unwrap();
        for tau in [0.3, 1.1, 2.0] {
            let e = base.eval(tau).unwrap();
            let h = m.eval(pp + tau / c).unwrap();
            assert_relative_eq!(h.alpha, c * e.alpha, max_relative = 1e-14);
            assert_relative_eq!(h.f, e.f / c, max_relative = 1e-12);
            assert_relative_eq!(h.f1, e.f1, max_relative = 1e-12);
        }
    }

    #[test]
    fn continuation_examples() {
        assert_relative_eq!(continuation_alpha(ContinuationKind::EpsFamily, 0.0, 3.0).unwrap(), 2.0 / 3.0);
        assert_eq!(continuation_alpha(ContinuationKind::TFamily, 0.0, 5.0).unwrap(), 2.0);
        assert_relative_eq!(
            continuation_alpha(ContinuationKind::TFamily, 1.0, 1.0).unwrap(),
            2.0 * 1f64.tanh(),
            epsilon = 1e-15
        );
        assert!(continuation_alpha(ContinuationKind::TFamily, -1.0, 0.0).is_err());
    }

    #[test]
    fn eps_family_matches_named_families() {
        for tau in [0.2, 0.7, 1.4] {
            let a = |f: Family| ProfileParams::new(f, 0.4, 0.1).eval(tau).unwrap();
            let (e1, c1) = (a(Family::EpsContinuation(1.0)), a(Family::Coth));
            let (e2, c2) = (a(Family::EpsContinuation(-1.0)), a(Family::Cot));
            let (e0, r0) = (a(Family::EpsContinuation(0.0)), a(Family::Reciprocal));
            for (x, y) in [(e1, c1), (e2, c2), (e0, r0)] {
                assert_relative_eq!(x.alpha, y.alpha, max_relative = 1e-13);
                assert_relative_eq!(x.f, y.f, max_relative = 1e-12);
                assert_relative_eq!(x.psi, y.psi, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn eps_family_is_continuous_at_zero() {
        let tau = 0.8;
        let at = |e: f64| ProfileParams::new(Family::EpsContinuation(e), 0.5, 0.2).eval(tau).unwrap();
        let z = at(0.0);
        for e in [1e-9, -1e-9] {
            let x = at(e);
            assert!((x.f - z.f).abs() < 1e-8);
            assert!((x.psi - z.psi).abs() < 1e-8);
        }
    }

    #[test]
    fn intervals() {
        assert_eq!(
            p(Family::Const2).valid_intervals(),
            ValidIntervals::List(vec![Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }])
        );
        let r = p(Family::Reciprocal).valid_intervals().within(-10.0, 10.0);
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].hi, r[1].lo), (0.0, 0.0));
        let c = p(Family::Cot).valid_intervals();
        let i = c.containing(7.0).unwrap();
        assert_relative_eq!(i.lo, 2.0 * PI);
        assert_relative_eq!(i.hi, 3.0 * PI);
        assert_eq!(c.within(0.5, 7.0).len(), 3);
    }

    #[test]
    fn measured_eps_for_continuations() {
        let q = ProfileParams::new(Family::TContinuation(-0.3), 0.0, 0.0);
        assert_relative_eq!(q.measured_eps(&[0.5, 1.0, 2.0]).unwrap(), 1.0, epsilon = 1e-12);
        let q = ProfileParams::new(Family::EpsContinuation(-0.6), 0.0, 0.0);
        assert_relative_eq!(q.measured_eps(&[0.2, 0.9, 1.8]).unwrap(), -0.6, epsilon = 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let j = r#"{"family":"eps","param":-0.5,"theta":1.0,"kappa":2.0,"affine":{"c":2.0,"p":0.1}}"#;
        let q: ProfileParams = serde_json::from_str(j).unwrap();
        assert_eq!(q.family, Family::EpsContinuation(-0.5));
        let back: ProfileParams = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<ProfileParams>(r#"{"family":"t"}"#).is_err());
        assert!(serde_json::from_str::<ProfileParams>(r#"{"family":"cot","affine":{"c":0,"p":0}}"#).is_err());
    }
}
