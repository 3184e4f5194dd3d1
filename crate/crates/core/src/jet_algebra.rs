//! Pointwise linear algebra of the first-order system: residuals, the affine
//! space A of admissible first jets, the directional map Φ and its inverse.

use crate::error::{Result, SrhError};
use crate::profiles::ProfileEval;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct StateZ {
    pub Q: f64,
    pub S: f64,
    pub B: f64,
    pub G: f64,
}

impl StateZ {
    pub fn new(q: f64, s: f64, b: f64, g: f64) -> Self {
        StateZ { Q: q, S: s, B: b, G: g }
    }

    pub fn pi(&self) -> f64 {
        self.Q * self.B - self.S * self.S
    }

    pub fn is_admissible(&self) -> bool {
        self.Q > 0.0 && self.pi() > 0.0
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.Q, self.S, self.B, self.G]
    }
}

/// τ-block then λ-block.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Jet1 {
    pub Q_tau: f64,
    pub S_tau: f64,
    pub B_tau: f64,
    pub G_tau: f64,
    pub Q_lam: f64,
    pub S_lam: f64,
    pub B_lam: f64,
    pub G_lam: f64,
}

impl Jet1 {
    pub fn from_array(a: [f64; 8]) -> Self {
        Jet1 {
            Q_tau: a[0],
            S_tau: a[1],
            B_tau: a[2],
            G_tau: a[3],
            Q_lam: a[4],
            S_lam: a[5],
            B_lam: a[6],
            G_lam: a[7],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [self.Q_tau, self.S_tau, self.B_tau, self.G_tau, self.Q_lam, self.S_lam, self.B_lam, self.G_lam]
    }

    pub fn max_abs_diff(&self, o: &Jet1) -> f64 {
        self.to_array().iter().zip(o.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, o: Jet1) -> Jet1 {
        let (a, b) = (self.to_array(), o.to_array());
        Jet1::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, o: Jet1) -> Jet1 {
        let (a, b) = (self.to_array(), o.to_array());
        Jet1::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl Mul<Jet1> for f64 {
    type Output = Jet1;
    fn mul(self, j: Jet1) -> Jet1 {
        let a = j.to_array();
        Jet1::from_array(std::array::from_fn(|i| self * a[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub tau_dot: f64,
    pub lam_dot: f64,
}

impl Direction {
    pub fn new(tau_dot: f64, lam_dot: f64) -> Self {
        Direction { tau_dot, lam_dot }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RateZ {
    pub Q_dot: f64,
    pub S_dot: f64,
    pub B_dot: f64,
    pub G_dot: f64,
}

impl RateZ {
    pub fn new(q: f64, s: f64, b: f64, g: f64) -> Self {
        RateZ { Q_dot: q, S_dot: s, B_dot: b, G_dot: g }
    }
}

/// Relative tolerance scale 1 + max(|Q|,|S|,|B|,|G|,|α|,|F|).
pub fn scale(z: &StateZ, prof: &ProfileEval) -> f64 {
    1.0 + z.Q.abs().max(z.S.abs()).max(z.B.abs()).max(z.G.abs()).max(prof.alpha.abs()).max(prof.f.abs())
}

pub fn residual_system(z: &StateZ, j: &Jet1, p: &ProfileEval) -> [f64; 6] {
    let StateZ { Q, S, B, G } = *z;
    [
        j.Q_tau + j.S_lam - Q * p.alpha - p.f,
        j.S_tau + j.B_lam - S * p.alpha - G,
        Q * j.B_tau + S * j.B_lam - S * j.S_tau - B * j.S_lam,
        S * j.Q_tau + B * j.Q_lam - Q * j.S_tau - S * j.S_lam,
        j.G_tau + S * p.alpha1,
        j.G_lam - Q * p.alpha1 - p.f1,
    ]
}

pub fn residual_consequences(z: &StateZ, j: &Jet1, p: &ProfileEval) -> [f64; 2] {
    let StateZ { Q, S, B, G } = *z;
    let pi = z.pi();
    [
        Q * j.B_tau + B * j.Q_tau - 2.0 * S * j.S_tau - pi * p.alpha - B * p.f + S * G,
        Q * j.B_lam + B * j.Q_lam - 2.0 * S * j.S_lam - Q * G + S * p.f,
    ]
}

/// The unique jet in A with the prescribed (Q_τ, Q_λ).
pub fn solve_jet(z: &StateZ, p: &ProfileEval, q_tau: f64, q_lam: f64) -> Result<Jet1> {
    let StateZ { Q, S, B, G } = *z;
    if !(Q > 0.0) {
        return Err(SrhError::Admissibility(format!("Q = {Q} <= 0")));
    }
    let s_lam = Q * p.alpha + p.f - q_tau;
    let s_tau = (S * q_tau + B * q_lam - S * s_lam) / Q;
    let b_lam = S * p.alpha + G - s_tau;
    let b_tau = (S * s_tau + B * s_lam - S * b_lam) / Q;
    Ok(Jet1 {
        Q_tau: q_tau,
        S_tau: s_tau,
        B_tau: b_tau,
        G_tau: -S * p.alpha1,
        Q_lam: q_lam,
        S_lam: s_lam,
        B_lam: b_lam,
        G_lam: Q * p.alpha1 + p.f1,
    })
}

/// (particular, e1, e2) with A = particular + span{e1, e2}.
pub fn affine_basis(z: &StateZ, p: &ProfileEval) -> Result<(Jet1, Jet1, Jet1)> {
    let part = solve_jet(z, p, 0.0, 0.0)?;
    let e1 = solve_jet(z, p, 1.0, 0.0)? - part;
    let e2 = solve_jet(z, p, 0.0, 1.0)? - part;
    Ok((part, e1, e2))
}

pub fn phi_map(j: &Jet1, d: &Direction) -> RateZ {
    let (t, l) = (d.tau_dot, d.lam_dot);
    RateZ {
        Q_dot: j.Q_tau * t + j.Q_lam * l,
        S_dot: j.S_tau * t + j.S_lam * l,
        B_dot: j.B_tau * t + j.B_lam * l,
        G_dot: j.G_tau * t + j.G_lam * l,
    }
}

pub fn check_l(z: &StateZ, p: &ProfileEval, d: &Direction, r: &RateZ) -> [f64; 2] {
    let StateZ { Q, S, B, G } = *z;
    let (t, l) = (d.tau_dot, d.lam_dot);
    let pi = z.pi();
    [
        r.G_dot - (-S * p.alpha1 * t + (Q * p.alpha1 + p.f1) * l),
        Q * r.B_dot + B * r.Q_dot - 2.0 * S * r.S_dot
            - ((pi * p.alpha + B * p.f - S * G) * t + (Q * G - S * p.f) * l),
    ]
}

/// Diagnostics from [`invert_phi_info`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvertInfo {
    pub det: f64,
    /// Bτ̇² − 2Sτ̇λ̇ + Qλ̇²; det = Ψ/Q.
    pub psi_form: f64,
    pub check: [f64; 2],
}

pub fn invert_phi(z: &StateZ, p: &ProfileEval, d: &Direction, r: &RateZ, tol: f64) -> Result<Jet1> {
    invert_phi_info(z, p, d, r, tol).map(|x| x.0)
}

pub fn invert_phi_info(
    z: &StateZ,
    p: &ProfileEval,
    d: &Direction,
    r: &RateZ,
    tol: f64,
) -> Result<(Jet1, InvertInfo)> {
    let StateZ { Q, S, B, .. } = *z;
    let (t, l) = (d.tau_dot, d.lam_dot);
    if t == 0.0 && l == 0.0 {
        return Err(SrhError::Direction);
    }
    if !z.is_admissible() {
        return Err(SrhError::Admissibility(format!("Q = {Q}, Pi = {}", z.pi())));
    }
    let check = check_l(z, p, d, r);
    let sc = scale(z, p);
    let cm = check[0].abs().max(check[1].abs());
    if cm > tol * sc {
        return Err(SrhError::Membership { residual: cm, tol });
    }
    // Q̇ = Q_τ τ̇ + Q_λ λ̇ and Ṡ = S_τ τ̇ + S_λ λ̇ with S_λ, S_τ affine in (Q_τ, Q_λ).
    let k = Q * p.alpha + p.f;
    let (a11, a12, b1) = (t, l, r.Q_dot);
    let (a21, a22) = (2.0 * S * t / Q - l, B * t / Q);
    let b2 = r.S_dot - (l * k - t * S * k / Q);
    let det = a11 * a22 - a12 * a21;
    let psi_form = B * t * t - 2.0 * S * t * l + Q * l * l;
    let dscale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
    if !(det.abs() > 1e-14 * dscale) {
        return Err(SrhError::Singular { det });
    }
    let q_tau = (b1 * a22 - a12 * b2) / det;
    let q_lam = (a11 * b2 - a21 * b1) / det;
    let jet = solve_jet(z, p, q_tau, q_lam)?;
    let back = phi_map(&jet, d);
    let miss = (back.B_dot - r.B_dot).abs().max((back.G_dot - r.G_dot).abs());
    if miss > tol * sc * (1.0 + t.abs() + l.abs()) {
        return Err(SrhError::Membership { residual: miss, tol });
    }
    Ok((jet, InvertInfo { det, psi_form, check }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (StateZ, ProfileEval) {
        (StateZ::new(1.0, 0.0, 1.0, 0.0), ProfileEval::constant(2.0, 0.0))
    }

    const JET: [f64; 8] = [0.0, 1.0, 2.0, 0.0, 1.0, 2.0, -1.0, 0.0];

    #[test]
    fn hand_jet_residuals() {
        let (z, p) = fixture();
        assert_eq!(residual_system(&z, &Jet1::from_array(JET), &p), [0.0; 6]);
        assert_eq!(residual_consequences(&z, &Jet1::from_array(JET), &p), [0.0; 2]);
    }

    #[test]
    fn trivial_residuals() {
        let z = StateZ::new(1.3, -0.2, 0.8, 0.0);
        let zero = ProfileEval::constant(0.0, 0.0);
        assert_eq!(residual_system(&z, &Jet1::default(), &zero), [0.0; 6]);
        let (z, p) = fixture();
        assert_eq!(residual_system(&z, &Jet1::default(), &p), [-2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(residual_consequences(&z, &Jet1::default(), &zero), [0.0, 0.0]);
        let one = ProfileEval::constant(1.0, 0.0);
        assert_eq!(residual_consequences(&z, &Jet1::default(), &one), [-1.0, 0.0]);
    }

    #[test]
    fn solve_jet_examples() {
        let (z, p) = fixture();
        assert_eq!(solve_jet(&z, &p, 0.0, 1.0).unwrap().to_array(), JET);
        let zero = ProfileEval::constant(0.0, 0.0);
        assert_eq!(solve_jet(&z, &zero, 0.0, 0.0).unwrap(), Jet1::default());
        let j = solve_jet(&StateZ::new(2.0, 0.0, 1.0, 0.0), &ProfileEval::constant(0.0, 1.0), 1.0, 0.0).unwrap();
        assert_eq!((j.S_lam, j.S_tau, j.B_lam, j.B_tau, j.G_tau, j.G_lam), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(matches!(solve_jet(&StateZ::new(0.0, 0.0, 1.0, 0.0), &p, 0.0, 0.0), Err(SrhError::Admissibility(_))));
    }

    #[test]
    fn basis_structure() {
        let (z, p) = fixture();
        let (part, e1, e2) = affine_basis(&z, &p).unwrap();
        assert_eq!((e1.Q_tau, e1.Q_lam, e2.Q_tau, e2.Q_lam), (1.0, 0.0, 0.0, 1.0));
        assert_eq!((part + e2).to_array(), JET);
        let j = part + 0.3 * e1 + (-1.7) * e2;
        assert!(residual_system(&z, &j, &p).iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn phi_examples() {
        let j = Jet1::from_array(JET);
        assert_eq!(phi_map(&j, &Direction::new(1.0, 0.0)), RateZ::new(0.0, 1.0, 2.0, 0.0));
        assert_eq!(phi_map(&j, &Direction::new(0.0, 0.0)), RateZ::default());
        assert_eq!(phi_map(&Jet1::default(), &Direction::new(0.4, 2.0)), RateZ::default());
    }

    #[test]
    fn check_l_examples() {
        let (z, p) = fixture();
        let d = Direction::new(1.0, 0.0);
        assert_eq!(check_l(&z, &p, &d, &RateZ::new(0.0, 1.0, 2.0, 0.0)), [0.0, 0.0]);
        assert_eq!(check_l(&z, &p, &Direction::new(0.0, 0.0), &RateZ::default()), [0.0, 0.0]);
        let mut q = ProfileEval::constant(0.0, 0.0);
        q.f1 = 1.0;
        assert_eq!(check_l(&z, &q, &Direction::new(0.0, 1.0), &RateZ::default()), [-1.0, 0.0]);
    }

    #[test]
    fn invert_examples() {
        let (z, p) = fixture();
        let d = Direction::new(1.0, 0.0);
        let j = invert_phi(&z, &p, &d, &RateZ::new(0.0, 1.0, 2.0, 0.0), 1e-12).unwrap();
        assert_eq!(j.to_array(), JET);
        let bad = RateZ::new(0.0, 1.0, 2.0, 1.0);
        assert!(matches!(invert_phi(&z, &p, &d, &bad, 1e-9), Err(SrhError::Membership { .. })));
        assert!(matches!(
            invert_phi(&z, &p, &Direction::new(0.0, 0.0), &RateZ::default(), 1e-9),
            Err(SrhError::Direction)
        ));
    }

    #[test]
    fn invert_reports_psi_form() {
        let z = StateZ::new(1.5, 0.3, 0.9, 0.2);
        let p = ProfileEval { alpha: 0.7, alpha1: -0.3, alpha2: 0.21, f: 0.4, f1: 0.1, f2: 0.03, psi: 0.0, eps: 0.0 };
        let d = Direction::new(0.6, -1.1);
        let j = solve_jet(&z, &p, 0.25, -0.5).unwrap();
        let (back, info) = invert_phi_info(&z, &p, &d, &phi_map(&j, &d), 1e-10).unwrap();
        assert!(back.max_abs_diff(&j) < 1e-13);
        assert!((info.det - info.psi_form / z.Q).abs() < 1e-14);
    }
}
