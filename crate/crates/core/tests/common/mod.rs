#![allow(dead_code)]

use rand::Rng;
use srh_core::profiles::{Family, ProfileEval, ProfileParams};
use srh_core::StateZ;

pub const FAMILIES: [Family; 5] = [Family::Const2, Family::Reciprocal, Family::Tanh, Family::Coth, Family::Cot];

/// Pole-free windows of the profile meeting [-4, 4], trimmed away from the poles.
pub fn windows(p: &ProfileParams) -> Vec<(f64, f64)> {
    p.valid_intervals()
        .within(-4.0, 4.0)
        .into_iter()
        .map(|i| {
            let (lo, hi) = (i.lo.max(-4.0), i.hi.min(4.0));
            let pad = 0.02 * (hi - lo) + 0.05;
            (lo + pad, hi - pad)
        })
        .filter(|(a, b)| b > a)
        .collect()
}

/// A point of the windows chosen by u ∈ [0, 1).
pub fn tau_at(p: &ProfileParams, u: f64) -> f64 {
    let w = windows(p);
    let k = ((u * w.len() as f64) as usize).min(w.len() - 1);
    let v = u * w.len() as f64 - k as f64;
    w[k].0 + v * (w[k].1 - w[k].0)
}

/// Q ∈ (0.1, 10), Π ∈ (0.01, 10) from unit inputs.
pub fn state_from_unit(u: [f64; 4]) -> StateZ {
    let q = 0.1 * 100f64.powf(u[0]);
    let pi = 0.01 * 1000f64.powf(u[1]);
    let s = 6.0 * u[2] - 3.0;
    let g = 6.0 * u[3] - 3.0;
    StateZ::new(q, s, (pi + s * s) / q, g)
}

pub fn random_state(rng: &mut impl Rng) -> StateZ {
    state_from_unit(std::array::from_fn(|_| rng.random::<f64>()))
}

pub fn random_profile(fam: Family, rng: &mut impl Rng) -> ProfileParams {
    ProfileParams::new(fam, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Evaluation of a random profile of the family at a random admissible τ.
pub fn random_eval(fam: Family, rng: &mut impl Rng) -> ProfileEval {
    let p = random_profile(fam, rng);
    p.eval(tau_at(&p, rng.random())).expect("window point")
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Richardson order from errors at h and h/2.
pub fn order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
