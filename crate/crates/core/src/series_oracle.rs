//! Bivariate Taylor expansion of (Q,S,B,G) about (τ*, λ*), degree by degree.
//!
//! λ-coefficients along τ = τ* come from the constraints G_λ = Qα′+F′ and
//! Π_λ = QG − SF; τ-coefficients from the evolution equations.

use crate::config::RunConfig;
use crate::error::{Result, SrhError};
use crate::evolution::GridField;
use crate::jet_algebra::{residual_consequences, residual_system, solve_jet, Jet1, StateZ};
use crate::profiles::{ProfileEval, ProfileParams};
use crate::taylor::Taylor1;
use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 12;

/// Coefficients c[i][j] of (τ−τ*)^i (λ−λ*)^j, stored densely; entries with i+j > N are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tri(pub Vec<Vec<f64>>);

impl Tri {
    fn zeros(n: usize) -> Self {
        Tri(vec![vec![0.0; n + 1]; n + 1])
    }

    fn n(&self) -> usize {
        self.0.len() - 1
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn eval(&self, dt: f64, dl: f64) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in (0..=n).rev() {
            let mut row = 0.0;
            for j in (0..=n - i).rev() {
                row = row * dl + self.0[i][j];
            }
            acc = acc * dt + row;
        }
        acc
    }

    /// (∂τ, ∂λ) at an offset.
    pub fn grad(&self, dt: f64, dl: f64) -> (f64, f64) {
        (self.d_tau().eval(dt, dl), self.d_lam().eval(dt, dl))
    }

    pub fn d_tau(&self) -> Tri {
        let n = self.n();
        let mut o = Tri::zeros(n);
        for i in 0..n {
            for j in 0..=n - i - 1 {
                o.0[i][j] = (i + 1) as f64 * self.0[i + 1][j];
            }
        }
        o
    }

    pub fn d_lam(&self) -> Tri {
        let n = self.n();
        let mut o = Tri::zeros(n);
        for i in 0..n {
            for j in 0..=n - i - 1 {
                o.0[i][j] = (j + 1) as f64 * self.0[i][j + 1];
            }
        }
        o
    }

    pub fn mul(&self, o: &Tri) -> Tri {
        let n = self.n();
        let mut r = Tri::zeros(n);
        for i in 0..=n {
            for j in 0..=n - i {
                let mut s = 0.0;
                for a in 0..=i {
                    for b in 0..=j {
                        s += self.0[a][b] * o.0[i - a][j - b];
                    }
                }
                r.0[i][j] = s;
            }
        }
        r
    }

    pub fn add(&self, o: &Tri) -> Tri {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Tri) -> Tri {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Tri {
        Tri(self.0.iter().map(|r| r.iter().map(|v| k * v).collect()).collect())
    }

    fn zip(&self, o: &Tri, f: impl Fn(f64, f64) -> f64) -> Tri {
        Tri(self.0.iter().zip(&o.0).map(|(r, s)| r.iter().zip(s).map(|(a, b)| f(*a, *b)).collect()).collect())
    }

    /// A series in τ only.
    fn from_tau(c: &[f64], n: usize) -> Tri {
        let mut t = Tri::zeros(n);
        for i in 0..=n {
            t.0[i][0] = c[i];
        }
        t
    }

    /// max |c[i][j]| over i+j < d.
    pub fn max_below(&self, d: usize) -> f64 {
        let mut m = 0.0f64;
        for i in 0..d.min(self.0.len()) {
            for j in 0..d - i {
                if j < self.0[i].len() {
                    m = m.max(self.0[i][j].abs());
                }
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorZ {
    pub center: (f64, f64),
    pub order: usize,
    pub trust_radius: f64,
    pub q: Tri,
    pub s: Tri,
    pub b: Tri,
    pub g: Tri,
    /// τ-series of α and F about τ*, through order+1.
    pub alpha: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
}

/// λ-series of Q and S along τ = τ*.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSeries {
    pub q: Taylor1,
    pub s: Taylor1,
}

/// Taylor coefficients of α and F about τ* through `n`, from α″ = −αα′ and F″ = −Fα′.
pub fn profile_series(p: &ProfileEval, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; n + 1];
    let mut f = vec![0.0; n + 1];
    a[0] = p.alpha;
    f[0] = p.f;
    if n >= 1 {
        a[1] = p.alpha1;
        f[1] = p.f1;
    }
    for k in 0..n.saturating_sub(1) {
        let mut aa = 0.0;
        let mut fa = 0.0;
        for m in 0..=k {
            let da = (k - m + 1) as f64 * a[k - m + 1];
            aa += a[m] * da;
            fa += f[m] * da;
        }
        let den = ((k + 2) * (k + 1)) as f64;
        a[k + 2] = -aa / den;
        f[k + 2] = -fa / den;
    }
    (a, f)
}

#[allow(clippy::too_many_arguments)]
pub fn taylor_extend(
    z: &StateZ,
    prof: &ProfileParams,
    tau_star: f64,
    lam_star: f64,
    q_tau: f64,
    q_lam: f64,
    seed: Option<&SeedSeries>,
    n: usize,
) -> Result<TaylorZ> {
    if n > MAX_ORDER {
        return Err(SrhError::Order(n));
    }
    if !z.is_admissible() {
        return Err(SrhError::Admissibility(format!("Q = {}, Pi = {}", z.Q, z.pi())));
    }
    let pe = prof.eval(tau_star)?;
    let jet = solve_jet(z, &pe, q_tau, q_lam)?;
    let (a, f) = profile_series(&pe, n + 1);
    let da: Vec<f64> = (0..=n).map(|k| (k + 1) as f64 * a[k + 1]).collect();
    let df: Vec<f64> = (0..=n).map(|k| (k + 1) as f64 * f[k + 1]).collect();

    let (mut q, mut s, mut b, mut g) = (Tri::zeros(n), Tri::zeros(n), Tri::zeros(n), Tri::zeros(n));
    q.0[0][0] = z.Q;
    s.0[0][0] = z.S;
    g.0[0][0] = z.G;
    if n >= 1 {
        q.0[0][1] = q_lam;
        s.0[0][1] = jet.S_lam;
    }
    if let Some(sd) = seed {
        for j in 2..=n {
            q.0[0][j] = sd.q.0.get(j).copied().unwrap_or(0.0);
            s.0[0][j] = sd.s.0.get(j).copied().unwrap_or(0.0);
        }
    }

    // λ-direction along τ = τ*.
    let q0: Vec<f64> = (0..=n).map(|j| q.0[0][j]).collect();
    let s0: Vec<f64> = (0..=n).map(|j| s.0[0][j]).collect();
    for j in 0..n {
        g.0[0][j + 1] = (da[0] * q0[j] + if j == 0 { df[0] } else { 0.0 }) / (j + 1) as f64;
    }
    let g0: Vec<f64> = (0..=n).map(|j| g.0[0][j]).collect();
    let mut pi = vec![0.0; n + 1];
    pi[0] = z.pi();
    for j in 0..n {
        let qg: f64 = (0..=j).map(|k| q0[k] * g0[j - k]).sum();
        pi[j + 1] = (qg - s0[j] * f[0]) / (j + 1) as f64;
    }
    let num = Taylor1(pi).add(&Taylor1(s0.clone()).mul(&Taylor1(s0.clone())));
    let b0 = num.div(&Taylor1(q0.clone()));
    for j in 0..=n {
        b.0[0][j] = b0.0[j];
    }
    b.0[0][0] = z.B;

    // τ-direction, by total degree then increasing τ-index.
    for d in 1..=n {
        for i in 0..d {
            let j = d - 1 - i;
            let ip = (i + 1) as f64;
            let mut qa = 0.0;
            let mut sa = 0.0;
            let mut sda = 0.0;
            for m in 0..=i {
                qa += a[m] * q.0[i - m][j];
                sa += a[m] * s.0[i - m][j];
                sda += da[m] * s.0[i - m][j];
            }
            let fij = if j == 0 { f[i] } else { 0.0 };
            q.0[i + 1][j] = (qa + fij - (j + 1) as f64 * s.0[i][j + 1]) / ip;
            s.0[i + 1][j] = (sa + g.0[i][j] - (j + 1) as f64 * b.0[i][j + 1]) / ip;
            g.0[i + 1][j] = -sda / ip;

            // Q·B_τ = S·S_τ + B·S_λ − S·B_λ at coefficient (i, j).
            let mut rhs = 0.0;
            for aa in 0..=i {
                for bb in 0..=j {
                    let st = (i - aa + 1) as f64 * s.0[i - aa + 1][j - bb];
                    rhs += s.0[aa][bb] * st;
                    let qbt = (i - aa + 1) as f64 * b.0[i - aa + 1][j - bb];
                    if aa != 0 || bb != 0 {
                        rhs -= q.0[aa][bb] * qbt;
                    }
                }
                for bb in 0..=j + 1 {
                    let w = (j + 1 - bb) as f64;
                    if w == 0.0 {
                        continue;
                    }
                    rhs += b.0[aa][bb] * w * s.0[i - aa][j + 1 - bb];
                    rhs -= s.0[aa][bb] * w * b.0[i - aa][j + 1 - bb];
                }
            }
            b.0[i + 1][j] = rhs / (z.Q * ip);
        }
    }

    let pd = prof.pole_distance(tau_star);
    Ok(TaylorZ {
        center: (tau_star, lam_star),
        order: n,
        trust_radius: 0.25 * pd,
        q,
        s,
        b,
        g,
        alpha: a,
        f,
    })
}

/// Seed series from the configured expressions about λ*.
pub fn seed_from_exprs(q_fn: &crate::expr::Expr, s_fn: &crate::expr::Expr, lam_star: f64, n: usize) -> SeedSeries {
    SeedSeries { q: q_fn.taylor(lam_star, n), s: s_fn.taylor(lam_star, n) }
}

impl TaylorZ {
    fn offset(&self, tau: f64, lam: f64) -> Result<(f64, f64)> {
        let (dt, dl) = (tau - self.center.0, lam - self.center.1);
        let dist = dt.hypot(dl);
        if dist > self.trust_radius {
            return Err(SrhError::Radius { dist, radius: self.trust_radius });
        }
        Ok((dt, dl))
    }

    pub fn eval(&self, tau: f64, lam: f64) -> Result<StateZ> {
        let (dt, dl) = self.offset(tau, lam)?;
        Ok(StateZ::new(self.q.eval(dt, dl), self.s.eval(dt, dl), self.b.eval(dt, dl), self.g.eval(dt, dl)))
    }

    /// Exact first partials of the truncated series.
    pub fn jet(&self, tau: f64, lam: f64) -> Result<Jet1> {
        let (dt, dl) = self.offset(tau, lam)?;
        let (qt, ql) = self.q.grad(dt, dl);
        let (st, sl) = self.s.grad(dt, dl);
        let (bt, bl) = self.b.grad(dt, dl);
        let (gt, gl) = self.g.grad(dt, dl);
        Ok(Jet1::from_array([qt, st, bt, gt, ql, sl, bl, gl]))
    }

    /// Degree-1 truncation as a jet.
    pub fn degree1(&self) -> Jet1 {
        let c = |t: &Tri, i: usize, j: usize| if self.order >= 1 { t.at(i, j) } else { 0.0 };
        Jet1::from_array([
            c(&self.q, 1, 0),
            c(&self.s, 1, 0),
            c(&self.b, 1, 0),
            c(&self.g, 1, 0),
            c(&self.q, 0, 1),
            c(&self.s, 0, 1),
            c(&self.b, 0, 1),
            c(&self.g, 0, 1),
        ])
    }

    /// Coefficient series of the six system residuals and the two consequences.
    pub fn residual_series(&self) -> (Vec<Tri>, Vec<Tri>) {
        let n = self.order;
        let al = Tri::from_tau(&self.alpha[..=n], n);
        let fs = Tri::from_tau(&self.f[..=n], n);
        let a1: Vec<f64> = (0..=n).map(|k| (k + 1) as f64 * self.alpha[k + 1]).collect();
        let f1: Vec<f64> = (0..=n).map(|k| (k + 1) as f64 * self.f[k + 1]).collect();
        let (a1, f1) = (Tri::from_tau(&a1, n), Tri::from_tau(&f1, n));
        let (q, s, b, g) = (&self.q, &self.s, &self.b, &self.g);
        let (qt, st, bt, gt) = (q.d_tau(), s.d_tau(), b.d_tau(), g.d_tau());
        let (ql, sl, bl, gl) = (q.d_lam(), s.d_lam(), b.d_lam(), g.d_lam());
        let sys = vec![
            qt.add(&sl).sub(&q.mul(&al)).sub(&fs),
            st.add(&bl).sub(&s.mul(&al)).sub(g),
            q.mul(&bt).add(&s.mul(&bl)).sub(&s.mul(&st)).sub(&b.mul(&sl)),
            s.mul(&qt).add(&b.mul(&ql)).sub(&q.mul(&st)).sub(&s.mul(&sl)),
            gt.add(&s.mul(&a1)),
            gl.sub(&q.mul(&a1)).sub(&f1),
        ];
        let pi = q.mul(b).sub(&s.mul(s));
        let cons = vec![
            q.mul(&bt).add(&b.mul(&qt)).sub(&s.mul(&st).scale(2.0)).sub(&pi.mul(&al)).sub(&b.mul(&fs)).add(&s.mul(g)),
            q.mul(&bl).add(&b.mul(&ql)).sub(&s.mul(&sl).scale(2.0)).sub(&q.mul(g)).add(&s.mul(&fs)),
        ];
        (sys, cons)
    }

    /// Pointwise residuals of the system using exact series derivatives.
    pub fn residual_at(&self, prof: &ProfileParams, tau: f64, lam: f64) -> Result<([f64; 6], [f64; 2])> {
        let z = self.eval(tau, lam)?;
        let j = self.jet(tau, lam)?;
        let p = prof.eval(tau)?;
        Ok((residual_system(&z, &j, &p), residual_consequences(&z, &j, &p)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub center: (f64, f64),
    pub order: usize,
    pub radius: f64,
    pub h: f64,
    pub n_points: usize,
    pub max_abs_err: f64,
    /// 0.1·r^N + 5h⁴
    pub bound: f64,
    pub pass: bool,
}

/// Series about the initial-slice grid node nearest `lam_star` (mid-grid if None).
pub fn series_for_run(cfg: &RunConfig, gf: &GridField, order: usize, lam_star: Option<f64>) -> Result<TaylorZ> {
    let grid = gf.lambda;
    let target = lam_star.unwrap_or(0.5 * (grid.lam0 + grid.lam1));
    let j = (((target - grid.lam0) / grid.h()).round().max(0.0) as usize).min(grid.n - 1);
    let lam = grid.at(j);
    let tau0 = gf.taus[0];
    let z = gf.z(0, j);
    let (q_fn, s_fn) = (cfg.q_expr()?, cfg.s_expr()?);
    let seed = seed_from_exprs(&q_fn, &s_fn, lam, order);
    let pe = gf.profile.eval(tau0)?;
    let q_lam = seed.q.0.get(1).copied().unwrap_or(0.0);
    let s_lam = seed.s.0.get(1).copied().unwrap_or(0.0);
    let q_tau = z.Q * pe.alpha + pe.f - s_lam;
    taylor_extend(&z, &gf.profile, tau0, lam, q_tau, q_lam, Some(&seed), order)
}

/// Max difference to the grid over nodes with τ ≥ τ* inside the disc of `radius`.
pub fn compare_with_grid(t: &TaylorZ, gf: &GridField, radius: f64) -> Result<SeriesCheck> {
    let h = gf.lambda.h();
    let r = radius.min(t.trust_radius);
    let (tc, lc) = t.center;
    let mut err = 0.0f64;
    let mut count = 0;
    for i in 0..gf.n_tau() {
        let tau = gf.taus[i];
        if tau < tc - 1e-14 || tau - tc > r {
            continue;
        }
        for jj in 0..gf.n_lam() {
            let lam = gf.lambda.at(jj);
            if (tau - tc).hypot(lam - lc) > r {
                continue;
            }
            let zs = t.eval(tau, lam)?.as_array();
            let zg = gf.z(i, jj).as_array();
            for k in 0..4 {
                err = err.max((zs[k] - zg[k]).abs());
            }
            count += 1;
        }
    }
    let bound = 0.1 * r.powi(t.order as i32) + 5.0 * h.powi(4);
    Ok(SeriesCheck {
        center: t.center,
        order: t.order,
        radius: r,
        h,
        n_points: count,
        max_abs_err: err,
        bound,
        pass: count > 0 && err <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Family;

    fn soliton() -> ProfileParams {
        ProfileParams::new(Family::Const2, 0.0, 0.0)
    }

    #[test]
    fn degree1_is_the_hand_jet() {
        let t = taylor_extend(&StateZ::new(1.0, 0.0, 1.0, 0.0), &soliton(), 0.0, 0.0, 0.0, 1.0, None, 1).unwrap();
        assert_eq!(t.degree1().to_array(), [0.0, 1.0, 2.0, 0.0, 1.0, 2.0, -1.0, 0.0]);
    }

    #[test]
    fn residual_coefficients_vanish_below_order() {
        let prof = ProfileParams::new(Family::Coth, 0.3, -0.4);
        let z = StateZ::new(1.2, 0.1, 0.5, 0.05);
        let q = Taylor1(vec![1.2, 0.5, 0.1, -0.05, 0.02, 0.0, 0.0, 0.0, 0.0]);
        let s = Taylor1(vec![0.1, 0.0, -0.3, 0.1, 0.0, 0.01, 0.0, 0.0, 0.0]);
        let t = taylor_extend(&z, &prof, 1.3, 0.2, 0.0, 0.5, Some(&SeedSeries { q, s }), 8).unwrap();
        let (sys, cons) = t.residual_series();
        for r in sys.iter().chain(&cons) {
            assert!(r.max_below(8) < 1e-11, "{}", r.max_below(8));
        }
        assert_eq!(t.eval(1.3, 0.2).unwrap(), z);
    }

    #[test]
    fn order_and_radius_errors() {
        let z = StateZ::new(1.0, 0.0, 1.0, 0.0);
        assert!(matches!(taylor_extend(&z, &soliton(), 0.0, 0.0, 0.0, 1.0, None, 13), Err(SrhError::Order(13))));
        let cot = ProfileParams::new(Family::Cot, 0.0, 0.0);
        let t = taylor_extend(&z, &cot, 1.0, 0.0, 0.0, 1.0, None, 4).unwrap();
        assert!((t.trust_radius - 0.25).abs() < 1e-15);
        assert!(matches!(t.eval(1.3, 0.0), Err(SrhError::Radius { .. })));
        let bad = StateZ::new(1.0, 2.0, 1.0, 0.0);
        assert!(matches!(taylor_extend(&bad, &cot, 1.0, 0.0, 0.0, 1.0, None, 4), Err(SrhError::Admissibility(_))));
    }

    #[test]
    fn degree1_offset_is_exact() {
        let t = taylor_extend(&StateZ::new(1.0, 0.0, 1.0, 0.0), &soliton(), 0.0, 0.0, 0.0, 1.0, None, 1).unwrap();
        let z = t.eval(0.01, 0.0).unwrap();
        assert_eq!(z, StateZ::new(1.0, 0.01, 1.02, 0.0));
    }

    #[test]
    fn alpha_series_matches_tanh_derivatives() {
        let prof = ProfileParams::new(Family::Tanh, 0.0, 0.0);
        let x = 0.4f64;
        let (a, _) = profile_series(&prof.eval(x).unwrap(), 4);
        let th = x.tanh();
        // d/dx tanh = 1 − t²; second derivative −2t(1 − t²)
        assert!((a[1] - 2.0 * (1.0 - th * th)).abs() < 1e-14);
        assert!((a[2] - (-2.0 * th * (1.0 - th * th))).abs() < 1e-14);
    }
}
