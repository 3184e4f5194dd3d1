//! Coordinates, potential and metric reconstructed from a solved grid, and
//! verification of the Ricci–Hessian equation by finite differences of raw fields.
//!
//! x, u and φ come from integrating the closed forms
//! dx = (B dτ − S dλ)/Π, du = (Q dλ − S dτ)/Π, dφ = τ dx + λ du.
//! Everything downstream lives on a regular (x,u) grid obtained by chart inversion.

use crate::error::{Result, SrhError};
use crate::evolution::GridField;
use crate::fd::{cell_integrals, d1_4_vec, lagrange_weights};
use crate::jet_algebra::StateZ;
use crate::profiles::ProfileParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Interpolation stencil width (quintic).
pub const STENCIL: usize = 6;
/// Cells kept between an inverted point and the grid edge.
pub const MARGIN: usize = 6;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_ITERS: usize = 40;
const NF: usize = 8;
/// Resample levels whose points nest on the 33-point lattice.
pub const LATTICE: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Closedness {
    pub x: f64,
    pub u: f64,
    pub phi: f64,
}

impl Closedness {
    pub fn max(&self) -> f64 {
        self.x.max(self.u).max(self.phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xc: f64,
    pub uc: f64,
    /// Half-widths.
    pub hx: f64,
    pub hu: f64,
}

/// Fields on a regular n×n (x,u) grid, x-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resampled {
    pub n: usize,
    pub rect: Rect,
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub tau: Vec<f64>,
    pub lam: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
    pub phi: Vec<f64>,
    pub q_lam: Vec<f64>,
    pub newton_residual: f64,
}

impl Resampled {
    pub fn hx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn hu(&self) -> f64 {
        self.us[1] - self.us[0]
    }

    #[inline]
    pub fn id(&self, a: usize, b: usize) -> usize {
        a * self.n + b
    }

    pub fn pi(&self) -> Vec<f64> {
        (0..self.q.len()).map(|k| self.q[k] * self.b[k] - self.s[k] * self.s[k]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub profile: ProfileParams,
    pub tau0: f64,
    pub dt: f64,
    pub n_tau: usize,
    pub lam0: f64,
    pub h: f64,
    pub n_lam: usize,
    /// On the (τ,λ) grid, row-major.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Option<Vec<f64>>,
    pub closedness: Closedness,
    pub resampled: Option<Resampled>,
}

/// Integrate a 1-form a dτ + b dλ: along λ on the first row, then along τ in each column.
/// Returns the potential and the max per-cell circulation.
fn integrate_form(a: &[f64], b: &[f64], nt: usize, nl: usize, dt: f64, h: f64) -> (Vec<f64>, f64) {
    let base = {
        let mut c = vec![0.0; nl];
        let inc = cell_integrals(&b[..nl], h);
        for j in 1..nl {
            c[j] = c[j - 1] + inc[j - 1];
        }
        c
    };
    let col = |j: usize| -> Vec<f64> { (0..nt).map(|i| a[i * nl + j]).collect() };
    let tau_inc: Vec<Vec<f64>> = (0..nl).into_par_iter().map(|j| cell_integrals(&col(j), dt)).collect();
    let mut out = vec![0.0; nt * nl];
    for j in 0..nl {
        let mut acc = base[j];
        out[j] = acc;
        for i in 1..nt {
            acc += tau_inc[j][i - 1];
            out[i * nl + j] = acc;
        }
    }
    let lam_inc: Vec<Vec<f64>> = (0..nt).into_par_iter().map(|i| cell_integrals(&b[i * nl..(i + 1) * nl], h)).collect();
    let loop_max = (0..nt - 1)
        .into_par_iter()
        .map(|i| {
            let mut m = 0.0f64;
            for j in 0..nl - 1 {
                let c = tau_inc[j][i] + lam_inc[i + 1][j] - tau_inc[j + 1][i] - lam_inc[i][j];
                m = m.max(c.abs());
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    (out, loop_max)
}

fn check_grid(gf: &GridField) -> Result<Vec<f64>> {
    if gf.n_tau() < 4 {
        return Err(SrhError::Resample(format!("need at least 4 tau slices, have {}", gf.n_tau())));
    }
    let pi = gf.pi();
    for (k, p) in pi.iter().enumerate() {
        let (i, j) = (k / gf.n_lam(), k % gf.n_lam());
        if !(*p > 0.0) || !(gf.q[k] > 0.0) {
            return Err(SrhError::Positivity {
                what: "tau".into(),
                at: gf.taus[i],
                detail: format!("Q = {:e}, Pi = {:e} at lambda = {}", gf.q[k], p, gf.lambda.at(j)),
            });
        }
    }
    Ok(pi)
}

pub fn reconstruct_coords(gf: &GridField) -> Result<ChartData> {
    let pi = check_grid(gf)?;
    let (nt, nl, dt, h) = (gf.n_tau(), gf.n_lam(), gf.dt(), gf.lambda.h());
    let m = nt * nl;
    let xa: Vec<f64> = (0..m).map(|k| gf.b[k] / pi[k]).collect();
    let xb: Vec<f64> = (0..m).map(|k| -gf.s[k] / pi[k]).collect();
    let ub: Vec<f64> = (0..m).map(|k| gf.q[k] / pi[k]).collect();
    let (x, cx) = integrate_form(&xa, &xb, nt, nl, dt, h);
    let (u, cu) = integrate_form(&xb, &ub, nt, nl, dt, h);
    Ok(ChartData {
        profile: gf.profile,
        tau0: gf.taus[0],
        dt,
        n_tau: nt,
        lam0: gf.lambda.lam0,
        h,
        n_lam: nl,
        x,
        u,
        phi: None,
        closedness: Closedness { x: cx, u: cu, phi: f64::NAN },
        resampled: None,
    })
}

/// φ with dφ = τ dx + λ du, zero at the lower-left corner; also sets its loop residual.
pub fn reconstruct_potential(chart: &mut ChartData, gf: &GridField) -> Result<()> {
    if !(chart.closedness.x.is_finite() && chart.closedness.u.is_finite()) {
        return Err(SrhError::Resample("chart closedness not certified".into()));
    }
    let pi = check_grid(gf)?;
    let (nt, nl) = (gf.n_tau(), gf.n_lam());
    let m = nt * nl;
    let tl = |k: usize| (gf.taus[k / nl], gf.lambda.at(k % nl));
    let a: Vec<f64> = (0..m)
        .map(|k| {
            let (t, l) = tl(k);
            (t * gf.b[k] - l * gf.s[k]) / pi[k]
        })
        .collect();
    let b: Vec<f64> = (0..m)
        .map(|k| {
            let (t, l) = tl(k);
            (l * gf.q[k] - t * gf.s[k]) / pi[k]
        })
        .collect();
    let (phi, c) = integrate_form(&a, &b, nt, nl, chart.dt, chart.h);
    chart.phi = Some(phi);
    chart.closedness.phi = c;
    Ok(())
}

/// Coordinates and potential in one call.
pub fn build_chart(gf: &GridField) -> Result<ChartData> {
    let mut c = reconstruct_coords(gf)?;
    reconstruct_potential(&mut c, gf)?;
    Ok(c)
}

/// Tensor Lagrange interpolation of (x, u, Q, S, B, G, φ, Q_λ) on the (τ,λ) grid.
struct Interp {
    tau0: f64,
    dt: f64,
    nt: usize,
    lam0: f64,
    h: f64,
    nl: usize,
    fields: [Vec<f64>; NF],
}

impl Interp {
    fn new(chart: &ChartData, gf: &GridField) -> Result<Self> {
        let phi = chart.phi.clone().ok_or_else(|| SrhError::Resample("potential not reconstructed".into()))?;
        if chart.n_tau < STENCIL + 2 * MARGIN || chart.n_lam < STENCIL + 2 * MARGIN {
            return Err(SrhError::Resample(format!(
                "grid {}x{} too small for resampling",
                chart.n_tau, chart.n_lam
            )));
        }
        let nl = chart.n_lam;
        let mut ql = vec![0.0; gf.q.len()];
        for i in 0..chart.n_tau {
            let d = d1_4_vec(&gf.q[i * nl..(i + 1) * nl], chart.h);
            ql[i * nl..(i + 1) * nl].copy_from_slice(&d);
        }
        Ok(Interp {
            tau0: chart.tau0,
            dt: chart.dt,
            nt: chart.n_tau,
            lam0: chart.lam0,
            h: chart.h,
            nl,
            fields: [
                chart.x.clone(),
                chart.u.clone(),
                gf.q.clone(),
                gf.s.clone(),
                gf.b.clone(),
                gf.g.clone(),
                phi,
                ql,
            ],
        })
    }

    fn eval(&self, tau: f64, lam: f64) -> [f64; NF] {
        let it = (tau - self.tau0) / self.dt;
        let il = (lam - self.lam0) / self.h;
        // clamp before the cast: diverging Newton iterates can be huge
        let half = (STENCIL / 2 - 1) as f64;
        let st = (it.floor() - half).clamp(0.0, (self.nt - STENCIL) as f64) as usize;
        let sl = (il.floor() - half).clamp(0.0, (self.nl - STENCIL) as f64) as usize;
        let mut wt = [0.0; STENCIL];
        let mut wl = [0.0; STENCIL];
        lagrange_weights(it - st as f64, STENCIL, &mut wt);
        lagrange_weights(il - sl as f64, STENCIL, &mut wl);
        let mut out = [0.0; NF];
        for (a, wa) in wt.iter().enumerate() {
            let row = (st + a) * self.nl + sl;
            for (f, o) in self.fields.iter().zip(out.iter_mut()) {
                let mut acc = 0.0;
                for (b, wb) in wl.iter().enumerate() {
                    acc += wb * f[row + b];
                }
                *o += wa * acc;
            }
        }
        out
    }

    fn inside(&self, tau: f64, lam: f64) -> bool {
        let m = MARGIN as f64;
        let it = (tau - self.tau0) / self.dt;
        let il = (lam - self.lam0) / self.h;
        it > m && it < (self.nt - 1) as f64 - m && il > m && il < (self.nl - 1) as f64 - m
    }

    /// Newton on (τ,λ) ↦ (x,u) using the exact inverse Jacobian [[Q,S],[S,B]].
    fn invert(&self, xt: f64, ut: f64, guess: (f64, f64)) -> Option<(f64, f64, [f64; NF], f64)> {
        let (mut tau, mut lam) = guess;
        let mut v = self.eval(tau, lam);
        for _ in 0..NEWTON_ITERS {
            let (rx, ru) = (v[0] - xt, v[1] - ut);
            let dtau = -(v[2] * rx + v[3] * ru);
            let dlam = -(v[3] * rx + v[4] * ru);
            tau += dtau;
            lam += dlam;
            if !(tau.is_finite() && lam.is_finite()) {
                return None;
            }
            v = self.eval(tau, lam);
            if dtau.abs().max(dlam.abs()) < 1e-15 {
                break;
            }
        }
        let r = (v[0] - xt).abs().max((v[1] - ut).abs());
        (r <= NEWTON_TOL && self.inside(tau, lam)).then_some((tau, lam, v, r))
    }
}

struct Centre {
    tau: f64,
    lam: f64,
    x: f64,
    u: f64,
    q: f64,
    s: f64,
    b: f64,
}

fn centre(chart: &ChartData, gf: &GridField) -> Centre {
    let (ic, jc) = (chart.n_tau / 2, chart.n_lam / 2);
    let k = ic * chart.n_lam + jc;
    Centre {
        tau: gf.taus[ic],
        lam: gf.lambda.at(jc),
        x: chart.x[k],
        u: chart.u[k],
        q: gf.q[k],
        s: gf.s[k],
        b: gf.b[k],
    }
}

impl Centre {
    /// Linearised inverse chart as a Newton starting point.
    fn guess(&self, x: f64, u: f64) -> (f64, f64) {
        let (dx, du) = (x - self.x, u - self.u);
        (self.tau + self.q * dx + self.s * du, self.lam + self.s * dx + self.b * du)
    }
}

fn rect_fits(ip: &Interp, c: &Centre, hx: f64, hu: f64) -> bool {
    const K: usize = 41;
    (0..K).into_par_iter().all(|k| {
        let t = -1.0 + 2.0 * k as f64 / (K - 1) as f64;
        [(t, -1.0), (1.0, t), (t, 1.0), (-1.0, t)].iter().all(|(a, b)| {
            let (x, u) = (c.x + a * hx, c.u + b * hu);
            ip.invert(x, u, c.guess(x, u)).is_some()
        })
    })
}

/// Largest-area rectangle about the image of the grid centre over a family of aspect
/// ratios, then scaled by `frac`.
pub fn choose_rect(chart: &ChartData, gf: &GridField, frac: f64) -> Result<Rect> {
    let ip = Interp::new(chart, gf)?;
    let c = centre(chart, gf);
    let pi = c.q * c.b - c.s * c.s;
    let tau_span = gf.taus[gf.n_tau() - 1] - gf.taus[0];
    let lam_span = gf.lambda.lam1 - gf.lambda.lam0;
    let (hx0, hu0) = (0.5 * tau_span * c.b / pi, 0.5 * lam_span * c.q / pi);
    let mut best: Option<(f64, f64, f64)> = None;
    for k in -8..=8 {
        let ax = hx0 * 2f64.powf(k as f64 / 2.0);
        let au = hu0;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..20 {
            let m = 0.5 * (lo + hi);
            if rect_fits(&ip, &c, ax * m, au * m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        let area = ax * au * lo * lo;
        if lo > 0.0 && best.is_none_or(|b| area > b.0) {
            best = Some((area, ax * lo, au * lo));
        }
    }
    match best {
        Some((_, hx, hu)) => Ok(Rect { xc: c.x, uc: c.u, hx: hx * frac, hu: hu * frac }),
        None => Err(SrhError::Resample(format!(
            "no rectangle about (x, u) = ({:.6}, {:.6}) embeds in the chart; achievable rectangle is empty",
            c.x, c.u
        ))),
    }
}

/// Invert the chart at every point of an n×n grid on `rect`.
pub fn resample(chart: &ChartData, gf: &GridField, rect: Rect, n: usize) -> Result<Resampled> {
    if n < 5 {
        return Err(SrhError::Resample(format!("resample size {n} < 5")));
    }
    let ip = Interp::new(chart, gf)?;
    let c = centre(chart, gf);
    let lin = |c0: f64, hw: f64, k: usize| c0 - hw + 2.0 * hw * k as f64 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|a| lin(rect.xc, rect.hx, a)).collect();
    let us: Vec<f64> = (0..n).map(|b| lin(rect.uc, rect.hu, b)).collect();
    let pts: Vec<Option<(f64, f64, [f64; NF], f64)>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (x, u) = (xs[k / n], us[k % n]);
            ip.invert(x, u, c.guess(x, u))
        })
        .collect();
    let mut r = Resampled {
        n,
        rect,
        xs: xs.clone(),
        us: us.clone(),
        tau: Vec::with_capacity(n * n),
        lam: Vec::with_capacity(n * n),
        q: Vec::with_capacity(n * n),
        s: Vec::with_capacity(n * n),
        b: Vec::with_capacity(n * n),
        g: Vec::with_capacity(n * n),
        phi: Vec::with_capacity(n * n),
        q_lam: Vec::with_capacity(n * n),
        newton_residual: 0.0,
    };
    for (k, p) in pts.into_iter().enumerate() {
        let (t, l, v, res) = p.ok_or_else(|| {
            SrhError::Resample(format!(
                "point (x, u) = ({:.6}, {:.6}) does not invert inside the chart; rectangle {:?}",
                xs[k / n],
                us[k % n],
                rect
            ))
        })?;
        r.tau.push(t);
        r.lam.push(l);
        r.q.push(v[2]);
        r.s.push(v[3]);
        r.b.push(v[4]);
        r.g.push(v[5]);
        r.phi.push(v[6]);
        r.q_lam.push(v[7]);
        r.newton_residual = r.newton_residual.max(res);
    }
    Ok(r)
}

/// Choose the rectangle and resample onto it; stores the result in the chart.
pub fn resample_chart(chart: &mut ChartData, gf: &GridField, n: usize, frac: f64) -> Result<Rect> {
    let rect = choose_rect(chart, gf, frac)?;
    chart.resampled = Some(resample(chart, gf, rect, n)?);
    Ok(rect)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricInfo {
    /// Coordinates (x, x′, u, u′).
    pub g: [[f64; 4]; 4],
    pub det: f64,
    pub pi: f64,
    pub positive_definite: bool,
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

pub fn metric_at(z: &StateZ) -> MetricInfo {
    let StateZ { Q, S, B, .. } = *z;
    let g = [[Q, 0.0, S, 0.0], [0.0, Q, 0.0, S], [S, 0.0, B, 0.0], [0.0, S, 0.0, B]];
    let rows = |k: usize| -> Vec<Vec<f64>> { (0..k).map(|i| g[i][..k].to_vec()).collect() };
    let positive_definite = (1..=4).all(|k| det(&rows(k)) > 0.0);
    MetricInfo { g, det: det(&rows(4)), pi: z.pi(), positive_definite }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub max_abs: f64,
    /// max − min
    pub spread: f64,
    /// spread/(1 + |mean|)
    pub rel_spread: f64,
}

impl Stats {
    pub fn of(v: &[f64]) -> Stats {
        if v.is_empty() {
            return Stats { min: f64::NAN, max: f64::NAN, mean: f64::NAN, max_abs: f64::NAN, spread: f64::NAN, rel_spread: f64::NAN };
        }
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Stats { min, max, mean, max_abs, spread: max - min, rel_spread: (max - min) / (1.0 + mean.abs()) }
    }
}

/// Per-point fields on the interior (n−2)² points of the resampled grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometryFields {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub tau: Vec<f64>,
    pub lam: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
    pub theta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub sigma: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(rename = "Y")]
    pub y: Vec<f64>,
    pub cross: Vec<f64>,
    pub hess_q: Vec<f64>,
}

impl GeometryFields {
    pub fn named(&self) -> Vec<(&'static str, &Vec<f64>)> {
        vec![
            ("r1", &self.r1),
            ("r2", &self.r2),
            ("r3", &self.r3),
            ("theta", &self.theta),
            ("kappa", &self.kappa),
            ("sigma", &self.sigma),
            ("s", &self.s),
            ("Y", &self.y),
            ("sigma_cross", &self.cross),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialCheck {
    pub phi_x_minus_tau: f64,
    pub phi_u_minus_lam: f64,
    pub phi_xx_minus_q: f64,
    pub phi_xu_minus_s: f64,
    pub phi_uu_minus_b: f64,
    /// τ_u against λ_x, the two first-difference forms of φ_xu.
    pub mixed_two_ways: f64,
    /// ∂ᵤQ − ∂ₓS
    pub q_u_minus_s_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positivity {
    pub min_q: f64,
    pub min_pi: f64,
    pub metric_positive_definite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    pub min_abs_q_lam: f64,
    /// min over points of |α|·max(|∂ₓQ|, |∂ᵤQ|, |∂ᵤS|)
    pub min_alpha_hess: f64,
    pub zero_threshold: f64,
    pub zero_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub n: usize,
    pub rect: Rect,
    pub hx: f64,
    pub hu: f64,
    pub eps: f64,
    pub rh_max: f64,
    pub rh_components_max: [f64; 3],
    pub theta: Stats,
    pub kappa: Stats,
    pub sigma: Stats,
    pub s: Stats,
    #[serde(rename = "Y")]
    pub y: Stats,
    /// max |4σ − Yα − s|
    pub sigma_cross_check: f64,
    pub potential: PotentialCheck,
    pub positivity: Positivity,
    pub nondegeneracy: Nondegeneracy,
    pub closedness: Closedness,
    pub newton_residual: f64,
    #[serde(skip)]
    pub fields: GeometryFields,
}

/// R₁..R₃, σ, s, Y, θ, κ by second-order central differences on the resampled grid.
pub fn verify_ricci_hessian(chart: &ChartData, prof: &ProfileParams) -> Result<GeometryReport> {
    let r = chart.resampled.as_ref().ok_or_else(|| SrhError::Resample("chart has not been resampled".into()))?;
    let n = r.n;
    let (tmin, tmax) = r.tau.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(*t), b.max(*t)));
    prof.check_window(tmin, tmax)?;
    let (hx, hu) = (r.hx(), r.hu());
    let pi = r.pi();
    let p: Vec<f64> = pi.iter().map(|v| v.ln()).collect();
    let eps = prof.eps();

    let dx = |f: &[f64], a: usize, b: usize| (f[r.id(a + 1, b)] - f[r.id(a - 1, b)]) / (2.0 * hx);
    let du = |f: &[f64], a: usize, b: usize| (f[r.id(a, b + 1)] - f[r.id(a, b - 1)]) / (2.0 * hu);
    let dxx = |f: &[f64], a: usize, b: usize| (f[r.id(a + 1, b)] - 2.0 * f[r.id(a, b)] + f[r.id(a - 1, b)]) / (hx * hx);
    let duu = |f: &[f64], a: usize, b: usize| (f[r.id(a, b + 1)] - 2.0 * f[r.id(a, b)] + f[r.id(a, b - 1)]) / (hu * hu);
    let dxu = |f: &[f64], a: usize, b: usize| {
        (f[r.id(a + 1, b + 1)] - f[r.id(a + 1, b - 1)] - f[r.id(a - 1, b + 1)] + f[r.id(a - 1, b - 1)]) / (4.0 * hx * hu)
    };

    struct Pt {
        v: [f64; 14],
        pot: [f64; 7],
        hess: f64,
    }
    let m = n - 2;
    let pts: Vec<Result<Pt>> = (0..m * m)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k / m + 1, k % m + 1);
            let i = r.id(a, b);
            let (q, s, bb) = (r.q[i], r.s[i], r.b[i]);
            let pe = prof.eval(r.tau[i])?;
            let (qx, qu, sx, su, bx) = (dx(&r.q, a, b), du(&r.q, a, b), dx(&r.s, a, b), du(&r.s, a, b), dx(&r.b, a, b));
            let (pxx, pxu, puu) = (dxx(&p, a, b), dxu(&p, a, b), duu(&p, a, b));
            let (px, pu) = (dx(&p, a, b), du(&p, a, b));
            let sigma = -(q * pe.alpha1 + pe.f1) / 2.0;
            let r1 = pe.alpha * qx - pxx - 2.0 * sigma * q;
            let r2 = pe.alpha * qu - pxu - 2.0 * sigma * s;
            let r3 = pe.alpha * su - puu - 2.0 * sigma * bb;
            // Δ_g P with the divergence expanded; no symmetry of the Hessian is assumed.
            let qu_ = qu;
            let lap = (bb * pxx - 2.0 * s * pxu + q * puu + px * (bx - su) + pu * (qu_ - sx)) / pi[i];
            let s_scal = -lap;
            let y = px;
            let theta = (pe.alpha * s_scal + 4.0 * eps * y) / 2.0;
            let kappa = theta * pe.psi + y / pe.alpha - q;
            let cross = 4.0 * sigma - y * pe.alpha - s_scal;
            let pot = [
                dx(&r.phi, a, b) - r.tau[i],
                du(&r.phi, a, b) - r.lam[i],
                dxx(&r.phi, a, b) - q,
                dxu(&r.phi, a, b) - s,
                duu(&r.phi, a, b) - bb,
                du(&r.tau, a, b) - dx(&r.lam, a, b),
                qu - sx,
            ];
            let hess = pe.alpha.abs() * qx.abs().max(qu.abs()).max(su.abs());
            Ok(Pt {
                v: [r.xs[a], r.us[b], r.tau[i], r.lam[i], r1, r2, r3, theta, kappa, sigma, s_scal, y, cross, pot[2]],
                pot,
                hess,
            })
        })
        .collect();
    let pts: Vec<Pt> = pts.into_iter().collect::<Result<_>>()?;
    let col = |c: usize| -> Vec<f64> { pts.iter().map(|p| p.v[c]).collect() };
    let fields = GeometryFields {
        x: col(0),
        u: col(1),
        tau: col(2),
        lam: col(3),
        r1: col(4),
        r2: col(5),
        r3: col(6),
        theta: col(7),
        kappa: col(8),
        sigma: col(9),
        s: col(10),
        y: col(11),
        cross: col(12),
        hess_q: col(13),
    };
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pot_max = |c: usize| pts.iter().fold(0.0f64, |m, p| m.max(p.pot[c].abs()));
    let rc = [amax(&fields.r1), amax(&fields.r2), amax(&fields.r3)];

    let field_scale = r.q.iter().chain(&r.s).chain(&r.b).fold(0.0f64, |m, v| m.max(v.abs()));
    let alpha_scale = r.tau.iter().map(|t| prof.eval(*t).map(|e| e.alpha.abs())).collect::<Result<Vec<_>>>()?;
    let alpha_scale = alpha_scale.iter().fold(0.0f64, |m, v| m.max(*v));
    let zero_threshold = 1e-8 * alpha_scale.max(1.0) * field_scale.max(1.0);
    let hess_min = pts.iter().fold(f64::INFINITY, |m, p| m.min(p.hess));
    let zeros = pts.iter().filter(|p| p.hess < zero_threshold).count();

    let min_q = r.q.iter().copied().fold(f64::INFINITY, f64::min);
    let min_pi = pi.iter().copied().fold(f64::INFINITY, f64::min);
    let pd = (0..r.q.len()).all(|k| metric_at(&StateZ::new(r.q[k], r.s[k], r.b[k], r.g[k])).positive_definite);

    Ok(GeometryReport {
        n,
        rect: r.rect,
        hx,
        hu,
        eps,
        rh_max: rc[0].max(rc[1]).max(rc[2]),
        rh_components_max: rc,
        theta: Stats::of(&fields.theta),
        kappa: Stats::of(&fields.kappa),
        sigma: Stats::of(&fields.sigma),
        s: Stats::of(&fields.s),
        y: Stats::of(&fields.y),
        sigma_cross_check: amax(&fields.cross),
        potential: PotentialCheck {
            phi_x_minus_tau: pot_max(0),
            phi_u_minus_lam: pot_max(1),
            phi_xx_minus_q: pot_max(2),
            phi_xu_minus_s: pot_max(3),
            phi_uu_minus_b: pot_max(4),
            mixed_two_ways: pot_max(5),
            q_u_minus_s_x: pot_max(6),
        },
        positivity: Positivity { min_q, min_pi, metric_positive_definite: pd },
        nondegeneracy: Nondegeneracy {
            min_abs_q_lam: r.q_lam.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
            min_alpha_hess: hess_min,
            zero_threshold,
            zero_fraction: zeros as f64 / pts.len() as f64,
        },
        closedness: chart.closedness.clone(),
        newton_residual: r.newton_residual,
        fields,
    })
}

/// Ricci of the 4×4 metric through Christoffel symbols, against the shortcut −½∂∂log Π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureOracle {
    pub n: usize,
    /// Points 2..n−3 in each direction, x-major.
    pub ricci: Vec<[[f64; 4]; 4]>,
    /// |Ric_xx + ½P_xx|, |Ric_xu + ½P_xu|, |Ric_uu + ½P_uu| per point.
    pub mismatch: Vec<[f64; 3]>,
    /// Max |Ric_x′x′ − Ric_xx|, |Ric_x′u′ − Ric_xu|, |Ric_u′u′ − Ric_uu|.
    pub hermitian_defect: f64,
    pub max_mismatch: f64,
}

pub fn curvature_oracle_full(chart: &ChartData) -> Result<CurvatureOracle> {
    let r = chart.resampled.as_ref().ok_or_else(|| SrhError::Resample("chart has not been resampled".into()))?;
    let n = r.n;
    if n < 5 {
        return Err(SrhError::Resample("curvature oracle needs 2 guard cells".into()));
    }
    let (hx, hu) = (r.hx(), r.hu());
    let metric = |k: usize| metric_at(&StateZ::new(r.q[k], r.s[k], r.b[k], 0.0)).g;
    let inv4 = |g: &[[f64; 4]; 4]| {
        // Block form: the (x,u) and (x′,u′) blocks are the same 2×2 matrix.
        let (q, s, b) = (g[0][0], g[0][2], g[2][2]);
        let d = q * b - s * s;
        let mut o = [[0.0; 4]; 4];
        for off in [0usize, 1] {
            o[off][off] = b / d;
            o[off][2 + off] = -s / d;
            o[2 + off][off] = -s / d;
            o[2 + off][2 + off] = q / d;
        }
        o
    };
    // ∂_k g for k ∈ {x, u}; the other two directions are Killing.
    let dg = |a: usize, b: usize| -> [[[f64; 4]; 4]; 4] {
        let mut o = [[[0.0; 4]; 4]; 4];
        let (gxp, gxm) = (metric(r.id(a + 1, b)), metric(r.id(a - 1, b)));
        let (gup, gum) = (metric(r.id(a, b + 1)), metric(r.id(a, b - 1)));
        for i in 0..4 {
            for j in 0..4 {
                o[0][i][j] = (gxp[i][j] - gxm[i][j]) / (2.0 * hx);
                o[2][i][j] = (gup[i][j] - gum[i][j]) / (2.0 * hu);
            }
        }
        o
    };
    type Gam = [[[f64; 4]; 4]; 4];
    let gamma_at = |a: usize, b: usize| -> Gam {
        let gi = inv4(&metric(r.id(a, b)));
        let d = dg(a, b);
        let mut g = [[[0.0; 4]; 4]; 4];
        for up in 0..4 {
            for bb in 0..4 {
                for c in 0..4 {
                    let mut acc = 0.0;
                    for dd in 0..4 {
                        acc += gi[up][dd] * (d[bb][dd][c] + d[c][dd][bb] - d[dd][bb][c]);
                    }
                    g[up][bb][c] = 0.5 * acc;
                }
            }
        }
        g
    };
    let gam: Vec<Option<Gam>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k / n, k % n);
            (a >= 1 && a + 1 < n && b >= 1 && b + 1 < n).then(|| gamma_at(a, b))
        })
        .collect();
    let p: Vec<f64> = r.pi().iter().map(|v| v.ln()).collect();
    let m = n - 4;
    let out: Vec<([[f64; 4]; 4], [f64; 3], f64)> = (0..m * m)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k / m + 2, k % m + 2);
            let g0 = gam[r.id(a, b)].as_ref().unwrap();
            let (gxp, gxm) = (gam[r.id(a + 1, b)].as_ref().unwrap(), gam[r.id(a - 1, b)].as_ref().unwrap());
            let (gup, gum) = (gam[r.id(a, b + 1)].as_ref().unwrap(), gam[r.id(a, b - 1)].as_ref().unwrap());
            let dgam = |dir: usize, up: usize, i: usize, j: usize| -> f64 {
                match dir {
                    0 => (gxp[up][i][j] - gxm[up][i][j]) / (2.0 * hx),
                    2 => (gup[up][i][j] - gum[up][i][j]) / (2.0 * hu),
                    _ => 0.0,
                }
            };
            let mut ric = [[0.0; 4]; 4];
            for bb in 0..4 {
                for c in 0..4 {
                    let mut acc = 0.0;
                    for aa in 0..4 {
                        acc += dgam(aa, aa, bb, c) - dgam(c, aa, bb, aa);
                        for dd in 0..4 {
                            acc += g0[aa][aa][dd] * g0[dd][bb][c] - g0[aa][c][dd] * g0[dd][bb][aa];
                        }
                    }
                    ric[bb][c] = acc;
                }
            }
            let pxx = (p[r.id(a + 1, b)] - 2.0 * p[r.id(a, b)] + p[r.id(a - 1, b)]) / (hx * hx);
            let puu = (p[r.id(a, b + 1)] - 2.0 * p[r.id(a, b)] + p[r.id(a, b - 1)]) / (hu * hu);
            let pxu = (p[r.id(a + 1, b + 1)] - p[r.id(a + 1, b - 1)] - p[r.id(a - 1, b + 1)] + p[r.id(a - 1, b - 1)])
                / (4.0 * hx * hu);
            let mis = [(ric[0][0] + 0.5 * pxx).abs(), (ric[0][2] + 0.5 * pxu).abs(), (ric[2][2] + 0.5 * puu).abs()];
            let herm = (ric[1][1] - ric[0][0]).abs().max((ric[1][3] - ric[0][2]).abs()).max((ric[3][3] - ric[2][2]).abs());
            (ric, mis, herm)
        })
        .collect();
    let max_mismatch = out.iter().fold(0.0f64, |m, o| m.max(o.1[0]).max(o.1[1]).max(o.1[2]));
    let hermitian_defect = out.iter().fold(0.0f64, |m, o| m.max(o.2));
    Ok(CurvatureOracle {
        n,
        ricci: out.iter().map(|o| o.0).collect(),
        mismatch: out.iter().map(|o| o.1).collect(),
        hermitian_defect,
        max_mismatch,
    })
}

/// Full-grid indices shared by levels of the form 32·k + 1, with two coarse cells
/// dropped at each edge. None if n is not of that form.
pub fn common_indices(n: usize) -> Option<Vec<usize>> {
    if n < LATTICE + 1 || (n - 1) % LATTICE != 0 {
        return None;
    }
    let st = (n - 1) / LATTICE;
    Some((2..=LATTICE - 2).map(|k| k * st).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoLevel {
    pub n: usize,
    pub rh_max: f64,
    pub theta_spread: f64,
    pub kappa_spread: f64,
    pub sigma_cross: f64,
    pub hess_q: f64,
    pub oracle_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoOrders {
    pub rh: f64,
    pub theta: f64,
    pub kappa: f64,
    pub sigma_cross: f64,
    pub hess_q: f64,
    pub oracle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoConvergence {
    pub rect: Rect,
    pub levels: Vec<GeoLevel>,
    /// From the two finest levels.
    pub orders: GeoOrders,
    /// From the two coarsest levels.
    pub coarse_orders: GeoOrders,
}

/// Norms restricted to the common lattice.
pub fn level_norms(rep: &GeometryReport, orc: &CurvatureOracle) -> Result<GeoLevel> {
    let n = rep.n;
    let idx = common_indices(n)
        .ok_or_else(|| SrhError::Resample(format!("resample level {n} is not of the form 32k+1")))?;
    let m = n - 2;
    let at = |f: &[f64], a: usize, b: usize| f[(a - 1) * m + (b - 1)];
    let mut rh = 0.0f64;
    let (mut tmin, mut tmax, mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let (mut cross, mut hq, mut om) = (0.0f64, 0.0f64, 0.0f64);
    let f = &rep.fields;
    let mo = n - 4;
    for &a in &idx {
        for &b in &idx {
            rh = rh.max(at(&f.r1, a, b).abs()).max(at(&f.r2, a, b).abs()).max(at(&f.r3, a, b).abs());
            let (t, k) = (at(&f.theta, a, b), at(&f.kappa, a, b));
            tmin = tmin.min(t);
            tmax = tmax.max(t);
            kmin = kmin.min(k);
            kmax = kmax.max(k);
            cross = cross.max(at(&f.cross, a, b).abs());
            hq = hq.max(at(&f.hess_q, a, b).abs());
            let mm = orc.mismatch[(a - 2) * mo + (b - 2)];
            om = om.max(mm[0]).max(mm[1]).max(mm[2]);
        }
    }
    Ok(GeoLevel {
        n,
        rh_max: rh,
        theta_spread: tmax - tmin,
        kappa_spread: kmax - kmin,
        sigma_cross: cross,
        hess_q: hq,
        oracle_mismatch: om,
    })
}

fn orders(c: &GeoLevel, f: &GeoLevel) -> GeoOrders {
    let o = crate::fd::order;
    GeoOrders {
        rh: o(c.rh_max, f.rh_max),
        theta: o(c.theta_spread, f.theta_spread),
        kappa: o(c.kappa_spread, f.kappa_spread),
        sigma_cross: o(c.sigma_cross, f.sigma_cross),
        hess_q: o(c.hess_q, f.hess_q),
        oracle: o(c.oracle_mismatch, f.oracle_mismatch),
    }
}

/// Verify on a fixed rectangle at each resample level.
pub fn geometry_convergence(gf: &GridField, levels: &[usize], frac: f64) -> Result<GeoConvergence> {
    let mut lv: Vec<usize> = levels.to_vec();
    lv.sort_unstable();
    lv.dedup();
    if lv.len() < 2 {
        return Err(SrhError::DegenerateStudy(format!("need at least two distinct resample levels, got {levels:?}")));
    }
    let mut chart = build_chart(gf)?;
    let rect = choose_rect(&chart, gf, frac)?;
    let mut out = Vec::new();
    for &n in &lv {
        chart.resampled = Some(resample(&chart, gf, rect, n)?);
        let rep = verify_ricci_hessian(&chart, &gf.profile)?;
        let orc = curvature_oracle_full(&chart)?;
        out.push(level_norms(&rep, &orc)?);
    }
    let k = out.len();
    Ok(GeoConvergence {
        rect,
        orders: orders(&out[k - 2], &out[k - 1]),
        coarse_orders: orders(&out[0], &out[1]),
        levels: out,
    })
}
