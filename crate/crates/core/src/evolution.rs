//! Initial data on τ = τ₀ from the two λ-constraints, method-of-lines
//! evolution in τ, and constraint monitoring.

use crate::config::{RunConfig, G0};
use crate::error::{Result, SrhError};
use crate::expr::Expr;
use crate::fd::{d1_4, d1_4_peak_wavenumber, order};
use crate::jet_algebra::StateZ;
use crate::profiles::{ProfileEval, ProfileParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Columns excluded from reported norms on each side.
pub const EDGE: usize = 4;

const PAR_MIN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lam0: f64,
    pub lam1: f64,
    pub n: usize,
}

impl LambdaGrid {
    pub fn new(lam0: f64, lam1: f64, n: usize) -> Result<Self> {
        if n < 5 || !(lam1 > lam0) {
            return Err(SrhError::Config(format!("lambda grid [{lam0}, {lam1}] with {n} points")));
        }
        Ok(LambdaGrid { lam0, lam1, n })
    }

    pub fn h(&self) -> f64 {
        (self.lam1 - self.lam0) / (self.n - 1) as f64
    }

    pub fn at(&self, j: usize) -> f64 {
        self.lam0 + j as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.at(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub tau: f64,
    pub grid: LambdaGrid,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceDiag {
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub min_q: f64,
    pub min_pi: f64,
    pub min_abs_q_lam: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub kind: String,
    pub tau: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub profile: ProfileParams,
    pub lambda: LambdaGrid,
    pub taus: Vec<f64>,
    /// Row-major [τ index][λ index].
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
    pub history: Vec<SliceDiag>,
    /// Σ over steps of max_λ(√Π/Q)·dt·k_peak/h: log of the worst-case amplification
    /// of a grid-scale perturbation by the elliptic principal part.
    pub growth_exponent: f64,
    pub truncated: Option<Truncation>,
}

impl Slice {
    pub fn z(&self, j: usize) -> StateZ {
        StateZ::new(self.q[j], self.s[j], self.b[j], self.g[j])
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    fn first_inadmissible(&self) -> Option<(usize, String)> {
        (0..self.len()).find_map(|j| {
            let z = self.z(j);
            if !(z.Q > 0.0) {
                Some((j, format!("Q = {:e}", z.Q)))
            } else if !(z.pi() > 0.0) {
                Some((j, format!("Pi = {:e}", z.pi())))
            } else {
                None
            }
        })
    }

    pub fn diag(&self, prof: &ProfileEval) -> SliceDiag {
        let (c1, c2) = constraint_norms(self, prof);
        let h = self.grid.h();
        let ql = crate::fd::d1_4_vec(&self.q, h);
        let n = self.len();
        let inner = EDGE.min(n / 2)..n - EDGE.min(n / 2);
        SliceDiag {
            tau: self.tau,
            c1,
            c2,
            min_q: self.q.iter().copied().fold(f64::INFINITY, f64::min),
            min_pi: (0..n).map(|j| self.z(j).pi()).fold(f64::INFINITY, f64::min),
            min_abs_q_lam: ql[inner].iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
        }
    }
}

impl GridField {
    /// A field equal to `z` everywhere; for verifier fixtures.
    pub fn constant(profile: ProfileParams, lambda: LambdaGrid, taus: Vec<f64>, z: StateZ) -> Self {
        let m = taus.len() * lambda.n;
        GridField {
            profile,
            lambda,
            taus,
            q: vec![z.Q; m],
            s: vec![z.S; m],
            b: vec![z.B; m],
            g: vec![z.G; m],
            history: Vec::new(),
            growth_exponent: 0.0,
            truncated: None,
        }
    }

    pub fn n_tau(&self) -> usize {
        self.taus.len()
    }

    pub fn n_lam(&self) -> usize {
        self.lambda.n
    }

    pub fn dt(&self) -> f64 {
        if self.taus.len() < 2 {
            0.0
        } else {
            (self.taus[self.taus.len() - 1] - self.taus[0]) / (self.taus.len() - 1) as f64
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.lambda.n + j
    }

    pub fn z(&self, i: usize, j: usize) -> StateZ {
        let k = self.idx(i, j);
        StateZ::new(self.q[k], self.s[k], self.b[k], self.g[k])
    }

    pub fn slice(&self, i: usize) -> Slice {
        let n = self.lambda.n;
        let r = i * n..(i + 1) * n;
        Slice {
            tau: self.taus[i],
            grid: self.lambda,
            q: self.q[r.clone()].to_vec(),
            s: self.s[r.clone()].to_vec(),
            b: self.b[r.clone()].to_vec(),
            g: self.g[r].to_vec(),
        }
    }

    pub fn last(&self) -> Slice {
        self.slice(self.n_tau() - 1)
    }

    pub fn pi(&self) -> Vec<f64> {
        self.q.iter().zip(&self.b).zip(&self.s).map(|((q, b), s)| q * b - s * s).collect()
    }

    /// The marker as an error, if the run was cut short.
    pub fn status(&self) -> Result<()> {
        match &self.truncated {
            None => Ok(()),
            Some(t) if t.kind == "BlowupError" => Err(SrhError::Blowup { tau: t.tau }),
            Some(t) => Err(SrhError::Positivity { what: "tau".into(), at: t.tau, detail: t.message.clone() }),
        }
    }

    pub fn final_constraints(&self) -> (f64, f64) {
        self.history.last().map_or((f64::NAN, f64::NAN), |d| (d.c1, d.c2))
    }
}

/// Max over interior points of (|C1|, |C2|).
pub fn constraint_norms(sl: &Slice, p: &ProfileEval) -> (f64, f64) {
    let n = sl.len();
    let h = sl.grid.h();
    let mut d = vec![vec![0.0; n]; 4];
    for (k, f) in [&sl.q, &sl.s, &sl.b, &sl.g].iter().enumerate() {
        d1_4(f, h, &mut d[k]);
    }
    let e = EDGE.min(n / 2);
    let mut m = (0.0f64, 0.0f64);
    for j in e..n - e {
        let (q, s, b, g) = (sl.q[j], sl.s[j], sl.b[j], sl.g[j]);
        let c1 = q * d[2][j] + b * d[0][j] - 2.0 * s * d[1][j] - q * g + s * p.f;
        let c2 = d[3][j] - q * p.alpha1 - p.f1;
        m.0 = m.0.max(c1.abs());
        m.1 = m.1.max(c2.abs());
    }
    m
}

fn integrate_constraints(p: &ProfileEval, grid: &LambdaGrid, q: &Expr, s: &Expr, b0: f64, g0: f64) -> (Vec<f64>, Vec<f64>) {
    let h = grid.h();
    let rhs = |l: f64, y: [f64; 2]| {
        let (qv, ql) = q.eval_d1(l);
        let (sv, sl) = s.eval_d1(l);
        let [b, g] = y;
        [(qv * g - sv * p.f - ql * b + 2.0 * sv * sl) / qv, qv * p.alpha1 + p.f1]
    };
    let mut bs = Vec::with_capacity(grid.n);
    let mut gs = Vec::with_capacity(grid.n);
    let mut y = [b0, g0];
    bs.push(y[0]);
    gs.push(y[1]);
    for j in 0..grid.n - 1 {
        let l = grid.at(j);
        let k1 = rhs(l, y);
        let k2 = rhs(l + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(l + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(l + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for c in 0..2 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        bs.push(y[0]);
        gs.push(y[1]);
    }
    (bs, gs)
}

/// The g0 for which Σ Q·G = 0 on the slice.
pub fn centred_g0(prof: &ProfileParams, tau0: f64, grid: &LambdaGrid, q_fn: &Expr, s_fn: &Expr) -> Result<f64> {
    let p = prof.eval(tau0)?;
    let (_, g) = integrate_constraints(&p, grid, q_fn, s_fn, 1.0, 0.0);
    let qs: Vec<f64> = grid.points().iter().map(|&l| q_fn.eval(l)).collect();
    let num: f64 = qs.iter().zip(&g).map(|(q, g)| q * g).sum();
    let den: f64 = qs.iter().sum();
    Ok(-num / den)
}

pub fn generate_initial_data(
    prof: &ProfileParams,
    tau0: f64,
    grid: &LambdaGrid,
    q_fn: &Expr,
    s_fn: &Expr,
    b0: f64,
    g0: f64,
) -> Result<Slice> {
    let p = prof.eval(tau0)?;
    let lams = grid.points();
    let mut q = Vec::with_capacity(grid.n);
    let mut s = Vec::with_capacity(grid.n);
    let mut min_ql = f64::INFINITY;
    for &l in &lams {
        let (qv, ql) = q_fn.eval_d1(l);
        q.push(qv);
        s.push(s_fn.eval(l));
        min_ql = min_ql.min(ql.abs());
        if !(qv > 0.0) {
            return Err(SrhError::Positivity { what: "lambda".into(), at: l, detail: format!("Q = {qv:e}") });
        }
    }
    if !(min_ql > 1e-12) {
        return Err(SrhError::Admissibility(format!("Q_lambda vanishes on the grid (min |Q_lambda| = {min_ql:e})")));
    }
    let (b, g) = integrate_constraints(&p, grid, q_fn, s_fn, b0, g0);
    let sl = Slice { tau: tau0, grid: *grid, q, s, b, g };
    if let Some((j, what)) = sl.first_inadmissible() {
        return Err(SrhError::Positivity { what: "lambda".into(), at: lams[j], detail: what });
    }
    Ok(sl)
}

/// Initial slice for a run configuration.
pub fn initial_from_config(cfg: &RunConfig) -> Result<Slice> {
    let g = &cfg.grid;
    let grid = LambdaGrid::new(g.lam0, g.lam1, g.n_lam)?;
    let (q, s) = (cfg.q_expr()?, cfg.s_expr()?);
    let g0 = match cfg.seeds.g0 {
        G0::Value(v) => v,
        G0::Auto(_) => centred_g0(&cfg.profile, g.tau0, &grid, &q, &s)?,
    };
    generate_initial_data(&cfg.profile, g.tau0, &grid, &q, &s, cfg.seeds.b0, g0)
}

struct Work {
    s_l: Vec<f64>,
    b_l: Vec<f64>,
}

/// Q_τ = Qα+F−S_λ, S_τ = Sα+G−B_λ, B_τ = (S·S_τ+B·S_λ−S·B_λ)/Q, G_τ = −Sα′.
fn rhs(p: &ProfileEval, h: f64, z: &[Vec<f64>; 4], w: &mut Work, out: &mut [Vec<f64>; 4]) {
    d1_4(&z[1], h, &mut w.s_l);
    d1_4(&z[2], h, &mut w.b_l);
    let n = z[0].len();
    let (sl, bl) = (&w.s_l, &w.b_l);
    let vals: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .with_min_len(PAR_MIN)
        .map(|j| {
            let (q, s, b, g) = (z[0][j], z[1][j], z[2][j], z[3][j]);
            let qt = q * p.alpha + p.f - sl[j];
            let st = s * p.alpha + g - bl[j];
            let bt = (s * st + b * sl[j] - s * bl[j]) / q;
            [qt, st, bt, -s * p.alpha1]
        })
        .collect();
    for (j, v) in vals.into_iter().enumerate() {
        for c in 0..4 {
            out[c][j] = v[c];
        }
    }
}

/// Default step count for dt = factor·h.
pub fn default_steps(tau0: f64, tau1: f64, h: f64, factor: f64) -> usize {
    ((tau1 - tau0).abs() / (factor * h)).ceil() as usize
}

/// Classical RK4 in τ. Failures of positivity or finiteness stop the march and are
/// recorded in `truncated`; the slices computed so far are kept.
pub fn evolve(initial: &Slice, prof: &ProfileParams, tau1: f64, n_steps: usize) -> Result<GridField> {
    let tau0 = initial.tau;
    prof.check_window(tau0, tau1)?;
    if n_steps == 0 && tau1 != tau0 {
        return Err(SrhError::Config("n_steps = 0 with tau1 != tau0".into()));
    }
    let n = initial.len();
    let h = initial.grid.h();
    let dt = if n_steps == 0 { 0.0 } else { (tau1 - tau0) / n_steps as f64 };
    let kpk = d1_4_peak_wavenumber();

    let mut gf = GridField {
        profile: *prof,
        lambda: initial.grid,
        taus: vec![tau0],
        q: initial.q.clone(),
        s: initial.s.clone(),
        b: initial.b.clone(),
        g: initial.g.clone(),
        history: vec![initial.diag(&prof.eval(tau0)?)],
        growth_exponent: 0.0,
        truncated: None,
    };

    let mut z = [initial.q.clone(), initial.s.clone(), initial.b.clone(), initial.g.clone()];
    let mut w = Work { s_l: vec![0.0; n], b_l: vec![0.0; n] };
    let zero = || [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (zero(), zero(), zero(), zero(), zero());
    let stage = |z: &[Vec<f64>; 4], k: &[Vec<f64>; 4], a: f64, out: &mut [Vec<f64>; 4]| {
        for c in 0..4 {
            for j in 0..n {
                out[c][j] = z[c][j] + a * k[c][j];
            }
        }
    };

    for step in 0..n_steps {
        let t = tau0 + step as f64 * dt;
        let worst = (0..n)
            .map(|j| {
                let pi = z[0][j] * z[2][j] - z[1][j] * z[1][j];
                pi.max(0.0).sqrt() / z[0][j]
            })
            .fold(0.0, f64::max);
        gf.growth_exponent += worst * dt.abs() * kpk / h;

        let (p0, ph, p1) = (prof.eval(t)?, prof.eval(t + 0.5 * dt)?, prof.eval(t + dt)?);
        rhs(&p0, h, &z, &mut w, &mut k1);
        stage(&z, &k1, 0.5 * dt, &mut tmp);
        rhs(&ph, h, &tmp, &mut w, &mut k2);
        stage(&z, &k2, 0.5 * dt, &mut tmp);
        rhs(&ph, h, &tmp, &mut w, &mut k3);
        stage(&z, &k3, dt, &mut tmp);
        rhs(&p1, h, &tmp, &mut w, &mut k4);
        for c in 0..4 {
            for j in 0..n {
                z[c][j] += dt / 6.0 * (k1[c][j] + 2.0 * k2[c][j] + 2.0 * k3[c][j] + k4[c][j]);
            }
        }
        let tn = if step + 1 == n_steps { tau1 } else { tau0 + (step + 1) as f64 * dt };
        if z.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            gf.truncated = Some(Truncation { kind: "BlowupError".into(), tau: tn, message: "non-finite state".into() });
            break;
        }
        let sl = Slice { tau: tn, grid: initial.grid, q: z[0].clone(), s: z[1].clone(), b: z[2].clone(), g: z[3].clone() };
        if let Some((j, what)) = sl.first_inadmissible() {
            gf.truncated = Some(Truncation {
                kind: "PositivityError".into(),
                tau: tn,
                message: format!("{what} at lambda = {}", initial.grid.at(j)),
            });
            break;
        }
        let d = sl.diag(&p1);
        if d.min_abs_q_lam == 0.0 {
            gf.truncated =
                Some(Truncation { kind: "PositivityError".into(), tau: tn, message: "Q_lambda = 0".into() });
            break;
        }
        gf.history.push(d);
        gf.taus.push(tn);
        gf.q.extend_from_slice(&z[0]);
        gf.s.extend_from_slice(&z[1]);
        gf.b.extend_from_slice(&z[2]);
        gf.g.extend_from_slice(&z[3]);
    }
    Ok(gf)
}

/// Initial data plus evolution for a configuration.
pub fn solve(cfg: &RunConfig) -> Result<GridField> {
    cfg.validate()?;
    let init = initial_from_config(cfg)?;
    let g = &cfg.grid;
    let steps = match g.n_tau {
        Some(nt) => nt - 1,
        None => default_steps(g.tau0, g.tau1, init.grid.h(), g.dt_factor),
    };
    evolve(&init, &cfg.profile, g.tau1, steps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n_lam: usize,
    pub n_tau: usize,
    pub c1: f64,
    pub c2: f64,
    pub min_pi: f64,
    pub growth_exponent: f64,
    /// max |Z − Z_next| at the shared λ points of the final slice.
    pub diff_to_next: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub levels: Vec<LevelResult>,
    /// Orders between consecutive levels.
    pub order_c1: Vec<f64>,
    pub order_c2: Vec<f64>,
    pub order_solution: Vec<f64>,
    pub reliable: bool,
    pub note: Option<String>,
}

/// Runs the configuration at each λ resolution with proportional τ-steps.
pub fn convergence_study(cfg: &RunConfig, levels: &[usize]) -> Result<ConvergenceTable> {
    let mut lv = levels.to_vec();
    lv.sort_unstable();
    if lv.len() < 2 {
        return Err(SrhError::DegenerateStudy("need at least two resolutions".into()));
    }
    if lv.windows(2).any(|w| w[0] == w[1]) {
        return Err(SrhError::DegenerateStudy(format!("repeated resolution in {levels:?}")));
    }
    let (q, s) = (cfg.q_expr()?, cfg.s_expr()?);
    let mut runs = Vec::new();
    for &n in &lv {
        let grid = LambdaGrid::new(cfg.grid.lam0, cfg.grid.lam1, n)?;
        let g0 = match cfg.seeds.g0 {
            G0::Value(v) => v,
            G0::Auto(_) => centred_g0(&cfg.profile, cfg.grid.tau0, &grid, &q, &s)?,
        };
        let init = generate_initial_data(&cfg.profile, cfg.grid.tau0, &grid, &q, &s, cfg.seeds.b0, g0)?;
        let steps = default_steps(cfg.grid.tau0, cfg.grid.tau1, grid.h(), cfg.grid.dt_factor);
        let gf = evolve(&init, &cfg.profile, cfg.grid.tau1, steps)?;
        gf.status()?;
        runs.push(gf);
    }
    let mut levels_out = Vec::new();
    for (k, gf) in runs.iter().enumerate() {
        let (c1, c2) = gf.final_constraints();
        let diff = runs.get(k + 1).map(|fine| final_slice_diff(gf, fine));
        levels_out.push(LevelResult {
            n_lam: gf.n_lam(),
            n_tau: gf.n_tau(),
            c1,
            c2,
            min_pi: gf.history.iter().map(|d| d.min_pi).fold(f64::INFINITY, f64::min),
            growth_exponent: gf.growth_exponent,
            diff_to_next: diff.flatten(),
        });
    }
    let ord = |f: &dyn Fn(&LevelResult) -> Option<f64>| -> Vec<f64> {
        levels_out.windows(2).filter_map(|w| Some(order(f(&w[0])?, f(&w[1])?))).collect()
    };
    let order_c1 = ord(&|l| Some(l.c1));
    let order_c2 = ord(&|l| Some(l.c2));
    let order_solution = ord(&|l| l.diff_to_next);
    let min_n = lv[0];
    let reliable = min_n >= 33 && lv.windows(2).all(|w| (w[1] - 1) % (w[0] - 1) == 0);
    let note = (!reliable).then(|| format!("coarsest level {min_n} < 33 or levels not nested; orders unreliable"));
    Ok(ConvergenceTable { levels: levels_out, order_c1, order_c2, order_solution, reliable, note })
}

fn final_slice_diff(coarse: &GridField, fine: &GridField) -> Option<f64> {
    let (nc, nf) = (coarse.n_lam(), fine.n_lam());
    if (nf - 1) % (nc - 1) != 0 {
        return None;
    }
    let r = (nf - 1) / (nc - 1);
    let (a, b) = (coarse.last(), fine.last());
    let e = EDGE.min(nc / 2);
    let mut m = 0.0f64;
    for j in e..nc - e {
        let (x, y) = (a.z(j).as_array(), b.z(j * r).as_array());
        for c in 0..4 {
            m = m.max((x[c] - y[c]).abs());
        }
    }
    Some(m)
}
