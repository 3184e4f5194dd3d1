//! generate → evolve → reconstruct → verify, with artifacts on disk.
//!
//! Layout of a run directory:
//! manifest.json, report.json, tl_<field>.csv (tau,lambda,value) for the grid and chart
//! fields, xu_<field>.csv (x,u,value) and tlr_<field>.csv (tau,lambda,value) for the
//! verification fields on the resampled grid.

use crate::config::{Checks, RunConfig};
use crate::error::{Result, SrhError};
use crate::evolution::{self, ConvergenceTable, GridField, LambdaGrid, Truncation};
use crate::geometry::{self, ChartData, GeoConvergence, GeometryReport};
use crate::profiles::ProfileParams;
use crate::series_oracle::{self, SeriesCheck};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "srh";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Radius of the series/grid comparison disc.
pub const SERIES_RADIUS: f64 = 0.1;

const GRID_FIELDS: [&str; 4] = ["Q", "S", "B", "G"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&SrhError> for ErrorInfo {
    fn from(e: &SrhError) -> Self {
        ErrorInfo { kind: e.kind().into(), message: e.to_string(), exit_code: e.exit_code() }
    }
}

/// Hard gates decide the exit code; soft gates are only reported.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub no_blowup: bool,
    pub positivity: bool,
    pub closedness: bool,
    /// Soft: min |Q_λ| > 0 on the resampled grid.
    pub nondegeneracy: bool,
    pub rh_residual_soft: bool,
    pub theta_kappa_soft: bool,
}

impl Gates {
    pub fn hard_ok(&self) -> bool {
        self.no_blowup && self.positivity && self.closedness
    }

    /// Exit code of the first failing hard gate.
    pub fn exit_code(&self) -> i32 {
        if !self.no_blowup {
            6
        } else if !self.positivity {
            5
        } else if !self.closedness {
            12
        } else {
            0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n_tau: usize,
    pub n_lam: usize,
    pub dt: f64,
    pub h: f64,
    pub tau_end: f64,
    pub min_q: f64,
    pub min_pi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub c1_final: f64,
    pub c2_final: f64,
    pub closedness: Option<f64>,
    pub rh_max: Option<f64>,
    pub theta_rel_spread: Option<f64>,
    pub kappa_rel_spread: Option<f64>,
    pub sigma_cross_check: Option<f64>,
    pub min_abs_q_lam: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    /// "ok", "truncated" or "failed".
    pub status: String,
    pub config: RunConfig,
    pub threads: usize,
    pub grid: Option<GridInfo>,
    pub growth_exponent: Option<f64>,
    pub truncated: Option<Truncation>,
    pub residual_summary: Option<ResidualSummary>,
    pub gates: Gates,
    pub series: Option<SeriesCheck>,
    pub convergence: Option<ConvergenceTable>,
    pub geometry_convergence: Option<GeoConvergence>,
    pub error: Option<ErrorInfo>,
    pub files: Vec<String>,
    pub timings_ms: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub truncated: bool,
    pub gates: Gates,
    pub geometry: Option<GeometryReport>,
    pub error: Option<ErrorInfo>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub report: Report,
    pub dir: PathBuf,
}

/// Cap the global rayon pool from SRH_THREADS, once.
pub fn configure_threads_from_env() -> usize {
    if let Some(n) = std::env::var("SRH_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    rayon::current_num_threads()
}

/// Shortest round-trip form, plain for moderate magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_csv3(path: &Path, header: &str, a: &[f64], b: &[f64], v: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(v.len() * 48);
    s.push_str(header);
    s.push('\n');
    for k in 0..v.len() {
        let _ = writeln!(s, "{},{},{}", fmt_num(a[k]), fmt_num(b[k]), fmt_num(v[k]));
    }
    fs::write(path, s)?;
    Ok(())
}

/// tl_<field>.csv for Q, S, B, G, Pi and, when given, the chart fields x, u, phi.
pub fn write_grid_csv(dir: &Path, gf: &GridField, chart: Option<&ChartData>) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let nl = gf.n_lam();
    let m = gf.q.len();
    let taus: Vec<f64> = (0..m).map(|k| gf.taus[k / nl]).collect();
    let lams: Vec<f64> = (0..m).map(|k| gf.lambda.at(k % nl)).collect();
    let pi = gf.pi();
    let mut fields: Vec<(&str, &[f64])> = vec![("Q", &gf.q), ("S", &gf.s), ("B", &gf.b), ("G", &gf.g), ("Pi", &pi)];
    if let Some(c) = chart {
        fields.push(("x", &c.x));
        fields.push(("u", &c.u));
        if let Some(p) = &c.phi {
            fields.push(("phi", p));
        }
    }
    let mut names = Vec::new();
    for (name, v) in fields {
        let f = format!("tl_{name}.csv");
        write_csv3(&dir.join(&f), "tau,lambda,value", &taus, &lams, v)?;
        names.push(f);
    }
    Ok(names)
}

pub fn write_geometry_csv(dir: &Path, rep: &GeometryReport) -> Result<Vec<String>> {
    let f = &rep.fields;
    let mut names = Vec::new();
    for (name, v) in f.named() {
        let a = format!("xu_{name}.csv");
        write_csv3(&dir.join(&a), "x,u,value", &f.x, &f.u, v)?;
        let b = format!("tlr_{name}.csv");
        write_csv3(&dir.join(&b), "tau,lambda,value", &f.tau, &f.lam, v)?;
        names.push(a);
        names.push(b);
    }
    Ok(names)
}

fn read_csv3(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = fs::read_to_string(path).map_err(|e| SrhError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 3];
        let mut it = line.split(',');
        for r in row.iter_mut() {
            let tok = it.next().ok_or_else(|| SrhError::Parse(format!("{}:{}: short row", path.display(), ln + 1)))?;
            *r = tok.trim().parse().map_err(|_| SrhError::Parse(format!("{}:{}: bad number '{tok}'", path.display(), ln + 1)))?;
        }
        out.push(row);
    }
    Ok(out)
}

/// Rebuild a GridField from tl_{Q,S,B,G}.csv and the profile in manifest.json.
/// Returns the checks from the stored config, or defaults.
pub fn load_grid_dir(dir: &Path) -> Result<(GridField, Checks)> {
    let mtext = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| SrhError::Io(format!("{}: {e}", dir.join("manifest.json").display())))?;
    let mv: serde_json::Value = serde_json::from_str(&mtext)?;
    let prof_v = mv.pointer("/config/profile").or_else(|| mv.get("profile")).ok_or_else(|| SrhError::Config("manifest has no profile".into()))?;
    let profile: ProfileParams = serde_json::from_value(prof_v.clone()).map_err(|e| SrhError::Config(e.to_string()))?;
    let checks: Checks = match mv.pointer("/config/checks").or_else(|| mv.get("checks")) {
        Some(c) => serde_json::from_value(c.clone()).map_err(|e| SrhError::Config(e.to_string()))?,
        None => Checks::default(),
    };
    let cols: Vec<Vec<[f64; 3]>> =
        GRID_FIELDS.iter().map(|f| read_csv3(&dir.join(format!("tl_{f}.csv")))).collect::<Result<_>>()?;
    let rows = &cols[0];
    if cols.iter().any(|c| c.len() != rows.len()) || rows.is_empty() {
        return Err(SrhError::Parse("grid CSV files disagree in length".into()));
    }
    let lam0 = rows[0][1];
    let nl = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
    if nl == 0 || rows.len() % nl != 0 {
        return Err(SrhError::Parse("grid CSV is not a full tensor grid".into()));
    }
    let nt = rows.len() / nl;
    let taus: Vec<f64> = (0..nt).map(|i| rows[i * nl][0]).collect();
    let lambda = LambdaGrid::new(lam0, rows[nl - 1][1], nl)?;
    let take = |c: usize| cols[c].iter().map(|r| r[2]).collect::<Vec<f64>>();
    let gf = GridField {
        profile,
        lambda,
        taus,
        q: take(0),
        s: take(1),
        b: take(2),
        g: take(3),
        history: Vec::new(),
        growth_exponent: mv.get("growth_exponent").and_then(|v| v.as_f64()).unwrap_or(0.0),
        truncated: None,
    };
    Ok((gf, checks))
}

/// Chart, resampling and verification with the hard-gate checks applied.
pub fn verify_grid(gf: &GridField, checks: &Checks) -> Result<(ChartData, GeometryReport)> {
    let mut chart = geometry::build_chart(gf)?;
    let res = chart.closedness.max();
    if !(res <= checks.closedness_tol) {
        return Err(SrhError::Closedness { residual: res, tol: checks.closedness_tol });
    }
    geometry::resample_chart(&mut chart, gf, checks.resample_n, checks.rect_frac)?;
    let rep = geometry::verify_ricci_hessian(&chart, &gf.profile)?;
    Ok((chart, rep))
}

pub fn gates_from_report(rep: &GeometryReport, checks: &Checks) -> Gates {
    Gates {
        no_blowup: true,
        positivity: rep.positivity.min_q > 0.0 && rep.positivity.min_pi > 0.0 && rep.positivity.metric_positive_definite,
        nondegeneracy: rep.nondegeneracy.min_abs_q_lam > 0.0,
        closedness: rep.closedness.max() <= checks.closedness_tol,
        rh_residual_soft: rep.rh_max <= checks.rh_tol,
        theta_kappa_soft: rep.theta.rel_spread <= checks.theta_kappa_tol && rep.kappa.rel_spread <= checks.theta_kappa_tol,
    }
}

pub fn grid_info(gf: &GridField) -> GridInfo {
    let pi = gf.pi();
    GridInfo {
        n_tau: gf.n_tau(),
        n_lam: gf.n_lam(),
        dt: gf.dt(),
        h: gf.lambda.h(),
        tau_end: *gf.taus.last().unwrap_or(&f64::NAN),
        min_q: gf.q.iter().copied().fold(f64::INFINITY, f64::min),
        min_pi: pi.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn flush(dir: &Path, m: &Manifest, r: &Report) -> Result<()> {
    write_json(&dir.join("manifest.json"), m)?;
    write_json(&dir.join("report.json"), r)
}

/// The full pipeline. Artifacts are flushed after every stage; the exit code is 0
/// iff every hard gate passes.
pub fn run(cfg: &RunConfig, dir: &Path) -> RunOutcome {
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: TOOL.into(),
        version: TOOL_VERSION.into(),
        status: "failed".into(),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        grid: None,
        growth_exponent: None,
        truncated: None,
        residual_summary: None,
        gates: Gates::default(),
        series: None,
        convergence: None,
        geometry_convergence: None,
        error: None,
        files: Vec::new(),
        timings_ms: Vec::new(),
    };
    let mut report = Report { schema_version: SCHEMA_VERSION, truncated: false, gates: Gates::default(), geometry: None, error: None };
    let code = match run_inner(cfg, dir, &mut manifest, &mut report) {
        Ok(()) if manifest.gates.hard_ok() => {
            manifest.status = "ok".into();
            0
        }
        Ok(()) => manifest.gates.exit_code(),
        Err(e) => {
            let info = ErrorInfo::from(&e);
            manifest.error = Some(info.clone());
            report.error = Some(info);
            if manifest.truncated.is_some() {
                manifest.status = "truncated".into();
                report.truncated = true;
            }
            e.exit_code()
        }
    };
    report.gates = manifest.gates.clone();
    if dir.exists() {
        let _ = flush(dir, &manifest, &report);
    }
    RunOutcome { exit_code: code, manifest, report, dir: dir.to_path_buf() }
}

fn run_inner(cfg: &RunConfig, dir: &Path, m: &mut Manifest, r: &mut Report) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut clock = Instant::now();
    let mut lap = |m: &mut Manifest, name: &str| {
        m.timings_ms.push((name.into(), clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };
    let gf = evolution::solve(cfg)?;
    lap(m, "solve");
    m.grid = Some(grid_info(&gf));
    m.growth_exponent = Some(gf.growth_exponent);
    m.truncated = gf.truncated.clone();
    let (c1, c2) = gf.final_constraints();
    m.residual_summary = Some(ResidualSummary {
        c1_final: c1,
        c2_final: c2,
        closedness: None,
        rh_max: None,
        theta_rel_spread: None,
        kappa_rel_spread: None,
        sigma_cross_check: None,
        min_abs_q_lam: None,
    });
    m.files = write_grid_csv(dir, &gf, None)?;
    m.gates.no_blowup = gf.truncated.is_none();
    flush(dir, m, r)?;
    gf.status()?;

    let checks = &cfg.checks;
    if let Some(order) = checks.series_order {
        let t = series_oracle::series_for_run(cfg, &gf, order, checks.series_lambda)?;
        m.series = Some(series_oracle::compare_with_grid(&t, &gf, SERIES_RADIUS)?);
        lap(m, "series");
    }
    if !checks.verify {
        m.gates.positivity = gf.q.iter().all(|q| *q > 0.0) && gf.pi().iter().all(|p| *p > 0.0);
        m.gates.nondegeneracy = true;
        m.gates.closedness = true;
        return Ok(());
    }
    let (chart, rep) = match verify_grid(&gf, checks) {
        Ok(v) => v,
        Err(e) => {
            if let SrhError::Closedness { .. } = e {
                m.gates.positivity = true;
            }
            return Err(e);
        }
    };
    lap(m, "verify");
    m.gates = gates_from_report(&rep, checks);
    if let Some(s) = m.residual_summary.as_mut() {
        s.closedness = Some(rep.closedness.max());
        s.rh_max = Some(rep.rh_max);
        s.theta_rel_spread = Some(rep.theta.rel_spread);
        s.kappa_rel_spread = Some(rep.kappa.rel_spread);
        s.sigma_cross_check = Some(rep.sigma_cross_check);
        s.min_abs_q_lam = Some(rep.nondegeneracy.min_abs_q_lam);
    }
    m.files = write_grid_csv(dir, &gf, Some(&chart))?;
    m.files.extend(write_geometry_csv(dir, &rep)?);
    r.geometry = Some(rep);
    r.gates = m.gates.clone();
    flush(dir, m, r)?;

    if let Some(levels) = &checks.convergence_levels {
        m.convergence = Some(evolution::convergence_study(cfg, levels)?);
        lap(m, "convergence");
    }
    if let Some(levels) = &checks.resample_levels {
        m.geometry_convergence = Some(geometry::geometry_convergence(&gf, levels, checks.rect_frac)?);
        lap(m, "geometry_convergence");
    }
    m.files.push("manifest.json".into());
    m.files.push("report.json".into());
    Ok(())
}
