use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use srh_core::evolution;
use srh_core::geometry;
use srh_core::jet_algebra::{self, Direction, RateZ, StateZ};
use srh_core::pipeline::{self, SERIES_RADIUS};
use srh_core::profiles::{Family, ProfileEval, ProfileParams};
use srh_core::series_oracle;
use srh_core::{Result, RunConfig, SrhError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const CONFIG_SCHEMA: &str = include_str!("../../../schema/config.schema.json");

/// Builds and verifies local special Ricci–Hessian Kähler metrics.
#[derive(Parser)]
#[command(name = "srh", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a profile and its valid intervals.
    Profiles(ProfilesArgs),
    /// Solve for the first jet at a point, or invert Φ from a directional rate.
    Jets(JetsArgs),
    /// Evolve the initial data and write the grid.
    Solve(ConfigArgs),
    /// Verify a grid directory written by solve or run.
    Verify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Build the Taylor oracle and compare it with the grid.
    Series {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = SERIES_RADIUS)]
        radius: f64,
    },
    /// Resolution study of the solver and, optionally, of the geometry.
    Convergence {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        resample_levels: Option<Vec<usize>>,
    },
    /// Full pipeline with artifacts.
    Run(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileSel {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    param: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    affine_c: f64,
    #[arg(long, default_value_t = 0.0)]
    affine_p: f64,
}

impl ProfileSel {
    fn params(&self) -> Result<Option<ProfileParams>> {
        let Some(name) = &self.family else { return Ok(None) };
        let mut p = ProfileParams::new(Family::from_name(name, self.param)?, self.theta, self.kappa);
        p.validate()?;
        if self.affine_c != 1.0 || self.affine_p != 0.0 {
            p = p.affine_modify(self.affine_c, self.affine_p)?;
        }
        Ok(Some(p))
    }
}

#[derive(Args)]
struct ProfilesArgs {
    #[command(flatten)]
    sel: ProfileSel,
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<f64>,
}

#[derive(Args)]
struct JetsArgs {
    /// Q,S,B,G
    #[arg(long, value_delimiter = ',', num_args = 1, required = true, allow_hyphen_values = true)]
    state: Vec<f64>,
    #[command(flatten)]
    sel: ProfileSel,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    alpha1: f64,
    #[arg(long = "F", default_value_t = 0.0, allow_hyphen_values = true)]
    f: f64,
    #[arg(long = "F1", default_value_t = 0.0, allow_hyphen_values = true)]
    f1: f64,
    /// Q_tau,Q_lam
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q_partials: Option<Vec<f64>>,
    /// tau_dot,lam_dot
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
    /// Q_dot,S_dot,B_dot,G_dot
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rate: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn usage(msg: &str) -> SrhError {
    SrhError::Config(format!("usage: {msg}"))
}

fn fixed<const N: usize>(v: &[f64], what: &str) -> std::result::Result<[f64; N], String> {
    v.try_into().map_err(|_| format!("--{what} takes {N} comma-separated numbers"))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let s = std::fs::read_to_string(path).map_err(|e| SrhError::Io(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&s)?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, out: &Option<PathBuf>) -> PathBuf {
    out.clone().or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("srh_out"))
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn profiles(a: &ProfilesArgs) -> Result<i32> {
    let p = a.sel.params()?.ok_or_else(|| usage("--family is required"))?;
    let points = a
        .tau
        .iter()
        .map(|&t| {
            let e = p.eval(t)?;
            Ok(json!({
                "tau": t, "alpha": e.alpha, "alpha1": e.alpha1, "alpha2": e.alpha2, "eps": e.eps,
                "F": e.f, "F1": e.f1, "F2": e.f2, "psi": e.psi, "pole_distance": p.pole_distance(t),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    print(&json!({"profile": p, "valid_intervals": p.valid_intervals(), "points": points}));
    Ok(0)
}

fn jets(a: &JetsArgs) -> Result<i32> {
    let s: [f64; 4] = fixed(&a.state, "state").map_err(|m| usage(&m))?;
    let z = StateZ::new(s[0], s[1], s[2], s[3]);
    let prof = match (a.sel.params()?, a.alpha) {
        (Some(p), None) => p.eval(a.tau.ok_or_else(|| usage("--family needs --tau"))?)?,
        (None, Some(alpha)) => ProfileEval {
            alpha,
            alpha1: a.alpha1,
            alpha2: -alpha * a.alpha1,
            f: a.f,
            f1: a.f1,
            f2: -a.f * a.alpha1,
            psi: 0.0,
            eps: (a.alpha1 + alpha * alpha / 2.0) / 2.0,
        },
        _ => return Err(usage("give exactly one of --alpha or --family")),
    };
    let jet = match (&a.q_partials, &a.direction, &a.rate) {
        (Some(qp), None, None) => {
            let qp: [f64; 2] = fixed(qp, "q-partials").map_err(|m| usage(&m))?;
            jet_algebra::solve_jet(&z, &prof, qp[0], qp[1])?
        }
        (None, Some(d), Some(r)) => {
            let d: [f64; 2] = fixed(d, "direction").map_err(|m| usage(&m))?;
            let r: [f64; 4] = fixed(r, "rate").map_err(|m| usage(&m))?;
            let d = Direction::new(d[0], d[1]);
            let r = RateZ::new(r[0], r[1], r[2], r[3]);
            jet_algebra::invert_phi(&z, &prof, &d, &r, a.tol)?
        }
        _ => return Err(usage("give --q-partials, or --direction with --rate")),
    };
    print(&json!({
        "state": z,
        "profile": prof,
        "jet": jet,
        "residual_system": jet_algebra::residual_system(&z, &jet, &prof),
        "residual_consequences": jet_algebra::residual_consequences(&z, &jet, &prof),
    }));
    Ok(0)
}

fn solve(a: &ConfigArgs) -> Result<i32> {
    let cfg = load_config(&a.config)?;
    let dir = out_dir(&cfg, &a.out);
    std::fs::create_dir_all(&dir)?;
    let gf = evolution::solve(&cfg)?;
    let mut files = pipeline::write_grid_csv(&dir, &gf, None)?;
    let (c1, c2) = gf.final_constraints();
    let summary = json!({
        "config": cfg,
        "grid": pipeline::grid_info(&gf),
        "growth_exponent": gf.growth_exponent,
        "truncated": gf.truncated,
        "c1_final": c1,
        "c2_final": c2,
    });
    pipeline::write_json(&dir.join("manifest.json"), &summary)?;
    files.push("manifest.json".into());
    print(&json!({"dir": dir, "files": files, "summary": summary}));
    gf.status()?;
    Ok(0)
}

fn verify(input: &Path) -> Result<i32> {
    let (gf, checks) = pipeline::load_grid_dir(input)?;
    let (_, rep) = pipeline::verify_grid(&gf, &checks)?;
    let gates = pipeline::gates_from_report(&rep, &checks);
    let code = gates.exit_code();
    print(&json!({"gates": gates, "geometry": rep}));
    Ok(code)
}

fn series(config: &Path, order: Option<usize>, lambda: Option<f64>, radius: f64) -> Result<i32> {
    let cfg = load_config(config)?;
    let order = order.or(cfg.checks.series_order).unwrap_or(8);
    let gf = evolution::solve(&cfg)?;
    gf.status()?;
    let t = series_oracle::series_for_run(&cfg, &gf, order, lambda.or(cfg.checks.series_lambda))?;
    let check = series_oracle::compare_with_grid(&t, &gf, radius)?;
    let code = if check.pass { 0 } else { 1 };
    print(&json!({"series": t, "check": check}));
    Ok(code)
}

const DEFAULT_STUDY: &str = r#"{"profile":{"family":"const2","theta":0,"kappa":0},
"grid":{"tau0":0,"tau1":0.5,"lam0":0,"lam1":2,"n_lam":65},"seeds":{"b0":0.01}}"#;

fn convergence(config: &Option<PathBuf>, levels: &[usize], resample: &Option<Vec<usize>>) -> Result<i32> {
    let cfg = match config {
        Some(p) => load_config(p)?,
        None => RunConfig::from_json(DEFAULT_STUDY)?,
    };
    let table = evolution::convergence_study(&cfg, levels)?;
    let geo = match resample {
        Some(rl) => {
            let gf = evolution::solve(&cfg.with_n_lam(*levels.iter().max().expect("levels")))?;
            gf.status()?;
            Some(geometry::geometry_convergence(&gf, rl, cfg.checks.rect_frac)?)
        }
        None => None,
    };
    print(&json!({"convergence": table, "geometry_convergence": geo}));
    Ok(0)
}

fn run(a: &ConfigArgs) -> Result<i32> {
    let cfg = load_config(&a.config)?;
    let dir = out_dir(&cfg, &a.out);
    let out = pipeline::run(&cfg, &dir);
    print(&json!({"dir": out.dir, "exit_code": out.exit_code, "status": out.manifest.status, "gates": out.manifest.gates, "error": out.manifest.error}));
    Ok(out.exit_code)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Profiles(a) => profiles(a),
        Cmd::Jets(a) => jets(a),
        Cmd::Solve(a) => solve(a),
        Cmd::Verify { input } => verify(input),
        Cmd::Series { config, order, lambda, radius } => series(config, *order, *lambda, *radius),
        Cmd::Convergence { config, levels, resample_levels } => convergence(config, levels, resample_levels),
        Cmd::Run(a) => run(a),
    }
}

fn usage_exit(msg: &str) -> ExitCode {
    eprintln!("{msg}");
    eprintln!("config schema:\n{CONFIG_SCHEMA}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return usage_exit(&e.render().to_string()),
    };
    pipeline::configure_threads_from_env();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(SrhError::Config(m)) if m.starts_with("usage: ") => usage_exit(&m),
        Err(e) => {
            let info = pipeline::ErrorInfo::from(&e);
            eprintln!("{}", serde_json::to_string(&info).expect("json"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
