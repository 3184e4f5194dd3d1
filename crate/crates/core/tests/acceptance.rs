//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

mod common;

use common::{max_abs, order, random_eval, random_state, FAMILIES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srh_core::evolution::{self, GridField};
use srh_core::geometry::{self, GeoConvergence};
use srh_core::jet_algebra::{invert_phi, phi_map, residual_consequences, residual_system, scale, solve_jet};
use srh_core::pipeline;
use srh_core::series_oracle;
use srh_core::{Direction, Jet1, ProfileEval, RunConfig, StateZ};
use std::path::Path;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(name: &str) -> RunConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_json(&std::fs::read_to_string(&p).expect("config file")).expect("config")
}

struct Run {
    name: &'static str,
    cfg: RunConfig,
    gf: GridField,
    conv: GeoConvergence,
    secs: f64,
}

fn geometric_runs() -> Vec<Run> {
    [("const2", "const2_soliton.json"), ("coth", "coth.json"), ("cot", "cot.json")]
        .into_iter()
        .map(|(name, file)| {
            let t = Instant::now();
            let cfg = config(file);
            let gf = evolution::solve(&cfg).expect("solve");
            let conv = geometry::geometry_convergence(&gf, &[33, 65, 129], cfg.checks.rect_frac).expect("geometry");
            Run { name, cfg, gf, conv, secs: t.elapsed().as_secs_f64() }
        })
        .collect()
}

fn profile_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 3];
    for fam in FAMILIES {
        for _ in 0..10_000 {
            let e = random_eval(fam, &mut rng);
            worst[0] = worst[0].max((e.alpha2 + e.alpha * e.alpha1).abs() / (1.0 + (e.alpha * e.alpha1).abs()));
            worst[1] = worst[1].max((2.0 * e.alpha1 + e.alpha * e.alpha - 4.0 * e.eps).abs() / (1.0 + e.alpha * e.alpha));
            worst[2] = worst[2].max((e.f2 + e.f * e.alpha1).abs() / (1.0 + e.f.abs() * (1.0 + e.alpha1.abs())));
        }
    }
    Outcome {
        pass: worst[0] <= 1e-12 && worst[1] <= 1e-12 && worst[2] <= 1e-10,
        detail: format!("5x10^4 points; max scaled |a''+aa'| {:.1e}, |2a'+a^2-4eps| {:.1e}, |F''+Fa'| {:.1e}", worst[0], worst[1], worst[2]),
    }
}

fn jet_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 3];
    for fam in FAMILIES {
        for _ in 0..1000 {
            let z = random_state(&mut rng);
            let e = random_eval(fam, &mut rng);
            let sc = scale(&z, &e);
            let j = solve_jet(&z, &e, rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)).expect("jet");
            worst[0] = worst[0].max(max_abs(&residual_system(&z, &j, &e)) / sc);
            worst[1] = worst[1].max(max_abs(&residual_consequences(&z, &j, &e)) / sc);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let d = Direction::new(a.cos(), a.sin());
            let back = invert_phi(&z, &e, &d, &phi_map(&j, &d), 1e-10).expect("invert");
            worst[2] = worst[2].max(back.max_abs_diff(&j) / sc);
        }
    }
    let hand = solve_jet(&StateZ::new(1.0, 0.0, 1.0, 0.0), &ProfileEval::constant(2.0, 0.0), 0.0, 1.0).expect("hand");
    let exact = hand == Jet1::from_array([0.0, 1.0, 2.0, 0.0, 1.0, 2.0, -1.0, 0.0]);
    Outcome {
        pass: worst[0] <= 1e-12 && worst[1] <= 1e-10 && worst[2] <= 1e-10 && exact,
        detail: format!(
            "5x1000 states; system {:.1e}, consequences {:.1e}, round trip {:.1e} (x scale); hand fixture exact: {exact}",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn constraint_propagation() -> Outcome {
    let cfg = RunConfig::from_json(
        r#"{"profile":{"family":"const2","theta":0,"kappa":0},
        "grid":{"tau0":0,"tau1":0.5,"lam0":0,"lam1":2,"n_lam":65},"seeds":{"b0":0.01,"g0":0}}"#,
    )
    .expect("config");
    let table = match evolution::convergence_study(&cfg, &[65, 129, 257]) {
        Ok(t) => t,
        Err(e) => return Outcome { pass: false, detail: format!("study failed: {e}") },
    };
    let c: Vec<f64> = table.levels.iter().map(|l| l.c1.abs().max(l.c2.abs())).collect();
    let orders: Vec<f64> = c.windows(2).map(|w| order(w[0], w[1])).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        pass: min_order >= 3.5 && c[2] <= 1e-6,
        detail: format!("max(|C1|,|C2|) = {:.2e}, {:.2e}, {:.2e}; orders {:.2}, {:.2}", c[0], c[1], c[2], orders[0], orders[1]),
    }
}

fn geometric_verification(runs: &[Run]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let o = &r.conv.orders;
        let ok = o.rh >= 1.9 && o.theta >= 1.9 && o.kappa >= 1.9 && o.sigma_cross >= 1.9 && r.secs < 120.0;
        pass &= ok;
        parts.push(format!(
            "{}: rh {:.2} theta {:.2} kappa {:.2} sigma {:.2} ({:.1}s)",
            r.name, o.rh, o.theta, o.kappa, o.sigma_cross, r.secs
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn nondegeneracy(runs: &[Run]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let extra: Vec<(&str, RunConfig)> = vec![("tanh", config("tanh.json")), ("reciprocal", config("reciprocal.json"))];
    let all = runs.iter().map(|r| (r.name, r.cfg.clone(), Some(&r.gf))).chain(extra.into_iter().map(|(n, c)| (n, c, None)));
    for (name, cfg, gf) in all {
        let owned;
        let gf = match gf {
            Some(g) => g,
            None => {
                owned = evolution::solve(&cfg).expect("solve");
                &owned
            }
        };
        match pipeline::verify_grid(gf, &cfg.checks) {
            Ok((_, rep)) => {
                let (p, n) = (&rep.positivity, &rep.nondegeneracy);
                let ok = p.min_q > 0.0 && p.min_pi > 0.0 && n.min_abs_q_lam > 0.0 && p.metric_positive_definite;
                pass &= ok;
                parts.push(format!(
                    "{name}: min Q {:.3}, min Pi {:.2e}, min |Q_lam| {:.2e}, zero fraction {}",
                    p.min_q, p.min_pi, n.min_abs_q_lam, n.zero_fraction
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn series_cross_validation(runs: &[Run]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let t = match series_oracle::series_for_run(&r.cfg, &r.gf, 8, None) {
            Ok(t) => t,
            Err(e) => {
                pass = false;
                parts.push(format!("{}: {e}", r.name));
                continue;
            }
        };
        let chk = series_oracle::compare_with_grid(&t, &r.gf, 0.1).expect("comparison");
        let (ts, ls) = t.center;
        let d1 = t.degree1();
        let jet = solve_jet(&t.eval(ts, ls).expect("center"), &r.cfg.profile.eval(ts).expect("profile"), d1.Q_tau, d1.Q_lam)
            .expect("jet");
        let jd = d1.max_abs_diff(&jet);
        pass &= chk.pass && chk.max_abs_err <= chk.bound && jd <= 1e-13;
        parts.push(format!(
            "{}: err {:.1e} <= {:.1e} on {} points, degree-1 vs jet {:.0e}",
            r.name, chk.max_abs_err, chk.bound, chk.n_points, jd
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn curvature_oracle(runs: &[Run]) -> Outcome {
    let orders: Vec<(&str, f64)> = runs.iter().map(|r| (r.name, r.conv.orders.oracle)).collect();
    let good = orders.iter().filter(|(_, o)| *o >= 1.9).count();
    Outcome {
        pass: good >= 2,
        detail: orders.iter().map(|(n, o)| format!("{n}: order {o:.2}")).collect::<Vec<_>>().join(", "),
    }
}

fn report(id: usize, name: &str, limit: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let mut o = f();
    let secs = t.elapsed().as_secs_f64();
    if let Some(l) = limit {
        if secs >= l {
            o.pass = false;
            o.detail.push_str(&format!("; over the {l}s budget"));
        }
    }
    println!("{} [{id}] {name}: {} ({secs:.2}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut ok = true;
    ok &= report(1, "profile identities", Some(1.0), profile_identities);
    ok &= report(2, "jet algebra", Some(1.0), jet_suite);
    ok &= report(3, "constraint propagation", Some(30.0), constraint_propagation);
    let t = Instant::now();
    let runs = geometric_runs();
    println!("      geometric runs built in {:.2}s", t.elapsed().as_secs_f64());
    ok &= report(4, "geometric verification", None, || geometric_verification(&runs));
    ok &= report(5, "nondegeneracy gates", None, || nondegeneracy(&runs));
    ok &= report(6, "series cross-validation", None, || series_cross_validation(&runs));
    ok &= report(7, "curvature oracle", None, || curvature_oracle(&runs));
    if !ok {
        std::process::exit(1);
    }
}
