use serde_json::{json, Value};
use srh_core::evolution::{GridField, LambdaGrid};
use srh_core::pipeline;
use srh_core::{Family, ProfileParams, StateZ};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn srh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srh")).args(args).env("SRH_THREADS", "2").output().expect("spawn srh")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn repo(p: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(p)
}

fn schema(name: &str) -> jsonschema::Validator {
    let s: Value = serde_json::from_str(&std::fs::read_to_string(repo(&format!("schema/{name}"))).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn small_const2() -> Value {
    json!({
        "profile": {"family": "const2", "theta": 0.02, "kappa": 0.01},
        "grid": {"tau0": 0.0, "tau1": 0.25, "lam0": 0.0, "lam1": 1.0, "n_lam": 65},
        "seeds": {"s_fn": "0.01*sin(lambda)", "b0": 0.005, "g0": "auto"},
        "checks": {"series_order": 6}
    })
}

#[test]
fn run_const2_writes_a_valid_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_const2());
    let out = tmp.path().join("run");
    let o = srh(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let errors: Vec<String> = schema("report.schema.json").iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["series"]["pass"], true);
    assert!(out.join("tl_Q.csv").exists() && out.join("xu_theta.csv").exists());
    let head = std::fs::read_to_string(out.join("xu_r1.csv")).unwrap();
    assert_eq!(head.lines().next(), Some("x,u,value"));
}

#[test]
fn shipped_configs_match_the_schema() {
    let v = schema("config.schema.json");
    for e in std::fs::read_dir(repo("configs")).unwrap() {
        let p = e.unwrap().path();
        let c: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert!(v.is_valid(&c), "{}", p.display());
        let parsed = srh_core::RunConfig::from_json(&c.to_string());
        assert_eq!(parsed.is_ok(), !p.ends_with("cot_pole.json"), "{}", p.display());
    }
}

#[test]
fn cot_pole_is_a_domain_error_before_solving() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = srh(&["run", "--config", repo("configs/cot_pole.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.join("tl_Q.csv").exists());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "DomainError");
}

#[test]
fn profiles_prints_coth_values() {
    let o = srh(&["profiles", "--family", "coth", "--tau", "1.0"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    let p = &v["points"][0];
    let a = 2.0 / 1f64.tanh();
    assert!((p["alpha"].as_f64().unwrap() - a).abs() < 1e-14);
    assert!((p["alpha1"].as_f64().unwrap() - (2.0 - a * a / 2.0)).abs() < 1e-13);
    assert_eq!(p["eps"], 1.0);
    assert_eq!(p["F"], 0.0);
}

#[test]
fn jets_reproduces_the_hand_fixture() {
    let o = srh(&["jets", "--state", "1,0,1,0", "--alpha", "2", "--q-partials", "0,1"]);
    assert!(o.status.success());
    let j = &stdout_json(&o)["jet"];
    let want = [("Q_tau", 0.0), ("S_tau", 1.0), ("B_tau", 2.0), ("G_tau", 0.0), ("Q_lam", 1.0), ("S_lam", 2.0), ("B_lam", -1.0), ("G_lam", 0.0)];
    for (k, v) in want {
        assert_eq!(j[k].as_f64().unwrap(), v, "{k}");
    }
    let o = srh(&["jets", "--state", "1,0,1,0", "--alpha", "2", "--direction", "0,1", "--rate", "1,2,-1,0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["jet"]["B_tau"], 2.0);
    let o = srh(&["jets", "--state", "1,0,1,0", "--alpha", "2", "--direction", "0,0", "--rate", "1,2,-1,0"]);
    assert_eq!(o.status.code(), Some(8));
}

#[test]
fn verify_flat_fixture_reports_zero_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let profile = ProfileParams::new(Family::Const2, 0.0, 0.0);
    let taus = (0..41).map(|i| 0.5 * i as f64 / 40.0).collect();
    let gf = GridField::constant(profile, LambdaGrid::new(0.0, 1.0, 41).unwrap(), taus, StateZ::new(1.0, 0.0, 1.0, 0.0));
    pipeline::write_grid_csv(tmp.path(), &gf, None).unwrap();
    let m = json!({"profile": profile, "checks": {"resample_n": 33}});
    std::fs::write(tmp.path().join("manifest.json"), m.to_string()).unwrap();
    let o = srh(&["verify", "--input", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let g = &v["geometry"];
    assert!(g["rh_max"].as_f64().unwrap() < 1e-8);
    assert!(g["theta"]["max_abs"].as_f64().unwrap() < 1e-8);
    assert!(g["closedness"]["x"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["gates"]["nondegeneracy"], false);
}

#[test]
fn convergence_prints_an_order_table() {
    let o = srh(&["convergence", "--levels", "33,65"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = &stdout_json(&o)["convergence"];
    assert_eq!(t["levels"].as_array().unwrap().len(), 2);
    assert!(t["order_c1"][0].as_f64().unwrap() > 3.0);
}

#[test]
fn usage_errors_exit_two_with_schema() {
    for args in [&["solve"][..], &["nonsense"], &["jets", "--state", "1,0", "--alpha", "2", "--q-partials", "0,1"]] {
        let o = srh(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("srh run configuration"));
    }
}
