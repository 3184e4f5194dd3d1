use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use srh_core::config::Checks;
use srh_core::evolution::{self, GridField};
use srh_core::jet_algebra::{self, Direction, Jet1, RateZ, StateZ};
use srh_core::pipeline;
use srh_core::profiles::{self, Family, ProfileEval, ProfileParams};
use srh_core::series_oracle;
use srh_core::{RunConfig, SrhError};
use std::path::Path;

create_exception!(_srh, SrhException, PyException);

fn err(e: SrhError) -> PyErr {
    SrhException::new_err(format!("{}: {e}", e.kind()))
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| SrhException::new_err(e.to_string()))
}

#[pyclass(name = "Profile", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProfile(ProfileParams);

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (family, theta=0.0, kappa=0.0, param=None))]
    fn new(family: &str, theta: f64, kappa: f64, param: Option<f64>) -> PyResult<Self> {
        let p = ProfileParams::new(Family::from_name(family, param).map_err(err)?, theta, kappa);
        p.validate().map_err(err)?;
        Ok(PyProfile(p))
    }

    fn eval(&self, tau: f64) -> PyResult<PyEval> {
        profiles::eval(&self.0, tau).map(PyEval).map_err(err)
    }

    fn affine_modify(&self, c: f64, p: f64) -> PyResult<Self> {
        profiles::affine_modify(&self.0, c, p).map(PyProfile).map_err(err)
    }

    fn pole_distance(&self, tau: f64) -> f64 {
        self.0.pole_distance(tau)
    }

    fn valid_intervals_json(&self) -> PyResult<String> {
        to_json(&profiles::valid_intervals(&self.0))
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Profile({}, theta={}, kappa={})", self.0.family.name(), self.0.theta, self.0.kappa)
    }
}

#[pyclass(name = "ProfileEval", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEval(ProfileEval);

#[pymethods]
impl PyEval {
    /// α, F with zero derivatives.
    #[staticmethod]
    fn constant(alpha: f64, f: f64) -> Self {
        PyEval(ProfileEval::constant(alpha, f))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }
    #[getter]
    fn alpha1(&self) -> f64 {
        self.0.alpha1
    }
    #[getter]
    fn alpha2(&self) -> f64 {
        self.0.alpha2
    }
    #[getter(F)]
    fn f(&self) -> f64 {
        self.0.f
    }
    #[getter(F1)]
    fn f1(&self) -> f64 {
        self.0.f1
    }
    #[getter(F2)]
    fn f2(&self) -> f64 {
        self.0.f2
    }
    #[getter]
    fn psi(&self) -> f64 {
        self.0.psi
    }
    #[getter]
    fn eps(&self) -> f64 {
        self.0.eps
    }
}

#[pyclass(name = "State", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState(StateZ);

#[pymethods]
impl PyState {
    #[new]
    #[allow(non_snake_case)]
    fn new(Q: f64, S: f64, B: f64, G: f64) -> Self {
        PyState(StateZ::new(Q, S, B, G))
    }

    fn pi(&self) -> f64 {
        self.0.pi()
    }

    fn is_admissible(&self) -> bool {
        self.0.is_admissible()
    }

    fn to_list(&self) -> Vec<f64> {
        self.0.as_array().to_vec()
    }
}

#[pyclass(name = "Jet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyJet(Jet1);

#[pymethods]
impl PyJet {
    /// [Q_tau, S_tau, B_tau, G_tau, Q_lam, S_lam, B_lam, G_lam]
    fn to_list(&self) -> Vec<f64> {
        self.0.to_array().to_vec()
    }

    fn max_abs_diff(&self, other: &PyJet) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    fn __repr__(&self) -> String {
        format!("Jet({:?})", self.0.to_array())
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
struct PyGrid(GridField);

#[pymethods]
impl PyGrid {
    #[getter]
    fn n_tau(&self) -> usize {
        self.0.n_tau()
    }
    #[getter]
    fn n_lam(&self) -> usize {
        self.0.n_lam()
    }
    #[getter]
    fn taus(&self) -> Vec<f64> {
        self.0.taus.clone()
    }
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.0.lambda.points()
    }
    #[getter]
    fn growth_exponent(&self) -> f64 {
        self.0.growth_exponent
    }
    #[getter]
    fn truncated(&self) -> bool {
        self.0.truncated.is_some()
    }

    /// Row-major (τ, λ) values of "Q", "S", "B", "G" or "Pi".
    fn field(&self, name: &str) -> PyResult<Vec<f64>> {
        match name {
            "Q" => Ok(self.0.q.clone()),
            "S" => Ok(self.0.s.clone()),
            "B" => Ok(self.0.b.clone()),
            "G" => Ok(self.0.g.clone()),
            "Pi" => Ok(self.0.pi()),
            _ => Err(SrhException::new_err(format!("unknown field {name}"))),
        }
    }

    fn final_constraints(&self) -> (f64, f64) {
        self.0.final_constraints()
    }
}

fn config(json: &str) -> PyResult<RunConfig> {
    let cfg = RunConfig::from_json(json).map_err(err)?;
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pyfunction]
fn solve_jet(state: &PyState, prof: &PyEval, q_tau: f64, q_lam: f64) -> PyResult<PyJet> {
    jet_algebra::solve_jet(&state.0, &prof.0, q_tau, q_lam).map(PyJet).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (state, prof, direction, rate, tol=1e-10))]
fn invert_phi(state: &PyState, prof: &PyEval, direction: (f64, f64), rate: [f64; 4], tol: f64) -> PyResult<PyJet> {
    let d = Direction::new(direction.0, direction.1);
    let r = RateZ::new(rate[0], rate[1], rate[2], rate[3]);
    jet_algebra::invert_phi(&state.0, &prof.0, &d, &r, tol).map(PyJet).map_err(err)
}

#[pyfunction]
fn phi_map(jet: &PyJet, direction: (f64, f64)) -> [f64; 4] {
    let r = jet_algebra::phi_map(&jet.0, &Direction::new(direction.0, direction.1));
    [r.Q_dot, r.S_dot, r.B_dot, r.G_dot]
}

/// Six system residuals followed by the two consequences.
#[pyfunction]
fn residuals(state: &PyState, jet: &PyJet, prof: &PyEval) -> Vec<f64> {
    let mut v = jet_algebra::residual_system(&state.0, &jet.0, &prof.0).to_vec();
    v.extend(jet_algebra::residual_consequences(&state.0, &jet.0, &prof.0));
    v
}

#[pyfunction]
fn solve(py: Python<'_>, config_json: &str) -> PyResult<PyGrid> {
    let cfg = config(config_json)?;
    py.detach(|| evolution::solve(&cfg)).map(PyGrid).map_err(err)
}

/// GeometryReport as JSON; `checks_json` overrides the default checks.
#[pyfunction]
#[pyo3(signature = (grid, checks_json=None))]
fn verify(py: Python<'_>, grid: &PyGrid, checks_json: Option<&str>) -> PyResult<String> {
    let checks: Checks = match checks_json {
        Some(s) => serde_json::from_str(s).map_err(|e| SrhException::new_err(e.to_string()))?,
        None => Checks::default(),
    };
    let rep = py.detach(|| pipeline::verify_grid(&grid.0, &checks)).map_err(err)?.1;
    to_json(&rep)
}

/// Series/grid comparison as JSON.
#[pyfunction]
#[pyo3(signature = (config_json, grid, order=8, radius=pipeline::SERIES_RADIUS))]
fn series(config_json: &str, grid: &PyGrid, order: usize, radius: f64) -> PyResult<String> {
    let cfg = config(config_json)?;
    let t = series_oracle::series_for_run(&cfg, &grid.0, order, cfg.checks.series_lambda).map_err(err)?;
    to_json(&series_oracle::compare_with_grid(&t, &grid.0, radius).map_err(err)?)
}

/// Full pipeline; returns (exit code, manifest JSON).
#[pyfunction]
fn run(py: Python<'_>, config_json: &str, out_dir: &str) -> PyResult<(i32, String)> {
    let cfg = RunConfig::from_json(config_json).map_err(err)?;
    let out = py.detach(|| pipeline::run(&cfg, Path::new(out_dir)));
    Ok((out.exit_code, to_json(&out.manifest)?))
}

#[pymodule]
fn _srh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SrhException", m.py().get_type::<SrhException>())?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyEval>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyJet>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(solve_jet, m)?)?;
    m.add_function(wrap_pyfunction!(invert_phi, m)?)?;
    m.add_function(wrap_pyfunction!(phi_map, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(series, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
