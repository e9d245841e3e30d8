//! Python bindings.
//!
//! Matrices cross the boundary as lists of rows (any nested sequence,
//! numpy arrays included). Agent indices are 0-based in return values of
//! the graph and analysis functions; reports produced by `analyze` use the
//! 1-based indices of the text formats.

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use opdyn::analysis::{self, Depth, PageRankMode};
use opdyn::dynamics::{self, ContinuousMethod, Coupling, FjModel, ModelTag, OpinionState, TaylorModel};
use opdyn::graph::{self, DiGraph};
use opdyn::io;
use opdyn::matrix::{self, NonnegativeMatrix, StochasticMatrix};
use opdyn::Error;

create_exception!(pyopdyn, OpdynError, PyException, "Base class of all pyopdyn errors.");
create_exception!(pyopdyn, InputError, OpdynError, "Invalid matrix, parameter or document.");
create_exception!(pyopdyn, RefusalError, OpdynError, "The structural verdict rules the request out.");
create_exception!(pyopdyn, NumericalError, OpdynError, "A numerical routine failed.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::ConsensusNotGuaranteed { .. } | Error::Unstable { .. } | Error::IdentitySusceptibility => {
            RefusalError::new_err(msg)
        }
        Error::NotConverged { .. }
        | Error::Ambiguous { .. }
        | Error::Singular { .. }
        | Error::ExpOverflow { .. }
        | Error::Internal(_) => NumericalError::new_err(msg),
        _ => InputError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for opdyn::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn dense(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    matrix::from_rows(&rows).py_err()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn stochastic(w: Vec<Vec<f64>>) -> PyResult<StochasticMatrix> {
    StochasticMatrix::new(dense(w)?).py_err()
}

fn nonnegative(a: Vec<Vec<f64>>) -> PyResult<NonnegativeMatrix> {
    NonnegativeMatrix::new(dense(a)?).py_err()
}

/// Scalar opinions (a flat list) or an `n x d` table.
fn opinions(py_obj: &Bound<'_, PyAny>) -> PyResult<DMatrix<f64>> {
    if let Ok(flat) = py_obj.extract::<Vec<f64>>() {
        return Ok(DMatrix::from_column_slice(flat.len(), 1, &flat));
    }
    dense(py_obj.extract::<Vec<Vec<f64>>>()?)
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn model_tag(name: &str) -> PyResult<ModelTag> {
    ModelTag::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = ModelTag::ALL.iter().map(|t| t.as_str()).collect();
        InputError::new_err(format!("unknown model {name:?}; expected one of {}", names.join(", ")))
    })
}

fn method(name: &str) -> PyResult<ContinuousMethod> {
    ContinuousMethod::from_name(name)
        .ok_or_else(|| InputError::new_err(format!("unknown method {name:?}; expected exact or rk4")))
}

/// A simulated trajectory.
#[pyclass(module = "pyopdyn", frozen)]
struct Trajectory {
    inner: dynamics::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    /// States as `n x d` row lists, one per recorded time.
    #[getter]
    fn states(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.states.iter().map(|s| rows(s.as_matrix())).collect()
    }

    #[getter]
    fn last(&self) -> Vec<Vec<f64>> {
        rows(self.inner.last().as_matrix())
    }

    #[getter]
    fn stop_reason(&self) -> &'static str {
        self.inner.stop.as_str()
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.inner.model.as_str()
    }

    fn to_csv(&self) -> String {
        io::save_trajectory(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(model={}, states={}, stop_reason={})",
            self.inner.model,
            self.inner.len(),
            self.inner.stop.as_str()
        )
    }
}

/// A parsed network document.
#[pyclass(module = "pyopdyn", frozen)]
struct Network {
    doc: io::NetworkDocument,
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn loads(text: &str) -> PyResult<Self> {
        Ok(Network {
            doc: io::load_network(text).py_err()?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| InputError::new_err(format!("cannot read {}: {e}", path.display())))?;
        Self::loads(&text)
    }

    fn dumps(&self) -> String {
        io::render_network(&self.doc)
    }

    #[getter]
    fn n(&self) -> usize {
        self.doc.n
    }

    #[getter]
    fn d(&self) -> usize {
        self.doc.d
    }

    fn matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.doc.matrix().py_err()?))
    }

    /// Model inferred from the fields present.
    fn inferred_model(&self) -> &'static str {
        self.doc.inferred_model().as_str()
    }

    /// Structural report as a dict; `full=False` gives verdicts only.
    #[pyo3(signature = (model=None, full=true))]
    fn analyze<'py>(&self, py: Python<'py>, model: Option<&str>, full: bool) -> PyResult<Bound<'py, PyAny>> {
        let tag = match model {
            Some(m) => model_tag(m)?,
            None => self.doc.inferred_model(),
        };
        let spec = self.doc.to_model(tag, None, &mut Vec::new()).py_err()?;
        let depth = if full { Depth::Full } else { Depth::Verdicts };
        let report = analysis::analyze(&spec, depth).py_err()?;
        json_to_py(py, &io::report_value(&report))
    }
}

/// Strong components of `G[A]` (arc j -> i iff `a[i][j] > 0`).
#[pyfunction]
fn strong_components<'py>(py: Python<'py>, a: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let g = DiGraph::from_matrix(&dense(a)?).py_err()?;
    let scc = graph::strong_components(&g);
    let (roots, quasi_strong) = graph::roots_and_quasi_strong(&g);
    let periods: Vec<usize> = scc.components.iter().map(|c| graph::component_period(&g, c).period).collect();
    let out = PyDict::new(py);
    out.set_item("components", &scc.components)?;
    out.set_item("closed", &scc.closed)?;
    out.set_item("condensation_order", &scc.condensation_order)?;
    out.set_item("periods", periods)?;
    out.set_item("roots", roots)?;
    out.set_item("quasi_strong", quasi_strong)?;
    Ok(out)
}

fn verdict_dict<'py>(py: Python<'py>, v: &analysis::ConvergenceVerdict) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("convergent", v.convergent)?;
    out.set_item("consensus", v.consensus)?;
    out.set_item("reason", v.reason.to_string())?;
    Ok(out)
}

#[pyfunction]
fn degroot_verdict<'py>(py: Python<'py>, w: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    verdict_dict(py, &analysis::degroot_verdict(&stochastic(w)?))
}

#[pyfunction]
fn abelson_verdict<'py>(py: Python<'py>, a: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    verdict_dict(py, &analysis::abelson_verdict(&nonnegative(a)?))
}

#[pyfunction]
fn french_social_power(w: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(analysis::french_social_power(&stochastic(w)?).py_err()?.values)
}

#[pyfunction]
fn abelson_social_power(a: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(analysis::abelson_social_power(&nonnegative(a)?).py_err()?.values)
}

#[pyfunction]
fn influence_centrality(w: Vec<Vec<f64>>, lam: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(analysis::influence_centrality(&stochastic(w)?, &lam).py_err()?.values)
}

#[pyfunction]
#[pyo3(signature = (w, m=0.15, iterate=false))]
fn pagerank(w: Vec<Vec<f64>>, m: f64, iterate: bool) -> PyResult<Vec<f64>> {
    let mode = if iterate { PageRankMode::Iterate } else { PageRankMode::ClosedForm };
    Ok(analysis::pagerank(&stochastic(w)?, m, mode).py_err()?.values)
}

#[pyfunction]
fn left_fixed_vector(w: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(matrix::left_fixed_vector(&stochastic(w)?).py_err()?.p.iter().copied().collect())
}

#[pyfunction]
#[pyo3(signature = (a, tol=1e-12, max_iter=100_000))]
fn spectral_radius(a: Vec<Vec<f64>>, tol: f64, max_iter: usize) -> PyResult<f64> {
    Ok(matrix::spectral_radius(&nonnegative(a)?, tol, max_iter).py_err()?.value)
}

#[pyfunction]
#[pyo3(signature = (m, t=1.0))]
fn matrix_exponential(m: Vec<Vec<f64>>, t: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&matrix::matrix_exponential(&dense(m)?, t).py_err()?))
}

#[pyfunction]
fn laplacian(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(matrix::laplacian_of(&nonnegative(a)?).as_matrix()))
}

#[pyfunction]
#[pyo3(signature = (w, x0, steps=1000, tol=dynamics::DEFAULT_STOP_TOL))]
fn simulate_degroot(w: Vec<Vec<f64>>, x0: &Bound<'_, PyAny>, steps: usize, tol: f64) -> PyResult<Trajectory> {
    let x0 = OpinionState::new(opinions(x0)?).py_err()?;
    let inner = dynamics::degroot_simulate(&stochastic(w)?, &x0, steps, tol).py_err()?;
    Ok(Trajectory { inner })
}

fn fj_model(w: Vec<Vec<f64>>, lam: Vec<f64>, u: &Bound<'_, PyAny>, c: Option<Vec<Vec<f64>>>) -> PyResult<FjModel> {
    let c = c.map(stochastic).transpose()?;
    FjModel::new(stochastic(w)?, lam, opinions(u)?, c).py_err()
}

#[pyfunction]
#[pyo3(signature = (w, lam, u, x0=None, c=None, steps=1000, tol=dynamics::DEFAULT_STOP_TOL))]
fn simulate_fj(
    w: Vec<Vec<f64>>,
    lam: Vec<f64>,
    u: &Bound<'_, PyAny>,
    x0: Option<&Bound<'_, PyAny>>,
    c: Option<Vec<Vec<f64>>>,
    steps: usize,
    tol: f64,
) -> PyResult<Trajectory> {
    let model = fj_model(w, lam, u, c)?;
    let x0 = match x0 {
        Some(x) => opinions(x)?,
        None => model.u.clone(),
    };
    let x0 = OpinionState::new(x0).py_err()?;
    Ok(Trajectory {
        inner: dynamics::fj_simulate(&model, &x0, steps, tol).py_err()?,
    })
}

#[pyfunction]
#[pyo3(signature = (a, x0, horizon, dt=dynamics::DEFAULT_DT, method="exact", coupling=None))]
fn simulate_abelson(
    a: Vec<Vec<f64>>,
    x0: &Bound<'_, PyAny>,
    horizon: f64,
    dt: f64,
    method: &str,
    coupling: Option<&str>,
) -> PyResult<Trajectory> {
    let a = nonnegative(a)?;
    let x0 = OpinionState::new(opinions(x0)?).py_err()?;
    let inner = match coupling {
        None => dynamics::abelson_simulate_linear(&a, &x0, horizon, dt, self::method(method)?).py_err()?,
        Some(name) => {
            let g = Coupling::from_name(name).ok_or_else(|| {
                InputError::new_err(format!(
                    "unknown coupling {name:?}; expected one of {}",
                    Coupling::BUILTIN.join(", ")
                ))
            })?;
            dynamics::abelson_simulate_nonlinear(&a, &g, &x0, horizon, dt).py_err()?
        }
    };
    Ok(Trajectory { inner })
}

#[pyfunction]
#[pyo3(signature = (a, gamma, u, x0, horizon, dt=dynamics::DEFAULT_DT, method="exact"))]
fn simulate_taylor(
    a: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    u: &Bound<'_, PyAny>,
    x0: &Bound<'_, PyAny>,
    horizon: f64,
    dt: f64,
    method: &str,
) -> PyResult<Trajectory> {
    let model = TaylorModel::new(nonnegative(a)?, gamma, opinions(u)?).py_err()?;
    let x0 = OpinionState::new(opinions(x0)?).py_err()?;
    Ok(Trajectory {
        inner: dynamics::taylor_simulate(&model, &x0, horizon, dt, self::method(method)?).py_err()?,
    })
}

fn partition_dict<'py>(py: Python<'py>, p: &analysis::PDependence) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("prejudiced", &p.prejudiced)?;
    out.set_item("p_dependent", &p.p_dependent)?;
    out.set_item("p_independent", &p.p_independent)?;
    Ok(out)
}

/// Stability, control matrix `V` and limit of the Friedkin-Johnsen model.
#[pyfunction]
#[pyo3(signature = (w, lam, u, c=None, x2_limit=None))]
fn fj_final<'py>(
    py: Python<'py>,
    w: Vec<Vec<f64>>,
    lam: Vec<f64>,
    u: &Bound<'_, PyAny>,
    c: Option<Vec<Vec<f64>>>,
    x2_limit: Option<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let model = fj_model(w, lam, u, c)?;
    let x2 = x2_limit.map(dense).transpose()?;
    let out = analysis::fj_stability_and_final(&model, x2.as_ref()).py_err()?;
    let d = PyDict::new(py);
    d.set_item("stable", out.stable)?;
    d.set_item("convergent", out.convergent)?;
    d.set_item("partition", partition_dict(py, &out.partition)?)?;
    d.set_item("control", out.control.as_ref().map(rows))?;
    d.set_item("columns", &out.column_agents)?;
    d.set_item("final", out.final_opinions.as_ref().map(rows))?;
    Ok(d)
}

/// Stability, mixing matrix `M` and limit of the Taylor model.
#[pyfunction]
#[pyo3(signature = (a, gamma, u, x2_limit=None))]
fn taylor_final<'py>(
    py: Python<'py>,
    a: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    u: &Bound<'_, PyAny>,
    x2_limit: Option<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let model = TaylorModel::new(nonnegative(a)?, gamma, opinions(u)?).py_err()?;
    let x2 = x2_limit.map(dense).transpose()?;
    let out = analysis::taylor_stability_and_final(&model, x2.as_ref()).py_err()?;
    let d = PyDict::new(py);
    d.set_item("stable", out.stable)?;
    d.set_item("partition", partition_dict(py, &out.partition)?)?;
    d.set_item("mixing", out.mixing.as_ref().map(rows))?;
    d.set_item("columns", &out.column_agents)?;
    d.set_item("final", out.final_opinions.as_ref().map(rows))?;
    Ok(d)
}

/// Whether each row of `x_final` lies in the convex hull of the rows of
/// `leaders`. Returns the report with a `contained` flag.
#[pyfunction]
#[pyo3(signature = (x_final, leaders, certificate=None))]
fn containment_check<'py>(
    py: Python<'py>,
    x_final: &Bound<'_, PyAny>,
    leaders: &Bound<'_, PyAny>,
    certificate: Option<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cert = certificate.map(dense).transpose()?;
    let report = analysis::containment_check(&opinions(x_final)?, &opinions(leaders)?, cert.as_ref()).py_err()?;
    let mut value = io::containment_value(&report);
    // bindings keep agent indices 0-based
    if let Some(a) = value.get_mut("agent") {
        *a = Value::from(a.as_u64().unwrap_or(1) - 1);
    }
    json_to_py(py, &value)
}

#[pyfunction]
fn nash_residual(w: Vec<Vec<f64>>, lam: Vec<f64>, u: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
    analysis::nash_residual(&stochastic(w)?, &lam, &u, &x).py_err()
}

#[pymodule]
fn pyopdyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("OpdynError", py.get_type::<OpdynError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("RefusalError", py.get_type::<RefusalError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Network>()?;
    m.add_function(wrap_pyfunction!(strong_components, m)?)?;
    m.add_function(wrap_pyfunction!(degroot_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(abelson_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(french_social_power, m)?)?;
    m.add_function(wrap_pyfunction!(abelson_social_power, m)?)?;
    m.add_function(wrap_pyfunction!(influence_centrality, m)?)?;
    m.add_function(wrap_pyfunction!(pagerank, m)?)?;
    m.add_function(wrap_pyfunction!(left_fixed_vector, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_degroot, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_fj, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_abelson, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_taylor, m)?)?;
    m.add_function(wrap_pyfunction!(fj_final, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_final, m)?)?;
    m.add_function(wrap_pyfunction!(containment_check, m)?)?;
    m.add_function(wrap_pyfunction!(nash_residual, m)?)?;
    Ok(())
}
