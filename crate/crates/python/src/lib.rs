//! Python bindings for `singlewell_core`.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use singlewell_core::error::Error;
use singlewell_core::fields::{self, Domain1D, Field, Mesh, PointPenalty};
use singlewell_core::limits;
use singlewell_core::minimize::{self, SolveOptions, StepRule};
use singlewell_core::potential::Potential;
use singlewell_core::recovery::{self, LimsupOptions};
use singlewell_core::setvalued::{self, ExceptionalPoint, SetValuedLimit};
use singlewell_core::unfold as unfolding;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Convergence { .. } | Error::Potential(_) | Error::Resolution(_) | Error::Internal(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for singlewell_core::error::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "Domain", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyDomain(Domain1D);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn interval(a: f64, b: f64) -> PyResult<Self> {
        Domain1D::interval(a, b).py().map(Self)
    }

    #[staticmethod]
    fn torus() -> Self {
        Self(Domain1D::torus())
    }

    #[getter]
    fn is_torus(&self) -> bool {
        self.0.is_torus()
    }

    #[getter]
    fn bounds(&self) -> (f64, f64) {
        self.0.bounds()
    }

    fn __repr__(&self) -> String {
        match self.0 {
            Domain1D::Interval { a, b } => format!("Domain.interval({a}, {b})"),
            Domain1D::Torus => "Domain.torus()".into(),
        }
    }
}

#[pyclass(name = "Mesh", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyMesh(Mesh);

#[pymethods]
impl PyMesh {
    #[new]
    fn new(domain: PyRef<'_, PyDomain>, n: usize) -> PyResult<Self> {
        Mesh::new(domain.0, n).py().map(Self)
    }

    #[staticmethod]
    fn with_max_spacing(domain: PyRef<'_, PyDomain>, h_max: f64) -> PyResult<Self> {
        Mesh::with_max_spacing(domain.0, h_max).py().map(Self)
    }

    #[getter]
    fn domain(&self) -> PyDomain {
        PyDomain(self.0.domain())
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn nodes(&self) -> Vec<f64> {
        self.0.nodes()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField(Field);

#[pymethods]
impl PyField {
    #[new]
    fn new(mesh: PyRef<'_, PyMesh>, values: Vec<f64>) -> PyResult<Self> {
        Field::new(mesh.0, values).py().map(Self)
    }

    #[staticmethod]
    fn constant(mesh: PyRef<'_, PyMesh>, c: f64) -> Self {
        Self(Field::constant(mesh.0, c))
    }

    #[staticmethod]
    fn from_csv(mesh: PyRef<'_, PyMesh>, path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyOSError::new_err(e.to_string()))?;
        Field::from_csv_reader(mesh.0, file).py().map(Self)
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh(*self.0.mesh())
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn nodes(&self) -> Vec<f64> {
        self.0.mesh().nodes()
    }

    fn interpolate(&self, x: f64) -> PyResult<f64> {
        self.0.interpolate(x).py()
    }

    fn total_variation(&self) -> f64 {
        self.0.total_variation()
    }

    fn integral(&self) -> f64 {
        self.0.integral()
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyOSError::new_err(e.to_string()))?;
        self.0.write_csv(file).py()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Potential", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential(Potential);

#[pymethods]
impl PyPotential {
    /// `F(v) = (v - 1)^2`.
    #[staticmethod]
    fn quadratic() -> Self {
        Self(Potential::quadratic())
    }

    #[staticmethod]
    #[pyo3(signature = (v, f, step = 1e-3))]
    fn tabulated(v: Vec<f64>, f: Vec<f64>, step: f64) -> PyResult<Self> {
        Potential::tabulated(v, f, step).py().map(Self)
    }

    #[staticmethod]
    #[pyo3(signature = (path, step = 1e-3))]
    fn from_csv(path: &str, step: f64) -> PyResult<Self> {
        Potential::from_csv_path(path, step).py().map(Self)
    }

    #[getter]
    fn is_quadratic(&self) -> bool {
        self.0.is_quadratic()
    }

    fn f(&self, v: f64) -> PyResult<f64> {
        self.0.eval_f(v).py()
    }

    /// `G(v) = |∫_1^v √F|`.
    fn g(&self, v: f64) -> PyResult<f64> {
        self.0.eval_g(v).py()
    }
}

#[pyclass(name = "SetValuedLimit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLimit(SetValuedLimit);

#[pymethods]
impl PyLimit {
    /// `entries` are `(x, lo, hi)` triples.
    #[new]
    #[pyo3(signature = (domain, entries = Vec::new()))]
    fn new(domain: PyRef<'_, PyDomain>, entries: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let entries = entries.into_iter().map(|(x, lo, hi)| ExceptionalPoint { x, lo, hi }).collect();
        SetValuedLimit::new(domain.0, entries).py().map(Self)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        SetValuedLimit::from_json_str(s).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    #[getter]
    fn domain(&self) -> PyDomain {
        PyDomain(self.0.domain())
    }

    fn exceptional(&self) -> Vec<(f64, f64, f64)> {
        self.0.exceptional().iter().map(|e| (e.x, e.lo, e.hi)).collect()
    }

    fn value_at(&self, x: f64) -> (f64, f64) {
        self.0.value_at(x)
    }
}

#[pyclass(name = "EnergyReport", frozen, get_all)]
struct PyEnergyReport {
    gradient: f64,
    potential: f64,
    penalty: f64,
    weighted_tv: f64,
    fidelity: f64,
    total: f64,
}

impl From<fields::EnergyReport> for PyEnergyReport {
    fn from(r: fields::EnergyReport) -> Self {
        Self {
            gradient: r.gradient,
            potential: r.potential,
            penalty: r.penalty,
            weighted_tv: r.weighted_tv,
            fidelity: r.fidelity,
            total: r.total,
        }
    }
}

#[pymethods]
impl PyEnergyReport {
    fn __repr__(&self) -> String {
        format!(
            "EnergyReport(gradient={}, potential={}, penalty={}, weighted_tv={}, fidelity={}, total={})",
            self.gradient, self.potential, self.penalty, self.weighted_tv, self.fidelity, self.total
        )
    }
}

fn penalties(list: Vec<(f64, f64)>) -> PyResult<Vec<PointPenalty>> {
    list.into_iter().map(|(a, b)| PointPenalty::new(a, b).py()).collect()
}

fn solve_options(max_iterations: usize, tolerance: f64, rounds: usize, backtracking: bool) -> SolveOptions {
    SolveOptions {
        max_iterations,
        tolerance,
        rounds,
        step_rule: if backtracking { StepRule::Backtracking } else { StepRule::Fixed },
    }
}

#[pyfunction]
fn energy_smm(v: PyRef<'_, PyField>, eps: f64, p: PyRef<'_, PyPotential>) -> PyResult<PyEnergyReport> {
    fields::energy_smm(&v.0, eps, &p.0).py().map(Into::into)
}

/// `penalties` are `(a, b)` pairs.
#[pyfunction]
fn energy_smm_b(
    v: PyRef<'_, PyField>,
    eps: f64,
    p: PyRef<'_, PyPotential>,
    penalties: Vec<(f64, f64)>,
) -> PyResult<PyEnergyReport> {
    fields::energy_smm_b(&v.0, eps, &p.0, &self::penalties(penalties)?).py().map(Into::into)
}

#[pyfunction]
fn weighted_tv(u: PyRef<'_, PyField>, v: PyRef<'_, PyField>, sigma: f64) -> PyResult<f64> {
    fields::weighted_tv(&u.0, &v.0, sigma).py()
}

#[pyfunction]
#[pyo3(signature = (u, v, eps, sigma, p, lam = 0.0, g = None))]
fn energy_kwc(
    u: PyRef<'_, PyField>,
    v: PyRef<'_, PyField>,
    eps: f64,
    sigma: f64,
    p: PyRef<'_, PyPotential>,
    lam: f64,
    g: Option<PyRef<'_, PyField>>,
) -> PyResult<PyEnergyReport> {
    fields::energy_kwc(&u.0, &v.0, eps, sigma, &p.0, lam, g.as_ref().map(|g| &g.0)).py().map(Into::into)
}

/// The closed-form minimizer on (-1, 1) with penalty `b` at 0, evaluated at `xs`.
#[pyfunction]
fn closed_form_minimizer(eps: f64, b: f64, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let w = minimize::closed_form_minimizer(eps, b).py()?;
    Ok(xs.into_iter().map(|x| w.eval(x)).collect())
}

#[pyfunction]
fn minimize_smm_b_quadratic(mesh: PyRef<'_, PyMesh>, eps: f64, penalties: Vec<(f64, f64)>) -> PyResult<PyField> {
    minimize::minimize_smm_b_quadratic(mesh.0, eps, &self::penalties(penalties)?).py().map(PyField)
}

#[pyfunction]
#[pyo3(signature = (mesh, eps, p, penalties, max_iterations = 500, tolerance = 1e-10, backtracking = true))]
fn minimize_smm_b_general(
    mesh: PyRef<'_, PyMesh>,
    eps: f64,
    p: PyRef<'_, PyPotential>,
    penalties: Vec<(f64, f64)>,
    max_iterations: usize,
    tolerance: f64,
    backtracking: bool,
) -> PyResult<PyField> {
    let opts = solve_options(max_iterations, tolerance, 1, backtracking);
    minimize::minimize_smm_b_general(mesh.0, eps, &p.0, &self::penalties(penalties)?, &opts).py().map(PyField)
}

#[pyfunction]
fn prox_weighted_tv(g: PyRef<'_, PyField>, v: PyRef<'_, PyField>, sigma: f64, lam: f64) -> PyResult<PyField> {
    minimize::prox_weighted_tv(&g.0, &v.0, sigma, lam).py().map(PyField)
}

/// Returns `(u, v, report, history)`.
#[pyfunction]
#[pyo3(signature = (g, eps, sigma, p, lam, rounds = 200, max_iterations = 500, tolerance = 1e-10))]
fn minimize_kwc_alternating(
    g: PyRef<'_, PyField>,
    eps: f64,
    sigma: f64,
    p: PyRef<'_, PyPotential>,
    lam: f64,
    rounds: usize,
    max_iterations: usize,
    tolerance: f64,
) -> PyResult<(PyField, PyField, PyEnergyReport, Vec<f64>)> {
    let opts = solve_options(max_iterations, tolerance, rounds, true);
    let r = minimize::minimize_kwc_alternating(&g.0, eps, sigma, &p.0, lam, &opts).py()?;
    Ok((PyField(r.u), PyField(r.v), r.report.into(), r.history))
}

/// Arc-length unfolding; returns `(s, x, U)` sample lists.
#[pyfunction]
fn unfold(u: PyRef<'_, PyField>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let c = unfolding::unfold(&u.0);
    (c.s().to_vec(), c.x().to_vec(), c.values().to_vec())
}

#[pyfunction]
fn graph_distance(u: PyRef<'_, PyField>, xi: PyRef<'_, PyLimit>, resolution: f64) -> PyResult<f64> {
    setvalued::graph_distance(&u.0, &xi.0, resolution).py()
}

#[pyfunction]
fn limit_energy_smm(xi: PyRef<'_, PyLimit>, p: PyRef<'_, PyPotential>) -> PyResult<f64> {
    limits::limit_energy_smm(&xi.0, &p.0).py()
}

#[pyfunction]
fn limit_energy_smm_b(xi: PyRef<'_, PyLimit>, p: PyRef<'_, PyPotential>, penalties: Vec<(f64, f64)>) -> PyResult<f64> {
    limits::limit_energy_smm_b(&xi.0, &p.0, &self::penalties(penalties)?).py()
}

/// `(argmin, min)` of `q ↦ 2G(q) + b q^2` on `[0, 1]`.
#[pyfunction]
fn limit_pointwise_minimizer(b: f64, p: PyRef<'_, PyPotential>) -> PyResult<(f64, f64)> {
    limits::limit_pointwise_minimizer(b, &p.0).py()
}

/// Returns `(field, bound, included_blocks)`.
#[pyfunction]
fn build_recovery(
    xi: PyRef<'_, PyLimit>,
    eps: f64,
    mu: f64,
    p: PyRef<'_, PyPotential>,
    mesh: PyRef<'_, PyMesh>,
) -> PyResult<(PyField, f64, usize)> {
    let r = recovery::build_recovery(&xi.0, eps, mu, &p.0, mesh.0).py()?;
    let included = r.included();
    Ok((PyField(r.field), r.bound, included))
}

/// One `(eps, discrete_energy, limit_energy, graph_distance, passed)` tuple per ε.
#[pyfunction]
#[pyo3(signature = (xi, p, eps_schedule, mu, cells_per_eps = 16.0, resolution = 1e-3, slack = 0.02))]
fn verify_limsup(
    xi: PyRef<'_, PyLimit>,
    p: PyRef<'_, PyPotential>,
    eps_schedule: Vec<f64>,
    mu: f64,
    cells_per_eps: f64,
    resolution: f64,
    slack: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, bool)>> {
    let opts = LimsupOptions { cells_per_eps, resolution, slack, penalties: Vec::new() };
    let table = recovery::verify_limsup(&xi.0, &p.0, &eps_schedule, mu, &opts).py()?;
    Ok(table
        .rows
        .iter()
        .map(|r| (r.eps, r.discrete_energy, r.limit_energy, r.graph_distance, r.pass()))
        .collect())
}

#[pymodule]
fn singlewell(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyLimit>()?;
    m.add_class::<PyEnergyReport>()?;
    m.add_function(wrap_pyfunction!(energy_smm, m)?)?;
    m.add_function(wrap_pyfunction!(energy_smm_b, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_tv, m)?)?;
    m.add_function(wrap_pyfunction!(energy_kwc, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_minimizer, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_smm_b_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_smm_b_general, m)?)?;
    m.add_function(wrap_pyfunction!(prox_weighted_tv, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_kwc_alternating, m)?)?;
    m.add_function(wrap_pyfunction!(unfold, m)?)?;
    m.add_function(wrap_pyfunction!(graph_distance, m)?)?;
    m.add_function(wrap_pyfunction!(limit_energy_smm, m)?)?;
    m.add_function(wrap_pyfunction!(limit_energy_smm_b, m)?)?;
    m.add_function(wrap_pyfunction!(limit_pointwise_minimizer, m)?)?;
    m.add_function(wrap_pyfunction!(build_recovery, m)?)?;
    m.add_function(wrap_pyfunction!(verify_limsup, m)?)?;
    Ok(())
}
