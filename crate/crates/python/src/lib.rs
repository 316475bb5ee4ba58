//! Python bindings: configurations, meshes, simulations and the harnesses
//! behind the `swe` command.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cfswe::driver::{self, Setup};
use cfswe::mesh::{self, Mesh as CoreMesh};
use cfswe::swe::{ConservedSet, State};
use cfswe::timestepping::{picard_step, poisson_step, Integrator};

/// `(name, passed, detail)` of one check.
type CheckTuple = (String, bool, String);

fn py_err(e: cfswe::Error) -> PyErr {
    match e {
        cfswe::Error::Config(_) | cfswe::Error::InvalidArgument(_) | cfswe::Error::MeshFormat { .. } => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn conserved_dict<'py>(py: Python<'py>, c: &ConservedSet) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("energy", c.energy)?;
    d.set_item("enstrophy", c.enstrophy)?;
    d.set_item("total_pv", c.total_pv)?;
    d.set_item("mass", c.mass)?;
    Ok(d)
}

/// A run configuration.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: driver::Config,
}

#[pymethods]
impl PyConfig {
    /// Parses a TOML document.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: driver::Config::from_toml_str(text).map_err(py_err)?,
        })
    }

    /// Reads a TOML file; a relative mesh path is taken from its directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: driver::load_config(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        driver::save_config(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn scenario(&self) -> &'static str {
        self.inner.scenario.name()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(scenario={}, dt={}, t_end={})",
            self.inner.scenario.name(),
            self.inner.dt,
            self.inner.t_end
        )
    }
}

/// A triangle mesh.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: Arc<CoreMesh>,
}

#[pymethods]
impl PyMesh {
    /// The unit disk refined `level` times.
    #[staticmethod]
    fn disk(level: usize) -> PyResult<Self> {
        Ok(PyMesh {
            inner: Arc::new(mesh::build_disk(level).map_err(py_err)?),
        })
    }

    /// An `nx` by `ny` rectangle of size `lx` by `ly`, optionally periodic
    /// in each direction.
    #[staticmethod]
    #[pyo3(signature = (nx, ny, lx=1.0, ly=1.0, periodic_x=true, periodic_y=true))]
    fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64, periodic_x: bool, periodic_y: bool) -> PyResult<Self> {
        let m = mesh::build_periodic_rectangle(nx, ny, lx, ly, periodic_x, periodic_y).map_err(py_err)?;
        Ok(PyMesh { inner: Arc::new(m) })
    }

    /// Parses swemesh text.
    #[staticmethod]
    fn from_swemesh(text: &str) -> PyResult<Self> {
        Ok(PyMesh {
            inner: Arc::new(mesh::read_swemesh(text.as_bytes()).map_err(py_err)?),
        })
    }

    fn to_swemesh(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        mesh::write_swemesh(&self.inner, &mut buf).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }

    #[getter]
    fn num_boundary_edges(&self) -> usize {
        self.inner.boundary_facets().len()
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p[0], p[1])).collect()
    }

    fn cells(&self) -> Vec<(usize, usize, usize)> {
        self.inner.cells().iter().map(|c| (c[0], c[1], c[2])).collect()
    }

    /// Topological and geometric defects, empty for a valid mesh.
    fn defects(&self) -> Vec<String> {
        mesh::validate(&self.inner)
            .defects
            .iter()
            .map(|d| d.to_string())
            .collect()
    }
}

/// A scenario set up from a configuration, advanced one step at a time.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    config: driver::Config,
    setup: Setup,
    state: State,
    steps: usize,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: PyConfig) -> PyResult<Self> {
        let setup = driver::setup(&config.inner).map_err(py_err)?;
        let state = setup.state.clone();
        Ok(PySimulation {
            config: config.inner,
            setup,
            state,
            steps: 0,
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.state.t
    }

    #[getter]
    fn steps(&self) -> usize {
        self.steps
    }

    /// Dimensions of the vorticity, velocity and depth spaces.
    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let m = &self.setup.model;
        (m.v0().dim(), m.v1().dim(), m.v2().dim())
    }

    fn mesh(&self) -> PyMesh {
        PyMesh {
            inner: self.setup.model.mesh().clone(),
        }
    }

    fn conserved<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.setup.model.conserved(&self.state).map_err(py_err)?;
        conserved_dict(py, &c)
    }

    /// Advances `n` steps; returns the iteration count of the last one.
    #[pyo3(signature = (n=1))]
    fn step(&mut self, n: usize) -> PyResult<usize> {
        let cfg = self.config.step_config();
        let mut iters = 0;
        for _ in 0..n {
            let r = match cfg.integrator {
                Integrator::Poisson => poisson_step(&self.setup.model, &self.state, &cfg),
                Integrator::Picard => picard_step(&self.setup.model, &self.state, &cfg),
            }
            .map_err(py_err)?;
            iters = r.iterations;
            self.state = r.state;
            self.steps += 1;
        }
        Ok(iters)
    }

    /// Coefficient vectors of `u`, `D` and `Z`.
    fn coefficients(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            self.state.u.coeffs().to_vec(),
            self.state.d.coeffs().to_vec(),
            self.state.z.coeffs().to_vec(),
        )
    }

    /// Polar angle of the boundary depth maximum, or None without boundary.
    fn crest_angle(&self) -> PyResult<Option<f64>> {
        driver::boundary_crest_angle(&self.setup.model, &self.state).map_err(py_err)
    }

    fn vtk(&self) -> PyResult<String> {
        driver::vtk_string(&self.setup.model, &self.state).map_err(py_err)
    }
}

/// Runs a configuration to `t_end`; returns the CSV time series and the
/// run checks as `(name, passed, detail)` tuples.
#[pyfunction]
fn run(config: PyConfig) -> PyResult<(String, Vec<CheckTuple>)> {
    let out = driver::run_config(&config.inner).map_err(py_err)?;
    let checks = out.checks.into_iter().map(|c| (c.name, c.passed, c.detail)).collect();
    Ok((driver::csv_string(&out.series), checks))
}

#[pyfunction]
fn validate(config: PyConfig) -> PyResult<Vec<CheckTuple>> {
    let checks = driver::validate_config(&config.inner).map_err(py_err)?;
    Ok(checks.into_iter().map(|c| (c.name, c.passed, c.detail)).collect())
}

#[pyfunction]
fn mesh_info(config: PyConfig) -> PyResult<String> {
    driver::mesh_info(&config.inner).map_err(py_err)
}

/// Convergence table rows as dicts with keys `level`, `h`, `u_error`,
/// `d_error`, `u_rate` and `d_rate`.
#[pyfunction]
fn converge<'py>(py: Python<'py>, config: PyConfig, levels: Vec<usize>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let table = driver::convergence_study(&config.inner, &levels).map_err(py_err)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("level", r.level)?;
            d.set_item("h", r.h)?;
            d.set_item("u_error", r.u_error)?;
            d.set_item("d_error", r.d_error)?;
            d.set_item("u_rate", r.u_rate)?;
            d.set_item("d_rate", r.d_rate)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn cfswe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_info, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    Ok(())
}
