//! Python bindings: thin wrappers around the core grid, field, profile,
//! Green operator, solver, evolver, and stability entry points.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vortexpair::evolution::{EvolutionState, Evolver, EvolverConfig};
use vortexpair::greens::GreenOperator;
use vortexpair::maximizer::{maximize, MaximizerConfig};
use vortexpair::rearrange::{decreasing_rearrangement, LadderLevel, RearrangementProfile};
use vortexpair::stability::{
    dist_to_orbit, perturb, run_stability, OrbitMetric, PerturbationKind, PerturbationSpec,
};
use vortexpair::{GridSpec, ScalarField};

fn err(e: vortexpair::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Grid")]
#[derive(Clone)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(x1_min: f64, x1_max: f64, x2_max: f64, nx: usize, ny: usize) -> PyResult<Self> {
        Ok(PyGrid {
            inner: GridSpec::new(x1_min, x1_max, x2_max, nx, ny).map_err(err)?,
        })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.inner.ny
    }

    fn center(&self, i: usize, j: usize) -> (f64, f64) {
        self.inner.center(i, j)
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(x1_min={}, x1_max={}, x2_max={}, nx={}, ny={})",
            self.inner.x1_min, self.inner.x1_max, self.inner.x2_max, self.inner.nx, self.inner.ny
        )
    }
}

#[pyclass(name = "Field")]
#[derive(Clone)]
struct PyField {
    inner: ScalarField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyField {
            inner: ScalarField::from_values(grid.inner, values).map_err(err)?,
        })
    }

    #[staticmethod]
    fn zeros(grid: PyGrid) -> Self {
        PyField {
            inner: ScalarField::zeros(grid.inner),
        }
    }

    #[staticmethod]
    fn read_csv(path: String) -> PyResult<Self> {
        Ok(PyField {
            inner: ScalarField::read_csv_file(std::path::Path::new(&path)).map_err(err)?,
        })
    }

    fn dump_csv(&self, path: String) -> PyResult<()> {
        self.inner
            .dump_csv_file(std::path::Path::new(&path))
            .map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.grid().clone(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    fn lp_norm(&self, p: f64) -> f64 {
        self.inner.lp_norm(p)
    }

    fn impulse(&self) -> f64 {
        self.inner.impulse()
    }

    fn support_area(&self) -> f64 {
        self.inner.support_area()
    }
}

#[pyclass(name = "Profile")]
#[derive(Clone)]
struct PyProfile {
    inner: RearrangementProfile,
}

#[pymethods]
impl PyProfile {
    /// levels: list of (value, cells), values strictly decreasing.
    #[new]
    fn new(h: f64, levels: Vec<(f64, usize)>) -> PyResult<Self> {
        let ladder = levels
            .into_iter()
            .map(|(value, cells)| LadderLevel { value, cells })
            .collect();
        Ok(PyProfile {
            inner: RearrangementProfile::from_levels(h, ladder).map_err(err)?,
        })
    }

    #[staticmethod]
    fn of_field(f: &PyField) -> PyResult<Self> {
        Ok(PyProfile {
            inner: decreasing_rearrangement(&f.inner).map_err(err)?,
        })
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn l1(&self) -> f64 {
        self.inner.l1()
    }

    fn l2(&self) -> f64 {
        self.inner.l2()
    }
}

#[pyclass(name = "Operator")]
struct PyOperator {
    inner: GreenOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    fn new(grid: PyGrid) -> Self {
        PyOperator {
            inner: GreenOperator::new(grid.inner),
        }
    }

    fn apply(&self, zeta: &PyField) -> PyResult<PyField> {
        Ok(PyField {
            inner: self.inner.apply(&zeta.inner).map_err(err)?,
        })
    }

    fn energy(&self, zeta: &PyField) -> PyResult<f64> {
        self.inner.energy(&zeta.inner).map_err(err)
    }

    fn objective(&self, zeta: &PyField, lambda: f64) -> PyResult<f64> {
        self.inner.objective(&zeta.inner, lambda).map_err(err)
    }

    fn stream(&self, zeta: &PyField, lambda: f64) -> PyResult<PyField> {
        Ok(PyField {
            inner: self.inner.stream(&zeta.inner, lambda).map_err(err)?,
        })
    }

    fn velocity(&self, zeta: &PyField, lambda: f64) -> PyResult<(PyField, PyField)> {
        let (u1, u2) = self.inner.velocity(&zeta.inner, lambda).map_err(err)?;
        Ok((PyField { inner: u1 }, PyField { inner: u2 }))
    }
}

#[pyfunction]
fn kernel(x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    vortexpair::greens::kernel((x1, x2), (y1, y2))
}

#[pyfunction]
fn self_interaction(h: f64) -> f64 {
    vortexpair::greens::self_interaction(h)
}

#[pyfunction]
fn sup_bound(zeta: &PyField) -> f64 {
    vortexpair::greens::sup_bound(&zeta.inner.norms(2.0))
}

#[pyfunction]
fn support_height_z(zeta: &PyField, lambda: f64) -> PyResult<f64> {
    vortexpair::greens::support_height_z(&zeta.inner.norms(2.0), lambda).map_err(err)
}

#[pyfunction]
fn dist2(a: &PyField, b: &PyField) -> PyResult<f64> {
    vortexpair::dist2(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
fn dist_y(a: &PyField, b: &PyField) -> PyResult<f64> {
    vortexpair::field::dist_y(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (omega, zeta_star, metric = "l2"))]
fn orbit_distance(omega: &PyField, zeta_star: &PyField, metric: &str) -> PyResult<(f64, i64)> {
    let m = match metric {
        "l2" => OrbitMetric::L2,
        "y" => OrbitMetric::Y,
        other => return Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
    };
    dist_to_orbit(&omega.inner, &zeta_star.inner, m).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (grid, profile, lambda, max_iters = 500, rng_seed = 0))]
fn solve(
    py: Python<'_>,
    grid: PyGrid,
    profile: &PyProfile,
    lambda: f64,
    max_iters: usize,
    rng_seed: u64,
) -> PyResult<PyObject> {
    let cfg = MaximizerConfig {
        lambda,
        max_iters,
        rng_seed,
        ..MaximizerConfig::default()
    };
    let r = maximize(&profile.inner, &grid.inner, &cfg, None).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("zeta_star", PyField { inner: r.zeta_star }.into_py(py))?;
    out.set_item("s_lambda", r.s_lambda)?;
    out.set_item("converged", r.converged)?;
    out.set_item("full_rearrangement", r.full_rearrangement)?;
    out.set_item("comonotonicity_residual", r.comonotonicity_residual)?;
    out.set_item("iterations", r.iterations)?;
    Ok(out.into())
}

#[pyfunction]
#[pyo3(signature = (zeta, lambda, t_final, dt, p = 4.0))]
fn evolve(
    py: Python<'_>,
    zeta: &PyField,
    lambda: f64,
    t_final: f64,
    dt: f64,
    p: f64,
) -> PyResult<PyObject> {
    let grid = zeta.inner.grid().clone();
    let evolver = Evolver::new(grid, EvolverConfig::default());
    let state =
        EvolutionState::new(zeta.inner.clone(), lambda, p, evolver.operator()).map_err(err)?;
    let (fin, audits) = evolver
        .evolve(state, t_final, dt, usize::MAX)
        .map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("zeta", PyField { inner: fin.zeta.clone() }.into_py(py))?;
    out.set_item("t", fin.t)?;
    if let Some(a) = audits.last() {
        let d = PyDict::new_bound(py);
        d.set_item("e_drift", a.e_drift)?;
        d.set_item("i_drift", a.i_drift)?;
        d.set_item("l1_drift", a.l1_drift)?;
        d.set_item("l2_drift", a.l2_drift)?;
        d.set_item("lp_drift", a.lp_drift)?;
        d.set_item("rearr_drift", a.rearr_drift)?;
        d.set_item("clipped_mass", a.clipped_mass)?;
        out.set_item("audit", d)?;
    }
    Ok(out.into())
}

#[pyfunction]
#[pyo3(signature = (zeta_star, kind, magnitude, area_budget, rng_seed = 0))]
fn perturb_field(
    zeta_star: &PyField,
    kind: &str,
    magnitude: f64,
    area_budget: f64,
    rng_seed: u64,
) -> PyResult<PyField> {
    let k = match kind {
        "rearranged-noise" => PerturbationKind::RearrangedNoise,
        "additive-nonnegative" => PerturbationKind::AdditiveNonnegative,
        "smooth-bump" => PerturbationKind::SmoothBump,
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    };
    let spec = PerturbationSpec {
        kind: k,
        magnitude,
        area_budget,
        rng_seed,
    };
    Ok(PyField {
        inner: perturb(&zeta_star.inner, &spec).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (zeta_star, lambda, kind, magnitude, area_budget, t_final, dt, rng_seed = 0))]
#[allow(clippy::too_many_arguments)]
fn stability_run(
    py: Python<'_>,
    zeta_star: &PyField,
    lambda: f64,
    kind: &str,
    magnitude: f64,
    area_budget: f64,
    t_final: f64,
    dt: f64,
    rng_seed: u64,
) -> PyResult<PyObject> {
    let k = match kind {
        "rearranged-noise" => PerturbationKind::RearrangedNoise,
        "additive-nonnegative" => PerturbationKind::AdditiveNonnegative,
        "smooth-bump" => PerturbationKind::SmoothBump,
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    };
    let spec = PerturbationSpec {
        kind: k,
        magnitude,
        area_budget,
        rng_seed,
    };
    let evolver = Evolver::new(zeta_star.inner.grid().clone(), EvolverConfig::default());
    let rep = run_stability(&evolver, &zeta_star.inner, lambda, 4.0, &spec, t_final, dt, 10)
        .map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("initial_dist2", rep.initial_dist2)?;
    out.set_item("initial_dist_y", rep.initial_dist_y)?;
    out.set_item("peak_dist2", rep.peak_dist2)?;
    out.set_item("peak_dist_y", rep.peak_dist_y)?;
    let samples: Vec<(f64, f64, f64, i64)> = rep
        .samples
        .iter()
        .map(|s| (s.t, s.dist2, s.dist_y, s.best_shift))
        .collect();
    out.set_item("samples", samples)?;
    Ok(out.into())
}

#[pymodule]
fn vortexpair_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(self_interaction, m)?)?;
    m.add_function(wrap_pyfunction!(sup_bound, m)?)?;
    m.add_function(wrap_pyfunction!(support_height_z, m)?)?;
    m.add_function(wrap_pyfunction!(dist2, m)?)?;
    m.add_function(wrap_pyfunction!(dist_y, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_field, m)?)?;
    m.add_function(wrap_pyfunction!(stability_run, m)?)?;
    Ok(())
}
