//! Python bindings. Points cross the boundary as `(x, y, z)` tuples, 4×4
//! matrices as nested lists (row-major), volumes as [`Volume`].

use lmreg::{AffineMatrix, AffineParams9, Axis, BinaryMask, Error, Grid, Point3, PointSet, RefineConfig, Volume3};
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

create_exception!(pylmreg, LmregError, PyValueError);

type Triple = (f64, f64, f64);
type Matrix = [[f64; 4]; 4];

fn err(e: Error) -> PyErr {
    match e.root() {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => LmregError::new_err(e.to_string()),
    }
}

fn point((x, y, z): Triple) -> Point3 {
    Point3::new(x, y, z)
}

fn triple(p: Point3) -> Triple {
    (p.x, p.y, p.z)
}

fn point_set(points: Vec<Triple>) -> PyResult<PointSet> {
    PointSet::new(points.into_iter().map(point).collect()).map_err(err)
}

fn matrix(m: Matrix) -> PyResult<AffineMatrix> {
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    AffineMatrix::from_row_major(&flat).map_err(err)
}

fn rows(m: &AffineMatrix) -> Matrix {
    let flat = m.to_row_major();
    std::array::from_fn(|r| std::array::from_fn(|c| flat[4 * r + c]))
}

#[pyclass(name = "AffineParams", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyParams(AffineParams9);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (t = (0.0, 0.0, 0.0), r = (0.0, 0.0, 0.0), s = (1.0, 1.0, 1.0)))]
    fn new(t: Triple, r: Triple, s: Triple) -> PyResult<Self> {
        let p = AffineParams9 { t: t.into(), r: r.into(), s: s.into() };
        p.validate().map_err(err)?;
        Ok(Self(p))
    }

    #[getter]
    fn t(&self) -> Triple {
        self.0.t.into()
    }

    #[getter]
    fn r(&self) -> Triple {
        self.0.r.into()
    }

    #[getter]
    fn s(&self) -> Triple {
        self.0.s.into()
    }

    /// `[tx, ty, tz, rx, ry, rz, sx, sy, sz]`
    fn to_list(&self) -> [f64; 9] {
        self.0.to_array()
    }

    fn __repr__(&self) -> String {
        format!("AffineParams(t={:?}, r={:?}, s={:?})", self.0.t, self.0.r, self.0.s)
    }
}

#[pyclass(name = "Volume", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyVolume(Volume3);

#[pymethods]
impl PyVolume {
    /// `data` is x-fastest, length `nx * ny * nz`.
    #[new]
    #[pyo3(signature = (dims, data, spacing = (1.0, 1.0, 1.0), origin = (0.0, 0.0, 0.0)))]
    fn new(dims: [usize; 3], data: Vec<f64>, spacing: Triple, origin: Triple) -> PyResult<Self> {
        Volume3::new(dims, spacing.into(), point(origin), data).map(Self).map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        lmreg::io::read_volume(path).map(Self).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        lmreg::io::write_volume(path, &self.0).map_err(err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    #[getter]
    fn spacing(&self) -> Triple {
        self.0.spacing().into()
    }

    #[getter]
    fn origin(&self) -> Triple {
        triple(self.0.origin())
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn get(&self, x: usize, y: usize, z: usize) -> PyResult<f64> {
        let [nx, ny, nz] = self.0.dims();
        if x >= nx || y >= ny || z >= nz {
            return Err(pyo3::exceptions::PyIndexError::new_err("voxel index out of range"));
        }
        Ok(self.0.get(x, y, z))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Volume(dims={:?}, spacing={:?})", self.0.dims(), self.0.spacing())
    }
}

#[pyclass(name = "RefineResult", frozen, skip_from_py_object)]
pub struct PyRefineResult {
    #[pyo3(get)]
    params: Py<PyParams>,
    #[pyo3(get)]
    loss_trace: Vec<(usize, f64)>,
    #[pyo3(get)]
    initial_loss: f64,
    #[pyo3(get)]
    final_loss: f64,
    #[pyo3(get)]
    best_iteration: usize,
}

#[pyfunction]
fn compose(params: PyRef<'_, PyParams>) -> PyResult<Matrix> {
    lmreg::compose(&params.0).map(|m| rows(&m)).map_err(err)
}

#[pyfunction]
fn decompose(m: Matrix) -> PyResult<PyParams> {
    lmreg::decompose(&matrix(m)?).map(PyParams).map_err(err)
}

#[pyfunction]
fn umeyama_fit(moving: Vec<Triple>, fixed: Vec<Triple>) -> PyResult<Matrix> {
    lmreg::umeyama_fit(&point_set(moving)?, &point_set(fixed)?)
        .map(|m| rows(&m))
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, moving, fixed, loss_epsilon = 1e-12))]
fn loss(params: PyRef<'_, PyParams>, moving: Vec<Triple>, fixed: Vec<Triple>, loss_epsilon: f64) -> PyResult<f64> {
    lmreg::loss(&params.0, &point_set(moving)?, &point_set(fixed)?, loss_epsilon).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, moving, fixed, loss_epsilon = 1e-12))]
fn loss_gradient(
    params: PyRef<'_, PyParams>,
    moving: Vec<Triple>,
    fixed: Vec<Triple>,
    loss_epsilon: f64,
) -> PyResult<[f64; 9]> {
    lmreg::loss_gradient(&params.0, &point_set(moving)?, &point_set(fixed)?, loss_epsilon).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (init, moving, fixed, iterations = 10_000, step_size = 1e-5))]
fn refine(
    py: Python<'_>,
    init: PyRef<'_, PyParams>,
    moving: Vec<Triple>,
    fixed: Vec<Triple>,
    iterations: usize,
    step_size: f64,
) -> PyResult<PyRefineResult> {
    let config = RefineConfig { iterations, step_size, ..RefineConfig::default() };
    let (moving, fixed) = (point_set(moving)?, point_set(fixed)?);
    let init = init.0;
    let r = py
        .detach(|| lmreg::refine(&init, &moving, &fixed, &config))
        .map_err(err)?;
    Ok(PyRefineResult {
        params: Py::new(py, PyParams(r.params))?,
        loss_trace: r.loss_trace,
        initial_loss: r.initial_loss,
        final_loss: r.final_loss,
        best_iteration: r.best_iteration,
    })
}

#[pyfunction]
fn distance_transform(mask: PyRef<'_, PyVolume>) -> PyResult<PyVolume> {
    let mask = BinaryMask::new(mask.0.clone()).map_err(err)?;
    lmreg::distance_transform(&mask).map(|d| PyVolume(d.into_volume())).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (landmark, dims, spacing = (1.0, 1.0, 1.0), origin = (0.0, 0.0, 0.0)))]
fn make_label(landmark: Triple, dims: [usize; 3], spacing: Triple, origin: Triple) -> PyResult<PyVolume> {
    let grid = Grid { dims, spacing: spacing.into(), origin: point(origin) };
    lmreg::make_label(point(landmark), grid).map(|l| PyVolume(l.into_volume())).map_err(err)
}

#[pyfunction]
fn recover_landmark(heatmap: PyRef<'_, PyVolume>) -> PyResult<Triple> {
    lmreg::recover_landmark(&heatmap.0).map(triple).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mask, axis = "x"))]
fn extract_extremes(mask: PyRef<'_, PyVolume>, axis: &str) -> PyResult<(Triple, Triple)> {
    let axis: Axis = axis.parse().map_err(err)?;
    let mask = BinaryMask::new(mask.0.clone()).map_err(err)?;
    let (lo, hi) = lmreg::extract_extremes_along(&mask, axis).map_err(err)?;
    Ok((triple(lo), triple(hi)))
}

/// Returns `(mean, std, per_point_errors)`.
#[pyfunction]
fn tre(transform: Matrix, moving_eval: Vec<Triple>, fixed_eval: Vec<Triple>) -> PyResult<(f64, f64, Vec<f64>)> {
    let s = lmreg::tre(&matrix(transform)?, &point_set(moving_eval)?, &point_set(fixed_eval)?).map_err(err)?;
    Ok((s.mean, s.std, s.values))
}

/// Returns `(t, p, dof)`.
#[pyfunction]
fn paired_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    lmreg::paired_ttest(&a, &b).map(|r| (r.t, r.p, r.dof)).map_err(err)
}

#[pymodule]
fn pylmreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LmregError", m.py().get_type::<LmregError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyVolume>()?;
    m.add_class::<PyRefineResult>()?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(umeyama_fit, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(loss_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(refine, m)?)?;
    m.add_function(wrap_pyfunction!(distance_transform, m)?)?;
    m.add_function(wrap_pyfunction!(make_label, m)?)?;
    m.add_function(wrap_pyfunction!(recover_landmark, m)?)?;
    m.add_function(wrap_pyfunction!(extract_extremes, m)?)?;
    m.add_function(wrap_pyfunction!(tre, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    Ok(())
}
