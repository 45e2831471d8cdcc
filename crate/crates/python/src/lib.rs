//! Python bindings. Point sets cross the boundary as lists of rows.

use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use outsample::diagnostics::error_bounds;
use outsample::diffusion::{diffusion_extend, diffusion_fit, exchange_identity_check};
use outsample::nystrom::{exactness_check, fit, run_split, RESIDUAL_TOL};
use outsample::persist::{from_json, to_json, Model};
use outsample::spectral::DEFAULT_RANK_TOL;
use outsample::synth::{generate, Shape};
use outsample::{KernelSpec, MeasuredSet, SplitView};

fn err(e: outsample::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn set(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<MeasuredSet> {
    match weights {
        Some(w) => MeasuredSet::new(points, w),
        None => MeasuredSet::uniform(points),
    }
    .map_err(err)
}

fn spec(kernel: &str, epsilon: f64, eta: f64) -> PyResult<KernelSpec> {
    match kernel {
        "gaussian" => KernelSpec::gaussian(epsilon, eta).map_err(err),
        "linear" => Ok(KernelSpec::Linear),
        other => Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
    }
}

/// Kernel embedding with Nystrom-type extension to new points.
#[pyclass(frozen, module = "pyoutsample")]
struct NystromModel {
    inner: outsample::ExtensionModel,
}

#[pymethods]
impl NystromModel {
    #[staticmethod]
    #[pyo3(signature = (points, weights=None, kernel="gaussian", epsilon=1.0, eta=0.0, rank_tol=DEFAULT_RANK_TOL))]
    fn fit(
        points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        kernel: &str,
        epsilon: f64,
        eta: f64,
        rank_tol: f64,
    ) -> PyResult<Self> {
        let train = set(points, weights)?;
        let inner = fit(&train, &spec(kernel, epsilon, eta)?, rank_tol).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.spectra().eigenvalues().to_vec()
    }

    /// Training features `phi_j(x) = sqrt(sigma_j) v_j(x)`, one row per point.
    fn train_features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.train_features().features())
    }

    fn embed(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.embed(&points).map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&Model::Nystrom(self.inner.clone())).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match from_json(text).map_err(err)? {
            Model::Nystrom(inner) => Ok(Self { inner }),
            Model::Diffusion(_) => Err(PyValueError::new_err("not a nystrom model")),
        }
    }
}

/// Diffusion-maps embedding with its out-of-sample extension.
#[pyclass(frozen, module = "pyoutsample")]
struct DiffusionModel {
    inner: outsample::DiffusionModel,
}

#[pymethods]
impl DiffusionModel {
    #[staticmethod]
    #[pyo3(signature = (points, weights=None, epsilon=1.0, eta=0.0, rank_tol=DEFAULT_RANK_TOL))]
    fn fit(
        points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        epsilon: f64,
        eta: f64,
        rank_tol: f64,
    ) -> PyResult<Self> {
        let train = set(points, weights)?;
        let inner = diffusion_fit(&train, epsilon, eta, rank_tol).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Nontrivial eigenvalues, decreasing.
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    #[getter]
    fn densities(&self) -> Vec<f64> {
        self.inner.densities().to_vec()
    }

    fn standard(&self) -> Vec<Vec<f64>> {
        rows(self.inner.standard())
    }

    /// `{"weighted", "standard", "normalized", "densities"}` for the new points.
    #[pyo3(signature = (points, weights=None))]
    fn extend<'py>(
        &self,
        py: Python<'py>,
        points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let test = set(points, weights)?;
        let e = diffusion_extend(&self.inner, &test).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("weighted", rows(&e.weighted))?;
        d.set_item("standard", rows(&e.standard))?;
        d.set_item("normalized", rows(&e.normalized))?;
        d.set_item("densities", e.updated_densities.clone())?;
        Ok(d)
    }

    /// Residuals of the two exchange identities on the training set.
    fn exchange_identities(&self) -> (f64, f64) {
        let r = exchange_identity_check(&self.inner);
        (r.forward, r.converse)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&Model::Diffusion(self.inner.clone())).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match from_json(text).map_err(err)? {
            Model::Diffusion(inner) => Ok(Self { inner }),
            Model::Nystrom(_) => Err(PyValueError::new_err("not a diffusion model")),
        }
    }
}

/// Fits on `train`, extends to `train + test`, retrains on the union and reports
/// the measured error against its bounds.
#[pyfunction]
#[pyo3(signature = (train, test, kernel="gaussian", epsilon=1.0, eta=0.0, rank_tol=DEFAULT_RANK_TOL))]
fn diagnose<'py>(
    py: Python<'py>,
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    kernel: &str,
    epsilon: f64,
    eta: f64,
    rank_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let train = set(train, None)?;
    let test = if test.is_empty() { None } else { Some(set(test, None)?) };
    let view = SplitView::from_parts(&train, test.as_ref()).map_err(err)?;
    let run = run_split(&view, &spec(kernel, epsilon, eta)?, rank_tol).map_err(err)?;
    let b = error_bounds(&run.residual, &view).map_err(err)?;
    let ex = exactness_check(&run.residual, RESIDUAL_TOL);
    let d = PyDict::new(py);
    d.set_item("avg_distance", b.avg_distance)?;
    d.set_item("trace_bound", b.trace_bound)?;
    d.set_item("spectral_bound", b.spectral_bound)?;
    d.set_item("trace_k0", b.trace_k0)?;
    d.set_item("spec_radius_k0", b.spec_radius_k0)?;
    d.set_item("s", b.s)?;
    d.set_item("exact", ex.exact)?;
    d.set_item("chain_holds", b.chain_holds())?;
    Ok(d)
}

/// `(points, labels)` for one of `swiss-roll`, `circles`, `gaussian-blobs`.
#[pyfunction]
#[pyo3(signature = (shape, n, seed, noise=0.0))]
fn synth(shape: &str, n: usize, seed: u64, noise: f64) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let shape: Shape = shape.parse().map_err(err)?;
    let s = generate(shape, n, noise, seed).map_err(err)?;
    let labels = s.labels().map(<[String]>::to_vec).unwrap_or_default();
    Ok((s.points().to_vec(), labels))
}

#[pymodule]
fn pyoutsample(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<NystromModel>()?;
    m.add_class::<DiffusionModel>()?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    Ok(())
}
