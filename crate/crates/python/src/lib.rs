//! Python bindings: datasets, the kernel solver, the baselines, metrics and
//! feature importance. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use kmvnmf::baselines::{self, NmfConfig};
use kmvnmf::experiment;
use kmvnmf::{data_io, metrics, solver, Bandwidth, ErrorCategory, KernelSpec, Weighting};
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: kmvnmf::Error) -> PyErr {
    let msg = err.to_string();
    match err.category() {
        ErrorCategory::Input => PyValueError::new_err(msg),
        ErrorCategory::Solver => PyRuntimeError::new_err(msg),
        ErrorCategory::Io => PyOSError::new_err(msg),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix: rows differ in length"));
    }
    Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse_kernel(spec: &str) -> PyResult<KernelSpec> {
    spec.parse::<KernelSpec>().map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_bandwidth(bandwidth: Option<f64>) -> Bandwidth {
    bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed)
}

/// Views (features × samples) over shared samples, with optional labels.
#[pyclass(module = "kmvnmf")]
struct Dataset {
    inner: data_io::MultiViewDataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (views, labels=None, names=None))]
    fn new(views: Vec<Vec<Vec<f64>>>, labels: Option<Vec<usize>>, names: Option<Vec<String>>) -> PyResult<Self> {
        let names = names.unwrap_or_else(|| (0..views.len()).map(|a| format!("view{a}")).collect());
        if names.len() != views.len() {
            return Err(PyValueError::new_err("one name per view required"));
        }
        let views = views
            .into_iter()
            .zip(names)
            .map(|(v, name)| Ok(data_io::View::new(name, matrix(v)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = data_io::MultiViewDataset::new(views, labels).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    /// Loads view CSV files and an optional labels file.
    #[staticmethod]
    #[pyo3(signature = (view_paths, labels_path=None))]
    fn load(view_paths: Vec<PathBuf>, labels_path: Option<PathBuf>) -> PyResult<Self> {
        let inner = data_io::load_dataset(&view_paths, labels_path.as_deref()).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (k, n, dims, spread, seed=0))]
    fn blobs(k: usize, n: usize, dims: Vec<usize>, spread: f64, seed: u64) -> PyResult<Self> {
        let inner = data_io::make_blobs(k, n, &dims, spread, seed).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (v, n, noise, seed=0))]
    fn rings(v: usize, n: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let inner = data_io::make_rings(v, n, noise, seed).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    /// Copy with every feature row min-max scaled to [0, 1].
    fn minmax_scale(&self) -> Self {
        Dataset {
            inner: data_io::minmax_scale(&self.inner),
        }
    }

    /// Copy with an extra pure-noise view.
    #[pyo3(signature = (dim, scale=1.0, seed=0))]
    fn with_noise_view(&self, dim: usize, scale: f64, seed: u64) -> PyResult<Self> {
        let inner = data_io::add_noise_view(&self.inner, dim, scale, seed).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn v(&self) -> usize {
        self.inner.v()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels.clone()
    }

    #[getter]
    fn view_names(&self) -> Vec<String> {
        self.inner.views.iter().map(|v| v.name.clone()).collect()
    }

    fn view(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.view(index).map_err(to_py)?.data))
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, v={})", self.inner.n(), self.inner.v())
    }
}

/// Solver settings. Per-view lists are broadcast from scalars.
#[pyclass(module = "kmvnmf", get_all, set_all)]
struct SolverConfig {
    k: usize,
    lambda_: f64,
    theta: f64,
    gamma: f64,
    kernel: String,
    graph_bandwidth: Option<f64>,
    max_iter: usize,
    rel_tol: f64,
    inner_pgd_steps: usize,
    restarts: usize,
    seed: u64,
    equal_weights: bool,
}

#[pymethods]
impl SolverConfig {
    #[new]
    #[pyo3(signature = (k, lambda_=1.0, theta=1.0, gamma=2.0, kernel="linear".to_string(),
        graph_bandwidth=None, max_iter=100, rel_tol=1e-6, inner_pgd_steps=1, restarts=10,
        seed=0, equal_weights=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        k: usize,
        lambda_: f64,
        theta: f64,
        gamma: f64,
        kernel: String,
        graph_bandwidth: Option<f64>,
        max_iter: usize,
        rel_tol: f64,
        inner_pgd_steps: usize,
        restarts: usize,
        seed: u64,
        equal_weights: bool,
    ) -> PyResult<Self> {
        parse_kernel(&kernel)?;
        Ok(SolverConfig {
            k,
            lambda_,
            theta,
            gamma,
            kernel,
            graph_bandwidth,
            max_iter,
            rel_tol,
            inner_pgd_steps,
            restarts,
            seed,
            equal_weights,
        })
    }
}

impl SolverConfig {
    fn build(&self, views: usize) -> PyResult<solver::SolverConfig> {
        let mut c = solver::SolverConfig::new(self.k, views);
        c.lambda = vec![self.lambda_; views];
        c.theta = vec![self.theta; views];
        c.gamma = self.gamma;
        c.kernels = vec![parse_kernel(&self.kernel)?; views];
        c.graph_bandwidth = parse_bandwidth(self.graph_bandwidth);
        c.max_iter = self.max_iter;
        c.rel_tol = self.rel_tol;
        c.inner_pgd_steps = self.inner_pgd_steps;
        c.restarts = self.restarts;
        c.seed = self.seed;
        c.weighting = if self.equal_weights {
            Weighting::Equal
        } else {
            Weighting::Adaptive
        };
        Ok(c)
    }
}

/// Result of a kernel solver fit.
#[pyclass(module = "kmvnmf")]
struct FactorizationState {
    inner: solver::FactorizationState,
    kernels: Vec<KernelSpec>,
}

#[pymethods]
impl FactorizationState {
    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.objective_trace.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn g_star(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.g_star)
    }

    fn p(&self, view: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .p
            .get(view)
            .map(rows)
            .ok_or_else(|| PyValueError::new_err(format!("no view {view}")))
    }

    fn g(&self, view: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .g
            .get(view)
            .map(rows)
            .ok_or_else(|| PyValueError::new_err(format!("no view {view}")))
    }

    /// Features of a linear-kernel view ranked by the row-L1 norm of `X P`.
    fn feature_importance(&self, dataset: &Dataset, view: usize) -> PyResult<Vec<(usize, f64)>> {
        let kernel = self
            .kernels
            .get(view)
            .ok_or_else(|| PyValueError::new_err(format!("no view {view}")))?;
        experiment::feature_importance(&dataset.inner, &self.inner, kernel, view).map_err(to_py)
    }
}

/// Fits the adaptive weighted kernel multi-view model.
#[pyfunction]
fn fit(py: Python<'_>, dataset: &Dataset, config: &SolverConfig) -> PyResult<FactorizationState> {
    let cfg = config.build(dataset.inner.v())?;
    let ds = &dataset.inner;
    let inner = py.detach(|| solver::fit(ds, &cfg)).map_err(to_py)?;
    Ok(FactorizationState {
        inner,
        kernels: cfg.kernels,
    })
}

/// Runs a baseline (`sv`, `cnmf`, `mnmf`, `awmnmf`) on nonnegative data and
/// returns `(labels, objective_trace)`.
#[pyfunction]
#[pyo3(signature = (dataset, method, k, lambda_=1.0, theta=1.0, gamma=2.0, view_index=0,
    graph_bandwidth=None, max_iter=100, rel_tol=1e-6, restarts=10, seed=0))]
#[allow(clippy::too_many_arguments)]
fn baseline(
    py: Python<'_>,
    dataset: &Dataset,
    method: &str,
    k: usize,
    lambda_: f64,
    theta: f64,
    gamma: f64,
    view_index: usize,
    graph_bandwidth: Option<f64>,
    max_iter: usize,
    rel_tol: f64,
    restarts: usize,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<f64>)> {
    let cfg = NmfConfig {
        max_iter,
        rel_tol,
        restarts,
        seed,
        graph_bandwidth: parse_bandwidth(graph_bandwidth),
    };
    let ds = &dataset.inner;
    let v = ds.v();
    let result = py.detach(|| -> kmvnmf::Result<(Vec<usize>, Vec<f64>)> {
        match method {
            "sv" => {
                let x = &ds.view(view_index)?.data;
                let f = baselines::gnmf_fit(x.view(), k, theta, &cfg)?;
                Ok((solver::assign_clusters(f.g.view()), f.objective_trace))
            }
            "cnmf" => {
                let x = baselines::concat_views(ds)?;
                let f = baselines::gnmf_fit(x.view(), k, theta, &cfg)?;
                Ok((solver::assign_clusters(f.g.view()), f.objective_trace))
            }
            "mnmf" => {
                let f = baselines::mnmf_fit(ds, k, &vec![lambda_; v], &vec![theta; v], &cfg)?;
                Ok((solver::assign_clusters(f.g_star.view()), f.objective_trace))
            }
            "awmnmf" => {
                let f = baselines::awmnmf_fit(ds, k, &vec![lambda_; v], &vec![theta; v], gamma, &cfg)?;
                Ok((solver::assign_clusters(f.g_star.view()), f.objective_trace))
            }
            other => Err(kmvnmf::Error::input(format!(
                "unknown baseline '{other}' (sv, cnmf, mnmf, awmnmf)"
            ))),
        }
    });
    result.map_err(to_py)
}

/// Accuracy, NMI, Rand and Mirkin indices as a dict.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, truth: Vec<usize>, pred: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::evaluate(&truth, &pred).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("nmi", r.nmi)?;
    d.set_item("rand_index", r.rand_index)?;
    d.set_item("mirkin_index", r.mirkin_index)?;
    Ok(d)
}

/// Closed-form view weights for losses `q` and exponent `gamma`.
#[pyfunction]
fn update_beta(q: Vec<f64>, gamma: f64) -> Vec<f64> {
    solver::update_beta(&q, gamma)
}

#[pymodule]
#[pyo3(name = "kmvnmf")]
fn kmvnmf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<SolverConfig>()?;
    m.add_class::<FactorizationState>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(update_beta, m)?)?;
    Ok(())
}
