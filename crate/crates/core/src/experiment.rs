//! Experiment harness behind the command-line tool: config files, seeded grid
//! search over hyperparameters and kernels, method comparison, feature
//! importance, and deterministic report files.
//!
//! # Config format
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are
//! comma-separated. Unknown or repeated keys are errors.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `method` | `kernel_mvnmf`, `sv`, `cnmf`, `mnmf`, `awmnmf` | `kernel_mvnmf` |
//! | `views` | list of CSV paths (features × samples) | — |
//! | `labels` | path, one integer per line | — |
//! | `generator` | `blobs` or `rings` (instead of `views`) | — |
//! | `gen_n`, `gen_views` | integers | 60, 2 |
//! | `gen_dims` | list of integers (blobs) | `5, 5` |
//! | `gen_spread`, `gen_noise` | reals | 0.1, 0.05 |
//! | `gen_noise_view_dim`, `gen_noise_view_scale` | integer, real | 0, 1.0 |
//! | `gen_seed` | integer | `seed` |
//! | `k` | integer | number of label classes |
//! | `lambda`, `theta`, `gamma` | lists of reals (grid) | 1, 1, 2 |
//! | `kernel` | `linear`, `polynomial`, `gaussian` | `linear` |
//! | `sigma` / `sigma_exp` | list of σ / list of x with σ = eˣ | 1 |
//! | `poly_c`, `poly_d` | real, list of integers | 1, 2 |
//! | `graph_bandwidth` | `auto` or a real | `auto` |
//! | `max_iter`, `inner_pgd_steps`, `restarts` | integers | 100, 1, 10 |
//! | `rel_tol`, `ridge` | reals | 1e-6, 1e-10 |
//! | `weighting` | `adaptive` or `equal` | `adaptive` |
//! | `seeds` | integer, seeds per grid point | 1 (`compare`: 10) |
//! | `seed` | integer | 0 |
//! | `scale` | bool, min-max scale for the kernel solver | false |
//! | `view_index` | integer, required for `sv` | — |
//! | `importance_view` | view name or index | all views |
//! | `out` | output directory | — |
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::baselines::{self, NmfConfig};
use crate::data_io::{self, format_f64, MultiViewDataset};
use crate::error::{Error, Result};
use crate::graph_kernels::{Bandwidth, KernelSpec};
use crate::metrics::{self, MetricsReport};
use crate::solver::{self, assign_clusters, FactorizationState, SolverConfig, Weighting};

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(format!("writing {}", path.display()), e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KernelMvnmf,
    SingleView,
    Concatenated,
    MultiView,
    AdaptiveWeighted,
}

impl Method {
    pub fn is_baseline(self) -> bool {
        self != Method::KernelMvnmf
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::KernelMvnmf => "kernel_mvnmf",
            Method::SingleView => "sv",
            Method::Concatenated => "cnmf",
            Method::MultiView => "mnmf",
            Method::AdaptiveWeighted => "awmnmf",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "kernel_mvnmf" => Method::KernelMvnmf,
            "sv" => Method::SingleView,
            "cnmf" => Method::Concatenated,
            "mnmf" => Method::MultiView,
            "awmnmf" => Method::AdaptiveWeighted,
            _ => return Err(format!("unknown method '{s}' (kernel_mvnmf, sv, cnmf, mnmf, awmnmf)")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Linear,
    Polynomial,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { views: Vec<PathBuf>, labels: Option<PathBuf> },
    Blobs { n: usize, dims: Vec<usize>, spread: f64 },
    Rings { views: usize, n: usize, noise: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorExtras {
    pub noise_view_dim: usize,
    pub noise_view_scale: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub source: DataSource,
    pub extras: GeneratorExtras,
    pub k: Option<usize>,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kernel: KernelFamily,
    pub sigma: Vec<f64>,
    pub poly_c: f64,
    pub poly_d: Vec<u32>,
    pub graph_bandwidth: Bandwidth,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub inner_pgd_steps: usize,
    pub restarts: usize,
    pub ridge: f64,
    pub weighting: Weighting,
    pub seeds: Option<usize>,
    pub seed: u64,
    pub scale: bool,
    pub view_index: Option<usize>,
    pub importance_view: Option<String>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::KernelMvnmf,
            source: DataSource::Files {
                views: Vec::new(),
                labels: None,
            },
            extras: GeneratorExtras {
                noise_view_dim: 0,
                noise_view_scale: 1.0,
                seed: None,
            },
            k: None,
            lambda: vec![1.0],
            theta: vec![1.0],
            gamma: vec![2.0],
            kernel: KernelFamily::Linear,
            sigma: vec![1.0],
            poly_c: 1.0,
            poly_d: vec![2],
            graph_bandwidth: Bandwidth::Auto,
            max_iter: 100,
            rel_tol: 1e-6,
            inner_pgd_steps: 1,
            restarts: 10,
            ridge: solver::DEFAULT_RIDGE,
            weighting: Weighting::Adaptive,
            seeds: None,
            seed: 0,
            scale: false,
            view_index: None,
            importance_view: None,
            out: None,
        }
    }
}

const KEYS: &[&str] = &[
    "method", "views", "labels", "generator", "gen_n", "gen_views", "gen_dims", "gen_spread",
    "gen_noise", "gen_noise_view_dim", "gen_noise_view_scale", "gen_seed", "k", "lambda", "theta",
    "gamma", "kernel", "sigma", "sigma_exp", "poly_c", "poly_d", "graph_bandwidth", "max_iter",
    "rel_tol", "inner_pgd_steps", "restarts", "ridge", "weighting", "seeds", "seed", "scale",
    "view_index", "importance_view", "out",
];

struct Entry {
    line: usize,
    value: String,
}

struct Entries<'a> {
    map: BTreeMap<&'a str, Entry>,
    file: PathBuf,
}

impl Entries<'_> {
    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line: line as u64,
            column: 1,
            message,
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.err(e.line, format!("invalid value for '{key}': {err}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(e) = self.map.get(key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|err| self.err(e.line, format!("invalid item '{s}' in '{key}': {err}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(self.err(e.line, format!("'{key}' must list at least one value")));
        }
        Ok(Some(items))
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.line)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    /// Parses config text; `file` names it in errors and relative paths are
    /// resolved against `base`.
    pub fn parse(text: &str, file: &Path, base: &Path) -> Result<Self> {
        let mut entries = Entries {
            map: BTreeMap::new(),
            file: file.to_path_buf(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(entries.err(line, format!("expected 'key = value', got '{content}'")));
            };
            let key = key.trim();
            let Some(known) = KEYS.iter().find(|k| **k == key) else {
                return Err(entries.err(line, format!("unknown key '{key}'")));
            };
            if entries.map.contains_key(known) {
                return Err(entries.err(line, format!("key '{key}' given twice")));
            }
            entries.map.insert(
                known,
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }

        let mut c = ExperimentConfig::default();
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        if let Some(m) = entries.get::<Method>("method")? {
            c.method = m;
        }
        let views = entries.list::<PathBuf>("views")?;
        let labels = entries.get::<PathBuf>("labels")?;
        let generator = entries.get::<String>("generator")?;
        let gen_n = entries.get::<usize>("gen_n")?.unwrap_or(60);
        c.source = match (views, generator.as_deref()) {
            (Some(_), Some(_)) => {
                return Err(entries.err(entries.line_of("generator"), "give either 'views' or 'generator', not both".into()))
            }
            (Some(views), None) => DataSource::Files {
                views: views.into_iter().map(resolve).collect(),
                labels: labels.map(resolve),
            },
            (None, Some("blobs")) => DataSource::Blobs {
                n: gen_n,
                dims: entries.list("gen_dims")?.unwrap_or_else(|| vec![5, 5]),
                spread: entries.get("gen_spread")?.unwrap_or(0.1),
            },
            (None, Some("rings")) => DataSource::Rings {
                views: entries.get("gen_views")?.unwrap_or(2),
                n: gen_n,
                noise: entries.get("gen_noise")?.unwrap_or(0.05),
            },
            (None, Some(other)) => {
                return Err(entries.err(
                    entries.line_of("generator"),
                    format!("unknown generator '{other}' (blobs, rings)"),
                ))
            }
            (None, None) => DataSource::Files {
                views: Vec::new(),
                labels: labels.map(resolve),
            },
        };
        if generator.is_some() && entries.map.contains_key("labels") {
            return Err(entries.err(entries.line_of("labels"), "'labels' cannot be combined with a generator".into()));
        }
        c.extras = GeneratorExtras {
            noise_view_dim: entries.get("gen_noise_view_dim")?.unwrap_or(0),
            noise_view_scale: entries.get("gen_noise_view_scale")?.unwrap_or(1.0),
            seed: entries.get("gen_seed")?,
        };
        c.k = entries.get("k")?;
        c.lambda = entries.list("lambda")?.unwrap_or(c.lambda);
        c.theta = entries.list("theta")?.unwrap_or(c.theta);
        c.gamma = entries.list("gamma")?.unwrap_or(c.gamma);
        if let Some(kernel) = entries.get::<String>("kernel")? {
            c.kernel = match kernel.as_str() {
                "linear" => KernelFamily::Linear,
                "polynomial" | "poly" => KernelFamily::Polynomial,
                "gaussian" => KernelFamily::Gaussian,
                other => {
                    return Err(entries.err(
                        entries.line_of("kernel"),
                        format!("unknown kernel '{other}' (linear, polynomial, gaussian)"),
                    ))
                }
            };
        }
        match (entries.list::<f64>("sigma")?, entries.list::<f64>("sigma_exp")?) {
            (Some(_), Some(_)) => {
                return Err(entries.err(entries.line_of("sigma_exp"), "give either 'sigma' or 'sigma_exp', not both".into()))
            }
            (Some(s), None) => c.sigma = s,
            (None, Some(e)) => c.sigma = e.into_iter().map(f64::exp).collect(),
            (None, None) => {}
        }
        c.poly_c = entries.get("poly_c")?.unwrap_or(c.poly_c);
        c.poly_d = entries.list("poly_d")?.unwrap_or(c.poly_d);
        if let Some(b) = entries.get::<String>("graph_bandwidth")? {
            c.graph_bandwidth = if b == "auto" {
                Bandwidth::Auto
            } else {
                Bandwidth::Fixed(b.parse().map_err(|e| {
                    entries.err(entries.line_of("graph_bandwidth"), format!("invalid graph_bandwidth: {e}"))
                })?)
            };
        }
        c.max_iter = entries.get("max_iter")?.unwrap_or(c.max_iter);
        c.rel_tol = entries.get("rel_tol")?.unwrap_or(c.rel_tol);
        c.inner_pgd_steps = entries.get("inner_pgd_steps")?.unwrap_or(c.inner_pgd_steps);
        c.restarts = entries.get("restarts")?.unwrap_or(c.restarts);
        c.ridge = entries.get("ridge")?.unwrap_or(c.ridge);
        if let Some(w) = entries.get::<String>("weighting")? {
            c.weighting = match w.as_str() {
                "adaptive" => Weighting::Adaptive,
                "equal" => Weighting::Equal,
                other => {
                    return Err(entries.err(
                        entries.line_of("weighting"),
                        format!("unknown weighting '{other}' (adaptive, equal)"),
                    ))
                }
            };
        }
        c.seeds = entries.get("seeds")?;
        c.seed = entries.get("seed")?.unwrap_or(0);
        c.scale = entries.get("scale")?.unwrap_or(false);
        c.view_index = entries.get("view_index")?;
        c.importance_view = entries.get("importance_view")?;
        c.out = entries.get::<PathBuf>("out")?.map(resolve);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::SingleView && self.view_index.is_none() {
            return Err(Error::input("method 'sv' needs 'view_index'"));
        }
        if self.seeds == Some(0) {
            return Err(Error::input("'seeds' must be >= 1"));
        }
        for (name, list) in [("lambda", &self.lambda), ("theta", &self.theta), ("gamma", &self.gamma)] {
            if list.is_empty() {
                return Err(Error::input(format!("'{name}' grid must not be empty")));
            }
        }
        if self.sigma.is_empty() || self.poly_d.is_empty() {
            return Err(Error::input("kernel grids must not be empty"));
        }
        for spec in self.kernel_grid() {
            spec.validate()?;
        }
        Ok(())
    }

    /// Kernel settings spanned by the config.
    pub fn kernel_grid(&self) -> Vec<KernelSpec> {
        match self.kernel {
            KernelFamily::Linear => vec![KernelSpec::Linear],
            KernelFamily::Gaussian => self.sigma.iter().map(|&sigma| KernelSpec::Gaussian { sigma }).collect(),
            KernelFamily::Polynomial => self
                .poly_d
                .iter()
                .map(|&d| KernelSpec::Polynomial { c: self.poly_c, d })
                .collect(),
        }
    }

    /// Cartesian product of λ × θ × γ × kernel settings, in that nesting order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let kernels = self.kernel_grid();
        let mut points = Vec::new();
        for &lambda in &self.lambda {
            for &theta in &self.theta {
                for &gamma in &self.gamma {
                    for kernel in &kernels {
                        points.push(GridPoint {
                            index: points.len(),
                            lambda,
                            theta,
                            gamma,
                            kernel: *kernel,
                        });
                    }
                }
            }
        }
        points
    }

    /// Loads or generates the dataset described by the config.
    pub fn dataset(&self) -> Result<MultiViewDataset> {
        let seed = self.extras.seed.unwrap_or(self.seed);
        let k = self.k.unwrap_or(3);
        let ds = match &self.source {
            DataSource::Files { views, labels } => {
                if views.is_empty() {
                    return Err(Error::input("config needs 'views' or 'generator'"));
                }
                data_io::load_dataset(views, labels.as_deref())?
            }
            DataSource::Blobs { n, dims, spread } => data_io::make_blobs(k, *n, dims, *spread, seed)?,
            DataSource::Rings { views, n, noise } => data_io::make_rings(*views, *n, *noise, seed)?,
        };
        if self.extras.noise_view_dim > 0 {
            data_io::add_noise_view(
                &ds,
                self.extras.noise_view_dim,
                self.extras.noise_view_scale,
                seed.wrapping_add(1),
            )
        } else {
            Ok(ds)
        }
    }

    fn resolve_k(&self, dataset: &MultiViewDataset) -> Result<usize> {
        self.k
            .or_else(|| dataset.classes())
            .ok_or_else(|| Error::input("config needs 'k' when the dataset has no labels"))
    }

    fn data_description(&self) -> String {
        match &self.source {
            DataSource::Files { views, .. } => format!(
                "files:{}",
                views
                    .iter()
                    .map(|p| p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()))
                    .collect::<Vec<_>>()
                    .join("+")
            ),
            DataSource::Blobs { .. } => "generator:blobs".into(),
            DataSource::Rings { .. } => "generator:rings".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub lambda: f64,
    pub theta: f64,
    pub gamma: f64,
    pub kernel: KernelSpec,
}

impl GridPoint {
    /// File-name tag, e.g. `gp003`.
    pub fn tag(&self) -> String {
        format!("gp{:03}", self.index)
    }
}

/// Outcome of one fit, uniform across methods.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub labels: Vec<usize>,
    /// Names of the loss columns (views, or `concat`).
    pub view_names: Vec<String>,
    pub objective_trace: Vec<f64>,
    pub loss_trace: Vec<Vec<f64>>,
    pub beta_trace: Vec<Vec<f64>>,
    pub converged: bool,
    /// Present for the kernel solver only.
    pub state: Option<FactorizationState>,
}

impl MethodRun {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }
}

fn solver_config(c: &ExperimentConfig, gp: &GridPoint, k: usize, v: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        k,
        lambda: vec![gp.lambda; v],
        theta: vec![gp.theta; v],
        gamma: gp.gamma,
        kernels: vec![gp.kernel; v],
        graph_bandwidth: c.graph_bandwidth,
        max_iter: c.max_iter,
        rel_tol: c.rel_tol,
        inner_pgd_steps: c.inner_pgd_steps,
        restarts: c.restarts,
        seed,
        ridge: c.ridge,
        weighting: c.weighting,
    }
}

fn nmf_config(c: &ExperimentConfig, seed: u64) -> NmfConfig {
    NmfConfig {
        max_iter: c.max_iter,
        rel_tol: c.rel_tol,
        restarts: c.restarts,
        seed,
        graph_bandwidth: c.graph_bandwidth,
    }
}

fn single_run(names: Vec<String>, fit: baselines::NmfFit) -> MethodRun {
    let len = fit.objective_trace.len();
    MethodRun {
        labels: assign_clusters(fit.g.view()),
        view_names: names,
        loss_trace: fit.objective_trace.iter().map(|o| vec![*o]).collect(),
        objective_trace: fit.objective_trace,
        beta_trace: vec![vec![1.0]; len],
        converged: fit.converged,
        state: None,
    }
}

fn multi_run(names: Vec<String>, fit: baselines::MultiNmfFit) -> MethodRun {
    MethodRun {
        labels: assign_clusters(fit.g_star.view()),
        view_names: names,
        objective_trace: fit.objective_trace,
        loss_trace: fit.loss_trace,
        beta_trace: fit.beta_trace,
        converged: fit.converged,
        state: None,
    }
}

/// Fits `method` once. `scaled` is the min-max scaled dataset that the NMF
/// baselines require.
#[allow(clippy::too_many_arguments)]
pub fn run_method(
    method: Method,
    config: &ExperimentConfig,
    dataset: &MultiViewDataset,
    scaled: &MultiViewDataset,
    gp: &GridPoint,
    k: usize,
    seed: u64,
    view_index: Option<usize>,
) -> Result<MethodRun> {
    let names: Vec<String> = dataset.views.iter().map(|v| v.name.clone()).collect();
    let v = dataset.v();
    match method {
        Method::KernelMvnmf => {
            let data = if config.scale { scaled } else { dataset };
            let state = solver::fit(data, &solver_config(config, gp, k, v, seed))?;
            Ok(MethodRun {
                labels: state.labels(),
                view_names: names,
                objective_trace: state.objective_trace.clone(),
                loss_trace: state.loss_trace.clone(),
                beta_trace: state.beta_trace.clone(),
                converged: state.converged,
                state: Some(state),
            })
        }
        Method::SingleView => {
            let a = view_index.ok_or_else(|| Error::input("method 'sv' needs 'view_index'"))?;
            baselines::BaselineKind::SingleView(a).validate(v)?;
            let fit = baselines::gnmf_fit(scaled.views[a].data.view(), k, gp.theta, &nmf_config(config, seed))?;
            Ok(single_run(vec![names[a].clone()], fit))
        }
        Method::Concatenated => {
            let x = baselines::concat_views(scaled)?;
            let fit = baselines::gnmf_fit(x.view(), k, gp.theta, &nmf_config(config, seed))?;
            Ok(single_run(vec!["concat".into()], fit))
        }
        Method::MultiView => {
            let fit = baselines::mnmf_fit(scaled, k, &vec![gp.lambda; v], &vec![gp.theta; v], &nmf_config(config, seed))?;
            Ok(multi_run(names, fit))
        }
        Method::AdaptiveWeighted => {
            let fit = baselines::awmnmf_fit(
                scaled,
                k,
                &vec![gp.lambda; v],
                &vec![gp.theta; v],
                gp.gamma,
                &nmf_config(config, seed),
            )?;
            Ok(multi_run(names, fit))
        }
    }
}

/// Seed of the `i`-th repetition at every grid point.
pub fn run_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn median(xs: &mut [usize]) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

/// Aggregate of all seeds at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub point: GridPoint,
    pub runs: Vec<(u64, MethodRun)>,
    pub metrics: Option<Vec<MetricsReport>>,
}

impl GridResult {
    fn metric_stats(&self) -> Option<[(f64, f64); 4]> {
        let reports = self.metrics.as_ref()?;
        let col = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
        Some([
            col(|r| r.accuracy),
            col(|r| r.nmi),
            col(|r| r.rand_index),
            col(|r| r.mirkin_index),
        ])
    }

    /// Mean matched accuracy over seeds, when labels exist.
    pub fn mean_accuracy(&self) -> Option<f64> {
        self.metric_stats().map(|s| s[0].0)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub results: Vec<GridResult>,
    pub files: Vec<PathBuf>,
}

fn csv_bytes(header: &[String], rows: &[Vec<String>], comments: &[String]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let internal = |e: csv::Error| Error::Internal(format!("csv serialisation failed: {e}"));
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(row).map_err(internal)?;
    }
    w.into_inner().map_err(|e| Error::Internal(format!("csv serialisation failed: {e}")))
}

fn provenance(config: &ExperimentConfig, method: &str, seeds: usize) -> String {
    let kernel_scaling = if config.scale { "minmax" } else { "none" };
    let scaling = match method {
        "all" => format!("baselines:minmax,kernel_mvnmf:{kernel_scaling}"),
        "kernel_mvnmf" => kernel_scaling.to_string(),
        _ => "minmax (required by NMF baselines)".to_string(),
    };
    format!(
        "kmvnmf {} method={method} data={} scaling={scaling} seeds={seeds} base_seed={}",
        env!("CARGO_PKG_VERSION"),
        config.data_description(),
        config.seed
    )
}

fn trace_csv(result: &GridResult) -> Result<Vec<u8>> {
    let names = &result.runs[0].1.view_names;
    let mut header: Vec<String> = vec!["seed".into(), "iteration".into(), "objective".into()];
    header.extend(names.iter().map(|n| format!("q_{n}")));
    header.extend(names.iter().map(|n| format!("beta_{n}")));
    let mut rows = Vec::new();
    for (seed, run) in &result.runs {
        for (it, obj) in run.objective_trace.iter().enumerate() {
            let mut row = vec![seed.to_string(), it.to_string(), format_f64(*obj)];
            row.extend(run.loss_trace[it].iter().map(|x| format_f64(*x)));
            row.extend(run.beta_trace[it].iter().map(|x| format_f64(*x)));
            rows.push(row);
        }
    }
    csv_bytes(&header, &rows, &[])
}

fn assignments_csv(result: &GridResult) -> Result<Vec<u8>> {
    let header = vec!["seed".to_string(), "sample".into(), "cluster".into()];
    let rows: Vec<Vec<String>> = result
        .runs
        .iter()
        .flat_map(|(seed, run)| {
            run.labels
                .iter()
                .enumerate()
                .map(move |(j, c)| vec![seed.to_string(), j.to_string(), c.to_string()])
        })
        .collect();
    csv_bytes(&header, &rows, &[])
}

fn metrics_csv(config: &ExperimentConfig, results: &[GridResult], seeds: usize) -> Result<Vec<u8>> {
    let header: Vec<String> = [
        "grid_point", "method", "lambda", "theta", "gamma", "kernel", "seeds", "accuracy", "nmi",
        "rand_index", "mirkin_index", "accuracy_std", "nmi_std", "rand_index_std",
        "mirkin_index_std", "iterations_median", "converged_runs", "objective_mean",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let method = config.method.to_string();
    let rows = results
        .iter()
        .map(|r| {
            let mut row = vec![
                r.point.tag(),
                method.clone(),
                format_f64(r.point.lambda),
                format_f64(r.point.theta),
                format_f64(r.point.gamma),
                r.point.kernel.to_string(),
                r.runs.len().to_string(),
            ];
            match r.metric_stats() {
                Some(stats) => {
                    row.extend(stats.iter().map(|s| format_f64(s.0)));
                    row.extend(stats.iter().map(|s| format_f64(s.1)));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 8)),
            }
            let mut its: Vec<usize> = r.runs.iter().map(|(_, run)| run.iterations()).collect();
            row.push(format_f64(median(&mut its)));
            row.push(r.runs.iter().filter(|(_, run)| run.converged).count().to_string());
            let finals: Vec<f64> = r
                .runs
                .iter()
                .map(|(_, run)| *run.objective_trace.last().expect("non-empty trace"))
                .collect();
            row.push(format_f64(mean_std(&finals).0));
            row
        })
        .collect::<Vec<_>>();
    csv_bytes(&header, &rows, &[provenance(config, &method, seeds)])
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

/// Runs the configured method at every grid point and seed and writes
/// `metrics.csv`, `trace_<gp>.csv` and `assignments_<gp>.csv` into `out`.
///
/// Grid points that fail are skipped in the reports; the first failure is
/// returned, with its grid point, after the successful ones are written.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let dataset = config.dataset()?;
    let scaled = data_io::minmax_scale(&dataset);
    let k = config.resolve_k(&dataset)?;
    let seeds = config.seeds.unwrap_or(1);
    let grid = config.grid();

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..seeds).map(move |s| (g, s))).collect();
    let runs: Vec<Result<MethodRun>> = jobs
        .par_iter()
        .map(|&(g, s)| {
            run_method(
                config.method,
                config,
                &dataset,
                &scaled,
                &grid[g],
                k,
                run_seed(config.seed, s),
                config.view_index,
            )
        })
        .collect();

    let mut results = Vec::new();
    let mut first_error = None;
    let mut runs = runs.into_iter();
    for point in &grid {
        let chunk: Vec<Result<MethodRun>> = runs.by_ref().take(seeds).collect();
        let collected: Result<Vec<(u64, MethodRun)>> = chunk
            .into_iter()
            .enumerate()
            .map(|(s, r)| r.map(|run| (run_seed(config.seed, s), run)))
            .collect();
        let point_result = collected.and_then(|runs| {
            let metrics = match &dataset.labels {
                Some(truth) => Some(
                    runs.iter()
                        .map(|(_, run)| metrics::evaluate(truth, &run.labels))
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            Ok(GridResult {
                point: *point,
                runs,
                metrics,
            })
        });
        match point_result {
            Ok(r) => results.push(r),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e.context(format!(
                        "grid point {} (lambda={}, theta={}, gamma={}, kernel={})",
                        point.tag(),
                        point.lambda,
                        point.theta,
                        point.gamma,
                        point.kernel
                    )));
                }
            }
        }
    }

    ensure_dir(out)?;
    let mut files = Vec::new();
    for r in &results {
        let trace = out.join(format!("trace_{}.csv", r.point.tag()));
        write_atomic(&trace, &trace_csv(r)?)?;
        let assign = out.join(format!("assignments_{}.csv", r.point.tag()));
        write_atomic(&assign, &assignments_csv(r)?)?;
        files.push(trace);
        files.push(assign);
    }
    let metrics_path = out.join("metrics.csv");
    write_atomic(&metrics_path, &metrics_csv(config, &results, seeds)?)?;
    files.push(metrics_path);

    match first_error {
        Some(e) => Err(e),
        None => Ok(ExperimentReport { results, files }),
    }
}

/// Row-L1 importance of every feature of a linear-kernel view, from the
/// explicit centroids `F = X P`. Sorted by decreasing importance, ties by
/// feature index.
pub fn feature_importance(
    dataset: &MultiViewDataset,
    state: &FactorizationState,
    kernel: &KernelSpec,
    view_index: usize,
) -> Result<Vec<(usize, f64)>> {
    let view = dataset.view(view_index)?;
    if !kernel.is_linear() {
        return Err(Error::Unsupported(format!(
            "feature importance of view '{}' needs a linear kernel; with {kernel} the centroids \
             live implicitly in feature space and F = Φ(X)P is never formed",
            view.name
        )));
    }
    let p = state
        .p
        .get(view_index)
        .ok_or_else(|| Error::input(format!("state has no view {view_index}")))?;
    if p.nrows() != view.data.ncols() {
        return Err(Error::input(format!(
            "P has {} rows but view '{}' has {} samples",
            p.nrows(),
            view.name,
            view.data.ncols()
        )));
    }
    Ok(rank_rows(&view.data.dot(p)))
}

/// Features ranked by the L1 norm of their rows in `f`.
pub fn rank_rows(f: &Array2<f64>) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = f
        .rows()
        .into_iter()
        .enumerate()
        .map(|(j, row)| (j, row.iter().map(|x| x.abs()).sum()))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

fn resolve_view(dataset: &MultiViewDataset, spec: &str) -> Result<usize> {
    if let Some(i) = dataset.views.iter().position(|v| v.name == spec) {
        return Ok(i);
    }
    match spec.parse::<usize>() {
        Ok(i) if i < dataset.v() => Ok(i),
        _ => Err(Error::input(format!("no view named or indexed '{spec}'"))),
    }
}

/// Fits the kernel solver at the first grid point with the base seed and
/// writes `importance_<view>.csv` for the requested view, or for every view.
pub fn run_importance(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let dataset = config.dataset()?;
    let data = if config.scale { data_io::minmax_scale(&dataset) } else { dataset };
    let k = config.resolve_k(&data)?;
    let gp = config.grid()[0];
    let views: Vec<usize> = match &config.importance_view {
        Some(spec) => vec![resolve_view(&data, spec)?],
        None => (0..data.v()).collect(),
    };
    if !gp.kernel.is_linear() {
        let view = &data.views[views[0]].name;
        return Err(Error::Unsupported(format!(
            "feature importance of view '{view}' needs a linear kernel; with {} the centroids \
             live implicitly in feature space and F = Φ(X)P is never formed",
            gp.kernel
        )));
    }
    let state = solver::fit(&data, &solver_config(config, &gp, k, data.v(), config.seed))?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    for a in views {
        let ranked = feature_importance(&data, &state, &gp.kernel, a)?;
        let header = vec!["rank".to_string(), "feature".into(), "importance".into()];
        let rows: Vec<Vec<String>> = ranked
            .iter()
            .enumerate()
            .map(|(r, (j, imp))| vec![(r + 1).to_string(), j.to_string(), format_f64(*imp)])
            .collect();
        let path = out.join(format!("importance_{}.csv", data.views[a].name));
        write_atomic(&path, &csv_bytes(&header, &rows, &[])?)?;
        files.push(path);
    }
    Ok(files)
}

/// Mean metrics per method, as percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub methods: Vec<String>,
    /// `metrics[m] = [Acc, NMI, RI, MI]` in percent.
    pub metrics: Vec<[f64; 4]>,
}

impl ComparisonTable {
    pub fn column(&self, method: &str) -> Option<[f64; 4]> {
        self.methods.iter().position(|m| m == method).map(|i| self.metrics[i])
    }

    /// One column per method, rows Acc / NMI / RI / MI with two decimals.
    pub fn to_csv(&self, comment: &str) -> Result<Vec<u8>> {
        let mut header = vec!["metric".to_string()];
        header.extend(self.methods.iter().cloned());
        let rows: Vec<Vec<String>> = ["Acc", "NMI", "RI", "MI"]
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let mut row = vec![name.to_string()];
                row.extend(self.metrics.iter().map(|m| format!("{:.2}", m[i])));
                row
            })
            .collect();
        csv_bytes(&header, &rows, &[comment.to_string()])
    }
}

/// Runs every view's single-view baseline, the concatenated, multi-view and
/// adaptive weighted baselines and the kernel solver over the same seeds at
/// the first grid point, and writes `comparison.csv`.
pub fn compare_methods(config: &ExperimentConfig, out: &Path) -> Result<ComparisonTable> {
    config.validate()?;
    let dataset = config.dataset()?;
    let truth = dataset
        .labels
        .clone()
        .ok_or_else(|| Error::input("compare needs ground-truth labels"))?;
    let scaled = data_io::minmax_scale(&dataset);
    let k = config.resolve_k(&dataset)?;
    let seeds = config.seeds.unwrap_or(10);
    let gp = config.grid()[0];

    let mut methods: Vec<(String, Method, Option<usize>)> = dataset
        .views
        .iter()
        .enumerate()
        .map(|(a, v)| (format!("sv_{}", v.name), Method::SingleView, Some(a)))
        .collect();
    for m in [Method::Concatenated, Method::MultiView, Method::AdaptiveWeighted, Method::KernelMvnmf] {
        methods.push((m.to_string(), m, None));
    }

    let jobs: Vec<(usize, usize)> = (0..methods.len()).flat_map(|m| (0..seeds).map(move |s| (m, s))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(m, s)| {
            let (name, method, view) = &methods[m];
            run_method(*method, config, &dataset, &scaled, &gp, k, run_seed(config.seed, s), *view)
                .and_then(|run| metrics::evaluate(&truth, &run.labels))
                .map_err(|e| e.context(format!("method {name}, seed {}", run_seed(config.seed, s))))
        })
        .collect::<Result<Vec<_>>>()?;

    let metrics = reports
        .chunks(seeds)
        .map(|chunk| {
            let mean = |f: fn(&MetricsReport) -> f64| 100.0 * chunk.iter().map(f).sum::<f64>() / chunk.len() as f64;
            [
                mean(|r| r.accuracy),
                mean(|r| r.nmi),
                mean(|r| r.rand_index),
                mean(|r| r.mirkin_index),
            ]
        })
        .collect();
    let table = ComparisonTable {
        methods: methods.into_iter().map(|(n, _, _)| n).collect(),
        metrics,
    };
    ensure_dir(out)?;
    let comment = format!(
        "{} lambda={} theta={} gamma={} kernel={} (percent, mean over seeds)",
        provenance(config, "all", seeds),
        gp.lambda,
        gp.theta,
        gp.gamma,
        gp.kernel
    );
    write_atomic(&out.join("comparison.csv"), &table.to_csv(&comment)?)?;
    Ok(table)
}

/// Writes the configured generator's dataset as CSV files into `out`.
pub fn run_gen(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if matches!(config.source, DataSource::Files { .. }) {
        return Err(Error::input("gen needs a 'generator' in the config"));
    }
    let dataset = config.dataset()?;
    data_io::write_dataset(&dataset, out)
}
