//! Comparison methods optimised by alternating projected gradient descent:
//! graph-regularised NMF on one view or on concatenated views, multi-view NMF
//! with a consensus membership, and its adaptive weighted variant.
//!
//! All of them factorise nonnegative data as `X ≈ F G` with `F, G ≥ 0`. Each
//! block step uses the step size `1/Lips` of its own quadratic, so every
//! objective trace is non-increasing.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data_io::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph_kernels::{
    similarity_graph, spectral_norm, Bandwidth, GraphLaplacian, DEFAULT_SPECTRAL_MAX_ITER,
    DEFAULT_SPECTRAL_TOL,
};
use crate::linalg::{frob_dist_sq, frob_inner, projected_step};
use crate::solver::{restart_seed, update_beta, weighted_consensus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    SingleView(usize),
    Concatenated,
    MultiView,
    AdaptiveWeightedMultiView,
}

impl BaselineKind {
    pub fn validate(&self, views: usize) -> Result<()> {
        match *self {
            BaselineKind::SingleView(i) if i >= views => Err(Error::input(format!(
                "single-view index {i} out of range (dataset has {views} views)"
            ))),
            _ => Ok(()),
        }
    }
}

/// Optimisation settings shared by all baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub graph_bandwidth: Bandwidth,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            max_iter: 100,
            rel_tol: 1e-6,
            restarts: 10,
            seed: 0,
            graph_bandwidth: Bandwidth::Auto,
        }
    }
}

impl NmfConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::input("max_iter and restarts must be >= 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::input("rel_tol must be >= 0"));
        }
        Ok(())
    }
}

/// Result of a single-view fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFit {
    pub f: Array2<f64>,
    pub g: Array2<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Result of a multi-view fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiNmfFit {
    pub f: Vec<Array2<f64>>,
    pub g: Vec<Array2<f64>>,
    pub g_star: Array2<f64>,
    pub beta: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub loss_trace: Vec<Vec<f64>>,
    pub beta_trace: Vec<Vec<f64>>,
    pub converged: bool,
}

fn check_nonnegative(x: ArrayView2<f64>, what: &str) -> Result<()> {
    if let Some(((r, c), v)) = x.indexed_iter().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::input(format!(
            "{what} has negative or invalid entry {v} at row {r}, column {c}; \
             NMF baselines need nonnegative data, apply min-max scaling first"
        )));
    }
    Ok(())
}

fn sigma_max(m: &Array2<f64>) -> Result<f64> {
    Ok(spectral_norm(m, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER)?.bound())
}

struct NmfView<'a> {
    x: ArrayView2<'a, f64>,
    graph: GraphLaplacian,
    laplacian_norm: f64,
}

impl<'a> NmfView<'a> {
    fn new(x: ArrayView2<'a, f64>, bandwidth: Bandwidth, theta: f64) -> Result<Self> {
        check_nonnegative(x, "baseline input")?;
        let graph = similarity_graph(x, bandwidth)?;
        let laplacian_norm = if theta == 0.0 { 0.0 } else { sigma_max(graph.matrix())? };
        Ok(NmfView {
            x,
            graph,
            laplacian_norm,
        })
    }
}

/// `‖X − FG‖²_F`, `λ‖G − G*‖²_F` and `θ tr(GLGᵀ)` summed.
fn nmf_loss(
    view: &NmfView,
    f: &Array2<f64>,
    g: &Array2<f64>,
    g_star: Option<&Array2<f64>>,
    lambda: f64,
    theta: f64,
) -> f64 {
    let resid = &view.x - &f.dot(g);
    let mut loss = resid.iter().map(|r| r * r).sum::<f64>();
    if let Some(gs) = g_star {
        loss += lambda * frob_dist_sq(g.view(), gs.view());
    }
    if theta != 0.0 {
        loss += theta * frob_inner(g.dot(view.graph.matrix()).view(), g.view());
    }
    loss
}

/// Projected gradient step on `F` for `‖X − FG‖²`, Lipschitz `2σ_max(GGᵀ)`.
fn f_step(x: ArrayView2<f64>, f: &Array2<f64>, g: &Array2<f64>) -> Result<Array2<f64>> {
    let ggt = g.dot(&g.t());
    let lips = 2.0 * sigma_max(&ggt)?;
    if !(lips > 0.0) {
        // G vanished entirely; F does not influence the loss.
        return Ok(f.clone());
    }
    let grad = (f.dot(&ggt) - x.dot(&g.t())) * 2.0;
    Ok(projected_step(f, &grad, 1.0 / lips))
}

/// Projected gradient step on `G`, Lipschitz `2[σ_max(FᵀF) + λ + θσ_max(L)]`.
/// Without a consensus target the λ term acts as a proximal damping.
#[allow(clippy::too_many_arguments)]
fn g_step(
    view: &NmfView,
    f: &Array2<f64>,
    g: &Array2<f64>,
    g_star: Option<&Array2<f64>>,
    lambda: f64,
    theta: f64,
) -> Result<Array2<f64>> {
    let ftf = f.t().dot(f);
    let lips = 2.0 * (sigma_max(&ftf)? + lambda + theta * view.laplacian_norm);
    if !(lips > 0.0) {
        return Ok(g.clone());
    }
    let mut grad = ftf.dot(g) - f.t().dot(&view.x);
    if let Some(gs) = g_star {
        grad.scaled_add(lambda, g);
        grad.scaled_add(-lambda, gs);
    }
    if theta != 0.0 {
        grad.scaled_add(theta, &g.dot(view.graph.matrix()));
    }
    grad *= 2.0;
    Ok(projected_step(g, &grad, 1.0 / lips))
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>())
}

fn has_converged(prev: f64, cur: f64, rel_tol: f64) -> bool {
    (prev - cur).abs() <= rel_tol * prev.abs().max(f64::MIN_POSITIVE)
}

fn check_k(k: usize, m: usize, n: usize) -> Result<()> {
    if k < 1 || k > m.min(n) {
        return Err(Error::input(format!(
            "k = {k} must satisfy 1 <= k <= min(m, n) = {}",
            m.min(n)
        )));
    }
    Ok(())
}

/// Graph-regularised NMF `min ‖X − FG‖² + θ tr(GLGᵀ)`, `F, G ≥ 0`.
pub fn gnmf_fit(x: ArrayView2<f64>, k: usize, theta: f64, config: &NmfConfig) -> Result<NmfFit> {
    gnmf_fit_damped(x, k, theta, 0.0, config)
}

/// [`gnmf_fit`] with `damping` added to the G-step Lipschitz constant.
pub fn gnmf_fit_damped(
    x: ArrayView2<f64>,
    k: usize,
    theta: f64,
    damping: f64,
    config: &NmfConfig,
) -> Result<NmfFit> {
    config.validate()?;
    check_k(k, x.nrows(), x.ncols())?;
    let view = NmfView::new(x, config.graph_bandwidth, theta)?;
    let runs = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.seed, r));
            let f = uniform(&mut rng, x.nrows(), k);
            let g = uniform(&mut rng, k, x.ncols());
            gnmf_from(&view, f, g, theta, damping, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best_by(runs, |r| *r.objective_trace.last().expect("non-empty")))
}

fn gnmf_from(
    view: &NmfView,
    mut f: Array2<f64>,
    mut g: Array2<f64>,
    theta: f64,
    damping: f64,
    config: &NmfConfig,
) -> Result<NmfFit> {
    let mut trace = vec![nmf_loss(view, &f, &g, None, 0.0, theta)];
    let mut converged = false;
    for _ in 0..config.max_iter {
        f = f_step(view.x, &f, &g)?;
        g = g_step(view, &f, &g, None, damping, theta)?;
        let cur = nmf_loss(view, &f, &g, None, 0.0, theta);
        if !cur.is_finite() {
            return Err(Error::solver(format!("non-finite baseline objective {cur}")));
        }
        let prev = *trace.last().expect("non-empty");
        trace.push(cur);
        if has_converged(prev, cur, config.rel_tol) {
            converged = true;
            break;
        }
    }
    Ok(NmfFit {
        f,
        g,
        objective_trace: trace,
        converged,
    })
}

fn best_by<T>(runs: Vec<T>, key: impl Fn(&T) -> f64) -> T {
    let mut best: Option<T> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| key(&run) < key(b)) {
            best = Some(run);
        }
    }
    best.expect("restarts >= 1")
}

/// Stacks the views row-wise in view order.
pub fn concat_views(dataset: &MultiViewDataset) -> Result<Array2<f64>> {
    dataset.validate()?;
    let parts: Vec<ArrayView2<f64>> = dataset.views.iter().map(|v| v.data.view()).collect();
    concatenate(Axis(0), &parts).map_err(|e| Error::input(format!("cannot concatenate views: {e}")))
}

/// How a multi-view baseline weights its views.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ViewWeighting {
    Equal,
    Adaptive { gamma: f64 },
}

/// Multi-view NMF with a consensus membership `G*` and equal view weights.
pub fn mnmf_fit(
    dataset: &MultiViewDataset,
    k: usize,
    lambda: &[f64],
    theta: &[f64],
    config: &NmfConfig,
) -> Result<MultiNmfFit> {
    multi_view_fit(dataset, k, lambda, theta, ViewWeighting::Equal, config)
}

/// Multi-view NMF whose views are weighted by `β_a^γ` with β re-estimated
/// from the per-view losses every iteration.
pub fn awmnmf_fit(
    dataset: &MultiViewDataset,
    k: usize,
    lambda: &[f64],
    theta: &[f64],
    gamma: f64,
    config: &NmfConfig,
) -> Result<MultiNmfFit> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::input(format!("gamma must be >= 0, got {gamma}")));
    }
    multi_view_fit(dataset, k, lambda, theta, ViewWeighting::Adaptive { gamma }, config)
}

fn multi_view_fit(
    dataset: &MultiViewDataset,
    k: usize,
    lambda: &[f64],
    theta: &[f64],
    weighting: ViewWeighting,
    config: &NmfConfig,
) -> Result<MultiNmfFit> {
    config.validate()?;
    dataset.validate()?;
    let v = dataset.v();
    if lambda.len() != v || theta.len() != v {
        return Err(Error::input(format!(
            "lambda and theta need one entry per view ({v})"
        )));
    }
    if lambda.iter().any(|l| !(*l > 0.0)) || theta.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::input("lambda must be > 0 and theta >= 0"));
    }
    let views = dataset
        .views
        .iter()
        .zip(theta)
        .map(|(view, &t)| {
            check_k(k, view.data.nrows(), view.data.ncols())?;
            NmfView::new(view.data.view(), config.graph_bandwidth, t)
                .map_err(|e| e.context(format!("view '{}'", view.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let runs = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.seed, r));
            let init: Vec<(Array2<f64>, Array2<f64>)> = views
                .iter()
                .map(|view| {
                    let f = uniform(&mut rng, view.x.nrows(), k);
                    let g = uniform(&mut rng, k, view.x.ncols());
                    (f, g)
                })
                .collect();
            multi_view_from(&views, init, lambda, theta, weighting, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best_by(runs, |r| *r.objective_trace.last().expect("non-empty")))
}

fn multi_view_from(
    views: &[NmfView],
    init: Vec<(Array2<f64>, Array2<f64>)>,
    lambda: &[f64],
    theta: &[f64],
    weighting: ViewWeighting,
    config: &NmfConfig,
) -> Result<MultiNmfFit> {
    let v = views.len();
    let (mut f, mut g): (Vec<_>, Vec<_>) = init.into_iter().unzip();
    let mut g_star = weighted_consensus(&g, &vec![1.0; v])?;
    let mut beta = vec![1.0 / v as f64; v];
    let weights_of = |beta: &[f64]| -> Vec<f64> {
        match weighting {
            ViewWeighting::Equal => vec![1.0; beta.len()],
            ViewWeighting::Adaptive { gamma } => beta.iter().map(|b| b.powf(gamma)).collect(),
        }
    };
    let losses = |f: &[Array2<f64>], g: &[Array2<f64>], g_star: &Array2<f64>| -> Result<Vec<f64>> {
        let q: Vec<f64> = (0..v)
            .map(|a| nmf_loss(&views[a], &f[a], &g[a], Some(g_star), lambda[a], theta[a]))
            .collect();
        if let Some((a, x)) = q.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::solver(format!("non-finite objective ({x}) in view {a}")));
        }
        Ok(q)
    };
    let total = |q: &[f64], beta: &[f64]| -> f64 {
        weights_of(beta).iter().zip(q).map(|(w, x)| w * x).sum()
    };

    let mut q = losses(&f, &g, &g_star)?;
    let mut objective_trace = vec![total(&q, &beta)];
    let mut loss_trace = vec![q.clone()];
    let mut beta_trace = vec![beta.clone()];
    let mut converged = false;

    for _ in 0..config.max_iter {
        let updated = (0..v)
            .into_par_iter()
            .map(|a| -> Result<(Array2<f64>, Array2<f64>)> {
                let fa = f_step(views[a].x, &f[a], &g[a])?;
                let ga = g_step(&views[a], &fa, &g[a], Some(&g_star), lambda[a], theta[a])?;
                Ok((fa, ga))
            })
            .collect::<Result<Vec<_>>>()?;
        for (a, (fa, ga)) in updated.into_iter().enumerate() {
            f[a] = fa;
            g[a] = ga;
        }
        let consensus: Vec<f64> = weights_of(&beta)
            .iter()
            .zip(lambda)
            .map(|(w, l)| w * l)
            .collect();
        g_star = weighted_consensus(&g, &consensus)?;
        q = losses(&f, &g, &g_star)?;
        if let ViewWeighting::Adaptive { gamma } = weighting {
            beta = update_beta(&q, gamma);
        }
        let prev = *objective_trace.last().expect("non-empty");
        let cur = total(&q, &beta);
        objective_trace.push(cur);
        loss_trace.push(q.clone());
        beta_trace.push(beta.clone());
        if has_converged(prev, cur, config.rel_tol) {
            converged = true;
            break;
        }
    }

    Ok(MultiNmfFit {
        f,
        g,
        g_star,
        beta,
        objective_trace,
        loss_trace,
        beta_trace,
        converged,
    })
}
