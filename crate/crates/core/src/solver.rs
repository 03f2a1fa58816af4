//! Adaptive weighted kernel multi-view NMF.
//!
//! Every view `a` is factorised in kernel space as `Φ(X⁽ᵃ⁾) ≈ Φ(X⁽ᵃ⁾) P⁽ᵃ⁾ G⁽ᵃ⁾`
//! with a mixed-sign `P⁽ᵃ⁾` and a nonnegative membership matrix `G⁽ᵃ⁾`. The
//! per-view loss
//!
//! ```text
//! q_a = ‖Φ − ΦPG‖²_F + λ_a ‖G − G*‖²_F + θ_a tr(G L Gᵀ)
//! ```
//!
//! only touches the data through the Gram matrix `K = ΦᵀΦ`, and the total
//! objective `Σ_a β_a^γ q_a` is minimised by cycling through four blocks: an
//! exact least-squares `P`, one projected gradient step on each `G` with step
//! `1/Lips`, the closed-form consensus `G*`, and the closed-form simplex
//! weights `β`. Each block update is a descent step, so the recorded objective
//! never increases.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data_io::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph_kernels::{
    gram_matrix, similarity_graph, spectral_norm, Bandwidth, GraphLaplacian, GramMatrix,
    KernelSpec, DEFAULT_SPECTRAL_MAX_ITER, DEFAULT_SPECTRAL_TOL,
};
use crate::linalg::{frob_dist_sq, frob_inner, projected_step, solve_spd_right};

pub const DEFAULT_RIDGE: f64 = 1e-10;
/// Per-view losses are clamped to this floor before entering the β update.
pub const LOSS_FLOOR: f64 = 1e-12;

/// How the view weights are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// β is re-estimated every iteration and views enter as `β_a^γ q_a`.
    #[default]
    Adaptive,
    /// Every view has weight 1 and β stays uniform (the equal-weight objective).
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub k: usize,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub kernels: Vec<KernelSpec>,
    /// Bandwidth of each view's similarity graph.
    pub graph_bandwidth: Bandwidth,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub inner_pgd_steps: usize,
    pub restarts: usize,
    pub seed: u64,
    pub ridge: f64,
    pub weighting: Weighting,
}

impl SolverConfig {
    /// Defaults: λ = θ = 1 on every view, γ = 2, linear kernels.
    pub fn new(k: usize, views: usize) -> Self {
        SolverConfig {
            k,
            lambda: vec![1.0; views],
            theta: vec![1.0; views],
            gamma: 2.0,
            kernels: vec![KernelSpec::Linear; views],
            graph_bandwidth: Bandwidth::Auto,
            max_iter: 100,
            rel_tol: 1e-6,
            inner_pgd_steps: 1,
            restarts: 10,
            seed: 0,
            ridge: DEFAULT_RIDGE,
            weighting: Weighting::Adaptive,
        }
    }

    pub fn views(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.kernels.len();
        if v == 0 {
            return Err(Error::input("solver needs at least one view"));
        }
        if self.lambda.len() != v || self.theta.len() != v {
            return Err(Error::input(format!(
                "lambda ({}) and theta ({}) must have one entry per view ({v})",
                self.lambda.len(),
                self.theta.len()
            )));
        }
        if self.k < 2 {
            return Err(Error::input(format!("k must be >= 2, got {}", self.k)));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::input(format!("every lambda must be > 0, got {l}")));
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::input(format!("every theta must be >= 0, got {t}")));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::input(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.max_iter == 0 || self.inner_pgd_steps == 0 || self.restarts == 0 {
            return Err(Error::input(
                "max_iter, inner_pgd_steps and restarts must all be >= 1",
            ));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::input("rel_tol must be >= 0"));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::input("ridge must be >= 0"));
        }
        for kernel in &self.kernels {
            kernel.validate()?;
        }
        Ok(())
    }
}

/// Per-view quantities that stay fixed during a fit.
#[derive(Debug, Clone)]
pub struct PreparedView {
    pub gram: GramMatrix,
    pub graph: GraphLaplacian,
    /// σ_max(L), computed once.
    pub laplacian_norm: f64,
}

impl PreparedView {
    pub fn new(gram: GramMatrix, graph: GraphLaplacian) -> Result<Self> {
        if gram.n() != graph.n() {
            return Err(Error::input(format!(
                "Gram matrix ({}) and Laplacian ({}) disagree on sample count",
                gram.n(),
                graph.n()
            )));
        }
        let laplacian_norm =
            spectral_norm(graph.matrix(), DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER)?
                .bound();
        Ok(PreparedView {
            gram,
            graph,
            laplacian_norm,
        })
    }
}

/// Builds the Gram matrix and similarity graph of every view.
pub fn prepare_views(dataset: &MultiViewDataset, config: &SolverConfig) -> Result<Vec<PreparedView>> {
    if dataset.views.len() != config.kernels.len() {
        return Err(Error::input(format!(
            "config has {} kernels but the dataset has {} views",
            config.kernels.len(),
            dataset.views.len()
        )));
    }
    dataset
        .views
        .par_iter()
        .zip(config.kernels.par_iter())
        .map(|(view, kernel)| {
            let gram = gram_matrix(kernel, view.data.view())?;
            let graph = similarity_graph(view.data.view(), config.graph_bandwidth)?;
            PreparedView::new(gram, graph)
                .map_err(|e| e.context(format!("view '{}'", view.name)))
        })
        .collect()
}

/// Individual terms of one view's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewLoss {
    pub fit: f64,
    pub consensus: f64,
    pub smoothness: f64,
}

impl ViewLoss {
    pub fn total(&self) -> f64 {
        self.fit + self.consensus + self.smoothness
    }
}

fn check_shapes(
    k: &GramMatrix,
    p: ArrayView2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    l: &GraphLaplacian,
) -> Result<()> {
    let n = k.n();
    let c = g.nrows();
    let ok = p.dim() == (n, c) && g.ncols() == n && g_star.dim() == (c, n) && l.n() == n;
    if ok {
        Ok(())
    } else {
        Err(Error::input(format!(
            "shape mismatch: K {n}x{n}, P {:?}, G {:?}, G* {:?}, L {}x{}",
            p.dim(),
            g.dim(),
            g_star.dim(),
            l.n(),
            l.n()
        )))
    }
}

fn fit_term(k: &GramMatrix, kp: &Array2<f64>, ptkp: &Array2<f64>, g: ArrayView2<f64>) -> f64 {
    let cross = frob_inner(kp.view(), g.t());
    let ggt = g.dot(&g.t());
    let quad = frob_inner(ptkp.view(), ggt.view());
    let trace = k.trace();
    let fit = trace - 2.0 * cross + quad;
    // Round-off can push an exact fit slightly below zero.
    if fit < 0.0 && fit >= -1e-9 * trace.abs().max(1.0) {
        0.0
    } else {
        fit
    }
}

/// Terms of `q_a`: kernel-space reconstruction error, consensus penalty and
/// graph smoothness penalty.
pub fn view_loss_terms(
    k: &GramMatrix,
    p: ArrayView2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    l: &GraphLaplacian,
) -> Result<ViewLoss> {
    check_shapes(k, p, g, g_star, l)?;
    let kp = k.matrix().dot(&p);
    let ptkp = p.t().dot(&kp);
    Ok(loss_terms(k, &kp, &ptkp, g, g_star, lambda, theta, l))
}

#[allow(clippy::too_many_arguments)]
fn loss_terms(
    k: &GramMatrix,
    kp: &Array2<f64>,
    ptkp: &Array2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    l: &GraphLaplacian,
) -> ViewLoss {
    let smoothness = if theta == 0.0 {
        0.0
    } else {
        theta * frob_inner(g.dot(l.matrix()).view(), g)
    };
    ViewLoss {
        fit: fit_term(k, kp, ptkp, g),
        consensus: lambda * frob_dist_sq(g, g_star),
        smoothness,
    }
}

/// `q_a = tr(K) − 2tr(KPG) + tr(GᵀPᵀKPG) + λ‖G − G*‖² + θ tr(GLGᵀ)`.
pub fn view_loss(
    k: &GramMatrix,
    p: ArrayView2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    l: &GraphLaplacian,
) -> Result<f64> {
    view_loss_terms(k, p, g, g_star, lambda, theta, l).map(|t| t.total())
}

/// Least-squares `P = Gᵀ(GGᵀ + ridge·I)⁻¹`.
pub fn update_p(g: ArrayView2<f64>, ridge: f64) -> Result<Array2<f64>> {
    let mut ggt = g.dot(&g.t());
    for i in 0..ggt.nrows() {
        ggt[[i, i]] += ridge;
    }
    solve_spd_right(g.t(), ggt.view())
}

/// `∇_G q_a = 2(PᵀKPG − PᵀK + λ(G − G*) + θGL)`.
pub fn gradient_g(
    k: &GramMatrix,
    p: ArrayView2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    l: &GraphLaplacian,
) -> Result<Array2<f64>> {
    check_shapes(k, p, g, g_star, l)?;
    let kp = k.matrix().dot(&p);
    let ptkp = p.t().dot(&kp);
    Ok(gradient(&kp, &ptkp, g, g_star, lambda, theta, l))
}

fn gradient(
    kp: &Array2<f64>,
    ptkp: &Array2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    l: &GraphLaplacian,
) -> Array2<f64> {
    let mut grad = ptkp.dot(&g);
    grad -= &kp.t();
    grad.scaled_add(lambda, &g);
    grad.scaled_add(-lambda, &g_star);
    if theta != 0.0 {
        grad.scaled_add(theta, &g.dot(l.matrix()));
    }
    grad * 2.0
}

/// `Lips = 2[σ_max(PᵀKP) + λ + θ σ_max(L)]`.
pub fn lipschitz_constant(
    k: &GramMatrix,
    p: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    laplacian_norm: f64,
) -> Result<f64> {
    let kp = k.matrix().dot(&p);
    let ptkp = p.t().dot(&kp);
    lipschitz_from_ptkp(&ptkp, lambda, theta, laplacian_norm)
}

fn lipschitz_from_ptkp(ptkp: &Array2<f64>, lambda: f64, theta: f64, laplacian_norm: f64) -> Result<f64> {
    let sym = {
        let t = ptkp.t().to_owned();
        (ptkp + &t) * 0.5
    };
    let sigma = spectral_norm(&sym, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER)?.bound();
    let lips = 2.0 * (sigma + lambda + theta * laplacian_norm);
    if !(lips > 0.0) || !lips.is_finite() {
        return Err(Error::Internal(format!("invalid Lipschitz constant {lips}")));
    }
    Ok(lips)
}

/// One projected gradient step `G⁺ = max(G − ∇_G q / Lips, 0)`.
pub fn pgd_step_g(
    k: &GramMatrix,
    p: ArrayView2<f64>,
    g: ArrayView2<f64>,
    g_star: ArrayView2<f64>,
    lambda: f64,
    theta: f64,
    l: &GraphLaplacian,
) -> Result<Array2<f64>> {
    check_shapes(k, p, g, g_star, l)?;
    let laplacian_norm = if theta == 0.0 {
        0.0
    } else {
        spectral_norm(l.matrix(), DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER)?.bound()
    };
    let kp = k.matrix().dot(&p);
    let ptkp = p.t().dot(&kp);
    let lips = lipschitz_from_ptkp(&ptkp, lambda, theta, laplacian_norm)?;
    let grad = gradient(&kp, &ptkp, g, g_star, lambda, theta, l);
    Ok(projected_step(&g.to_owned(), &grad, 1.0 / lips))
}

/// Weight of each view in the consensus update, `β_a^γ λ_a`.
pub fn consensus_weights(beta: &[f64], lambda: &[f64], gamma: f64) -> Vec<f64> {
    beta.iter()
        .zip(lambda)
        .map(|(b, l)| b.powf(gamma) * l)
        .collect()
}

pub(crate) fn weighted_consensus(g_views: &[Array2<f64>], weights: &[f64]) -> Result<Array2<f64>> {
    let first = g_views
        .first()
        .ok_or_else(|| Error::input("consensus needs at least one view"))?;
    if g_views.len() != weights.len() {
        return Err(Error::input("one consensus weight per view required"));
    }
    if let Some(bad) = g_views.iter().find(|g| g.dim() != first.dim()) {
        return Err(Error::input(format!(
            "membership matrices disagree in shape ({:?} vs {:?})",
            first.dim(),
            bad.dim()
        )));
    }
    let denom: f64 = weights.iter().sum();
    if !(denom >= 1e-300) {
        return Err(Error::solver(format!(
            "all consensus weights vanished (sum {denom:e})"
        )));
    }
    let mut acc = Array2::<f64>::zeros(first.dim());
    for (g, w) in g_views.iter().zip(weights) {
        acc.scaled_add(*w, g);
    }
    acc /= denom;
    Ok(acc)
}

/// `G* = Σ β_a^γ λ_a G⁽ᵃ⁾ / Σ β_a^γ λ_a`.
pub fn update_g_star(
    g_views: &[Array2<f64>],
    beta: &[f64],
    lambda: &[f64],
    gamma: f64,
) -> Result<Array2<f64>> {
    if beta.len() != g_views.len() || lambda.len() != g_views.len() {
        return Err(Error::input("beta and lambda need one entry per view"));
    }
    weighted_consensus(g_views, &consensus_weights(beta, lambda, gamma))
}

/// Minimiser of `Σ β_a^γ q_a` over the probability simplex.
///
/// * `γ = 0`: every weight equals 1, β is uniform.
/// * `0 < γ ≤ 1`: the objective is concave (linear at 1) in β, so the minimum
///   sits on the vertex of the smallest loss (ties go to the lowest index).
/// * `γ > 1`: `β_a = q_a^{1/(1−γ)} / Σ q_b^{1/(1−γ)}`.
///
/// Losses are clamped below at [`LOSS_FLOOR`].
pub fn update_beta(q: &[f64], gamma: f64) -> Vec<f64> {
    let v = q.len();
    if v == 0 {
        return Vec::new();
    }
    if gamma == 0.0 {
        return vec![1.0 / v as f64; v];
    }
    let q: Vec<f64> = q.iter().map(|x| x.max(LOSS_FLOOR)).collect();
    if gamma <= 1.0 {
        let best = q
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if *x < q[best] { i } else { best });
        let mut beta = vec![0.0; v];
        beta[best] = 1.0;
        return beta;
    }
    // Work in log space: q^{1/(1−γ)} under- or overflows for small γ − 1.
    let exponent = 1.0 / (1.0 - gamma);
    let logs: Vec<f64> = q.iter().map(|x| exponent * x.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Column-wise argmax of a membership matrix; ties go to the smallest row.
pub fn assign_clusters(g_star: ArrayView2<f64>) -> Vec<usize> {
    g_star
        .axis_iter(Axis(1))
        .map(|col| {
            col.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
                    if x > bv {
                        (i, x)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect()
}

/// Result of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationState {
    pub p: Vec<Array2<f64>>,
    pub g: Vec<Array2<f64>>,
    pub g_star: Array2<f64>,
    pub beta: Vec<f64>,
    /// Total objective at initialisation followed by one entry per outer
    /// iteration.
    pub objective_trace: Vec<f64>,
    /// Per-view losses aligned with `objective_trace`.
    pub loss_trace: Vec<Vec<f64>>,
    /// View weights aligned with `objective_trace`.
    pub beta_trace: Vec<Vec<f64>>,
    pub per_view_loss: Vec<f64>,
    pub converged: bool,
    /// Index of the restart that produced this state.
    pub restart: usize,
}

impl FactorizationState {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn labels(&self) -> Vec<usize> {
        assign_clusters(self.g_star.view())
    }
}

/// Seed of restart `restart` derived from the base seed (SplitMix64 finaliser).
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    let mut z = seed ^ (restart as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws the initial memberships of every view, i.i.d. Uniform(0, 1).
pub fn initial_memberships(seed: u64, views: usize, k: usize, n: usize) -> Vec<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..views)
        .map(|_| Array2::from_shape_simple_fn((k, n), || rng.random::<f64>()))
        .collect()
}

/// Runs every restart on `dataset` and returns the one with the lowest final
/// objective.
pub fn fit(dataset: &MultiViewDataset, config: &SolverConfig) -> Result<FactorizationState> {
    config.validate()?;
    let views = prepare_views(dataset, config)?;
    fit_prepared(&views, config)
}

/// [`fit`] on views whose Gram matrices and graphs are already built.
pub fn fit_prepared(views: &[PreparedView], config: &SolverConfig) -> Result<FactorizationState> {
    config.validate()?;
    if views.len() != config.views() {
        return Err(Error::input(format!(
            "config describes {} views, got {}",
            config.views(),
            views.len()
        )));
    }
    let n = views[0].gram.n();
    if let Some((a, _)) = views.iter().enumerate().find(|(_, v)| v.gram.n() != n) {
        return Err(Error::input(format!(
            "view {a} has {} samples, view 0 has {n}",
            views[a].gram.n()
        )));
    }
    if config.k > n {
        return Err(Error::input(format!(
            "k = {} exceeds the sample count {n}",
            config.k
        )));
    }

    let runs: Vec<Result<FactorizationState>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let init = initial_memberships(restart_seed(config.seed, r), views.len(), config.k, n);
            run_from(views, config, init, r)
        })
        .collect();

    let mut best: Option<FactorizationState> = None;
    for run in runs {
        let run = run?;
        let better = match &best {
            None => true,
            Some(b) => run.final_objective() < b.final_objective(),
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

struct ViewWork {
    kp: Array2<f64>,
    ptkp: Array2<f64>,
}

impl ViewWork {
    fn new(view: &PreparedView, p: &Array2<f64>) -> Self {
        let kp = view.gram.matrix().dot(p);
        let ptkp = p.t().dot(&kp);
        ViewWork { kp, ptkp }
    }
}

fn view_weights(config: &SolverConfig, beta: &[f64]) -> Vec<f64> {
    match config.weighting {
        Weighting::Adaptive => beta.iter().map(|b| b.powf(config.gamma)).collect(),
        Weighting::Equal => vec![1.0; beta.len()],
    }
}

fn losses(
    views: &[PreparedView],
    config: &SolverConfig,
    p: &[Array2<f64>],
    g: &[Array2<f64>],
    g_star: &Array2<f64>,
) -> Result<Vec<f64>> {
    let q: Vec<f64> = views
        .par_iter()
        .enumerate()
        .map(|(a, view)| {
            let work = ViewWork::new(view, &p[a]);
            loss_terms(
                &view.gram,
                &work.kp,
                &work.ptkp,
                g[a].view(),
                g_star.view(),
                config.lambda[a],
                config.theta[a],
                &view.graph,
            )
            .total()
        })
        .collect();
    if let Some((a, x)) = q.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::solver(format!(
            "non-finite objective ({x}) in view {a}; check the kernel configuration of that view"
        )));
    }
    Ok(q)
}

/// Runs the alternating updates from the given initial memberships.
pub fn run_from(
    views: &[PreparedView],
    config: &SolverConfig,
    initial_g: Vec<Array2<f64>>,
    restart: usize,
) -> Result<FactorizationState> {
    let v = views.len();
    let mut g = initial_g;
    let mut p = g
        .iter()
        .map(|gi| update_p(gi.view(), config.ridge))
        .collect::<Result<Vec<_>>>()?;
    let mut g_star = weighted_consensus(&g, &vec![1.0; v])?;
    let mut beta = vec![1.0 / v as f64; v];

    let mut q = losses(views, config, &p, &g, &g_star)?;
    let total = |q: &[f64], beta: &[f64]| -> f64 {
        view_weights(config, beta)
            .iter()
            .zip(q)
            .map(|(w, x)| w * x)
            .sum()
    };
    let mut objective_trace = vec![total(&q, &beta)];
    let mut loss_trace = vec![q.clone()];
    let mut beta_trace = vec![beta.clone()];
    let mut converged = false;

    for _ in 0..config.max_iter {
        let updated: Vec<(Array2<f64>, Array2<f64>)> = views
            .par_iter()
            .zip(g.par_iter())
            .enumerate()
            .map(|(a, (view, ga))| -> Result<(Array2<f64>, Array2<f64>)> {
                let pa = update_p(ga.view(), config.ridge)
                    .map_err(|e| e.context(format!("view {a}")))?;
                let work = ViewWork::new(view, &pa);
                let lips = lipschitz_from_ptkp(
                    &work.ptkp,
                    config.lambda[a],
                    config.theta[a],
                    view.laplacian_norm,
                )?;
                let mut ga = ga.clone();
                for _ in 0..config.inner_pgd_steps {
                    let grad = gradient(
                        &work.kp,
                        &work.ptkp,
                        ga.view(),
                        g_star.view(),
                        config.lambda[a],
                        config.theta[a],
                        &view.graph,
                    );
                    ga = projected_step(&ga, &grad, 1.0 / lips);
                }
                Ok((pa, ga))
            })
            .collect::<Result<Vec<_>>>()?;
        for (a, (pa, ga)) in updated.into_iter().enumerate() {
            p[a] = pa;
            g[a] = ga;
        }

        let weights: Vec<f64> = view_weights(config, &beta)
            .iter()
            .zip(&config.lambda)
            .map(|(w, l)| w * l)
            .collect();
        g_star = weighted_consensus(&g, &weights)?;

        q = losses(views, config, &p, &g, &g_star)?;
        if config.weighting == Weighting::Adaptive {
            beta = update_beta(&q, config.gamma);
        }

        let prev = *objective_trace.last().expect("non-empty trace");
        let cur = total(&q, &beta);
        if !cur.is_finite() {
            return Err(Error::solver(format!("non-finite total objective {cur}")));
        }
        objective_trace.push(cur);
        loss_trace.push(q.clone());
        beta_trace.push(beta.clone());
        if (prev - cur).abs() <= config.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(FactorizationState {
        p,
        g,
        g_star,
        beta,
        objective_trace,
        loss_trace,
        beta_trace,
        per_view_loss: q,
        converged,
        restart,
    })
}

/// Single-view kernel semi-NMF with graph regularisation:
/// `min ‖Φ − ΦPG‖² + θ tr(GLGᵀ)` over `P` and `G ≥ 0`.
///
/// `damping` adds a proximal term `damping·‖G − G_prev‖²` to every G step,
/// which only enlarges the Lipschitz constant since its gradient vanishes at
/// the current iterate. With `damping = λ` the iterates coincide with the
/// multi-view solver run on one view.
pub fn fit_single_view(
    view: &PreparedView,
    k: usize,
    theta: f64,
    damping: f64,
    config: &SolverConfig,
    initial_g: Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    let gram = view.gram.matrix();
    let lap = view.graph.matrix();
    if initial_g.dim() != (k, gram.nrows()) {
        return Err(Error::input("initial membership has the wrong shape"));
    }
    let objective = |p: &Array2<f64>, g: &Array2<f64>| -> f64 {
        let recon = g.t().dot(&p.t());
        // ‖Φ − ΦPG‖² = tr((I − PG)ᵀ K (I − PG))
        let n = gram.nrows();
        let resid = Array2::<f64>::eye(n) - recon.t();
        let fit = frob_inner(resid.view(), gram.dot(&resid).view()).max(0.0);
        fit + theta * frob_inner(g.dot(lap).view(), g.view())
    };

    let mut g = initial_g;
    let mut p = update_p(g.view(), config.ridge)?;
    let mut trace = vec![objective(&p, &g)];
    for _ in 0..config.max_iter {
        p = update_p(g.view(), config.ridge)?;
        let ptk = p.t().dot(gram);
        let ptkp = ptk.dot(&p);
        let lips = lipschitz_from_ptkp(&ptkp, damping, theta, view.laplacian_norm)?;
        for _ in 0..config.inner_pgd_steps {
            let mut grad = ptkp.dot(&g) - &ptk;
            if theta != 0.0 {
                grad.scaled_add(theta, &g.dot(lap));
            }
            grad *= 2.0;
            g = projected_step(&g, &grad, 1.0 / lips);
        }
        let prev = *trace.last().expect("non-empty");
        let cur = objective(&p, &g);
        trace.push(cur);
        if (prev - cur).abs() <= config.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((p, g, trace))
}
