//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use kmvnmf::baselines::{self, NmfConfig};
use kmvnmf::data_io::{self, MultiViewDataset};
use kmvnmf::graph_kernels::{gram_matrix, similarity_graph};
use kmvnmf::solver::{self, PreparedView, SolverConfig};
use kmvnmf::{Bandwidth, KernelSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
}

pub fn kernel_families() -> [KernelSpec; 3] {
    [
        KernelSpec::Linear,
        KernelSpec::Polynomial { c: 1.0, d: 2 },
        KernelSpec::Gaussian { sigma: 1.5 },
    ]
}

/// A random view prepared for the solver: data, Gram matrix, graph.
pub fn random_view(rng: &mut ChaCha8Rng, m: usize, n: usize, kernel: &KernelSpec) -> (Array2<f64>, PreparedView) {
    let x = uniform(rng, m, n, -1.0, 1.0);
    let gram = gram_matrix(kernel, x.view()).unwrap();
    let graph = similarity_graph(x.view(), Bandwidth::Auto).unwrap();
    (x, PreparedView::new(gram, graph).unwrap())
}

pub fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Every set partition of `n` items into at most `k` blocks, as restricted
/// growth strings.
pub fn set_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, k: usize, used: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..(used + 1).min(k) {
            prefix.push(c);
            rec(prefix, n, k, used.max(c + 1), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, k, 0, &mut out);
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Best accuracy over every injective relabeling of predicted clusters onto
/// `max(k_true, k_pred)` labels.
pub fn accuracy_oracle(truth: &[usize], pred: &[usize]) -> f64 {
    let kt = truth.iter().max().unwrap() + 1;
    let kp = pred.iter().max().unwrap() + 1;
    let size = kt.max(kp);
    let labels: Vec<usize> = (0..size).collect();
    permutations(&labels)
        .into_iter()
        .map(|map| truth.iter().zip(pred).filter(|(t, p)| map[**p] == **t).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}

/// Rand index by looping over every pair.
pub fn rand_oracle(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (truth[i] == truth[j]) == (pred[i] == pred[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// NMI through `I = H(U) + H(V) − H(U, V)`.
pub fn nmi_oracle(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len() as f64;
    let entropy = |counts: &std::collections::HashMap<(usize, usize), usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let count = |f: &dyn Fn(usize) -> (usize, usize)| {
        let mut m = std::collections::HashMap::new();
        for i in 0..truth.len() {
            *m.entry(f(i)).or_insert(0) += 1;
        }
        m
    };
    let hu = entropy(&count(&|i| (truth[i], 0)));
    let hv = entropy(&count(&|i| (0, pred[i])));
    let huv = entropy(&count(&|i| (truth[i], pred[i])));
    if hu == 0.0 && hv == 0.0 {
        return 1.0;
    }
    if hu == 0.0 || hv == 0.0 {
        return 0.0;
    }
    ((hu + hv - huv) / (hu * hv).sqrt()).clamp(0.0, 1.0)
}

// Acceptance fixtures.

pub const FIXTURE_SEEDS: u64 = 10;

pub fn blobs(seed: u64) -> MultiViewDataset {
    data_io::make_blobs(3, 60, &[5, 5], 0.1, seed).unwrap()
}

pub fn blobs_with_noise(seed: u64) -> MultiViewDataset {
    data_io::add_noise_view(&blobs(seed), 5, 1.0, seed + 1000).unwrap()
}

pub fn rings(seed: u64) -> MultiViewDataset {
    data_io::make_rings(2, 200, 0.05, seed).unwrap()
}

/// Kernel-solver settings for the blob fixtures: the default hyperparameters
/// without graph smoothing.
pub fn blobs_config(ds: &MultiViewDataset, seed: u64) -> SolverConfig {
    let mut c = SolverConfig::new(3, ds.v());
    c.theta = vec![0.0; ds.v()];
    c.seed = seed;
    c
}

/// Kernel-solver settings for the ring fixture; `kernel` is the only knob
/// that differs between the compared runs.
pub fn rings_config(kernel: KernelSpec, seed: u64) -> SolverConfig {
    let mut c = SolverConfig::new(2, 2);
    c.kernels = vec![kernel; 2];
    c.theta = vec![10.0; 2];
    c.graph_bandwidth = Bandwidth::Fixed(0.5);
    c.seed = seed;
    c
}

pub fn nmf_config(seed: u64) -> NmfConfig {
    NmfConfig {
        seed,
        ..NmfConfig::default()
    }
}

pub fn accuracy(ds: &MultiViewDataset, pred: &[usize]) -> f64 {
    kmvnmf::metrics::matched_accuracy(ds.labels.as_ref().unwrap(), pred).unwrap()
}

pub fn solver_accuracy(ds: &MultiViewDataset, config: &SolverConfig) -> (f64, solver::FactorizationState) {
    let state = solver::fit(ds, config).unwrap();
    (accuracy(ds, &state.labels()), state)
}

pub fn mnmf_accuracy(seed: u64) -> f64 {
    let ds = data_io::minmax_scale(&blobs(seed));
    let fit = baselines::mnmf_fit(&ds, 3, &[1.0; 2], &[0.0; 2], &nmf_config(seed)).unwrap();
    accuracy(&ds, &solver::assign_clusters(fit.g_star.view()))
}

pub fn awmnmf_accuracy(seed: u64) -> f64 {
    let ds = data_io::minmax_scale(&blobs(seed));
    let fit = baselines::awmnmf_fit(&ds, 3, &[1.0; 2], &[0.0; 2], 2.0, &nmf_config(seed)).unwrap();
    accuracy(&ds, &solver::assign_clusters(fit.g_star.view()))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &mut [usize]) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

/// Fraction of `trace` steps that increase by more than `rel_tol` relative.
pub fn ascents(trace: &[f64], rel_tol: f64) -> usize {
    trace
        .windows(2)
        .filter(|w| w[1] > w[0] + rel_tol * w[0].abs().max(1e-300))
        .count()
}
