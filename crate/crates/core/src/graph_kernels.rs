//! Gram matrices, the Gaussian sample-similarity graph and its Laplacian, and
//! spectral-norm estimation for symmetric matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest dimension handed to the dense symmetric eigensolver instead of
/// power iteration.
pub const EXACT_EIGEN_MAX_DIM: usize = 64;

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-7;
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 10_000;

/// Seed of the power-iteration start vector. Fixed so that every estimate is
/// reproducible.
const POWER_ITERATION_SEED: u64 = 0x005e_ed0f_9a9e;

/// Kernel family used to build a view's Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Polynomial { c: f64, d: u32 },
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { c, d } => {
                if d < 1 {
                    return Err(Error::input("polynomial kernel degree d must be >= 1"));
                }
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::input(format!(
                        "polynomial kernel offset c must be finite and >= 0, got {c}"
                    )));
                }
                Ok(())
            }
            KernelSpec::Gaussian { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::input(format!(
                        "gaussian kernel sigma must be finite and > 0, got {sigma}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }

    fn eval_unchecked(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(&y),
            KernelSpec::Polynomial { c, d } => (x.dot(&y) + c).powi(d as i32),
            KernelSpec::Gaussian { sigma } => {
                let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { c, d } => write!(f, "poly(c={c},d={d})"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Accepts `linear`, `poly(c=1,d=2)` and `gaussian(sigma=0.5)`, the same
    /// shape `Display` produces.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::input(format!("malformed kernel spec '{s}'")));
                }
                (&s[..open], &s[open + 1..s.len() - 1])
            }
            None => (s, ""),
        };
        let mut c = None;
        let mut d = None;
        let mut sigma = None;
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::input(format!("kernel argument '{part}' is not key=value")))?;
            let value = value.trim();
            let bad = || Error::input(format!("invalid value '{value}' for kernel argument '{key}'"));
            match key.trim() {
                "c" => c = Some(value.parse::<f64>().map_err(|_| bad())?),
                "d" => d = Some(value.parse::<u32>().map_err(|_| bad())?),
                "sigma" => sigma = Some(value.parse::<f64>().map_err(|_| bad())?),
                other => return Err(Error::input(format!("unknown kernel argument '{other}'"))),
            }
        }
        let spec = match name.trim().to_ascii_lowercase().as_str() {
            "linear" if args.trim().is_empty() => KernelSpec::Linear,
            "poly" | "polynomial" if sigma.is_none() => KernelSpec::Polynomial {
                c: c.unwrap_or(1.0),
                d: d.ok_or_else(|| Error::input("polynomial kernel needs d"))?,
            },
            "gaussian" | "rbf" if c.is_none() && d.is_none() => KernelSpec::Gaussian {
                sigma: sigma.ok_or_else(|| Error::input("gaussian kernel needs sigma"))?,
            },
            _ => return Err(Error::input(format!("unrecognised kernel spec '{s}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Evaluates `<Φ(x), Φ(y)>` for the given kernel.
pub fn kernel_eval(spec: &KernelSpec, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "kernel arguments have different dimensions ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::input("kernel arguments must have dimension >= 1"));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Symmetric n×n matrix of kernel evaluations over the samples of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(Array2<f64>);

impl GramMatrix {
    /// Wraps an existing matrix after symmetrizing it.
    pub fn from_matrix(m: Array2<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::input(format!(
                "Gram matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(GramMatrix(symmetrize(m)))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

fn symmetrize(m: Array2<f64>) -> Array2<f64> {
    let t = m.t().to_owned();
    (m + t) * 0.5
}

/// Gram matrix of `x` (features × samples) under `spec`.
pub fn gram_matrix(spec: &KernelSpec, x: ArrayView2<f64>) -> Result<GramMatrix> {
    spec.validate()?;
    let n = x.ncols();
    if n == 0 {
        return Err(Error::input("gram matrix needs at least one sample"));
    }
    if x.nrows() == 0 {
        return Err(Error::input("gram matrix needs at least one feature"));
    }
    check_finite(x, "gram matrix input")?;

    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = x.column(i);
            (0..n).map(move |j| spec.eval_unchecked(xi, x.column(j)))
        })
        .collect();
    let k = symmetrize(Array2::from_shape_vec((n, n), rows).expect("n*n entries"));

    #[cfg(debug_assertions)]
    debug_check_psd(&k);

    Ok(GramMatrix(k))
}

#[cfg(debug_assertions)]
fn debug_check_psd(k: &Array2<f64>) {
    if k.nrows() > 256 {
        return;
    }
    let scale = k.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let min = symmetric_eigenvalues(k).into_iter().fold(f64::INFINITY, f64::min);
    debug_assert!(
        min >= -1e-8 * scale,
        "Gram matrix is not positive semidefinite (smallest eigenvalue {min})"
    );
}

pub(crate) fn check_finite(x: ArrayView2<f64>, what: &str) -> Result<()> {
    if let Some(((r, c), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::input(format!(
            "{what} has non-finite value {v} at row {r}, column {c}"
        )));
    }
    Ok(())
}

/// Bandwidth of the Gaussian similarity graph.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// Median of all pairwise Euclidean distances, or 1.0 if that median is 0.
    #[default]
    Auto,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, x: ArrayView2<f64>) -> Result<f64> {
        match *self {
            Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
            Bandwidth::Fixed(s) => Err(Error::input(format!(
                "similarity bandwidth must be finite and > 0, got {s}"
            ))),
            Bandwidth::Auto => {
                let med = median_pairwise_distance(x);
                Ok(if med > 0.0 { med } else { 1.0 })
            }
        }
    }
}

fn pairwise_sq_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.ncols();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x
                .column(i)
                .iter()
                .zip(x.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Median of the Euclidean distances over all unordered sample pairs.
/// Returns 0 for fewer than two samples.
pub fn median_pairwise_distance(x: ArrayView2<f64>) -> f64 {
    let n = x.ncols();
    if n < 2 {
        return 0.0;
    }
    let sq = pairwise_sq_distances(x);
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| sq[[i, j]].sqrt())
        .collect();
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    }
}

/// Gaussian similarity graph `W`, its degree vector and Laplacian `L = D − W`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    pub weights: Array2<f64>,
    pub degree: Array1<f64>,
    pub laplacian: Array2<f64>,
}

impl GraphLaplacian {
    /// Laplacian of a graph with no edges, which turns the smoothness penalty off.
    pub fn empty(n: usize) -> Self {
        GraphLaplacian {
            weights: Array2::zeros((n, n)),
            degree: Array1::zeros(n),
            laplacian: Array2::zeros((n, n)),
        }
    }

    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::input("similarity matrix must be square"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::input("similarity weights must be finite and nonnegative"));
        }
        let weights = symmetrize(weights);
        let degree = weights.sum_axis(Axis(1));
        let mut laplacian = -&weights;
        for (i, d) in degree.iter().enumerate() {
            laplacian[[i, i]] += d;
        }
        Ok(GraphLaplacian {
            weights,
            degree,
            laplacian,
        })
    }

    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.laplacian
    }
}

/// Builds `W(i,j) = exp(−‖xᵢ−xⱼ‖²/(2σ²))` over the columns of `x`, self-loops
/// included, and its Laplacian.
pub fn similarity_graph(x: ArrayView2<f64>, bandwidth: Bandwidth) -> Result<GraphLaplacian> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::input(format!(
            "similarity graph needs at least 2 samples, got {n}"
        )));
    }
    check_finite(x, "similarity graph input")?;
    let sigma = bandwidth.resolve(x)?;
    let denom = 2.0 * sigma * sigma;
    let mut w = pairwise_sq_distances(x);
    w.mapv_inplace(|d| (-d / denom).exp());
    GraphLaplacian::from_weights(w)
}

/// Estimate of the largest singular value of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SpectralEstimate {
    /// Value safe to use inside a Lipschitz constant: non-converged estimates
    /// are inflated by 10%.
    pub fn bound(&self) -> f64 {
        if self.converged {
            self.value
        } else {
            self.value * 1.1
        }
    }
}

fn symmetric_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    dm.symmetric_eigenvalues().iter().copied().collect()
}

/// Largest singular value (= largest absolute eigenvalue) of symmetric `m`.
///
/// Matrices of dimension at most [`EXACT_EIGEN_MAX_DIM`] go through a dense
/// symmetric eigensolve; larger ones use power iteration from a fixed-seed
/// random start, stopping when successive estimates differ by less than
/// `tol` relative.
pub fn spectral_norm(m: &Array2<f64>, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::input(format!(
            "spectral_norm needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    check_finite(m.view(), "spectral_norm input")?;
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let asym = Zip::from(m)
        .and(&m.t())
        .fold(0.0f64, |acc, a, b| acc.max((a - b).abs()));
    if asym > 1e-10 * scale {
        return Err(Error::input(format!(
            "spectral_norm needs a symmetric matrix (max asymmetry {asym:e})"
        )));
    }

    if n <= EXACT_EIGEN_MAX_DIM {
        let value = symmetric_eigenvalues(m)
            .into_iter()
            .fold(0.0f64, |acc, e| acc.max(e.abs()));
        return Ok(SpectralEstimate {
            value,
            converged: true,
            iterations: 0,
        });
    }

    Ok(power_iteration(m, tol, max_iter))
}

fn power_iteration(m: &Array2<f64>, tol: f64, max_iter: usize) -> SpectralEstimate {
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Array1<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.dot(&v).sqrt();
    v /= norm;

    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let mv = m.dot(&v);
        let next = mv.dot(&mv).sqrt();
        if next == 0.0 {
            // v landed in the null space; the matrix is zero along every
            // direction we can reach from here.
            return SpectralEstimate {
                value: estimate,
                converged: true,
                iterations: it,
            };
        }
        let done = (next - estimate).abs() < tol * next;
        estimate = next;
        v = mv / next;
        if done {
            return SpectralEstimate {
                value: estimate,
                converged: true,
                iterations: it,
            };
        }
    }
    SpectralEstimate {
        value: estimate,
        converged: false,
        iterations: max_iter,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn kernel_eval_examples() {
        let x = array![1.0, 2.0];
        let y = array![3.0, 4.0];
        assert_eq!(kernel_eval(&KernelSpec::Linear, x.view(), y.view()).unwrap(), 11.0);
        let g = KernelSpec::Gaussian { sigma: 0.37 };
        assert_eq!(kernel_eval(&g, x.view(), x.view()).unwrap(), 1.0);
        let p = KernelSpec::Polynomial { c: 1.0, d: 2 };
        let e = array![1.0, 0.0];
        assert_eq!(kernel_eval(&p, e.view(), e.view()).unwrap(), 4.0);
    }

    #[test]
    fn kernel_eval_dimension_mismatch() {
        let x = array![1.0, 2.0];
        let y = array![1.0];
        assert!(matches!(
            kernel_eval(&KernelSpec::Linear, x.view(), y.view()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn kernel_spec_validation_and_parsing() {
        assert!(KernelSpec::Polynomial { c: -1.0, d: 2 }.validate().is_err());
        assert!(KernelSpec::Polynomial { c: 1.0, d: 0 }.validate().is_err());
        assert!(KernelSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        for spec in [
            KernelSpec::Linear,
            KernelSpec::Polynomial { c: 1.0, d: 3 },
            KernelSpec::Gaussian { sigma: 0.125 },
        ] {
            assert_eq!(spec.to_string().parse::<KernelSpec>().unwrap(), spec);
        }
        assert_eq!(
            "poly(d=2)".parse::<KernelSpec>().unwrap(),
            KernelSpec::Polynomial { c: 1.0, d: 2 }
        );
        assert!("gaussian".parse::<KernelSpec>().is_err());
        assert!("linear(c=1)".parse::<KernelSpec>().is_err());
        assert!("cosine".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn gram_examples() {
        let eye = Array2::<f64>::eye(2);
        let k = gram_matrix(&KernelSpec::Linear, eye.view()).unwrap();
        assert_eq!(k.matrix(), &eye);

        let x = array![[1.0, 2.0], [0.0, 0.0]];
        let k = gram_matrix(&KernelSpec::Linear, x.view()).unwrap();
        assert_eq!(k.matrix(), &array![[1.0, 2.0], [2.0, 4.0]]);

        let x = array![[0.3, -1.0, 2.0], [4.0, 0.5, 0.0]];
        let k = gram_matrix(&KernelSpec::Gaussian { sigma: 0.8 }, x.view()).unwrap();
        assert!(k.matrix().diag().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn gram_rejects_non_finite() {
        let x = array![[1.0, f64::NAN]];
        assert!(gram_matrix(&KernelSpec::Linear, x.view()).is_err());
    }

    #[test]
    fn similarity_graph_examples() {
        let x = array![[2.0, 2.0], [-1.0, -1.0]];
        let g = similarity_graph(x.view(), Bandwidth::Auto).unwrap();
        assert_eq!(g.weights, Array2::<f64>::ones((2, 2)));
        assert_eq!(g.laplacian, array![[1.0, -1.0], [-1.0, 1.0]]);

        let x = array![[0.0, 3.0]];
        let g = similarity_graph(x.view(), Bandwidth::Fixed(3.0)).unwrap();
        assert_abs_diff_eq!(g.weights[[0, 1]], (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights[[0, 1]], 0.60653, epsilon = 1e-5);

        let x = array![[0.0]];
        assert!(similarity_graph(x.view(), Bandwidth::Auto).is_err());
    }

    #[test]
    fn median_heuristic() {
        // distances: 1, 3, 2
        let x = array![[0.0, 1.0, 3.0]];
        assert_eq!(median_pairwise_distance(x.view()), 2.0);
        assert_eq!(Bandwidth::Auto.resolve(x.view()).unwrap(), 2.0);
        let same = array![[1.0, 1.0, 1.0]];
        assert_eq!(Bandwidth::Auto.resolve(same.view()).unwrap(), 1.0);
    }

    #[test]
    fn spectral_norm_examples() {
        let est = spectral_norm(&Array2::eye(3), 1e-7, 1000).unwrap();
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-12);
        let d = Array2::from_diag(&array![1.0, 5.0, 2.0]);
        assert_abs_diff_eq!(spectral_norm(&d, 1e-7, 1000).unwrap().value, 5.0, epsilon = 1e-12);
        let m = array![[2.0, 1.0], [1.0, 2.0]];
        assert_abs_diff_eq!(spectral_norm(&m, 1e-7, 1000).unwrap().value, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_power_iteration_path() {
        let n = EXACT_EIGEN_MAX_DIM + 16;
        let mut diag = Array1::<f64>::ones(n);
        diag[7] = -9.0;
        diag[20] = 4.0;
        let m = Array2::from_diag(&diag);
        let est = spectral_norm(&m, 1e-10, 10_000).unwrap();
        assert!(est.converged);
        assert_abs_diff_eq!(est.value, 9.0, epsilon = 1e-8);
    }

    #[test]
    fn spectral_norm_non_converged_is_flagged_and_inflated() {
        let n = EXACT_EIGEN_MAX_DIM + 1;
        let mut diag = Array1::<f64>::ones(n);
        diag[0] = 1.001;
        let m = Array2::from_diag(&diag);
        let est = spectral_norm(&m, 1e-15, 2).unwrap();
        assert!(!est.converged);
        assert_abs_diff_eq!(est.bound(), est.value * 1.1, epsilon = 1e-15);
    }

    #[test]
    fn spectral_norm_rejects_asymmetric() {
        let m = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(spectral_norm(&m, 1e-7, 100).is_err());
    }
}
