//! Multi-view datasets: CSV ingestion, validation, min-max scaling and seeded
//! synthetic generators.
//!
//! View files are comma separated with one row per feature and one column per
//! sample, so each file holds `X⁽ᵃ⁾ ∈ R^{m_a × n}` as written. An optional
//! header row is detected by a non-numeric first cell. Label files hold one
//! integer per line.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub name: String,
    /// Features × samples.
    pub data: Array2<f64>,
}

impl View {
    pub fn new(name: impl Into<String>, data: Array2<f64>) -> Self {
        View {
            name: name.into(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<View>,
    pub labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    /// Builds and validates a dataset.
    pub fn new(views: Vec<View>, labels: Option<Vec<usize>>) -> Result<Self> {
        let ds = MultiViewDataset { views, labels };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.views.first().map_or(0, |v| v.data.ncols())
    }

    pub fn v(&self) -> usize {
        self.views.len()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .views
            .first()
            .ok_or_else(|| Error::input("dataset has no views"))?;
        let n = first.data.ncols();
        if n == 0 {
            return Err(Error::input(format!("view '{}' has no samples", first.name)));
        }
        for view in &self.views {
            if view.data.ncols() != n {
                return Err(Error::input(format!(
                    "sample-count mismatch: view '{}' has {} columns, view '{}' has {}",
                    first.name,
                    n,
                    view.name,
                    view.data.ncols()
                )));
            }
            if view.data.nrows() == 0 {
                return Err(Error::input(format!("view '{}' has no features", view.name)));
            }
            if let Some(((r, c), x)) = view.data.indexed_iter().find(|(_, x)| !x.is_finite()) {
                return Err(Error::input(format!(
                    "view '{}' has non-finite value {x} at row {r}, column {c}",
                    view.name
                )));
            }
        }
        if let Some(labels) = &self.labels {
            validate_labels(labels, n)?;
        }
        Ok(())
    }

    pub fn view(&self, index: usize) -> Result<&View> {
        self.views.get(index).ok_or_else(|| {
            Error::input(format!(
                "view index {index} out of range (dataset has {} views)",
                self.views.len()
            ))
        })
    }

    /// Number of distinct ground-truth classes, if labels exist.
    pub fn classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

fn validate_labels(labels: &[usize], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::input(format!(
            "labels have length {}, views have {n} samples",
            labels.len()
        )));
    }
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut seen = vec![false; max + 1];
    for &l in labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::input(format!(
            "label ids must be contiguous from 0; id {missing} is unused (max {max})"
        )));
    }
    Ok(())
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads one features × samples CSV file.
pub fn read_view_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if first {
            first = false;
            if record.get(0).is_some_and(|c| parse_cell(c).is_none()) {
                continue;
            }
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let value = parse_cell(cell).ok_or_else(|| Error::Parse {
                file: path.to_path_buf(),
                line,
                column: col + 1,
                message: format!("cannot parse '{}' as a number", cell.trim()),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line,
                    column: col + 1,
                    message: format!("non-finite value '{}'", cell.trim()),
                });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line,
                    column: row.len().min(w) + 1,
                    message: format!("row has {} columns, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::input(format!("{}: no data rows", path.display())))?;
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|e| Error::Internal(format!("building matrix from {}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("reading {}", path.display()), io),
        csv::ErrorKind::Utf8 { err, .. } => Error::Parse {
            file: path.to_path_buf(),
            line,
            column: err.field() + 1,
            message: "invalid UTF-8".into(),
        },
        other => Error::Parse {
            file: path.to_path_buf(),
            line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a labels file: one nonnegative integer per line, blank lines ignored.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| Error::Parse {
                file: path.to_path_buf(),
                line: i as u64 + 1,
                column: 1,
                message: format!("cannot parse '{}' as a label", l.trim()),
            })
        })
        .collect()
}

/// Loads one CSV per view (named after the file stem) plus optional labels.
pub fn load_dataset(view_paths: &[PathBuf], labels_path: Option<&Path>) -> Result<MultiViewDataset> {
    if view_paths.is_empty() {
        return Err(Error::input("at least one view file is required"));
    }
    let views = view_paths
        .par_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            read_view_csv(p).map(|data| View::new(name, data))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = labels_path.map(read_labels).transpose()?;
    MultiViewDataset::new(views, labels)
}

/// Formats a float so that parsing it back gives the same bits.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn view_to_csv(data: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in data.axis_iter(Axis(0)) {
        let cells: Vec<String> = row.iter().map(|x| format_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn labels_to_text(labels: &[usize]) -> String {
    let mut out = String::new();
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

/// Writes every view as `<dir>/<name>.csv` and labels as `<dir>/labels.txt`.
/// Returns the view paths in order.
pub fn write_dataset(dataset: &MultiViewDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for view in &dataset.views {
        let path = dir.join(format!("{}.csv", view.name));
        crate::experiment::write_atomic(&path, view_to_csv(&view.data).as_bytes())?;
        paths.push(path);
    }
    if let Some(labels) = &dataset.labels {
        crate::experiment::write_atomic(&dir.join("labels.txt"), labels_to_text(labels).as_bytes())?;
    }
    Ok(paths)
}

/// Maps every feature row to [0, 1] by `(x − min)/(max − min)`; constant rows
/// become 0.
pub fn minmax_scale(dataset: &MultiViewDataset) -> MultiViewDataset {
    let views = dataset
        .views
        .iter()
        .map(|view| {
            let mut data = view.data.clone();
            for mut row in data.axis_iter_mut(Axis(0)) {
                let min = row.iter().copied().fold(f64::INFINITY, f64::min);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = max - min;
                if range > 0.0 {
                    row.mapv_inplace(|x| ((x - min) / range).clamp(0.0, 1.0));
                } else {
                    row.fill(0.0);
                }
            }
            View::new(view.name.clone(), data)
        })
        .collect();
    MultiViewDataset {
        views,
        labels: dataset.labels.clone(),
    }
}

fn balanced_labels(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    labels
}

fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    best
}

fn draw_centroids(rng: &mut ChaCha8Rng, k: usize, dim: usize, min_sep: f64) -> Vec<Vec<f64>> {
    let half_width = (min_sep * k as f64).max(1.0);
    for _ in 0..1000 {
        let c: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(-half_width..half_width)).collect())
            .collect();
        if min_pairwise_distance(&c) >= min_sep.max(f64::MIN_POSITIVE) {
            return c;
        }
    }
    // Evenly spaced along the first axis always satisfies the separation.
    let step = min_sep.max(1.0);
    (0..k)
        .map(|c| {
            let mut p = vec![0.0; dim];
            p[0] = step * c as f64;
            p
        })
        .collect()
}

/// Gaussian blobs observed through `dims.len()` views over shared balanced
/// labels. Per view, cluster centroids are at least `10·spread` apart and
/// points scatter around them with standard deviation `spread`.
pub fn make_blobs(
    k: usize,
    n: usize,
    dims: &[usize],
    spread: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if k < 1 || n < 2 * k {
        return Err(Error::input(format!(
            "make_blobs needs k >= 1 and n >= 2k (k = {k}, n = {n})"
        )));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::input("make_blobs needs at least one view and every dimension >= 1"));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::input(format!("spread must be finite and >= 0, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = balanced_labels(&mut rng, k, n);
    let views = dims
        .iter()
        .enumerate()
        .map(|(a, &dim)| {
            let centroids = draw_centroids(&mut rng, k, dim, 10.0 * spread);
            let mut data = Array2::<f64>::zeros((dim, n));
            for (j, &label) in labels.iter().enumerate() {
                for f in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    data[[f, j]] = centroids[label][f] + spread * z;
                }
            }
            View::new(format!("view{a}"), data)
        })
        .collect();
    MultiViewDataset::new(views, Some(labels))
}

/// Two concentric circles of radius 1 (label 0) and 3 (label 1) in every view,
/// with Gaussian radial noise.
pub fn make_rings(v: usize, n: usize, noise: f64, seed: u64) -> Result<MultiViewDataset> {
    if v < 1 {
        return Err(Error::input("make_rings needs at least one view"));
    }
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::input(format!("make_rings needs an even n >= 8, got {n}")));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::input(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = balanced_labels(&mut rng, 2, n);
    let views = (0..v)
        .map(|a| {
            let mut data = Array2::<f64>::zeros((2, n));
            for (j, &label) in labels.iter().enumerate() {
                let angle = rng.random_range(0.0..2.0 * PI);
                let z: f64 = rng.sample(StandardNormal);
                let radius = if label == 0 { 1.0 } else { 3.0 } + noise * z;
                data[[0, j]] = radius * angle.cos();
                data[[1, j]] = radius * angle.sin();
            }
            View::new(format!("view{a}"), data)
        })
        .collect();
    MultiViewDataset::new(views, Some(labels))
}

/// Appends a view of i.i.d. `N(0, scale²)` features that carries no cluster
/// structure.
pub fn add_noise_view(
    dataset: &MultiViewDataset,
    dim: usize,
    scale: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if dim == 0 || !(scale > 0.0) {
        return Err(Error::input("noise view needs dim >= 1 and scale > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dataset.n();
    let data = Array2::from_shape_simple_fn((dim, n), || scale * rng.sample::<f64, _>(StandardNormal));
    let mut out = dataset.clone();
    out.views.push(View::new("noise", data));
    out.validate()?;
    Ok(out)
}
