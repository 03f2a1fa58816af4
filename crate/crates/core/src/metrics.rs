//! External clustering validation against ground-truth labels.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub nmi: f64,
    pub rand_index: f64,
    pub mirkin_index: f64,
    pub n: usize,
}

/// Contingency table `counts[t][p]` between two labelings, with label ids
/// compacted so that only used ids get a row or column.
struct Contingency {
    counts: Vec<Vec<u64>>,
    n: usize,
}

impl Contingency {
    fn new(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::input(format!(
                "label vectors differ in length ({} vs {})",
                truth.len(),
                pred.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::input("label vectors must not be empty"));
        }
        let t = compact(truth);
        let p = compact(pred);
        let rows = t.iter().max().map_or(0, |m| m + 1);
        let cols = p.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0u64; cols]; rows];
        for (a, b) in t.iter().zip(&p) {
            counts[*a][*b] += 1;
        }
        Ok(Contingency {
            counts,
            n: truth.len(),
        })
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols).map(|c| self.counts.iter().map(|r| r[c]).sum()).collect()
    }
}

/// Relabels ids in order of first appearance.
fn compact(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Fraction of samples correctly labelled under the best one-to-one mapping of
/// predicted clusters onto true classes (Hungarian algorithm on the
/// zero-padded contingency table).
pub fn matched_accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::new(truth, pred)?;
    let rows = table.counts.len();
    let cols = table.counts.first().map_or(0, Vec::len);
    let size = rows.max(cols);
    let weights = Matrix::from_fn(size, size, |(r, c)| {
        if r < rows && c < cols {
            table.counts[r][c] as i64
        } else {
            0
        }
    });
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / table.n as f64)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(U;V) / sqrt(H(U) H(V))`, natural logs.
///
/// If both partitions are a single cluster the result is 1; if exactly one
/// is, the result is 0.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::new(truth, pred)?;
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let hu = entropy(&rows, n);
    let hv = entropy(&cols, n);
    if hu == 0.0 && hv == 0.0 {
        // Both single-cluster partitions, hence the same set partition.
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let nij = count as f64;
            mi += nij / n * (n * nij / (rows[r] as f64 * cols[c] as f64)).ln();
        }
    }
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

fn pairs(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// Rand index over all sample pairs and the Mirkin index `1 − RI`.
pub fn rand_and_mirkin(truth: &[usize], pred: &[usize]) -> Result<(f64, f64)> {
    if truth.len() < 2 {
        return Err(Error::input("Rand index needs at least 2 samples"));
    }
    let table = Contingency::new(truth, pred)?;
    let total = pairs(table.n as u64);
    let together_both: u64 = table.counts.iter().flatten().map(|c| pairs(*c)).sum();
    let together_truth: u64 = table.row_sums().into_iter().map(pairs).sum();
    let together_pred: u64 = table.col_sums().into_iter().map(pairs).sum();
    let apart_both = total + together_both - together_truth - together_pred;
    let ri = (together_both + apart_both) as f64 / total as f64;
    Ok((ri, 1.0 - ri))
}

/// All four metrics for one clustering.
pub fn evaluate(truth: &[usize], pred: &[usize]) -> Result<MetricsReport> {
    let (rand_index, mirkin_index) = rand_and_mirkin(truth, pred)?;
    Ok(MetricsReport {
        accuracy: matched_accuracy(truth, pred)?,
        nmi: nmi(truth, pred)?,
        rand_index,
        mirkin_index,
        n: truth.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn accuracy_examples() {
        assert_eq!(matched_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(matched_accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(matched_accuracy(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.5);
        // more predicted clusters than classes
        assert_eq!(matched_accuracy(&[0, 0, 1, 1], &[0, 1, 2, 2]).unwrap(), 0.75);
        assert!(matched_accuracy(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert_abs_diff_eq!(nmi(&[0, 0, 1, 2], &[0, 0, 1, 2]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(nmi(&[0, 1], &[1, 0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(nmi(&[3, 3, 3], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn rand_examples() {
        assert_eq!(rand_and_mirkin(&[0, 1, 1], &[0, 1, 1]).unwrap(), (1.0, 0.0));
        let (ri, mi) = rand_and_mirkin(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_abs_diff_eq!(ri, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mi, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(rand_and_mirkin(&[0, 0, 1, 2], &[2, 2, 0, 1]).unwrap(), (1.0, 0.0));
        assert!(rand_and_mirkin(&[0], &[0]).is_err());
    }

    #[test]
    fn report_invariants() {
        let r = evaluate(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 2, 0]).unwrap();
        assert_eq!(r.mirkin_index, 1.0 - r.rand_index);
        for x in [r.accuracy, r.nmi, r.rand_index, r.mirkin_index] {
            assert!((0.0..=1.0).contains(&x));
        }
        assert_eq!(r.n, 6);
    }
}
