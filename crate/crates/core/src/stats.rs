//! Streaming moments and batch-means standard errors.

use std::ops::Range;

use rayon::prelude::*;

use crate::linalg::{Matrix, SymMatrix};

/// Number of batches used for every Monte Carlo standard error.
pub const BATCHES: usize = 20;

/// Splits `0..total` into `batches` contiguous, nearly equal ranges.
pub fn batch_ranges(total: usize, batches: usize) -> Vec<Range<usize>> {
    let batches = batches.max(1);
    (0..batches)
        .map(|b| (b * total / batches)..((b + 1) * total / batches))
        .collect()
}

/// Evaluates `f` on every batch in parallel; results come back in batch order,
/// so downstream reductions do not depend on the worker count.
pub fn map_batches<T, F>(total: usize, batches: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    batch_ranges(total, batches)
        .into_par_iter()
        .enumerate()
        .map(|(b, r)| f(b, r))
        .collect()
}

/// Running mean and co-moment matrix (Welford, merged with Chan's rule).
#[derive(Debug, Clone)]
pub struct Moments {
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    comoment: Vec<f64>,
    scratch: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
            scratch: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim;
        assert_eq!(x.len(), d, "observation length");
        self.count += 1;
        let n = self.count as f64;
        let before = &mut self.scratch;
        for i in 0..d {
            before[i] = x[i] - self.mean[i];
            self.mean[i] += before[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += after * before[j];
            }
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim;
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] +=
                    other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample covariance with denominator `count - 1`.
    pub fn covariance(&self) -> SymMatrix {
        let d = self.dim;
        let denom = (self.count.max(2) - 1) as f64;
        SymMatrix::from_fn(d, |i, j| {
            0.5 * (self.comoment[i * d + j] + self.comoment[j * d + i]) / denom
        })
    }

    /// Block `Cov(x[rows], x[cols])` of the sample covariance.
    pub fn cross_covariance(&self, rows: Range<usize>, cols: Range<usize>) -> Matrix {
        let d = self.dim;
        let denom = (self.count.max(2) - 1) as f64;
        Matrix::from_fn(rows.len(), cols.len(), |a, b| {
            self.comoment[(rows.start + a) * d + cols.start + b] / denom
        })
    }

    /// Average of `x x'`.
    pub fn raw_second_moment(&self) -> SymMatrix {
        let d = self.dim;
        let n = self.count.max(1) as f64;
        SymMatrix::from_fn(d, |i, j| {
            0.5 * (self.comoment[i * d + j] + self.comoment[j * d + i]) / n
                + self.mean[i] * self.mean[j]
        })
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (denominator `len - 1`).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len().max(2) - 1) as f64
}

/// Batch-means standard error from per-batch estimates: `sd / sqrt(B)`.
pub fn batch_std_err(batch_values: &[f64]) -> f64 {
    (variance(batch_values) / batch_values.len() as f64).sqrt()
}

/// Entrywise batch-means standard errors of a matrix estimate.
pub fn batch_std_err_sym(batch_values: &[SymMatrix]) -> SymMatrix {
    let d = batch_values[0].dim();
    SymMatrix::from_fn(d, |i, j| {
        let v: Vec<f64> = batch_values.iter().map(|m| m.get(i, j)).collect();
        batch_std_err(&v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_ranges_cover_everything() {
        let r = batch_ranges(103, 20);
        assert_eq!(r.len(), 20);
        assert_eq!(r[0].start, 0);
        assert_eq!(r[19].end, 103);
        assert!(r.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn merged_moments_match_single_pass() {
        let xs: Vec<[f64; 2]> = (0..50)
            .map(|i| {
                let t = i as f64;
                [t.sin() * 3.0 + 1.0, (t * 0.37).cos() - t * 0.01]
            })
            .collect();
        let mut all = Moments::new(2);
        xs.iter().for_each(|x| all.push(x));
        let mut a = Moments::new(2);
        let mut b = Moments::new(2);
        xs[..17].iter().for_each(|x| a.push(x));
        xs[17..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean()[i] - all.mean()[i]).abs() < 1e-13);
            for j in 0..2 {
                assert!((a.covariance().get(i, j) - all.covariance().get(i, j)).abs() < 1e-12);
            }
        }
        let v: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        assert!((variance(&v) - all.covariance().get(0, 0)).abs() < 1e-12);
    }
}
