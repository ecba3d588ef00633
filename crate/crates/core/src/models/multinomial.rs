//! Multinomial(1; θ, θ, θ/k, 1 − 2θ − θ/k) observed through (y1, y2, y3).

use rand::Rng;

use super::kernel::{multinomial_cell, CellScore, ScoreKernel};
use crate::error::Result;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy)]
pub(crate) struct MultinomialStructure {
    pub theta: f64,
    pub k: f64,
}

impl MultinomialStructure {
    /// `P(Y_i = 1) = slope_i * θ` for the three observed indicators.
    fn slopes(&self) -> [f64; 3] {
        [1.0, 1.0, 1.0 / self.k]
    }

    pub fn cell_probs(&self) -> [f64; 4] {
        let t = self.theta;
        let s = self.slopes();
        [s[0] * t, s[1] * t, s[2] * t, 1.0 - (s[0] + s[1] + s[2]) * t]
    }

    fn slope_sum(&self, idx: &[usize]) -> f64 {
        let s = self.slopes();
        idx.iter().map(|&i| s[i]).sum()
    }

    /// The margin on `idx` is a categorical over "which selected indicator
    /// fired" plus "none of them".
    pub fn margin_logpmf(&self, idx: &[usize], y: &[f64]) -> Result<f64> {
        let cell = multinomial_cell(y)?;
        Ok(if idx.contains(&cell) {
            (self.slopes()[cell] * self.theta).ln()
        } else {
            (1.0 - self.theta * self.slope_sum(idx)).ln()
        })
    }

    pub fn conditional_logpmf(&self, target: usize, given: &[usize], y: &[f64]) -> Result<f64> {
        let mut joint = given.to_vec();
        joint.push(target);
        let den = if given.is_empty() {
            0.0
        } else {
            self.margin_logpmf(given, y)?
        };
        Ok(self.margin_logpmf(&joint, y)? - den)
    }

    pub fn margin_kernel(&self, idx: &[usize]) -> ScoreKernel {
        let a = self.slope_sum(idx);
        let miss = -a / (1.0 - self.theta * a);
        let table = (0..4)
            .map(|cell| vec![if idx.contains(&cell) { 1.0 / self.theta } else { miss }])
            .collect();
        ScoreKernel::Cell(CellScore { table })
    }

    pub fn kernel_mean(&self, a: &CellScore) -> Vec<f64> {
        let p = self.cell_probs();
        (0..a.table[0].len())
            .map(|j| (0..4).map(|c| p[c] * a.table[c][j]).sum())
            .collect()
    }

    /// Exact covariance by enumerating the four cells.
    pub fn kernel_covariance(&self, a: &CellScore, b: &CellScore) -> Matrix {
        let p = self.cell_probs();
        let ma = self.kernel_mean(a);
        let mb = self.kernel_mean(b);
        Matrix::from_fn(ma.len(), mb.len(), |i, j| {
            (0..4)
                .map(|c| p[c] * (a.table[c][i] - ma[i]) * (b.table[c][j] - mb[j]))
                .sum()
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let p = self.cell_probs();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cell = 3;
        for (c, pc) in p.iter().take(3).enumerate() {
            acc += pc;
            if u < acc {
                cell = c;
                break;
            }
        }
        (0..3).map(|i| if i == cell { 1.0 } else { 0.0 }).collect()
    }
}
