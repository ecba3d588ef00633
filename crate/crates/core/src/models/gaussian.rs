//! Partitioned-Gaussian densities, scores and exact score moments.

use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::{QuadraticScore, ScoreKernel};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean, covariance and their derivatives in every model parameter.
#[derive(Debug, Clone)]
pub(crate) struct GaussianStructure {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub d_mean: Vec<Vec<f64>>,
    pub d_cov: Vec<SymMatrix>,
}

fn sub_vec(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Solves `L L' x = b` given the lower Cholesky factor.
fn chol_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[(i, k)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[(k, i)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

impl GaussianStructure {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_params(&self) -> usize {
        self.d_mean.len()
    }

    pub fn margin_logpdf(&self, idx: &[usize], y: &[f64]) -> Result<f64> {
        let s = self.cov.submatrix(idx);
        let l = s.cholesky_lower()?;
        let r: Vec<f64> = idx.iter().map(|&i| y[i] - self.mean[i]).collect();
        let x = chol_solve(&l, &r);
        let quad: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..idx.len()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
        Ok(-0.5 * (idx.len() as f64 * LN_2PI + logdet + quad))
    }

    /// Conditional mean and variance of `y[target]` given `y[given]`.
    pub fn conditional_moments(&self, target: usize, given: &[usize], y: &[f64]) -> Result<(f64, f64)> {
        if given.is_empty() {
            return Ok((self.mean[target], self.cov.get(target, target)));
        }
        let sgg = self.cov.submatrix(given);
        let l = sgg.cholesky_lower()?;
        let sgt: Vec<f64> = given.iter().map(|&g| self.cov.get(g, target)).collect();
        let w = chol_solve(&l, &sgt);
        let mean = self.mean[target]
            + given
                .iter()
                .zip(&w)
                .map(|(&g, wi)| wi * (y[g] - self.mean[g]))
                .sum::<f64>();
        let var = self.cov.get(target, target) - sgt.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        if !(var > 0.0) {
            return Err(Error::NotPositiveDefinite {
                index: target,
                pivot: var,
            });
        }
        Ok((mean, var))
    }

    pub fn conditional_logpdf(&self, target: usize, given: &[usize], y: &[f64]) -> Result<f64> {
        let (m, v) = self.conditional_moments(target, given, y)?;
        let r = y[target] - m;
        Ok(-0.5 * (LN_2PI + v.ln() + r * r / v))
    }

    /// Score of the margin on `idx` in every model parameter, as a kernel.
    ///
    /// `d/dθ log N(y_S; m_S, S) = -tr(S⁻¹dS)/2 + dm'S⁻¹z + z'S⁻¹dS S⁻¹z/2`.
    pub fn margin_kernel(&self, idx: &[usize]) -> Result<ScoreKernel> {
        let p = self.dim();
        let s = self.cov.submatrix(idx);
        let sinv = s.invert()?;
        let mut out = QuadraticScore::zeros(self.mean.clone(), self.n_params());
        for j in 0..self.n_params() {
            let dm = sub_vec(&self.d_mean[j], idx);
            let ds = self.d_cov[j].submatrix(idx);
            let sinv_ds = sinv.to_matrix().mul(&ds.to_matrix())?;
            let trace: f64 = (0..idx.len()).map(|i| sinv_ds[(i, i)]).sum();
            out.constant[j] = -0.5 * trace;
            let a = sinv.mul_vec(&dm)?;
            let mut lin = vec![0.0; p];
            for (k, &i) in idx.iter().enumerate() {
                lin[i] = a[k];
            }
            out.linear[j] = lin;
            let q = ds.congruence(&sinv.to_matrix())?;
            let mut full = SymMatrix::zeros(p);
            for (a_, &i) in idx.iter().enumerate() {
                for (b_, &k) in idx.iter().enumerate() {
                    if i <= k {
                        full.set(i, k, 0.5 * q.get(a_, b_));
                    }
                }
            }
            out.quadratic[j] = full;
        }
        Ok(ScoreKernel::Quadratic(out))
    }

    /// Exact `Cov(a(Y), b(Y))` for `Y ~ N(mean, cov)`, kernels centred at `mean`:
    /// `a_i'Σb_j + 2 tr(A_iΣB_jΣ)`.
    pub fn kernel_covariance(&self, a: &QuadraticScore, b: &QuadraticScore) -> Result<Matrix> {
        let sigma = self.cov.to_matrix();
        let ra = a.constant.len();
        let rb = b.constant.len();
        let mut out = Matrix::zeros(ra, rb);
        let a_sig: Vec<Matrix> = a
            .quadratic
            .iter()
            .map(|q| q.to_matrix().mul(&sigma))
            .collect::<Result<_>>()?;
        let b_sig: Vec<Matrix> = b
            .quadratic
            .iter()
            .map(|q| q.to_matrix().mul(&sigma))
            .collect::<Result<_>>()?;
        for i in 0..ra {
            for j in 0..rb {
                let lin: f64 = a.linear[i]
                    .iter()
                    .zip(self.cov.mul_vec(&b.linear[j])?)
                    .map(|(x, y)| x * y)
                    .sum();
                let prod = a_sig[i].mul(&b_sig[j])?;
                let tr: f64 = (0..self.dim()).map(|k| prod[(k, k)]).sum();
                out[(i, j)] = lin + 2.0 * tr;
            }
        }
        Ok(out)
    }

    /// Exact `E[a(Y)] = c + tr(QΣ)`.
    pub fn kernel_mean(&self, a: &QuadraticScore) -> Vec<f64> {
        (0..a.constant.len())
            .map(|j| {
                let mut tr = 0.0;
                for r in 0..self.dim() {
                    for c in 0..self.dim() {
                        tr += a.quadratic[j].get(r, c) * self.cov.get(c, r);
                    }
                }
                a.constant[j] + tr
            })
            .collect()
    }

    pub fn draw<R: Rng>(&self, chol: &Matrix, rng: &mut R) -> Vec<f64> {
        let p = self.dim();
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        (0..p)
            .map(|i| self.mean[i] + (0..=i).map(|k| chol[(i, k)] * z[k]).sum::<f64>())
            .collect()
    }
}
