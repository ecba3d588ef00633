//! Sufficient statistics of a dataset, enough to evaluate total component
//! log-likelihoods and total scores without touching the rows again.

use super::kernel::{multinomial_cell, ScoreKernel};
use super::{Dataset, ModelSpec, Selector, Structure};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub enum DataSummary {
    /// Row count, column sums and the raw cross-product matrix `Σ y y'`.
    Moments {
        n: usize,
        sum: Vec<f64>,
        outer: SymMatrix,
    },
    /// Counts of the four multinomial cells.
    Cells { counts: [f64; 4] },
}

impl DataSummary {
    pub fn new(model: &ModelSpec, data: &Dataset) -> Result<Self> {
        if data.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: data.dim(),
            });
        }
        if data.n() == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        Ok(match model {
            ModelSpec::Multinomial4 { .. } => {
                let mut counts = [0.0; 4];
                for y in data.rows() {
                    counts[multinomial_cell(y)?] += 1.0;
                }
                DataSummary::Cells { counts }
            }
            _ => {
                let p = data.dim();
                let mut sum = vec![0.0; p];
                let mut outer = vec![0.0; p * p];
                for y in data.rows() {
                    for i in 0..p {
                        sum[i] += y[i];
                        for j in i..p {
                            outer[i * p + j] += y[i] * y[j];
                        }
                    }
                }
                DataSummary::Moments {
                    n: data.n(),
                    sum,
                    outer: SymMatrix::from_fn(p, |i, j| outer[i * p + j]),
                }
            }
        })
    }

    pub fn n(&self) -> usize {
        match self {
            DataSummary::Moments { n, .. } => *n,
            DataSummary::Cells { counts } => counts.iter().sum::<f64>() as usize,
        }
    }

    /// `Σ (y − c)(y − c)'`.
    fn centred_outer(&self, c: &[f64]) -> SymMatrix {
        match self {
            DataSummary::Moments { n, sum, outer } => {
                let n = *n as f64;
                SymMatrix::from_fn(c.len(), |i, j| {
                    outer.get(i, j) - c[i] * sum[j] - sum[i] * c[j] + n * c[i] * c[j]
                })
            }
            DataSummary::Cells { .. } => unreachable!("cells have no moments"),
        }
    }
}

fn cell_obs(cell: usize) -> [f64; 3] {
    let mut y = [0.0; 3];
    if cell < 3 {
        y[cell] = 1.0;
    }
    y
}

/// `Σ_i log f_S(y_i)` for a Gaussian margin.
fn gaussian_margin_total(st: &super::GaussianStructure, idx: &[usize], s: &DataSummary) -> Result<f64> {
    let n = s.n() as f64;
    let cov = st.cov.submatrix(idx);
    let l = cov.cholesky_lower()?;
    let logdet: f64 = 2.0 * (0..idx.len()).map(|i| l[(i, i)].ln()).sum::<f64>();
    let inv = cov.invert()?;
    let c = s.centred_outer(&st.mean).submatrix(idx);
    let mut tr = 0.0;
    for i in 0..idx.len() {
        for j in 0..idx.len() {
            tr += inv.get(i, j) * c.get(j, i);
        }
    }
    Ok(-0.5 * (n * (idx.len() as f64 * LN_2PI + logdet) + tr))
}

impl ModelSpec {
    /// Total log-likelihood of one component over the summarised data.
    pub(crate) fn total_logpdf_with(st: &Structure, sel: &Selector, s: &DataSummary) -> Result<f64> {
        match (st, s) {
            (Structure::Gaussian(g), DataSummary::Moments { .. }) => {
                let margin = |idx: &[usize]| gaussian_margin_total(g, idx, s);
                match sel {
                    Selector::Margin(idx) => margin(idx),
                    Selector::Conditional { target, given } => {
                        let mut joint = given.clone();
                        joint.push(*target);
                        joint.sort_unstable();
                        let den = if given.is_empty() { 0.0 } else { margin(given)? };
                        Ok(margin(&joint)? - den)
                    }
                }
            }
            (Structure::Multinomial(_), DataSummary::Cells { counts }) => {
                let mut total = 0.0;
                for (cell, &c) in counts.iter().enumerate() {
                    if c > 0.0 {
                        total += c * Self::logpdf_with(st, sel, &cell_obs(cell))?;
                    }
                }
                Ok(total)
            }
            _ => Err(Error::InvalidArgument("summary does not match model".into())),
        }
    }
}

impl ScoreKernel {
    /// `Σ_i s(y_i)` over the summarised data.
    pub(crate) fn eval_total(&self, s: &DataSummary) -> Result<Vec<f64>> {
        match (self, s) {
            (ScoreKernel::Quadratic(q), DataSummary::Moments { n, sum, .. }) => {
                let n = *n as f64;
                let c = s.centred_outer(&q.center);
                let p = q.center.len();
                Ok((0..q.constant.len())
                    .map(|j| {
                        let lin: f64 = (0..p)
                            .map(|i| q.linear[j][i] * (sum[i] - n * q.center[i]))
                            .sum();
                        let mut quad = 0.0;
                        for a in 0..p {
                            for b in 0..p {
                                quad += q.quadratic[j].get(a, b) * c.get(a, b);
                            }
                        }
                        n * q.constant[j] + lin + quad
                    })
                    .collect())
            }
            (ScoreKernel::Cell(t), DataSummary::Cells { counts }) => Ok((0..self.coords())
                .map(|j| (0..4).map(|c| counts[c] * t.table[c][j]).sum())
                .collect()),
            _ => Err(Error::InvalidArgument("summary does not match kernel".into())),
        }
    }
}
