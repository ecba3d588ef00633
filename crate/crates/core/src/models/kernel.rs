//! Score functions frozen at a parameter point.
//!
//! For the Gaussian families every component score is an affine-quadratic
//! form in the centred observation, and for the multinomial family it only
//! depends on which cell fired. Both representations are closed under
//! weighted sums and constant linear maps, which is all the composite
//! machinery needs.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};

/// `s_j(y) = c_j + a_j'z + z'Q_j z` with `z = y - center`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticScore {
    pub(crate) center: Vec<f64>,
    pub(crate) constant: Vec<f64>,
    pub(crate) linear: Vec<Vec<f64>>,
    pub(crate) quadratic: Vec<SymMatrix>,
}

/// Score value for each of the four multinomial cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub(crate) table: Vec<Vec<f64>>,
}

/// A vector-valued function of one observation.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreKernel {
    Quadratic(QuadraticScore),
    Cell(CellScore),
}

/// Cell index of a multinomial observation `(y1, y2, y3)`; cell 3 is `Y4 = 1`.
pub fn multinomial_cell(y: &[f64]) -> Result<usize> {
    if y.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: y.len(),
        });
    }
    let mut cell = 3;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 {
            if cell != 3 {
                return Err(Error::InvalidArgument(format!(
                    "multinomial observation {y:?} has more than one success"
                )));
            }
            cell = i;
        } else if v != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "multinomial observation {y:?} is not 0/1"
            )));
        }
    }
    Ok(cell)
}

impl QuadraticScore {
    pub(crate) fn zeros(center: Vec<f64>, coords: usize) -> Self {
        let p = center.len();
        Self {
            constant: vec![0.0; coords],
            linear: vec![vec![0.0; p]; coords],
            quadratic: vec![SymMatrix::zeros(p); coords],
            center,
        }
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let p = self.center.len();
        let mut z = [0.0; 32];
        let z = &mut z[..p];
        for i in 0..p {
            z[i] = y[i] - self.center[i];
        }
        for (j, o) in out.iter_mut().enumerate() {
            let lin: f64 = self.linear[j].iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            *o = self.constant[j] + lin + self.quadratic[j].quad_form(z);
        }
    }
}

impl ScoreKernel {
    pub fn coords(&self) -> usize {
        match self {
            ScoreKernel::Quadratic(q) => q.constant.len(),
            ScoreKernel::Cell(c) => c.table[0].len(),
        }
    }

    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ScoreKernel::Quadratic(q) => {
                if y.len() != q.center.len() {
                    return Err(Error::DimensionMismatch {
                        expected: q.center.len(),
                        got: y.len(),
                    });
                }
                q.eval_into(y, out);
            }
            ScoreKernel::Cell(c) => {
                let cell = multinomial_cell(y)?;
                out.copy_from_slice(&c.table[cell]);
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.coords()];
        self.eval_into(y, &mut out)?;
        Ok(out)
    }

    /// `self += w * other`; both kernels must share type, centre and size.
    pub fn add_scaled(&mut self, other: &ScoreKernel, w: f64) -> Result<()> {
        if self.coords() != other.coords() {
            return Err(Error::DimensionMismatch {
                expected: self.coords(),
                got: other.coords(),
            });
        }
        match (self, other) {
            (ScoreKernel::Quadratic(a), ScoreKernel::Quadratic(b)) => {
                if a.center != b.center {
                    return Err(Error::InvalidArgument("kernel centres differ".into()));
                }
                for j in 0..a.constant.len() {
                    a.constant[j] += w * b.constant[j];
                    for (x, y) in a.linear[j].iter_mut().zip(&b.linear[j]) {
                        *x += w * y;
                    }
                    a.quadratic[j] = a.quadratic[j].add(&b.quadratic[j].scale(w))?;
                }
            }
            (ScoreKernel::Cell(a), ScoreKernel::Cell(b)) => {
                for (ra, rb) in a.table.iter_mut().zip(&b.table) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += w * y;
                    }
                }
            }
            _ => return Err(Error::InvalidArgument("mixed kernel families".into())),
        }
        Ok(())
    }

    /// A zero kernel of the same family with `coords` outputs.
    pub fn zeros_like(&self, coords: usize) -> ScoreKernel {
        match self {
            ScoreKernel::Quadratic(q) => {
                ScoreKernel::Quadratic(QuadraticScore::zeros(q.center.clone(), coords))
            }
            ScoreKernel::Cell(c) => ScoreKernel::Cell(CellScore {
                table: vec![vec![0.0; coords]; c.table.len()],
            }),
        }
    }

    /// Constant linear map of the output: `y -> A s(y)`.
    pub fn transform(&self, a: &Matrix) -> Result<ScoreKernel> {
        if a.cols() != self.coords() {
            return Err(Error::DimensionMismatch {
                expected: self.coords(),
                got: a.cols(),
            });
        }
        let rows = a.rows();
        Ok(match self {
            ScoreKernel::Quadratic(q) => {
                let p = q.center.len();
                let mut out = QuadraticScore::zeros(q.center.clone(), rows);
                for r in 0..rows {
                    for j in 0..q.constant.len() {
                        let w = a[(r, j)];
                        out.constant[r] += w * q.constant[j];
                        for i in 0..p {
                            out.linear[r][i] += w * q.linear[j][i];
                        }
                        out.quadratic[r] = out.quadratic[r].add(&q.quadratic[j].scale(w))?;
                    }
                }
                ScoreKernel::Quadratic(out)
            }
            ScoreKernel::Cell(c) => ScoreKernel::Cell(CellScore {
                table: c
                    .table
                    .iter()
                    .map(|row| a.mul_vec(row))
                    .collect::<Result<_>>()?,
            }),
        })
    }

    /// Keeps only the listed output coordinates.
    pub fn select(&self, coords: &[usize]) -> ScoreKernel {
        let sel = Matrix::from_fn(coords.len(), self.coords(), |r, c| {
            if coords[r] == c {
                1.0
            } else {
                0.0
            }
        });
        self.transform(&sel).expect("selection matrix has matching width")
    }
}
