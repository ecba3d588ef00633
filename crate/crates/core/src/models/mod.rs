//! The three model families: equicorrelated normal, the block trivariate
//! normal and the four-cell multinomial.
//!
//! Each family exposes exact log-densities of arbitrary margins and
//! single-coordinate conditionals, an exact sampler, the full-likelihood
//! score and the Fisher information. Gaussian margins and conditionals are
//! computed from the partitioned mean and covariance; nothing is specialised
//! to the equicorrelated structure.

mod gaussian;
pub mod kernel;
mod multinomial;
mod summary;

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::params::ParamVector;
use crate::rng::{self, domain};
use crate::stats::{self, Moments, BATCHES};

pub(crate) use gaussian::GaussianStructure;
pub use kernel::ScoreKernel;
pub(crate) use multinomial::MultinomialStructure;
pub use summary::DataSummary;

/// Parameters closer than this to a domain boundary are rejected.
pub const BOUNDARY_MARGIN: f64 = 1e-8;

/// Largest supported observation dimension.
pub const MAX_DIM: usize = 32;

const EMVN_PARAMS: &[&str] = &["rho", "sigma2"];
const TRINORMAL_PARAMS: &[&str] = &["mu", "rho", "sigma2"];
const MULTINOMIAL_PARAMS: &[&str] = &["theta"];

/// A model family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    /// Zero-mean `N_p(0, σ²{(1−ρ)I + ρ11'})`, parameters `(rho, sigma2)`.
    Emvn { p: usize },
    /// `N_3(μ1, [[1,ρ,0],[ρ,1,0],[0,0,σ²]])`, parameters `(mu, rho, sigma2)`.
    TriNormal,
    /// `Multinomial(1; θ, θ, θ/k, 1−2θ−θ/k)` observed as `(y1, y2, y3)`,
    /// parameter `theta`.
    Multinomial4 { k: f64 },
}

/// Which density a composite-likelihood component uses. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Selector {
    Margin(Vec<usize>),
    Conditional { target: usize, given: Vec<usize> },
}

impl Selector {
    pub fn margin(indices: &[usize]) -> Self {
        let mut v = indices.to_vec();
        v.sort_unstable();
        Selector::Margin(v)
    }

    pub fn conditional(target: usize, given: &[usize]) -> Self {
        if given.is_empty() {
            return Selector::Margin(vec![target]);
        }
        let mut g = given.to_vec();
        g.sort_unstable();
        Selector::Conditional { target, given: g }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let all: Vec<usize> = match self {
            Selector::Margin(idx) => {
                if idx.is_empty() {
                    return Err(Error::InvalidArgument("empty margin".into()));
                }
                idx.clone()
            }
            Selector::Conditional { target, given } => {
                if given.contains(target) {
                    return Err(Error::InvalidArgument(format!(
                        "conditional target {target} appears in its conditioning set"
                    )));
                }
                let mut v = given.clone();
                v.push(*target);
                v
            }
        };
        if let Some(&bad) = all.iter().find(|&&i| i >= dim) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} out of range for dimension {dim}"
            )));
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(Error::InvalidArgument(format!("repeated index in {self:?}")));
        }
        Ok(())
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[usize]| {
            v.iter()
                .map(|i| format!("y{}", i + 1))
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            Selector::Margin(idx) => write!(f, "f({})", list(idx)),
            Selector::Conditional { target, given } => {
                write!(f, "f(y{}|{})", target + 1, list(given))
            }
        }
    }
}

/// `n` observations of a fixed dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut d = Self::new(dim);
        for r in rows {
            d.push_row(r)?;
        }
        Ok(d)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn n(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        self.rows().map(|r| r[j]).sum::<f64>() / self.n() as f64
    }
}

/// Fisher information per observation for the free parameters.
#[derive(Debug, Clone)]
pub struct FisherInfo {
    pub info: SymMatrix,
    /// Batch-means standard errors when estimated by Monte Carlo.
    pub std_err: Option<SymMatrix>,
    pub draws: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) enum Structure {
    Gaussian(GaussianStructure),
    Multinomial(MultinomialStructure),
}

/// Draws observations at a fixed parameter point.
#[derive(Debug, Clone)]
pub struct Sampler {
    structure: Structure,
    chol: Option<Matrix>,
}

impl Sampler {
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.structure {
            Structure::Gaussian(g) => g.draw(self.chol.as_ref().expect("gaussian sampler"), rng),
            Structure::Multinomial(m) => m.draw(rng),
        }
    }
}

fn check_open(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::domain(name, value, "not finite"));
    }
    if value <= lo + BOUNDARY_MARGIN || value >= hi - BOUNDARY_MARGIN {
        return Err(Error::domain(
            name,
            value,
            format!("must lie in ({lo}, {hi}) at least {BOUNDARY_MARGIN:e} from the boundary"),
        ));
    }
    Ok(())
}

impl ModelSpec {
    pub fn emvn(p: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "EMVN dimension p = {p} must be in 2..={MAX_DIM}"
            )));
        }
        Ok(ModelSpec::Emvn { p })
    }

    pub fn tri_normal() -> Self {
        ModelSpec::TriNormal
    }

    pub fn multinomial4(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain("k", k, "must be a positive finite constant"));
        }
        Ok(ModelSpec::Multinomial4 { k })
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Emvn { p } => format!("emvn(p={p})"),
            ModelSpec::TriNormal => "trinormal".into(),
            ModelSpec::Multinomial4 { k } => format!("multinomial4(k={k})"),
        }
    }

    /// Observation dimension.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Emvn { p } => *p,
            ModelSpec::TriNormal | ModelSpec::Multinomial4 { .. } => 3,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelSpec::Emvn { .. } => EMVN_PARAMS,
            ModelSpec::TriNormal => TRINORMAL_PARAMS,
            ModelSpec::Multinomial4 { .. } => MULTINOMIAL_PARAMS,
        }
    }

    /// Parameter point in canonical order, checked against the domain.
    pub fn params(&self, values: &[f64]) -> Result<ParamVector> {
        let t = ParamVector::new(self.param_names(), values)?;
        self.check_domain(&t)?;
        Ok(t)
    }

    /// Open interval a parameter must lie in.
    pub fn bounds(&self, name: &str) -> Result<(f64, f64)> {
        Ok(match (self, name) {
            (ModelSpec::Emvn { p }, "rho") => (-1.0 / (*p as f64 - 1.0), 1.0),
            (ModelSpec::TriNormal, "rho") => (-1.0, 1.0),
            (ModelSpec::Emvn { .. } | ModelSpec::TriNormal, "sigma2") => (0.0, f64::INFINITY),
            (ModelSpec::TriNormal, "mu") => (f64::NEG_INFINITY, f64::INFINITY),
            (ModelSpec::Multinomial4 { k }, "theta") => (0.0, k / (2.0 * k + 1.0)),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} has no parameter `{name}`",
                    self.name()
                )))
            }
        })
    }

    pub fn check_domain(&self, theta: &ParamVector) -> Result<()> {
        if theta.names() != self.param_names() {
            return Err(Error::InvalidArgument(format!(
                "parameter names {:?} do not match {}",
                theta.names(),
                self.name()
            )));
        }
        for (name, &v) in theta.names().iter().zip(theta.values()) {
            let (lo, hi) = self.bounds(name)?;
            check_open(name, v, lo, hi)?;
        }
        Ok(())
    }

    pub(crate) fn structure(&self, theta: &ParamVector) -> Result<Structure> {
        self.check_domain(theta)?;
        let v = theta.values();
        Ok(match *self {
            ModelSpec::Emvn { p } => {
                let (rho, s2) = (v[0], v[1]);
                let cov = SymMatrix::from_fn(p, |i, j| if i == j { s2 } else { s2 * rho });
                let d_rho = SymMatrix::from_fn(p, |i, j| if i == j { 0.0 } else { s2 });
                let d_s2 = SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { rho });
                Structure::Gaussian(GaussianStructure {
                    mean: vec![0.0; p],
                    cov,
                    d_mean: vec![vec![0.0; p]; 2],
                    d_cov: vec![d_rho, d_s2],
                })
            }
            ModelSpec::TriNormal => {
                let (mu, rho, s2) = (v[0], v[1], v[2]);
                let cov = SymMatrix::from_rows(&[
                    vec![1.0, rho, 0.0],
                    vec![rho, 1.0, 0.0],
                    vec![0.0, 0.0, s2],
                ])?;
                let mut d_rho = SymMatrix::zeros(3);
                d_rho.set(0, 1, 1.0);
                let d_s2 = SymMatrix::diag(&[0.0, 0.0, 1.0]);
                Structure::Gaussian(GaussianStructure {
                    mean: vec![mu; 3],
                    cov,
                    d_mean: vec![vec![1.0; 3], vec![0.0; 3], vec![0.0; 3]],
                    d_cov: vec![SymMatrix::zeros(3), d_rho, d_s2],
                })
            }
            ModelSpec::Multinomial4 { k } => {
                Structure::Multinomial(MultinomialStructure { theta: v[0], k })
            }
        })
    }

    fn check_obs(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Log-density of the component selected by `sel`.
    pub fn logpdf(&self, sel: &Selector, y: &[f64], theta: &ParamVector) -> Result<f64> {
        sel.validate(self.dim())?;
        self.check_obs(y)?;
        let st = self.structure(theta)?;
        Self::logpdf_with(&st, sel, y)
    }

    pub(crate) fn logpdf_with(st: &Structure, sel: &Selector, y: &[f64]) -> Result<f64> {
        match (st, sel) {
            (Structure::Gaussian(g), Selector::Margin(idx)) => g.margin_logpdf(idx, y),
            (Structure::Gaussian(g), Selector::Conditional { target, given }) => {
                g.conditional_logpdf(*target, given, y)
            }
            (Structure::Multinomial(m), Selector::Margin(idx)) => m.margin_logpmf(idx, y),
            (Structure::Multinomial(m), Selector::Conditional { target, given }) => {
                m.conditional_logpmf(*target, given, y)
            }
        }
    }

    /// Log marginal density of `y[indices]`.
    pub fn margin_logpdf(&self, indices: &[usize], y: &[f64], theta: &ParamVector) -> Result<f64> {
        self.logpdf(&Selector::margin(indices), y, theta)
    }

    /// Log conditional density of `y[target]` given `y[given]`.
    pub fn conditional_logpdf(
        &self,
        target: usize,
        given: &[usize],
        y: &[f64],
        theta: &ParamVector,
    ) -> Result<f64> {
        self.logpdf(&Selector::conditional(target, given), y, theta)
    }

    pub fn joint_logpdf(&self, y: &[f64], theta: &ParamVector) -> Result<f64> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.margin_logpdf(&all, y, theta)
    }

    /// Conditional mean and variance of a Gaussian coordinate.
    pub fn conditional_moments(
        &self,
        target: usize,
        given: &[usize],
        y: &[f64],
        theta: &ParamVector,
    ) -> Result<(f64, f64)> {
        Selector::conditional(target, given).validate(self.dim())?;
        match self.structure(theta)? {
            Structure::Gaussian(g) => g.conditional_moments(target, given, y),
            Structure::Multinomial(_) => Err(Error::NotSupported(
                "conditional moments are defined for the Gaussian families".into(),
            )),
        }
    }

    /// Score kernel of one component in all model parameters.
    pub(crate) fn selector_kernel(st: &Structure, sel: &Selector) -> Result<ScoreKernel> {
        let margin = |idx: &[usize]| -> Result<ScoreKernel> {
            match st {
                Structure::Gaussian(g) => g.margin_kernel(idx),
                Structure::Multinomial(m) => Ok(m.margin_kernel(idx)),
            }
        };
        match sel {
            Selector::Margin(idx) => margin(idx),
            Selector::Conditional { target, given } => {
                let mut joint = given.clone();
                joint.push(*target);
                joint.sort_unstable();
                let mut k = margin(&joint)?;
                k.add_scaled(&margin(given)?, -1.0)?;
                Ok(k)
            }
        }
    }

    /// Exact covariance of two score kernels under the model at `st`.
    pub(crate) fn kernel_covariance(st: &Structure, a: &ScoreKernel, b: &ScoreKernel) -> Result<Matrix> {
        match (st, a, b) {
            (Structure::Gaussian(g), ScoreKernel::Quadratic(x), ScoreKernel::Quadratic(y)) => {
                g.kernel_covariance(x, y)
            }
            (Structure::Multinomial(m), ScoreKernel::Cell(x), ScoreKernel::Cell(y)) => {
                Ok(m.kernel_covariance(x, y))
            }
            _ => Err(Error::InvalidArgument("kernel does not match model".into())),
        }
    }

    pub(crate) fn kernel_mean(st: &Structure, a: &ScoreKernel) -> Result<Vec<f64>> {
        match (st, a) {
            (Structure::Gaussian(g), ScoreKernel::Quadratic(x)) => Ok(g.kernel_mean(x)),
            (Structure::Multinomial(m), ScoreKernel::Cell(x)) => Ok(m.kernel_mean(x)),
            _ => Err(Error::InvalidArgument("kernel does not match model".into())),
        }
    }

    /// Full-likelihood score kernel restricted to the free parameters.
    pub(crate) fn full_score_kernel(&self, theta: &ParamVector) -> Result<ScoreKernel> {
        let st = self.structure(theta)?;
        let all: Vec<usize> = (0..self.dim()).collect();
        Ok(Self::selector_kernel(&st, &Selector::Margin(all))?.select(&theta.free_indices()))
    }

    pub fn sampler(&self, theta: &ParamVector) -> Result<Sampler> {
        let structure = self.structure(theta)?;
        let chol = match &structure {
            Structure::Gaussian(g) => Some(g.cov.cholesky_lower()?),
            Structure::Multinomial(_) => None,
        };
        Ok(Sampler { structure, chol })
    }

    /// `n` independent draws; a pure function of `(model, θ, n, seed)`.
    pub fn sample(&self, theta: &ParamVector, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let sampler = self.sampler(theta)?;
        let mut rng = rng::substream(seed, 0);
        let mut data = Dataset::new(self.dim());
        for _ in 0..n {
            data.push_row(&sampler.draw(&mut rng))?;
        }
        Ok(data)
    }

    /// Gradient of the joint log-density in the free parameters.
    pub fn full_score(&self, y: &[f64], theta: &ParamVector) -> Result<Vec<f64>> {
        self.check_obs(y)?;
        self.full_score_kernel(theta)?.eval(y)
    }

    /// Per-observation Fisher information for the free parameters.
    ///
    /// Closed form for the multinomial; Monte Carlo mean of `u u'` with
    /// batch-means standard errors for the Gaussian families.
    pub fn fisher_information(&self, theta: &ParamVector, mc_draws: usize, seed: u64) -> Result<FisherInfo> {
        self.check_domain(theta)?;
        let q = theta.free_dim();
        if q == 0 {
            return Err(Error::InvalidArgument("no free parameters".into()));
        }
        if let ModelSpec::Multinomial4 { k } = *self {
            let t = theta.values()[0];
            let c = 2.0 + 1.0 / k;
            return Ok(FisherInfo {
                info: SymMatrix::scalar(1.0 / (t / c - t * t)),
                std_err: None,
                draws: None,
            });
        }
        if mc_draws < BATCHES * 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least {} Monte Carlo draws",
                BATCHES * 2
            )));
        }
        let kernel = self.full_score_kernel(theta)?;
        let sampler = self.sampler(theta)?;
        let seed = rng::derive_seed(seed, domain::FISHER_DRAW, 0);
        let batches = stats::map_batches(mc_draws, BATCHES, |_, range| -> Result<Moments> {
            let mut m = Moments::new(q);
            let mut u = vec![0.0; q];
            for i in range {
                let y = sampler.draw(&mut rng::substream(seed, i as u64));
                kernel.eval_into(&y, &mut u)?;
                m.push(&u);
            }
            Ok(m)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut all = Moments::new(q);
        batches.iter().for_each(|b| all.merge(b));
        let per_batch: Vec<SymMatrix> = batches.iter().map(Moments::raw_second_moment).collect();
        Ok(FisherInfo {
            info: all.raw_second_moment(),
            std_err: Some(stats::batch_std_err_sym(&per_batch)),
            draws: Some(mc_draws),
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests;
