//! Sensitivity `H`, variability `J` and Godambe `G = H J⁻¹ H`.

use super::EstimatingFunction;
use crate::error::{Error, Result};
use crate::linalg::{sandwich, Matrix, SymMatrix};
use crate::models::ModelSpec;
use crate::params::ParamVector;
use crate::rng::{self, domain};
use crate::stats::{self, Moments, BATCHES};

/// Smallest Monte Carlo size accepted for information estimates.
pub const MIN_INFO_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::MonteCarlo => "monte-carlo",
        }
    }
}

/// Entrywise batch-means standard errors.
#[derive(Debug, Clone)]
pub struct InfoStdErr {
    pub h: SymMatrix,
    pub j: SymMatrix,
    pub g: SymMatrix,
    /// Of `H − J`, from per-batch differences.
    pub bias: SymMatrix,
}

#[derive(Debug, Clone)]
pub struct InfoTriple {
    pub h: SymMatrix,
    pub j: SymMatrix,
    pub g: SymMatrix,
    pub provenance: Provenance,
    pub draws: Option<usize>,
    pub std_err: Option<InfoStdErr>,
}

impl InfoTriple {
    /// Exact `(H, J)`; `G` is derived.
    pub fn analytic(h: SymMatrix, j: SymMatrix) -> Result<Self> {
        let g = sandwich(&h, &j)?;
        Ok(Self {
            h,
            j,
            g,
            provenance: Provenance::Analytic,
            draws: None,
            std_err: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `G⁻¹`, the asymptotic variance of the estimator (per observation).
    pub fn avar(&self) -> Result<SymMatrix> {
        self.g.invert()
    }

    /// Noise floor of the bias measure: `‖se(H − J)‖_F / ‖J‖_F`.
    pub fn bias_std_err(&self) -> Option<f64> {
        self.std_err
            .as_ref()
            .map(|s| s.bias.frobenius_norm() / self.j.frobenius_norm())
    }
}

/// Sample summaries of one block of Monte Carlo draws.
#[derive(Debug, Clone)]
pub(crate) struct PassStats {
    pub h: SymMatrix,
    pub j: SymMatrix,
    /// Variance of the full score.
    pub fisher: SymMatrix,
    /// `Cov(g, u)`.
    pub cross: Matrix,
    pub mean_g: Vec<f64>,
    pub mean_u: Vec<f64>,
}

pub(crate) struct Pass {
    pub global: PassStats,
    pub batches: Vec<PassStats>,
    pub draw_seed: u64,
}

struct Accum {
    moments: Moments,
    jac: Vec<f64>,
}

impl Accum {
    fn new(q: usize) -> Self {
        Self {
            moments: Moments::new(2 * q),
            jac: vec![0.0; q * q],
        }
    }

    fn merge(&mut self, other: &Accum) {
        self.moments.merge(&other.moments);
        for (a, b) in self.jac.iter_mut().zip(&other.jac) {
            *a += b;
        }
    }

    fn finish(&self, q: usize, gradient: bool) -> Result<PassStats> {
        let n = self.moments.count() as f64;
        let h_raw = Matrix::from_fn(q, q, |r, c| -self.jac[r * q + c] / n);
        // A projected score is only symmetric in expectation.
        let h = h_raw.symmetrize(if gradient { 1e-6 } else { f64::INFINITY })?;
        let cov = self.moments.covariance();
        let idx_g: Vec<usize> = (0..q).collect();
        let idx_u: Vec<usize> = (q..2 * q).collect();
        Ok(PassStats {
            h,
            j: cov.submatrix(&idx_g),
            fisher: cov.submatrix(&idx_u),
            cross: self.moments.cross_covariance(0..q, q..2 * q),
            mean_g: self.moments.mean()[..q].to_vec(),
            mean_u: self.moments.mean()[q..].to_vec(),
        })
    }
}

/// Draws `draws` observations at `θ` and accumulates `g`, the full score and
/// a central-difference Jacobian of `g`, in 20 ordered batches.
pub(crate) fn run_pass<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
    draws: usize,
    seed: u64,
) -> Result<Pass> {
    model.check_domain(theta)?;
    if draws < MIN_INFO_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_INFO_DRAWS} Monte Carlo draws, got {draws}"
        )));
    }
    let q = theta.free_dim();
    if q == 0 {
        return Err(Error::InvalidArgument("no free parameters".into()));
    }
    let base = f.kernel(model, theta)?;
    if base.coords() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: base.coords(),
        });
    }
    let full = model.full_score_kernel(theta)?;
    let free = theta.free_values();
    let names = theta.free_names();
    let mut steps = Vec::with_capacity(q);
    let mut plus = Vec::with_capacity(q);
    let mut minus = Vec::with_capacity(q);
    for j in 0..q {
        let (lo, hi) = model.bounds(names[j])?;
        let room = (free[j] - lo).min(hi - free[j]);
        let h = 1e-4 * free[j].abs().max(1.0).min(room);
        let mut up = free.clone();
        up[j] += h;
        let mut dn = free.clone();
        dn[j] -= h;
        plus.push(f.kernel(model, &theta.with_free_values(&up)?)?);
        minus.push(f.kernel(model, &theta.with_free_values(&dn)?)?);
        steps.push(h);
    }
    let sampler = model.sampler(theta)?;
    let draw_seed = rng::derive_seed(seed, domain::INFO_DRAW, 0);

    let batches = stats::map_batches(draws, BATCHES, |_, range| -> Result<Accum> {
        let mut acc = Accum::new(q);
        let mut row = vec![0.0; 2 * q];
        let mut up = vec![0.0; q];
        let mut dn = vec![0.0; q];
        for i in range {
            let y = sampler.draw(&mut rng::substream(draw_seed, i as u64));
            base.eval_into(&y, &mut row[..q])?;
            full.eval_into(&y, &mut row[q..])?;
            acc.moments.push(&row);
            for c in 0..q {
                plus[c].eval_into(&y, &mut up)?;
                minus[c].eval_into(&y, &mut dn)?;
                for r in 0..q {
                    acc.jac[r * q + c] += (up[r] - dn[r]) / (2.0 * steps[c]);
                }
            }
        }
        Ok(acc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let gradient = f.is_gradient();
    let mut all = Accum::new(q);
    batches.iter().for_each(|b| all.merge(b));
    Ok(Pass {
        global: all.finish(q, gradient)?,
        batches: batches
            .iter()
            .map(|b| b.finish(q, gradient))
            .collect::<Result<_>>()?,
        draw_seed,
    })
}

/// Monte Carlo `(H, J, G)` with batch-means standard errors.
///
/// `J` is the sample variance of `g`; `H` is minus the averaged
/// central-difference Jacobian of `g`, steps `1e-4 · max(|θ_j|, 1)`.
pub fn info_monte_carlo<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
    draws: usize,
    seed: u64,
) -> Result<InfoTriple> {
    let pass = run_pass(f, model, theta, draws, seed)?;
    triple_from_pass(&pass, draws)
}

pub(crate) fn triple_from_pass(pass: &Pass, draws: usize) -> Result<InfoTriple> {
    let mut hs = Vec::with_capacity(BATCHES);
    let mut js = Vec::with_capacity(BATCHES);
    let mut gs = Vec::with_capacity(BATCHES);
    let mut ds = Vec::with_capacity(BATCHES);
    for b in &pass.batches {
        gs.push(sandwich(&b.h, &b.j)?);
        ds.push(b.h.sub(&b.j)?);
        hs.push(b.h.clone());
        js.push(b.j.clone());
    }
    let g = sandwich(&pass.global.h, &pass.global.j)?;
    Ok(InfoTriple {
        h: pass.global.h.clone(),
        j: pass.global.j.clone(),
        g,
        provenance: Provenance::MonteCarlo,
        draws: Some(draws),
        std_err: Some(InfoStdErr {
            h: stats::batch_std_err_sym(&hs),
            j: stats::batch_std_err_sym(&js),
            g: stats::batch_std_err_sym(&gs),
            bias: stats::batch_std_err_sym(&ds),
        }),
    })
}

/// Exact `(H, J, G)` from closed-form score moments.
///
/// `J = Var(g)` and `H = Cov(g, u)`, which equals `E[-∇g]` for any unbiased
/// estimating function.
pub fn info_analytic<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
) -> Result<InfoTriple> {
    model.check_domain(theta)?;
    let st = model.structure(theta)?;
    let g = f.kernel(model, theta)?;
    let u = model.full_score_kernel(theta)?;
    let j = ModelSpec::kernel_covariance(&st, &g, &g)?.symmetrize(1e-8)?;
    let h = ModelSpec::kernel_covariance(&st, &g, &u)?.symmetrize(1e-8)?;
    InfoTriple::analytic(h, j)
}

/// Exact `E[g(Y; θ)]` under the model at `θ`; zero for unbiased functions.
pub fn score_mean_analytic<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
) -> Result<Vec<f64>> {
    let st = model.structure(theta)?;
    ModelSpec::kernel_mean(&st, &f.kernel(model, theta)?)
}
