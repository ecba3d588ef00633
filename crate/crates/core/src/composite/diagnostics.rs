//! Information-bias diagnostics built on the Monte Carlo pass.

use super::info::{run_pass, triple_from_pass, InfoTriple, PassStats};
use super::{CompositeSpec, EstimatingFunction};
use crate::error::{Error, Result};
use crate::linalg::{loewner_geq, sandwich, Matrix, SymMatrix};
use crate::models::ModelSpec;
use crate::params::{ParamVector, Partition};
use crate::rng::{self, domain};
use crate::stats::{self, Moments, BATCHES};

fn batch_std_err_mat(values: &[Matrix]) -> Matrix {
    Matrix::from_fn(values[0].rows(), values[0].cols(), |r, c| {
        let v: Vec<f64> = values.iter().map(|m| m[(r, c)]).collect();
        stats::batch_std_err(&v)
    })
}

fn sub_mat(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)] - b[(r, c)])
}

/// `H J⁻¹`.
fn projection_matrix(h: &SymMatrix, j: &SymMatrix) -> Result<Matrix> {
    h.to_matrix().mul(&j.invert()?.to_matrix())
}

/// Moments of `r = u − M g` from the joint moments of `(g, u)`.
fn residual_moments(s: &PassStats, m: &Matrix) -> Result<(Vec<f64>, SymMatrix)> {
    let mg = m.mul_vec(&s.mean_g)?;
    let mean: Vec<f64> = s.mean_u.iter().zip(&mg).map(|(a, b)| a - b).collect();
    // Cov(u) − C'M' − M C + M J M', with C = Cov(g, u).
    let mc = m.mul(&s.cross)?;
    let mjm = s.j.congruence(m)?.to_matrix();
    let q = mean.len();
    let cov = Matrix::from_fn(q, q, |r, c| {
        s.fisher.get(r, c) - mc[(c, r)] - mc[(r, c)] + mjm[(r, c)]
    })
    .symmetrize(1e-6)?;
    Ok((mean, cov))
}

/// Monte Carlo check of `u = H J⁻¹ u_c + r` with `Cov(r) = I − G`.
#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub info: InfoTriple,
    /// Sample variance of the full score.
    pub fisher: SymMatrix,
    /// Sample `Cov(u_c, u)`, which estimates `H`.
    pub cross_cov: Matrix,
    /// Batch std errors of `Ĥ − Cov(u_c, u)`.
    pub cross_cov_gap_std_err: Matrix,
    /// `b̂`, the mean residual.
    pub residual_mean: Vec<f64>,
    pub residual_mean_std_err: Vec<f64>,
    pub residual_cov: SymMatrix,
    /// Batch std errors of `Cov(r) − (Î − Ĝ)`.
    pub residual_gap_std_err: SymMatrix,
    pub residual_cov_max_eig: f64,
    pub residual_cov_max_eig_std_err: f64,
    /// `max_i ‖r_i‖∞` over all draws.
    pub max_abs_residual: f64,
    /// `max_i max_j |r_ij| / se(r_ij)`, se from the spread of per-batch `H J⁻¹`.
    pub max_residual_z: f64,
    pub fully_efficient: bool,
}

pub fn theorem1_check<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
    draws: usize,
    seed: u64,
) -> Result<Theorem1Report> {
    let pass = run_pass(f, model, theta, draws, seed)?;
    let info = triple_from_pass(&pass, draws)?;
    let q = info.dim();
    let m = projection_matrix(&info.h, &info.j)?;
    let (residual_mean, residual_cov) = residual_moments(&pass.global, &m)?;

    let mut batch_m = Vec::with_capacity(BATCHES);
    let mut means = vec![Vec::with_capacity(BATCHES); q];
    let mut eigs = Vec::with_capacity(BATCHES);
    let mut gaps = Vec::with_capacity(BATCHES);
    let mut cross_gaps = Vec::with_capacity(BATCHES);
    for b in &pass.batches {
        let (bm, _) = residual_moments(b, &m)?;
        for (acc, v) in means.iter_mut().zip(bm) {
            acc.push(v);
        }
        let mb = projection_matrix(&b.h, &b.j)?;
        let (_, cov_b) = residual_moments(b, &mb)?;
        eigs.push(cov_b.max_eigenvalue());
        gaps.push(cov_b.sub(&b.fisher.sub(&sandwich(&b.h, &b.j)?)?)?);
        cross_gaps.push(sub_mat(&b.h.to_matrix(), &b.cross));
        batch_m.push(mb);
    }
    let residual_cov_max_eig = residual_cov.max_eigenvalue();
    let residual_cov_max_eig_std_err = stats::batch_std_err(&eigs);

    // Second sweep over the same draws for pointwise residuals.
    let kernel = f.kernel(model, theta)?;
    let full = model.full_score_kernel(theta)?;
    let sampler = model.sampler(theta)?;
    let draw_seed = pass.draw_seed;
    let sweeps = stats::map_batches(draws, BATCHES, |_, range| -> Result<(f64, f64)> {
        let mut g = vec![0.0; q];
        let mut u = vec![0.0; q];
        let mut per_batch = vec![0.0; BATCHES];
        let (mut worst, mut worst_z) = (0.0_f64, 0.0_f64);
        for i in range {
            let y = sampler.draw(&mut rng::substream(draw_seed, i as u64));
            kernel.eval_into(&y, &mut g)?;
            full.eval_into(&y, &mut u)?;
            let mg = m.mul_vec(&g)?;
            for r in 0..q {
                let res = u[r] - mg[r];
                for (b, mb) in batch_m.iter().enumerate() {
                    let row: f64 = (0..q).map(|c| mb[(r, c)] * g[c]).sum();
                    per_batch[b] = u[r] - row;
                }
                let se = stats::batch_std_err(&per_batch);
                worst = worst.max(res.abs());
                let z = if se > 0.0 {
                    res.abs() / se
                } else if res == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst_z = worst_z.max(z);
            }
        }
        Ok((worst, worst_z))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_abs_residual = sweeps.iter().fold(0.0_f64, |a, s| a.max(s.0));
    let max_residual_z = sweeps.iter().fold(0.0_f64, |a, s| a.max(s.1));

    Ok(Theorem1Report {
        fisher: pass.global.fisher.clone(),
        cross_cov: pass.global.cross.clone(),
        cross_cov_gap_std_err: batch_std_err_mat(&cross_gaps),
        residual_mean,
        residual_mean_std_err: means.iter().map(|v| stats::batch_std_err(v)).collect(),
        residual_gap_std_err: stats::batch_std_err_sym(&gaps),
        fully_efficient: residual_cov_max_eig < 3.0 * residual_cov_max_eig_std_err,
        residual_cov,
        residual_cov_max_eig,
        residual_cov_max_eig_std_err,
        max_abs_residual,
        max_residual_z,
        info,
    })
}

/// Asymptotic variances of the interest block with the nuisance block
/// estimated (`profile`) or known (`known`).
#[derive(Debug, Clone)]
pub struct PartitionedVariance {
    pub avar_profile: SymMatrix,
    pub avar_known: SymMatrix,
}

pub fn partitioned_variance(info: &InfoTriple, partition: &Partition) -> Result<PartitionedVariance> {
    let psi = &partition.interest;
    let lam = &partition.nuisance;
    if psi.is_empty() || lam.is_empty() {
        return Err(Error::InvalidArgument(
            "interest and nuisance blocks must both be nonempty".into(),
        ));
    }
    let g = &info.g;
    let g_pl = g.block(psi, lam);
    let g_ll_inv = g.submatrix(lam).invert()?;
    let correction = g_ll_inv.congruence(&g_pl)?;
    let avar_profile = g.submatrix(psi).sub(&correction)?.invert()?;
    let h_pp_inv = info.h.submatrix(psi).invert()?;
    let avar_known = info.j.submatrix(psi).congruence(&h_pp_inv.to_matrix())?;
    Ok(PartitionedVariance {
        avar_profile,
        avar_known,
    })
}

/// Covariances behind the "independent but less efficient" pattern.
#[derive(Debug, Clone)]
pub struct Proposition1Report {
    pub info: InfoTriple,
    /// `n · acov(ψ̂, λ̂)`, both estimated.
    pub acov_profile: f64,
    pub acov_profile_std_err: f64,
    /// `n · acov(ψ̃, λ̂)`, `ψ̃` computed with `λ` known.
    pub acov_known: f64,
    pub acov_known_std_err: f64,
    pub avar_profile: f64,
    pub avar_profile_std_err: f64,
    pub avar_known: f64,
    pub avar_known_std_err: f64,
    /// `avar_known / avar_profile`.
    pub ratio: f64,
    pub ratio_std_err: f64,
    /// `(ψ̂, λ̂)` uncorrelated yet `(ψ̃, λ̂)` correlated, within 3 std errors.
    pub independence_pattern: bool,
    /// Knowing `λ` makes `ψ` worse.
    pub paradox: bool,
}

struct Prop1Values {
    acov_profile: f64,
    acov_known: f64,
    avar_profile: f64,
    avar_known: f64,
    ratio: f64,
}

fn prop1_values(h: &SymMatrix, j: &SymMatrix, part: &Partition) -> Result<Prop1Values> {
    let (psi, lam) = (part.interest[0], part.nuisance[0]);
    let g = sandwich(h, j)?;
    let ginv = g.invert()?;
    let jhinv = j.to_matrix().mul(&h.invert()?.to_matrix())?;
    let pv = partitioned_variance(
        &InfoTriple::analytic(h.clone(), j.clone())?,
        part,
    )?;
    Ok(Prop1Values {
        acov_profile: ginv.get(psi, lam),
        acov_known: jhinv[(psi, lam)] / h.get(psi, psi),
        avar_profile: pv.avar_profile.get(0, 0),
        avar_known: pv.avar_known.get(0, 0),
        ratio: pv.avar_known.get(0, 0) / pv.avar_profile.get(0, 0),
    })
}

pub fn proposition1_diagnostics<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
    draws: usize,
    seed: u64,
) -> Result<Proposition1Report> {
    let part = theta.partition();
    if part.interest.len() != 1 || part.nuisance.len() != 1 {
        return Err(Error::InvalidArgument(
            "needs exactly one interest and one nuisance parameter".into(),
        ));
    }
    let pass = run_pass(f, model, theta, draws, seed)?;
    let info = triple_from_pass(&pass, draws)?;
    let est = prop1_values(&info.h, &info.j, &part)?;
    let per_batch = pass
        .batches
        .iter()
        .map(|b| prop1_values(&b.h, &b.j, &part))
        .collect::<Result<Vec<_>>>()?;
    let se = |get: fn(&Prop1Values) -> f64| {
        stats::batch_std_err(&per_batch.iter().map(get).collect::<Vec<_>>())
    };
    let acov_profile_std_err = se(|v| v.acov_profile);
    let acov_known_std_err = se(|v| v.acov_known);
    Ok(Proposition1Report {
        independence_pattern: est.acov_profile.abs() < 3.0 * acov_profile_std_err
            && est.acov_known.abs() > 3.0 * acov_known_std_err,
        paradox: est.avar_known > est.avar_profile,
        acov_profile: est.acov_profile,
        acov_profile_std_err,
        acov_known: est.acov_known,
        acov_known_std_err,
        avar_profile: est.avar_profile,
        avar_profile_std_err: se(|v| v.avar_profile),
        avar_known: est.avar_known,
        avar_known_std_err: se(|v| v.avar_known),
        ratio: est.ratio,
        ratio_std_err: se(|v| v.ratio),
        info,
    })
}

/// Knobs for [`sandwich_dominance`].
#[derive(Debug, Clone, Copy)]
pub struct DominanceOptions {
    /// Tolerance multiplier on the Frobenius norm of `se(Î − Ĝ)`.
    pub sigmas: f64,
    /// Added to the diagonal of `Ĥ` before forming `Ĝ`; a negative control.
    pub h_shift: f64,
}

impl Default for DominanceOptions {
    fn default() -> Self {
        Self {
            sigmas: 3.0,
            h_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub fisher: SymMatrix,
    pub godambe: SymMatrix,
    pub diff_std_err: SymMatrix,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Monte Carlo check that `I − G` is positive semidefinite, both estimated
/// on the same draws.
pub fn sandwich_dominance<F: EstimatingFunction + ?Sized>(
    f: &F,
    model: &ModelSpec,
    theta: &ParamVector,
    draws: usize,
    seed: u64,
    opts: DominanceOptions,
) -> Result<DominanceReport> {
    let pass = run_pass(f, model, theta, draws, seed)?;
    let godambe_of = |s: &PassStats| -> Result<SymMatrix> {
        let shift = SymMatrix::identity(s.h.dim()).scale(opts.h_shift);
        sandwich(&s.h.add(&shift)?, &s.j)
    };
    let diffs = pass
        .batches
        .iter()
        .map(|b| b.fisher.sub(&godambe_of(b)?))
        .collect::<Result<Vec<_>>>()?;
    let diff_std_err = stats::batch_std_err_sym(&diffs);
    let godambe = godambe_of(&pass.global)?;
    let fisher = pass.global.fisher.clone();
    let tolerance = opts.sigmas * diff_std_err.frobenius_norm();
    Ok(DominanceReport {
        min_eigenvalue: fisher.sub(&godambe)?.min_eigenvalue(),
        holds: loewner_geq(&fisher, &godambe, tolerance)?,
        fisher,
        godambe,
        diff_std_err,
        tolerance,
    })
}

/// Sample cross-covariance between the scores of two components.
#[derive(Debug, Clone)]
pub struct ComponentCrossCov {
    pub first: usize,
    pub second: usize,
    pub cov: Matrix,
    pub std_err: Matrix,
}

impl ComponentCrossCov {
    /// Largest `|cov| / se` over the block, skipping entries that are
    /// identically zero.
    pub fn max_z(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.cov.rows() {
            for c in 0..self.cov.cols() {
                let se = self.std_err[(r, c)];
                if se > 0.0 {
                    worst = worst.max(self.cov[(r, c)].abs() / se);
                }
            }
        }
        worst
    }
}

/// Cross-covariances of every pair of component scores.
pub fn component_cross_covariances(
    spec: &CompositeSpec,
    model: &ModelSpec,
    theta: &ParamVector,
    draws: usize,
    seed: u64,
) -> Result<Vec<ComponentCrossCov>> {
    model.check_domain(theta)?;
    if draws < super::MIN_INFO_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {} Monte Carlo draws",
            super::MIN_INFO_DRAWS
        )));
    }
    let kernels = spec.component_kernels(model, theta)?;
    let q = theta.free_dim();
    let k = kernels.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let width = pairs.len() * q * q;
    let sampler = model.sampler(theta)?;
    let draw_seed = rng::derive_seed(seed, domain::CROSS_COV, 0);
    // Per-draw products g_a g_b' give a standard error from the iid draws.
    let batches = stats::map_batches(draws, BATCHES, |_, range| -> Result<(Moments, Vec<f64>, Vec<f64>)> {
        let mut m = Moments::new(k * q);
        let mut sum = vec![0.0; width];
        let mut sum_sq = vec![0.0; width];
        let mut row = vec![0.0; k * q];
        for i in range {
            let y = sampler.draw(&mut rng::substream(draw_seed, i as u64));
            for (a, kern) in kernels.iter().enumerate() {
                kern.eval_into(&y, &mut row[a * q..(a + 1) * q])?;
            }
            m.push(&row);
            let mut idx = 0;
            for &(a, b) in &pairs {
                for r in 0..q {
                    for c in 0..q {
                        let prod = row[a * q + r] * row[b * q + c];
                        sum[idx] += prod;
                        sum_sq[idx] += prod * prod;
                        idx += 1;
                    }
                }
            }
        }
        Ok((m, sum, sum_sq))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut all = Moments::new(k * q);
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    for (m, s, s2) in &batches {
        all.merge(m);
        sum.iter_mut().zip(s).for_each(|(x, y)| *x += y);
        sum_sq.iter_mut().zip(s2).for_each(|(x, y)| *x += y);
    }
    let n = draws as f64;
    let mut out = Vec::with_capacity(pairs.len());
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let std_err = Matrix::from_fn(q, q, |r, c| {
            let idx = p * q * q + r * q + c;
            let mean = sum[idx] / n;
            ((sum_sq[idx] / n - mean * mean).max(0.0) / (n - 1.0)).sqrt()
        });
        out.push(ComponentCrossCov {
            first: a,
            second: b,
            cov: all.cross_covariance(a * q..(a + 1) * q, b * q..(b + 1) * q),
            std_err,
        });
    }
    Ok(out)
}
