//! Composite likelihoods, their scores and information matrices.

mod diagnostics;
mod info;
mod spec;

pub use diagnostics::{
    component_cross_covariances, partitioned_variance, proposition1_diagnostics, sandwich_dominance,
    theorem1_check, ComponentCrossCov, DominanceOptions, DominanceReport, PartitionedVariance,
    Proposition1Report, Theorem1Report,
};
pub use info::{info_analytic, info_monte_carlo, score_mean_analytic, InfoStdErr, InfoTriple, Provenance, MIN_INFO_DRAWS};
pub use spec::{Component, CompositeSpec, SpecKind};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::{ModelSpec, ScoreKernel};
use crate::params::ParamVector;

/// An unbiased estimating function `g(y; θ)` in the free parameters.
pub trait EstimatingFunction: Sync {
    fn label(&self) -> String;

    /// `g(·; θ)` as a kernel with one output per free parameter.
    fn kernel(&self, model: &ModelSpec, theta: &ParamVector) -> Result<ScoreKernel>;

    /// Gradients of an objective have a symmetric sensitivity matrix.
    fn is_gradient(&self) -> bool {
        true
    }
}

impl EstimatingFunction for CompositeSpec {
    fn label(&self) -> String {
        self.name().to_string()
    }

    fn kernel(&self, model: &ModelSpec, theta: &ParamVector) -> Result<ScoreKernel> {
        let parts = self.component_kernels(model, theta)?;
        let mut total = parts[0].zeros_like(theta.free_dim());
        for (k, c) in parts.iter().zip(self.components()) {
            total.add_scaled(k, c.weight)?;
        }
        Ok(total)
    }
}

/// `H J⁻¹ u_c(y; θ)` with `H J⁻¹` frozen at the point it was built.
#[derive(Debug, Clone)]
pub struct ProjectedScore {
    inner: CompositeSpec,
    transform: Matrix,
}

impl ProjectedScore {
    pub fn new(inner: CompositeSpec, info: &InfoTriple) -> Result<Self> {
        let transform = info.h.to_matrix().mul(&info.j.invert()?.to_matrix())?;
        Ok(Self { inner, transform })
    }

    pub fn transform(&self) -> &Matrix {
        &self.transform
    }
}

impl EstimatingFunction for ProjectedScore {
    fn label(&self) -> String {
        format!("projected {}", self.inner.name())
    }

    fn kernel(&self, model: &ModelSpec, theta: &ParamVector) -> Result<ScoreKernel> {
        self.inner.kernel(model, theta)?.transform(&self.transform)
    }

    fn is_gradient(&self) -> bool {
        false
    }
}

/// `Σ_k w_k log L_k(θ; y)`.
pub fn composite_logdensity(spec: &CompositeSpec, model: &ModelSpec, y: &[f64], theta: &ParamVector) -> Result<f64> {
    spec.log_density(model, y, theta)
}

/// `∇ cℓ(θ; y)` in the free parameters, analytically.
pub fn composite_score(spec: &CompositeSpec, model: &ModelSpec, y: &[f64], theta: &ParamVector) -> Result<Vec<f64>> {
    if y.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: y.len(),
        });
    }
    spec.kernel(model, theta)?.eval(y)
}

/// Central-difference gradient of `cℓ`, step `1e-5 · max(|θ_j|, 1)`.
pub fn composite_score_fd(spec: &CompositeSpec, model: &ModelSpec, y: &[f64], theta: &ParamVector) -> Result<Vec<f64>> {
    let free = theta.free_values();
    (0..free.len())
        .map(|j| {
            let h = 1e-5 * free[j].abs().max(1.0);
            let mut up = free.clone();
            up[j] += h;
            let mut dn = free.clone();
            dn[j] -= h;
            let fu = spec.log_density(model, y, &theta.with_free_values(&up)?)?;
            let fd = spec.log_density(model, y, &theta.with_free_values(&dn)?)?;
            Ok((fu - fd) / (2.0 * h))
        })
        .collect()
}

/// `H J⁻¹ u_c` for a single score vector.
pub fn project_score(info: &InfoTriple, u_c: &[f64]) -> Result<Vec<f64>> {
    info.h.mul_vec(&info.j.invert()?.mul_vec(u_c)?)
}

/// `‖H − J‖_F / ‖J‖_F`.
pub fn info_bias_measure(info: &InfoTriple) -> Result<f64> {
    Ok(info.h.sub(&info.j)?.frobenius_norm() / info.j.frobenius_norm())
}

#[cfg(test)]
mod tests;
