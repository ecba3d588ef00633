//! Maximum composite likelihood estimation.

mod closed_form;
mod newton;

pub use closed_form::{closed_form, ClosedForm};
pub use newton::{mcle_newton, mcle_newton_with, NewtonOptions};

use std::fmt;

use crate::composite::{CompositeSpec, EstimatingFunction};
use crate::error::{Error, Result};
use crate::models::{DataSummary, Dataset, ModelSpec};
use crate::params::{ParamVector, Role};

/// Stopping tolerance on `‖Σ u_c‖∞`, per observation.
pub const SCORE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    ClosedForm,
    Newton,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::ClosedForm => "closed-form",
            Solver::Newton => "newton",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta_hat: ParamVector,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Σ_i u_c(θ̂; y_i)‖∞` on the data.
    pub score_norm: f64,
    pub solver: Solver,
}

impl EstimateResult {
    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                score_norm: self.score_norm,
            })
        }
    }
}

/// Composite log-likelihood and score of a dataset, as functions of the free
/// parameters.
pub struct Objective<'a> {
    spec: &'a CompositeSpec,
    model: &'a ModelSpec,
    summary: DataSummary,
    template: ParamVector,
}

impl<'a> Objective<'a> {
    pub fn new(spec: &'a CompositeSpec, model: &'a ModelSpec, data: &Dataset, template: &ParamVector) -> Result<Self> {
        spec.validate(model)?;
        if template.names() != model.param_names() {
            return Err(Error::InvalidArgument(format!(
                "parameters {:?} do not belong to {}",
                template.names(),
                model.name()
            )));
        }
        if template.free_dim() == 0 {
            return Err(Error::InvalidArgument("no free parameters".into()));
        }
        Ok(Self {
            spec,
            model,
            summary: DataSummary::new(model, data)?,
            template: template.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.summary.n()
    }

    pub fn template(&self) -> &ParamVector {
        &self.template
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn params(&self, free: &[f64]) -> Result<ParamVector> {
        let t = self.template.with_free_values(free)?;
        self.model.check_domain(&t)?;
        Ok(t)
    }

    pub fn in_domain(&self, free: &[f64]) -> bool {
        self.params(free).is_ok()
    }

    /// `Σ_i cℓ(θ; y_i)`.
    pub fn log_lik(&self, free: &[f64]) -> Result<f64> {
        let t = self.params(free)?;
        let st = self.model.structure(&t)?;
        self.spec.components().iter().try_fold(0.0, |acc, c| {
            Ok(acc + c.weight * ModelSpec::total_logpdf_with(&st, &c.selector, &self.summary)?)
        })
    }

    /// `Σ_i u_c(θ; y_i)` in the free parameters.
    pub fn score(&self, free: &[f64]) -> Result<Vec<f64>> {
        let t = self.params(free)?;
        self.spec.kernel(self.model, &t)?.eval_total(&self.summary)
    }

    pub(crate) fn summary(&self) -> &DataSummary {
        &self.summary
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Method-of-moments starting point; known parameters keep their template
/// values.
pub fn default_start(model: &ModelSpec, data: &Dataset, template: &ParamVector) -> Result<ParamVector> {
    let n = data.n() as f64;
    if data.n() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    let mut t = template.clone();
    let free = |name: &str| -> bool { template.role(name).map(|r| r != Role::Known).unwrap_or(false) };
    let clamp = |name: &str, v: f64| -> Result<f64> {
        let (lo, hi) = model.bounds(name)?;
        Ok(if lo.is_finite() && hi.is_finite() {
            let pad = 0.01 * (hi - lo);
            v.clamp(lo + pad, hi - pad)
        } else if lo.is_finite() {
            v.max(lo + 1e-3)
        } else {
            v
        })
    };
    match *model {
        ModelSpec::Emvn { p } => {
            let pf = p as f64;
            let (mut t1, mut t2) = (0.0, 0.0);
            for y in data.rows() {
                let s: f64 = y.iter().sum();
                t1 += y.iter().map(|v| v * v).sum::<f64>();
                t2 += s * s;
            }
            if free("rho") {
                let r = if t1 > 0.0 { (t2 - t1) / ((pf - 1.0) * t1) } else { 0.0 };
                t.set("rho", clamp("rho", r)?)?;
            }
            if free("sigma2") {
                t.set("sigma2", clamp("sigma2", t1 / (n * pf))?)?;
            }
        }
        ModelSpec::TriNormal => {
            let mu = if free("mu") {
                let m = (0..3).map(|j| data.column_mean(j)).sum::<f64>() / 3.0;
                t.set("mu", m)?;
                m
            } else {
                template.get("mu")?
            };
            if free("rho") {
                let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
                for y in data.rows() {
                    let (a, b) = (y[0] - mu, y[1] - mu);
                    sxy += a * b;
                    sxx += a * a;
                    syy += b * b;
                }
                let r = if sxx > 0.0 && syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
                t.set("rho", clamp("rho", r)?)?;
            }
            if free("sigma2") {
                let v = data.rows().map(|y| (y[2] - mu) * (y[2] - mu)).sum::<f64>() / n;
                t.set("sigma2", clamp("sigma2", v)?)?;
            }
        }
        ModelSpec::Multinomial4 { k } => {
            if free("theta") {
                let total: f64 = (0..3).map(|j| data.column_mean(j)).sum();
                t.set("theta", clamp("theta", total / (2.0 + 1.0 / k))?)?;
            }
        }
    }
    Ok(t)
}

/// Closed form when one is registered for `(spec, model, roles)`, otherwise
/// multistart Newton from the method-of-moments point.
pub fn fit(spec: &CompositeSpec, model: &ModelSpec, data: &Dataset, template: &ParamVector) -> Result<EstimateResult> {
    if let Some(cf) = ClosedForm::lookup(spec, model, template) {
        return closed_form(cf, model, data, template);
    }
    let start = default_start(model, data, template)?;
    mcle_newton_with(
        spec,
        model,
        data,
        &start,
        &NewtonOptions {
            multistart: true,
            ..NewtonOptions::default()
        },
    )
}

#[cfg(test)]
mod tests;
