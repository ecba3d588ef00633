//! Replicate-level simulation of estimator sampling distributions.

use std::io::Write;

use rayon::prelude::*;

use crate::composite::{info_analytic, CompositeSpec};
use crate::error::{Error, Result};
use crate::estimators::fit;
use crate::linalg::SymMatrix;
use crate::models::ModelSpec;
use crate::params::{ParamVector, Role};
use crate::rng::{derive_seed, domain};
use crate::stats::{self, Moments, BATCHES};

pub const MIN_N: usize = 10;
pub const MIN_REPLICATES: usize = 100;
/// Largest tolerated share of failed replicates per spec.
pub const FAILURE_BUDGET: f64 = 0.01;

/// A composite likelihood together with the parameters it treats as known.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub spec: CompositeSpec,
    pub known: Vec<&'static str>,
}

impl SimSpec {
    pub fn new(spec: CompositeSpec) -> Self {
        Self { spec, known: Vec::new() }
    }

    pub fn with_known(mut self, names: &[&'static str]) -> Self {
        self.known.extend_from_slice(names);
        self
    }

    /// `pairwise` or `pairwise|known=sigma2`.
    pub fn label(&self) -> String {
        if self.known.is_empty() {
            self.spec.name().to_string()
        } else {
            format!("{}|known={}", self.spec.name(), self.known.join("+"))
        }
    }

    /// `θ_true` with the known parameters fixed at their true values.
    pub fn template(&self, theta_true: &ParamVector) -> Result<ParamVector> {
        let mut t = theta_true.clone();
        for name in theta_true.names() {
            let role = if self.known.contains(name) {
                Role::Known
            } else {
                Role::Interest
            };
            t = t.with_role(name, role)?;
        }
        for k in &self.known {
            theta_true.index_of(k)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub theta_true: ParamVector,
    pub specs: Vec<SimSpec>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_N {
            return Err(Error::InvalidArgument(format!("n = {} is below {MIN_N}", self.n)));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidArgument(format!(
                "replicates = {} is below {MIN_REPLICATES}",
                self.replicates
            )));
        }
        if self.specs.is_empty() {
            return Err(Error::InvalidArgument("no composite likelihood to fit".into()));
        }
        self.model.check_domain(&self.theta_true)?;
        for s in &self.specs {
            s.spec.validate(&self.model)?;
            if s.template(&self.theta_true)?.free_dim() == 0 {
                return Err(Error::InvalidArgument(format!("{} has no free parameters", s.label())));
            }
        }
        Ok(())
    }
}

/// Sampling distribution of one estimator over all replicates.
#[derive(Debug, Clone)]
pub struct SpecResult {
    pub label: String,
    pub params: Vec<&'static str>,
    /// `R × q`; NaN where the fit returned an error.
    pub estimates: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    pub failures: usize,
    pub mean: Vec<f64>,
    /// `n · Cov(θ̂)` over converged replicates.
    pub n_cov: SymMatrix,
    pub mean_std_err: Vec<f64>,
    pub n_cov_std_err: SymMatrix,
}

impl SpecResult {
    /// Position of parameter `name` in `params`.
    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.params
            .iter()
            .position(|p| *p == name)
            .ok_or_else(|| Error::InvalidArgument(format!("{name} is not estimated by {}", self.label)))
    }

    /// `n · Var` of one parameter and its standard error.
    pub fn n_var(&self, name: &str) -> Result<(f64, f64)> {
        let i = self.param_index(name)?;
        Ok((self.n_cov.get(i, i), self.n_cov_std_err.get(i, i)))
    }

    /// `n · Cov` of two parameters and its standard error.
    pub fn n_cov_of(&self, a: &str, b: &str) -> Result<(f64, f64)> {
        let (i, j) = (self.param_index(a)?, self.param_index(b)?);
        Ok((self.n_cov.get(i, j), self.n_cov_std_err.get(i, j)))
    }

    /// Share of converged replicates whose interval `θ̂ ± z √(avar_jj / n)`
    /// covers `truth`, per parameter.
    pub fn coverage(&self, truth: &[f64], avar: &SymMatrix, n: usize, z: f64) -> Result<Vec<f64>> {
        let q = self.params.len();
        if truth.len() != q || avar.dim() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: truth.len().min(avar.dim()),
            });
        }
        let ok: Vec<&Vec<f64>> = self
            .estimates
            .iter()
            .zip(&self.converged)
            .filter_map(|(e, &c)| c.then_some(e))
            .collect();
        Ok((0..q)
            .map(|j| {
                let half = z * (avar.get(j, j) / n as f64).sqrt();
                ok.iter().filter(|e| (e[j] - truth[j]).abs() <= half).count() as f64 / ok.len() as f64
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub specs: Vec<SpecResult>,
}

impl SimResult {
    pub fn spec(&self, label: &str) -> Result<&SpecResult> {
        self.specs
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("no spec labelled {label}")))
    }

    /// `spec,replicate,param,estimate,converged`.
    pub fn write_estimates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["spec", "replicate", "param", "estimate", "converged"])
            .map_err(csv_err)?;
        for s in &self.specs {
            for (r, (est, ok)) in s.estimates.iter().zip(&s.converged).enumerate() {
                for (p, v) in s.params.iter().zip(est) {
                    w.write_record([s.label.clone(), r.to_string(), p.to_string(), v.to_string(), ok.to_string()])
                        .map_err(csv_err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// `spec,param,mean,n_var,std_err,failures`; `std_err` is that of `n_var`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["spec", "param", "mean", "n_var", "std_err", "failures"])
            .map_err(csv_err)?;
        for s in &self.specs {
            for (j, p) in s.params.iter().enumerate() {
                w.write_record([
                    s.label.clone(),
                    p.to_string(),
                    s.mean[j].to_string(),
                    s.n_cov.get(j, j).to_string(),
                    s.n_cov_std_err.get(j, j).to_string(),
                    s.failures.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV: {e}"))
}

struct Fit {
    values: Vec<f64>,
    converged: bool,
}

/// Simulates `R` datasets and fits every spec to each.
///
/// Replicate `r` draws its data from `derive_seed(seed, REPLICATE, r)`, so
/// the result does not depend on how replicates are scheduled.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let templates: Vec<ParamVector> = config
        .specs
        .iter()
        .map(|s| s.template(&config.theta_true))
        .collect::<Result<_>>()?;
    let per_rep: Vec<Vec<Fit>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<Fit>> {
            let seed = derive_seed(config.seed, domain::REPLICATE, r as u64);
            let data = config.model.sample(&config.theta_true, config.n, seed)?;
            Ok(config
                .specs
                .iter()
                .zip(&templates)
                .map(|(s, t)| match fit(&s.spec, &config.model, &data, t) {
                    Ok(e) => Fit {
                        values: e.theta_hat.free_values(),
                        converged: e.converged,
                    },
                    Err(_) => Fit {
                        values: vec![f64::NAN; t.free_dim()],
                        converged: false,
                    },
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut specs = Vec::with_capacity(config.specs.len());
    for (i, (s, t)) in config.specs.iter().zip(&templates).enumerate() {
        let estimates: Vec<Vec<f64>> = per_rep.iter().map(|f| f[i].values.clone()).collect();
        let converged: Vec<bool> = per_rep.iter().map(|f| f[i].converged).collect();
        specs.push(summarise(s.label(), t.free_names(), estimates, converged, config)?);
    }
    Ok(SimResult {
        n: config.n,
        replicates: config.replicates,
        seed: config.seed,
        specs,
    })
}

fn summarise(
    label: String,
    params: Vec<&'static str>,
    estimates: Vec<Vec<f64>>,
    converged: Vec<bool>,
    config: &SimConfig,
) -> Result<SpecResult> {
    let failures = converged.iter().filter(|c| !**c).count();
    let budget = (FAILURE_BUDGET * config.replicates as f64).floor() as usize;
    if failures > budget {
        return Err(Error::TooManyFailures {
            failures,
            replicates: config.replicates,
            budget,
        });
    }
    let ok: Vec<&Vec<f64>> = estimates
        .iter()
        .zip(&converged)
        .filter_map(|(e, &c)| c.then_some(e))
        .collect();
    let q = params.len();
    let nf = config.n as f64;
    let moments_of = |rows: &[&Vec<f64>]| {
        let mut m = Moments::new(q);
        rows.iter().for_each(|e| m.push(e));
        m
    };
    let all = moments_of(&ok);
    let batches: Vec<Moments> = stats::batch_ranges(ok.len(), BATCHES)
        .into_iter()
        .map(|r| moments_of(&ok[r]))
        .collect();
    let n_covs: Vec<SymMatrix> = batches.iter().map(|b| b.covariance().scale(nf)).collect();
    let mean_std_err = (0..q)
        .map(|j| stats::batch_std_err(&batches.iter().map(|b| b.mean()[j]).collect::<Vec<_>>()))
        .collect();
    Ok(SpecResult {
        label,
        params,
        failures,
        mean: all.mean().to_vec(),
        n_cov: all.covariance().scale(nf),
        mean_std_err,
        n_cov_std_err: stats::batch_std_err_sym(&n_covs),
        estimates,
        converged,
    })
}

/// Sandwich coverage at the truth: `G(θ_true)⁻¹` from exact score moments.
pub fn sandwich_coverage(config: &SimConfig, result: &SimResult, z: f64) -> Result<Vec<(String, Vec<f64>)>> {
    config
        .specs
        .iter()
        .zip(&result.specs)
        .map(|(s, r)| {
            let t = s.template(&config.theta_true)?;
            let avar = info_analytic(&s.spec, &config.model, &t)?.avar()?;
            Ok((r.label.clone(), r.coverage(&t.free_values(), &avar, config.n, z)?))
        })
        .collect()
}

/// Central-difference Hessian of `f` in the free parameters of `theta`,
/// symmetrized. Step `h_j = step · max(|θ_j|, 1)`; a domain error from `f`
/// anywhere on the stencil is returned as is.
pub fn numeric_hessian<F>(f: F, theta: &ParamVector, step: f64) -> Result<SymMatrix>
where
    F: Fn(&ParamVector) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let x = theta.free_values();
    let q = x.len();
    let h: Vec<f64> = x.iter().map(|v| step * v.abs().max(1.0)).collect();
    let eval = |d: &[(usize, f64)]| {
        let mut y = x.clone();
        for &(j, s) in d {
            y[j] += s;
        }
        f(&theta.with_free_values(&y)?)
    };
    let f0 = eval(&[])?;
    let mut out = SymMatrix::zeros(q);
    for i in 0..q {
        let (fp, fm) = (eval(&[(i, h[i])])?, eval(&[(i, -h[i])])?);
        out.set(i, i, (fp - 2.0 * f0 + fm) / (h[i] * h[i]));
        for j in 0..i {
            let pp = eval(&[(i, h[i]), (j, h[j])])?;
            let pm = eval(&[(i, h[i]), (j, -h[j])])?;
            let mp = eval(&[(i, -h[i]), (j, h[j])])?;
            let mm = eval(&[(i, -h[i]), (j, -h[j])])?;
            out.set(i, j, (pp - pm - mp + mm) / (4.0 * h[i] * h[j]));
        }
    }
    Ok(out)
}

/// Default relative Hessian step.
pub const HESSIAN_STEP: f64 = 1e-4;
