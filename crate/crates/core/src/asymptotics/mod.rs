//! Closed-form asymptotic variances and efficiency curves.
//!
//! Every variance here is on the per-observation scale `n · avar`.

mod curve;

pub use curve::{grid, Column, EfficiencyCurve};

use crate::composite::{proposition1_diagnostics, CompositeSpec};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Points on a default curve grid.
pub const GRID_POINTS: usize = 201;
/// Distance kept from each domain boundary on a default grid.
pub const GRID_MARGIN: f64 = 0.01;

fn check_emvn(p: usize, rho: f64) -> Result<()> {
    if p < 3 {
        return Err(Error::domain("p", p as f64, "needs p >= 3"));
    }
    let lo = -1.0 / (p as f64 - 1.0);
    if !(rho >= lo && rho < 1.0) {
        return Err(Error::domain("rho", rho, format!("outside [{lo}, 1)")));
    }
    Ok(())
}

fn check_emvn_open(p: usize, rho: f64) -> Result<()> {
    check_emvn(p, rho)?;
    if rho == -1.0 / (p as f64 - 1.0) {
        return Err(Error::domain("rho", rho, "ratio diverges at the lower bound"));
    }
    Ok(())
}

/// `c(p, ρ) = (1−ρ)²(3ρ² + p²ρ² + 1) + pρ(−3ρ³ + 8ρ² − 3ρ + 2)`.
fn c_term(p: f64, r: f64) -> f64 {
    (1.0 - r).powi(2) * (3.0 * r * r + p * p * r * r + 1.0) + p * r * (-3.0 * r.powi(3) + 8.0 * r * r - 3.0 * r + 2.0)
}

/// `n · avar(ρ̃_pl)`, the pairwise estimator of `ρ` with `σ²` known.
pub fn avar_rho_tilde(p: usize, rho: f64) -> Result<f64> {
    check_emvn(p, rho)?;
    let pf = p as f64;
    Ok(2.0 * (1.0 - rho).powi(2) * c_term(pf, rho) / (pf * (pf - 1.0) * (1.0 + rho * rho).powi(2)))
}

/// `n · avar(ρ̂_pl)`, with `σ²` estimated too.
pub fn avar_rho_hat(p: usize, rho: f64) -> Result<f64> {
    check_emvn(p, rho)?;
    let pf = p as f64;
    Ok(2.0 * (1.0 - rho).powi(2) * (1.0 + (pf - 1.0) * rho).powi(2) / (pf * (pf - 1.0)))
}

/// `n · acov(ρ̂_pl, σ̂²_pl) = 2ρ(1−ρ){1 + (p−1)ρ}σ²/p`.
pub fn acov_rho_sigma(p: usize, rho: f64, sigma2: f64) -> Result<f64> {
    check_emvn(p, rho)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain("sigma2", sigma2, "must be positive"));
    }
    let pf = p as f64;
    Ok(2.0 * rho * (1.0 - rho) * (1.0 + (pf - 1.0) * rho) * sigma2 / pf)
}

/// Default `ρ` grid for the EMVN, anchored at `ρ = 0`.
pub fn rho_grid(p: usize, points: usize) -> Result<Vec<f64>> {
    check_emvn(p, 0.0)?;
    grid(-1.0 / (p as f64 - 1.0), 1.0, points, GRID_MARGIN, &[0.0, 0.5])
}

/// `r(ρ) = avar(ρ̃_pl) / avar(ρ̂_pl)` on `grid`.
pub fn ratio_curve_fig1(p: usize, grid: &[f64]) -> Result<EfficiencyCurve> {
    let mut ratio = Vec::with_capacity(grid.len());
    for &r in grid {
        check_emvn_open(p, r)?;
        ratio.push(avar_rho_tilde(p, r)? / avar_rho_hat(p, r)?);
    }
    EfficiencyCurve::new("rho", grid.to_vec())
        .with_meta("p", p)
        .with_meta("scale", "n*avar")
        .with_column("ratio", ratio, None)
}

/// The negative `ρ_c` with `r(ρ_c) = 1`. Below it `r > 1` and knowing `σ²`
/// hurts; on `(ρ_c, 0)` and `(0, 1)`, `r < 1`.
pub fn ratio_crossover_fig1(p: usize) -> Result<f64> {
    check_emvn(p, 0.0)?;
    let r = |x: f64| Ok::<f64, Error>(avar_rho_tilde(p, x)? / avar_rho_hat(p, x)? - 1.0);
    let lo = -1.0 / (p as f64 - 1.0);
    let (mut a, mut b) = (lo * (1.0 - 1e-9), lo * 1e-3);
    if !(r(a)? > 0.0 && r(b)? < 0.0) {
        return Err(Error::NoRootInDomain);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if r(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Full-conditional analogue of the pairwise ratio curve, `avar(ρ̃_FC) / avar(ρ̂_FC)`,
/// from Monte Carlo sensitivity and variability at `σ² = 1`.
pub fn fc_ratio_curve_fig2(p: usize, grid: &[f64], draws: usize, seed: u64) -> Result<EfficiencyCurve> {
    let model = ModelSpec::emvn(p)?;
    let spec = CompositeSpec::full_conditional(p);
    let mut ratio = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    let mut known = Vec::with_capacity(grid.len());
    let mut profile = Vec::with_capacity(grid.len());
    for &r in grid {
        check_emvn_open(p, r)?;
        let theta = model.params(&[r, 1.0])?.nuisance("sigma2")?;
        let rep = proposition1_diagnostics(&spec, &model, &theta, draws, seed)?;
        ratio.push(rep.ratio);
        se.push(rep.ratio_std_err);
        known.push(rep.avar_known);
        profile.push(rep.avar_profile);
    }
    EfficiencyCurve::new("rho", grid.to_vec())
        .with_meta("p", p)
        .with_meta("sigma2", 1)
        .with_meta("draws", draws)
        .with_meta("seed", seed)
        .with_meta("scale", "n*avar")
        .with_column("ratio", ratio, Some(se))?
        .with_column("nvar_known", known, None)?
        .with_column("nvar_profile", profile, None)
}

fn check_ex2(sigma2: f64, rho: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain("sigma2", sigma2, "must be positive"));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", rho, "outside [-1, 1]"));
    }
    Ok(())
}

/// `(n · Var(μ̂₁₂), n · Var(μ̂₁₂₃))` in the tri-normal model.
pub fn ex2_variances(sigma2: f64, rho: f64) -> Result<(f64, f64)> {
    check_ex2(sigma2, rho)?;
    let v12 = (1.0 + rho) / 2.0;
    let v123 = (2.0 * (1.0 + rho) * sigma2 * sigma2 + sigma2) / (1.0 + 2.0 * sigma2).powi(2);
    Ok((v12, v123))
}

/// The `ρ*` where both variances agree: `−(1 + 2σ²) / (1 + 4σ²)`. Adding
/// `Y₃` helps exactly when `ρ > ρ*`.
pub fn ex2_threshold(sigma2: f64) -> Result<f64> {
    check_ex2(sigma2, 0.0)?;
    Ok(-(1.0 + 2.0 * sigma2) / (1.0 + 4.0 * sigma2))
}

/// Sensitivities and variabilities of the multinomial example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ex3Info {
    pub h_ind: f64,
    pub j_ind: f64,
    pub h_pair: f64,
    pub j_pair: f64,
    pub i_full: f64,
}

impl Ex3Info {
    pub fn nvar_full(&self) -> f64 {
        1.0 / self.i_full
    }

    pub fn nvar_ind(&self) -> f64 {
        self.j_ind / (self.h_ind * self.h_ind)
    }

    pub fn nvar_pair(&self) -> f64 {
        self.j_pair / (self.h_pair * self.h_pair)
    }
}

/// Upper end of the multinomial parameter range, `k / (2k + 1)`.
pub fn ex3_theta_max(k: f64) -> f64 {
    k / (2.0 * k + 1.0)
}

fn check_ex3(theta: f64, k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain("k", k, "must be positive"));
    }
    let hi = ex3_theta_max(k);
    if !(theta > 0.0 && theta < hi) {
        return Err(Error::domain("theta", theta, format!("outside (0, {hi})")));
    }
    Ok(())
}

pub fn ex3_info(theta: f64, k: f64) -> Result<Ex3Info> {
    check_ex3(theta, k)?;
    let t = theta;
    let kk = 1.0 + 1.0 / k;
    let h_ind = 2.0 / t + 2.0 / (1.0 - t) + 1.0 / (k * t) + 1.0 / (k * (k - t));
    let j_ind = 2.0 / (t * (1.0 - t)) + 1.0 / (t * (k - t)) - 2.0 / (1.0 - t).powi(2) - 4.0 / ((1.0 - t) * (k - t));
    let h_pair = 4.0 / t + 2.0 / (k * t) + 4.0 / (1.0 - 2.0 * t) + 2.0 * kk * kk / (1.0 - kk * t);
    let a = 2.0 / t + 2.0 / (1.0 - 2.0 * t) + kk / (1.0 - t - t / k);
    let b = 2.0 / t + 2.0 * kk / (1.0 - t - t / k);
    let j_pair = 2.0 * a * a * t * (1.0 - t) + b * b * (t / k) * (1.0 - t / k)
        - 2.0 * a * a * t * t
        - 4.0 * a * b * t * t / k;
    let i_full = 1.0 / (t / (2.0 + 1.0 / k) - t * t);
    Ok(Ex3Info {
        h_ind,
        j_ind,
        h_pair,
        j_pair,
        i_full,
    })
}

/// Default `θ` grid for the multinomial example.
pub fn theta_grid(k: f64, points: usize) -> Result<Vec<f64>> {
    check_ex3(0.5 * ex3_theta_max(k), k)?;
    grid(0.0, ex3_theta_max(k), points, GRID_MARGIN, &[0.1, 0.2, 0.3, 0.4])
}

/// `n · avar` of the full, independence and pairwise estimators, and the
/// pairwise / independence ratio.
pub fn ex3_curves_fig3(k: f64, grid: &[f64]) -> Result<EfficiencyCurve> {
    let mut cols: [Vec<f64>; 4] = Default::default();
    for &t in grid {
        let info = ex3_info(t, k)?;
        let (full, ind, pair) = (info.nvar_full(), info.nvar_ind(), info.nvar_pair());
        for (c, v) in cols.iter_mut().zip([full, ind, pair, pair / ind]) {
            c.push(v);
        }
    }
    let [full, ind, pair, ratio] = cols;
    EfficiencyCurve::new("theta", grid.to_vec())
        .with_meta("k", k)
        .with_meta("scale", "n*avar")
        .with_column("nvar_full", full, None)?
        .with_column("nvar_ind", ind, None)?
        .with_column("nvar_pair", pair, None)?
        .with_column("ratio", ratio, None)
}
