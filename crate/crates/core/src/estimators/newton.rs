use super::{max_abs, EstimateResult, Objective, Solver, SCORE_TOL};
use crate::composite::CompositeSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::{Dataset, ModelSpec};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Converged once `‖score‖∞ < tol · n`.
    pub tol: f64,
    /// Also start from 16 equispaced points of the first bounded free
    /// parameter and keep the root with the largest `cℓ`.
    pub multistart: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: SCORE_TOL,
            multistart: false,
        }
    }
}

pub const MULTISTARTS: usize = 16;
const MAX_HALVINGS: usize = 50;

/// Newton iteration on the total composite score from `theta0`.
///
/// Known parameters (role `Known`) stay at their `theta0` values. A run that
/// hits `max_iter` or stalls returns its best iterate with
/// `converged = false`.
pub fn mcle_newton(spec: &CompositeSpec, model: &ModelSpec, data: &Dataset, theta0: &ParamVector) -> Result<EstimateResult> {
    mcle_newton_with(spec, model, data, theta0, &NewtonOptions::default())
}

pub fn mcle_newton_with(
    spec: &CompositeSpec,
    model: &ModelSpec,
    data: &Dataset,
    theta0: &ParamVector,
    opts: &NewtonOptions,
) -> Result<EstimateResult> {
    model.check_domain(theta0)?;
    let obj = Objective::new(spec, model, data, theta0)?;
    let q = theta0.free_dim();
    if q > 2 {
        return Err(Error::NotSupported(format!(
            "Newton solver handles 1 or 2 free parameters, got {q}"
        )));
    }
    let first = solve_from(&obj, &theta0.free_values(), opts)?;
    if !opts.multistart {
        return first.finish(&obj);
    }
    let mut best = first;
    for start in multistart_points(&obj)? {
        let cand = match solve_from(&obj, &start, opts) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if cand.better_than(&best) {
            best = cand;
        }
    }
    best.finish(&obj)
}

fn multistart_points(obj: &Objective) -> Result<Vec<Vec<f64>>> {
    let t = obj.template();
    let names = t.free_names();
    let base = t.free_values();
    for (j, name) in names.iter().enumerate() {
        let (lo, hi) = obj.model().bounds(name)?;
        if lo.is_finite() && hi.is_finite() {
            return Ok((0..MULTISTARTS)
                .map(|i| {
                    let mut v = base.clone();
                    v[j] = lo + (hi - lo) * (i as f64 + 0.5) / MULTISTARTS as f64;
                    v
                })
                .collect());
        }
    }
    Ok(Vec::new())
}

struct Run {
    free: Vec<f64>,
    log_lik: f64,
    score_norm: f64,
    iterations: usize,
    converged: bool,
}

impl Run {
    fn better_than(&self, other: &Run) -> bool {
        match (self.converged, other.converged) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.log_lik > other.log_lik,
            (false, false) => self.score_norm < other.score_norm,
        }
    }

    fn finish(self, obj: &Objective) -> Result<EstimateResult> {
        Ok(EstimateResult {
            theta_hat: obj.params(&self.free)?,
            iterations: self.iterations,
            converged: self.converged,
            score_norm: self.score_norm,
            solver: Solver::Newton,
        })
    }
}

/// Central-difference Jacobian of the score, one-sided near the boundary.
fn jacobian(obj: &Objective, free: &[f64], score: &[f64]) -> Result<Matrix> {
    let q = free.len();
    let mut jac = Matrix::zeros(q, q);
    for c in 0..q {
        let h = 1e-6 * free[c].abs().max(1.0);
        let mut up = free.to_vec();
        up[c] += h;
        let mut dn = free.to_vec();
        dn[c] -= h;
        let (col, denom) = match (obj.in_domain(&up), obj.in_domain(&dn)) {
            (true, true) => {
                let su = obj.score(&up)?;
                let sd = obj.score(&dn)?;
                ((0..q).map(|r| su[r] - sd[r]).collect::<Vec<_>>(), 2.0 * h)
            }
            (true, false) => {
                let su = obj.score(&up)?;
                ((0..q).map(|r| su[r] - score[r]).collect(), h)
            }
            (false, true) => {
                let sd = obj.score(&dn)?;
                ((0..q).map(|r| score[r] - sd[r]).collect(), h)
            }
            (false, false) => return Err(Error::domain("theta", free[c], "stencil leaves the domain")),
        };
        for r in 0..q {
            jac[(r, c)] = col[r] / denom;
        }
    }
    Ok(jac)
}

/// Solves the 1×1 or 2×2 system `a x = b`.
fn solve_small(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    match b.len() {
        1 => (a[(0, 0)] != 0.0).then(|| vec![b[0] / a[(0, 0)]]),
        2 => {
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let scale = a.max_abs().powi(2);
            if det.abs() <= 1e-14 * scale {
                return None;
            }
            Some(vec![
                (a[(1, 1)] * b[0] - a[(0, 1)] * b[1]) / det,
                (a[(0, 0)] * b[1] - a[(1, 0)] * b[0]) / det,
            ])
        }
        _ => None,
    }
}

/// True if `-jac` is positive definite (we are in a concave region).
fn concave(jac: &Matrix) -> bool {
    match jac.rows() {
        1 => jac[(0, 0)] < 0.0,
        _ => {
            let (a, b, d) = (-jac[(0, 0)], -0.5 * (jac[(0, 1)] + jac[(1, 0)]), -jac[(1, 1)]);
            a > 0.0 && a * d - b * b > 0.0
        }
    }
}

fn solve_from(obj: &Objective, start: &[f64], opts: &NewtonOptions) -> Result<Run> {
    let tol = opts.tol * obj.n() as f64;
    let mut free = start.to_vec();
    let mut ll = obj.log_lik(&free)?;
    let mut score = obj.score(&free)?;
    let mut norm = max_abs(&score);
    let mut iterations = 0;
    while norm >= tol && iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(obj, &free, &score)?;
        let neg: Vec<f64> = score.iter().map(|s| -s).collect();
        let step = match solve_small(&jac, &neg) {
            Some(s) if concave(&jac) => s,
            // Outside concave regions, climb along the scaled gradient.
            _ => (0..free.len())
                .map(|j| score[j] / jac[(j, j)].abs().max(1e-8 * obj.n() as f64))
                .collect(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = free.iter().zip(&step).map(|(x, s)| x + t * s).collect();
            if obj.in_domain(&cand) {
                let cll = obj.log_lik(&cand)?;
                let cs = obj.score(&cand)?;
                let cn = max_abs(&cs);
                if cll > ll || cn < norm {
                    free = cand;
                    ll = cll;
                    score = cs;
                    norm = cn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm < tol {
        // One polishing step pins the root well below the stopping tolerance.
        let jac = jacobian(obj, &free, &score)?;
        let neg: Vec<f64> = score.iter().map(|s| -s).collect();
        if let Some(step) = solve_small(&jac, &neg) {
            let cand: Vec<f64> = free.iter().zip(&step).map(|(x, s)| x + s).collect();
            if obj.in_domain(&cand) {
                let cs = obj.score(&cand)?;
                if max_abs(&cs) < norm {
                    ll = obj.log_lik(&cand)?;
                    norm = max_abs(&cs);
                    free = cand;
                }
            }
        }
    }
    Ok(Run {
        free,
        log_lik: ll,
        score_norm: norm,
        iterations,
        converged: norm < tol,
    })
}
