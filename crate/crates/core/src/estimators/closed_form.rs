use super::{max_abs, EstimateResult, Objective, Solver, SCORE_TOL};
use crate::composite::{CompositeSpec, SpecKind};
use crate::error::{Error, Result};
use crate::models::{DataSummary, Dataset, ModelSpec};
use crate::params::ParamVector;

/// Estimators with a known closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// EMVN pairwise, `ρ` and `σ²` both free.
    EmvnPairwise,
    /// EMVN pairwise, `σ²` known: root of a cubic in `ρ`.
    EmvnPairwiseKnownVariance,
    /// Tri-normal `f(y1) f(y2)`: `(ȳ1 + ȳ2) / 2`.
    TriNormalMu12,
    /// Tri-normal `f(y1) f(y2) f(y3)`: `{σ²(ȳ1 + ȳ2) + ȳ3} / (1 + 2σ²)`.
    TriNormalMu123,
    /// Multinomial full likelihood: `(ȳ1 + ȳ2 + ȳ3) / (2 + 1/k)`.
    MultinomialMle,
}

impl ClosedForm {
    pub fn id(&self) -> &'static str {
        match self {
            ClosedForm::EmvnPairwise => "emvn-pairwise",
            ClosedForm::EmvnPairwiseKnownVariance => "emvn-pairwise-known-variance",
            ClosedForm::TriNormalMu12 => "trinormal-mu12",
            ClosedForm::TriNormalMu123 => "trinormal-mu123",
            ClosedForm::MultinomialMle => "multinomial-mle",
        }
    }

    /// The composite likelihood a closed form maximises.
    pub fn spec(&self, model: &ModelSpec) -> CompositeSpec {
        match self {
            ClosedForm::EmvnPairwise | ClosedForm::EmvnPairwiseKnownVariance => CompositeSpec::pairwise(model.dim()),
            ClosedForm::TriNormalMu12 => CompositeSpec::margins(&[0, 1]).expect("nonempty"),
            ClosedForm::TriNormalMu123 => CompositeSpec::margins(&[0, 1, 2]).expect("nonempty"),
            ClosedForm::MultinomialMle => CompositeSpec::full(model.dim()),
        }
    }

    /// Registered closed form for this spec, model and set of free parameters.
    pub fn lookup(spec: &CompositeSpec, model: &ModelSpec, template: &ParamVector) -> Option<ClosedForm> {
        if template.names() != model.param_names() {
            return None;
        }
        let free: Vec<&str> = template.free_names();
        let roles_ok = |want: &[&str]| free == want;
        let unit_weights = spec.components().iter().all(|c| c.weight == 1.0);
        if !unit_weights {
            return None;
        }
        match (model, spec.kind()) {
            (ModelSpec::Emvn { .. }, SpecKind::Pairwise) if roles_ok(&["rho", "sigma2"]) => {
                Some(ClosedForm::EmvnPairwise)
            }
            (ModelSpec::Emvn { .. }, SpecKind::Pairwise) if roles_ok(&["rho"]) => {
                Some(ClosedForm::EmvnPairwiseKnownVariance)
            }
            (ModelSpec::TriNormal, SpecKind::Margins(a)) if roles_ok(&["mu"]) && a[..] == [0, 1] => {
                Some(ClosedForm::TriNormalMu12)
            }
            (ModelSpec::TriNormal, SpecKind::Margins(a)) if roles_ok(&["mu"]) && a[..] == [0, 1, 2] => {
                Some(ClosedForm::TriNormalMu123)
            }
            (ModelSpec::TriNormal, SpecKind::Independence) if roles_ok(&["mu"]) => Some(ClosedForm::TriNormalMu123),
            (ModelSpec::Multinomial4 { .. }, SpecKind::Full) if roles_ok(&["theta"]) => {
                Some(ClosedForm::MultinomialMle)
            }
            (ModelSpec::Multinomial4 { .. }, SpecKind::Chain(a)) if roles_ok(&["theta"]) && a[..] == [0, 1, 2] => {
                Some(ClosedForm::MultinomialMle)
            }
            _ => None,
        }
    }
}

/// Real roots of `c[0] + c[1] x + c[2] x² + c[3] x³` inside the open
/// interval `(lo, hi)`, by bisection on monotone pieces.
pub(crate) fn cubic_roots_in(c: [f64; 4], lo: f64, hi: f64) -> Vec<f64> {
    let f = |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    // Critical points: c1 + 2 c2 x + 3 c3 x² = 0.
    let mut cuts = vec![lo];
    let (a, b, d) = (3.0 * c[3], 2.0 * c[2], c[1]);
    if a != 0.0 {
        let disc = b * b - 4.0 * a * d;
        if disc > 0.0 {
            let s = disc.sqrt();
            let mut r = [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)];
            r.sort_by(f64::total_cmp);
            cuts.extend(r.iter().filter(|&&x| x > lo && x < hi));
        }
    } else if b != 0.0 {
        let x = -d / b;
        if x > lo && x < hi {
            cuts.push(x);
        }
    }
    cuts.push(hi);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut x0, mut x1) = (w[0], w[1]);
        let (mut f0, f1) = (f(x0), f(x1));
        if f0 == 0.0 {
            roots.push(x0);
            continue;
        }
        if f0.signum() == f1.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (x0 + x1);
            if mid <= x0 || mid >= x1 {
                break;
            }
            let fm = f(mid);
            if fm == 0.0 {
                x0 = mid;
                x1 = mid;
                break;
            }
            if fm.signum() == f0.signum() {
                x0 = mid;
                f0 = fm;
            } else {
                x1 = mid;
            }
        }
        roots.push(0.5 * (x0 + x1));
    }
    roots.retain(|&x| x > lo && x < hi);
    roots.dedup();
    roots
}

/// Pairwise sums for the EMVN: `(T1, T2) = (Σ_i Σ_r y², Σ_i (Σ_r y)²)`.
fn emvn_sums(s: &DataSummary) -> (f64, f64) {
    match s {
        DataSummary::Moments { outer, .. } => {
            let p = outer.dim();
            let t1 = (0..p).map(|i| outer.get(i, i)).sum();
            let t2 = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| outer.get(i, j)).sum();
            (t1, t2)
        }
        DataSummary::Cells { .. } => unreachable!("EMVN data are Gaussian"),
    }
}

/// Evaluates a registered closed form on `data`. Known parameters are read
/// from `template`.
pub fn closed_form(id: ClosedForm, model: &ModelSpec, data: &Dataset, template: &ParamVector) -> Result<EstimateResult> {
    let spec = id.spec(model);
    if ClosedForm::lookup(&spec, model, template) != Some(id) {
        return Err(Error::InvalidArgument(format!(
            "closed form {} does not apply to {} with free parameters {:?}",
            id.id(),
            model.name(),
            template.free_names()
        )));
    }
    let obj = Objective::new(&spec, model, data, template)?;
    let n = obj.n() as f64;
    let mean = |j: usize| data.column_mean(j);
    let free: Vec<f64> = match (id, *model) {
        (ClosedForm::EmvnPairwise, ModelSpec::Emvn { p }) => {
            let pf = p as f64;
            let (t1, t2) = emvn_sums(obj.summary());
            if !(t1 > 0.0) {
                return Err(Error::NoRootInDomain);
            }
            vec![(t2 - t1) / ((pf - 1.0) * t1), t1 / (n * pf)]
        }
        (ClosedForm::EmvnPairwiseKnownVariance, ModelSpec::Emvn { p }) => {
            let pf = p as f64;
            let s2 = template.get("sigma2")?;
            let (t1, t2) = emvn_sums(obj.summary());
            let pairs = n * pf * (pf - 1.0) / 2.0;
            let sum_sq = (pf - 1.0) * t1;
            let cross = 0.5 * (t2 - t1);
            // Pairwise ρ-score times σ²(1−ρ²)² summed over pairs and rows.
            let coef = [cross, pairs * s2 - sum_sq, cross, -pairs * s2];
            let (lo, hi) = model.bounds("rho")?;
            let mut best: Option<(f64, f64)> = None;
            for r in cubic_roots_in(coef, lo, hi) {
                let ll = match obj.log_lik(&[r]) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                if best.is_none_or(|(_, b)| ll > b) {
                    best = Some((r, ll));
                }
            }
            vec![best.ok_or(Error::NoRootInDomain)?.0]
        }
        (ClosedForm::TriNormalMu12, _) => vec![(mean(0) + mean(1)) / 2.0],
        (ClosedForm::TriNormalMu123, _) => {
            let s2 = template.get("sigma2")?;
            vec![(s2 * (mean(0) + mean(1)) + mean(2)) / (1.0 + 2.0 * s2)]
        }
        (ClosedForm::MultinomialMle, ModelSpec::Multinomial4 { k }) => {
            vec![(mean(0) + mean(1) + mean(2)) / (2.0 + 1.0 / k)]
        }
        _ => unreachable!("lookup matched the model"),
    };
    let theta_hat = obj.params(&free).map_err(|_| Error::NoRootInDomain)?;
    let score_norm = max_abs(&obj.score(&free)?);
    Ok(EstimateResult {
        theta_hat,
        iterations: 0,
        converged: score_norm < SCORE_TOL * n,
        score_norm,
        solver: Solver::ClosedForm,
    })
}
