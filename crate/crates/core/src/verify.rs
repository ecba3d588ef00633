//! Acceptance checks with Monte Carlo aware thresholds.
//!
//! Each check compares one number to one threshold. At `Level::Quick` every
//! draw and replicate count is divided by 10 and the sigma multiplier rises
//! from 3 to 4.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use crate::asymptotics::{
    acov_rho_sigma, avar_rho_hat, avar_rho_tilde, ex2_threshold, ex2_variances, ex3_info, ex3_theta_max,
    fc_ratio_curve_fig2, grid, ratio_crossover_fig1, ratio_curve_fig1, rho_grid, GRID_POINTS,
};
use crate::composite::{
    component_cross_covariances, info_analytic, info_bias_measure, info_monte_carlo, sandwich_dominance,
    theorem1_check, CompositeSpec, DominanceOptions, ProjectedScore, EstimatingFunction,
};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::montecarlo::{run, SimConfig, SimSpec};
use crate::params::ParamVector;
use crate::rng::{derive_seed, domain};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const CRITERIA: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn scale(&self, full: usize) -> usize {
        match self {
            Level::Quick => full / 10,
            Level::Full => full,
        }
    }

    fn sigmas(&self) -> f64 {
        match self {
            Level::Quick => 4.0,
            Level::Full => 3.0,
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            _ => Err(Error::InvalidArgument(format!("level must be quick or full, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub level: Level,
    pub seed: u64,
    /// Added to the diagonal of every estimated `H` in the dominance checks.
    pub h_shift: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            level: Level::Full,
            seed: DEFAULT_SEED,
            h_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Less,
    LessEq,
    Greater,
}

impl Relation {
    fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Less => value < threshold,
            Relation::LessEq => value <= threshold,
            Relation::Greater => value > threshold,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Less => "<",
            Relation::LessEq => "<=",
            Relation::Greater => ">",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub criterion: usize,
    pub id: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
    /// The claim being tested, in words.
    pub claim: String,
}

impl Check {
    fn new(criterion: usize, id: impl Into<String>, value: f64, relation: Relation, threshold: f64, claim: &str) -> Self {
        Self {
            criterion,
            id: id.into(),
            pass: value.is_finite() && relation.holds(value, threshold),
            value,
            relation,
            threshold,
            claim: claim.to_string(),
        }
    }

    /// `|value − target| ≤ k · se`.
    fn near(criterion: usize, id: impl Into<String>, value: f64, target: f64, band: f64, claim: &str) -> Self {
        Self::new(criterion, id, (value - target).abs(), Relation::LessEq, band, claim)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.6e} {} {:.6e}  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.value,
            self.relation.symbol(),
            self.threshold,
            self.claim
        )
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub criterion: usize,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.criteria.iter().flat_map(|c| c.checks.iter())
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(CriterionResult::pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks().filter(|c| !c.pass).collect()
    }

    /// `id,value,threshold,relation,pass,claim`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidArgument(format!("CSV: {e}"));
        w.write_record(["id", "value", "threshold", "relation", "pass", "claim"])
            .map_err(err)?;
        for c in self.checks() {
            w.write_record([
                c.id.clone(),
                c.value.to_string(),
                c.threshold.to_string(),
                c.relation.symbol().to_string(),
                c.pass.to_string(),
                c.claim.clone(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Runs criteria `1..=11`.
pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let criteria = (1..=CRITERIA)
        .map(|c| verify_criterion(c, opts))
        .collect::<Result<_>>()?;
    Ok(VerifyReport { criteria })
}

pub fn verify_criterion(criterion: usize, opts: &VerifyOptions) -> Result<CriterionResult> {
    let start = Instant::now();
    let seed = derive_seed(opts.seed, domain::VERIFY, criterion as u64);
    let ctx = Ctx { opts, seed };
    let checks = match criterion {
        1 => ctx.pairwise_variance(false)?,
        2 => ctx.pairwise_variance(true)?,
        3 => ctx.figure1()?,
        4 => ctx.figure2()?,
        5 => ctx.example2()?,
        6 => ctx.example3()?,
        7 => ctx.theorem1()?,
        8 => ctx.chain_unbiased()?,
        9 => ctx.projection()?,
        10 => ctx.rho_sigma_covariance()?,
        11 => ctx.dominance()?,
        _ => return Err(Error::InvalidArgument(format!("no criterion {criterion}"))),
    };
    Ok(CriterionResult {
        criterion,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

struct Ctx<'a> {
    opts: &'a VerifyOptions,
    seed: u64,
}

const RHOS: [f64; 4] = [-0.3, 0.0, 0.3, 0.6];

fn emvn(p: usize, rho: f64, s2: f64) -> Result<(ModelSpec, ParamVector)> {
    let m = ModelSpec::emvn(p)?;
    let t = m.params(&[rho, s2])?;
    Ok((m, t))
}

impl Ctx<'_> {
    fn k(&self) -> f64 {
        self.opts.level.sigmas()
    }

    fn replicates(&self) -> usize {
        self.opts.level.scale(2000)
    }

    fn emvn_sim(&self, rho: f64, known: bool, index: u64) -> Result<crate::montecarlo::SpecResult> {
        let (model, theta_true) = emvn(3, rho, 1.0)?;
        let mut spec = SimSpec::new(CompositeSpec::pairwise(3));
        if known {
            spec = spec.with_known(&["sigma2"]);
        }
        let res = run(&SimConfig {
            model,
            theta_true,
            specs: vec![spec],
            n: 500,
            replicates: self.replicates(),
            seed: derive_seed(self.seed, domain::REPLICATE, index),
        })?;
        Ok(res.specs.into_iter().next().expect("one spec"))
    }

    fn pairwise_variance(&self, known: bool) -> Result<Vec<Check>> {
        let (c, claim, f): (usize, &str, fn(usize, f64) -> Result<f64>) = if known {
            (2, "n Var of pairwise rho with sigma2 known matches its closed form", avar_rho_tilde)
        } else {
            (1, "n Var of pairwise rho with sigma2 estimated matches its closed form", avar_rho_hat)
        };
        RHOS.iter()
            .enumerate()
            .map(|(i, &rho)| {
                let s = self.emvn_sim(rho, known, i as u64)?;
                let (v, se) = s.n_var("rho")?;
                Ok(Check::near(c, format!("{c}.rho={rho}"), v, f(3, rho)?, self.k() * se, claim))
            })
            .collect()
    }

    fn figure1(&self) -> Result<Vec<Check>> {
        let g = rho_grid(3, GRID_POINTS)?;
        let curve = ratio_curve_fig1(3, &g)?;
        let r = curve.values("ratio")?;
        let pick = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
            g.iter().zip(r).filter(|(x, _)| **x >= lo && **x <= hi).map(|(x, v)| (*x, *v)).collect()
        };
        let pos_max = pick(0.01, 0.99).iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let neg_min = pick(-0.49, -0.01).iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let rc = ratio_crossover_fig1(3)?;
        let below = pick(-0.49, rc).iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let between = pick(rc, -0.01).iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let at_edge = ratio_curve_fig1(3, &[-0.49])?.values("ratio")?[0];
        Ok(vec![
            Check::new(3, "3a.max_r_positive_rho", pos_max, Relation::Less, 1.0, "knowing sigma2 helps when rho > 0"),
            Check::new(3, "3b.min_r_negative_rho", neg_min, Relation::Greater, 1.0, "knowing sigma2 hurts for every rho < 0"),
            Check::new(3, "3b.min_r_below_crossover", below, Relation::Greater, 1.0, "knowing sigma2 hurts below the crossover rho_c"),
            Check::new(3, "3b.max_r_crossover_to_zero", between, Relation::Less, 1.0, "knowing sigma2 helps between rho_c and 0"),
            Check::new(3, "3c.r_at_-0.49", at_edge, Relation::Greater, 10.0, "the ratio diverges at the lower bound"),
        ])
    }

    fn figure2(&self) -> Result<Vec<Check>> {
        let grid = [-0.45, 0.2, 0.5, 0.8];
        let curve = fc_ratio_curve_fig2(3, &grid, self.opts.level.scale(200_000), self.seed)?;
        let col = curve.column("ratio").expect("ratio column");
        let se = col.std_err.as_ref().expect("std errors");
        Ok(grid
            .iter()
            .enumerate()
            .map(|(i, rho)| {
                Check::new(
                    4,
                    format!("4.rho={rho}"),
                    col.values[i] + self.k() * se[i],
                    Relation::Less,
                    1.0,
                    "full-conditional ratio stays below 1",
                )
            })
            .collect())
    }

    fn example2(&self) -> Result<Vec<Check>> {
        let model = ModelSpec::tri_normal();
        let theta_true = model.params(&[0.0, 0.0, 2.0])?;
        let res = run(&SimConfig {
            model,
            theta_true,
            specs: vec![SimSpec::new(CompositeSpec::margins(&[0, 1, 2])?).with_known(&["rho", "sigma2"])],
            n: 500,
            replicates: self.replicates(),
            seed: self.seed,
        })?;
        let (v, se) = res.specs[0].n_var("mu")?;
        let target = ex2_variances(2.0, 0.0)?.1;
        Ok(vec![
            Check::near(5, "5.threshold_sigma2=2", ex2_threshold(2.0)?, -5.0 / 9.0, 1e-12, "mu_123 beats mu_12 iff rho > -5/9"),
            Check::new(5, "5.threshold_sigma2=1e6_lo", ex2_threshold(1e6)?, Relation::Greater, -0.51, "threshold approaches -1/2"),
            Check::new(5, "5.threshold_sigma2=1e6_hi", ex2_threshold(1e6)?, Relation::Less, -0.5, "threshold approaches -1/2"),
            Check::near(5, "5.nvar_mu123", v, target, self.k() * se, "n Var of mu_123 is (10 + 8 rho)/25"),
        ])
    }

    fn example3(&self) -> Result<Vec<Check>> {
        let mut checks = Vec::new();
        let g = grid(0.0, ex3_theta_max(1.0), 50, 0.005, &[])?;
        let mut worst: f64 = 0.0;
        for &t in &g {
            let e = ex3_info(t, 1.0)?;
            worst = worst
                .max((e.h_ind * e.h_ind / e.j_ind / e.i_full - 1.0).abs())
                .max((e.h_pair * e.h_pair / e.j_pair / e.i_full - 1.0).abs());
        }
        checks.push(Check::new(6, "6a.k=1_max_rel_gap", worst, Relation::LessEq, 1e-9, "both likelihoods fully efficient at k = 1"));
        for t in [0.35, 0.40, 0.45] {
            let e = ex3_info(t, 5.0)?;
            let claim = "full beats independence beats pairwise above theta 0.3";
            checks.push(Check::new(6, format!("6b.theta={t}.pair/ind"), e.nvar_pair() / e.nvar_ind(), Relation::Greater, 1.0, claim));
            checks.push(Check::new(6, format!("6b.theta={t}.ind/full"), e.nvar_ind() / e.nvar_full(), Relation::Greater, 1.0, claim));
        }
        let model = ModelSpec::multinomial4(5.0)?;
        let theta = model.params(&[0.2])?;
        let e = ex3_info(0.2, 5.0)?;
        let draws = self.opts.level.scale(100_000);
        for (name, spec, h, j) in [
            ("ind", CompositeSpec::independence(3), e.h_ind, e.j_ind),
            ("pair", CompositeSpec::pairwise(3), e.h_pair, e.j_pair),
        ] {
            let mc = info_monte_carlo(&spec, &model, &theta, draws, self.seed)?;
            let se = mc.std_err.as_ref().expect("Monte Carlo std errors");
            let claim = "printed sensitivity and variability formulas";
            checks.push(Check::near(6, format!("6c.H_{name}"), mc.h.get(0, 0), h, self.k() * se.h.get(0, 0), claim));
            checks.push(Check::near(6, format!("6c.J_{name}"), mc.j.get(0, 0), j, self.k() * se.j.get(0, 0), claim));
        }
        Ok(checks)
    }

    fn theorem1(&self) -> Result<Vec<Check>> {
        let (m, t) = emvn(3, 0.4, 1.5)?;
        let rep = theorem1_check(&CompositeSpec::pairwise(3), &m, &t, self.opts.level.scale(10_000).max(1000), self.seed)?;
        let claim = "full score equals the projected pairwise score";
        let mut checks = vec![Check::new(7, "7.max_residual_z", rep.max_residual_z, Relation::Less, self.k(), claim)];
        for (j, (b, se)) in rep.residual_mean.iter().zip(&rep.residual_mean_std_err).enumerate() {
            checks.push(Check::near(7, format!("7.b[{j}]"), *b, 0.0, self.k() * se, "mean residual b is zero"));
        }
        Ok(checks)
    }

    fn chain_unbiased(&self) -> Result<Vec<Check>> {
        let draws = self.opts.level.scale(100_000);
        let spec = CompositeSpec::chain(&[1, 2])?;
        let tri = ModelSpec::tri_normal();
        let multi = ModelSpec::multinomial4(5.0)?;
        let (em, et) = emvn(3, 0.4, 1.5)?;
        let design = [
            (em, et),
            (tri, tri.params(&[0.5, -0.3, 2.0])?),
            (multi, multi.params(&[0.2])?),
        ];
        let mut checks = Vec::new();
        for (i, (m, t)) in design.iter().enumerate() {
            let seed = derive_seed(self.seed, domain::INFO_DRAW, i as u64);
            let info = info_monte_carlo(&spec, m, t, draws, seed)?;
            let bias = info_bias_measure(&info)?;
            let se = info.bias_std_err().expect("Monte Carlo std errors");
            checks.push(Check::new(8, format!("8.bias.{}", m.name()), bias, Relation::Less, self.k() * se, "chain likelihoods are information-unbiased"));
            let blocks = component_cross_covariances(&spec, m, t, draws, seed)?;
            let z = blocks.iter().map(|b| b.max_z()).fold(0.0, f64::max);
            checks.push(Check::new(8, format!("8.cross_z.{}", m.name()), z, Relation::Less, self.k(), "chain component scores are uncorrelated"));
        }
        Ok(checks)
    }

    fn projection(&self) -> Result<Vec<Check>> {
        let (m, t) = emvn(3, 0.4, 1.5)?;
        let spec = CompositeSpec::pairwise(3);
        let exact = info_analytic(&spec, &m, &t)?;
        let proj = ProjectedScore::new(spec, &exact)?;
        let kernel = proj.kernel(&m, &t)?;
        let data = m.sample(&t, 1000, self.seed)?;
        let mut worst: f64 = 0.0;
        for y in data.rows() {
            let a = kernel.eval(y)?;
            let u = m.full_score(y, &t)?;
            for (x, v) in a.iter().zip(&u) {
                worst = worst.max((x - v).abs() / v.abs().max(1.0));
            }
        }
        let mut checks = vec![Check::new(9, "9.max_pointwise_gap", worst, Relation::LessEq, 1e-5, "projected pairwise score equals the full score")];
        let mc = info_monte_carlo(&proj, &m, &t, self.opts.level.scale(100_000), self.seed)?;
        let se = mc.std_err.as_ref().expect("Monte Carlo std errors");
        for r in 0..2 {
            for c in 0..=r {
                let gap = mc.h.get(r, c) - mc.j.get(r, c);
                checks.push(Check::near(9, format!("9.H-J[{r},{c}]"), gap, 0.0, self.k() * se.bias.get(r, c), "projected score is information-unbiased"));
            }
        }
        Ok(checks)
    }

    fn rho_sigma_covariance(&self) -> Result<Vec<Check>> {
        let mut checks = Vec::new();
        let mut exact = Vec::new();
        for (i, rho) in [0.5, -0.45].into_iter().enumerate() {
            let (model, theta_true) = emvn(3, rho, 1.0)?;
            let res = run(&SimConfig {
                model,
                theta_true,
                specs: vec![SimSpec::new(CompositeSpec::pairwise(3))],
                n: 500,
                replicates: self.replicates(),
                seed: derive_seed(self.seed, domain::REPLICATE, i as u64),
            })?;
            let (v, se) = res.specs[0].n_cov_of("rho", "sigma2")?;
            let target = acov_rho_sigma(3, rho, 1.0)?;
            exact.push(target);
            checks.push(Check::near(10, format!("10.rho={rho}"), v, target, self.k() * se, "n acov of pairwise rho and sigma2"));
        }
        checks.push(Check::new(
            10,
            "10.near_zero_ratio",
            (exact[1] / exact[0]).abs(),
            Relation::LessEq,
            0.2,
            "acov goes to 0 near the lower bound",
        ));
        Ok(checks)
    }

    fn dominance(&self) -> Result<Vec<Check>> {
        let draws = self.opts.level.scale(100_000);
        let opts = DominanceOptions {
            sigmas: self.k(),
            h_shift: self.opts.h_shift,
        };
        let tri = ModelSpec::tri_normal();
        let multi = ModelSpec::multinomial4(5.0)?;
        let (e3, t3) = emvn(3, 0.4, 1.5)?;
        let (e4, t4) = emvn(4, -0.2, 0.8)?;
        let trit = tri.params(&[0.5, -0.3, 2.0])?.fix("rho")?.fix("sigma2")?;
        // Univariate EMVN margins carry no information on rho.
        let design: Vec<(ModelSpec, ParamVector, CompositeSpec)> = vec![
            (e3, t3.clone().fix("rho")?, CompositeSpec::independence(3)),
            (e3, t3.clone(), CompositeSpec::pairwise(3)),
            (e3, t3.clone(), CompositeSpec::full_conditional(3)),
            (e3, t3, CompositeSpec::full(3)),
            (e4, t4.clone().fix("rho")?, CompositeSpec::independence(4)),
            (e4, t4.clone(), CompositeSpec::pairwise(4)),
            (e4, t4.clone(), CompositeSpec::full_conditional(4)),
            (e4, t4, CompositeSpec::full(4)),
            (tri, trit.clone(), CompositeSpec::independence(3)),
            (tri, trit.clone(), CompositeSpec::pairwise(3)),
            (tri, trit.clone(), CompositeSpec::full_conditional(3)),
            (tri, trit, CompositeSpec::full(3)),
            (multi, multi.params(&[0.3])?, CompositeSpec::independence(3)),
            (multi, multi.params(&[0.3])?, CompositeSpec::pairwise(3)),
            (multi, multi.params(&[0.3])?, CompositeSpec::full_conditional(3)),
            (multi, multi.params(&[0.3])?, CompositeSpec::full(3)),
        ];
        let mut checks = Vec::new();
        for (index, (m, t, spec)) in design.iter().enumerate() {
            let seed = derive_seed(self.seed, domain::INFO_DRAW, index as u64);
            let rep = sandwich_dominance(spec, m, t, draws, seed, opts)?;
            let known = if t.free_dim() < t.len() { ".known" } else { "" };
            checks.push(Check::new(
                11,
                format!("11.{}.{}{known}", m.name(), spec.name()),
                -rep.min_eigenvalue,
                Relation::LessEq,
                rep.tolerance,
                "Fisher information dominates Godambe information",
            ));
        }
        Ok(checks)
    }
}
