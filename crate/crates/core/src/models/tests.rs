use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;

fn emvn(p: usize, rho: f64, s2: f64) -> (ModelSpec, ParamVector) {
    let m = ModelSpec::emvn(p).unwrap();
    let t = m.params(&[rho, s2]).unwrap();
    (m, t)
}

#[test]
fn standard_normal_margin_at_zero() {
    let (m, t) = emvn(3, 0.0, 1.0);
    let lp = m.margin_logpdf(&[0], &[0.0, 0.0, 0.0], &t).unwrap();
    assert!((lp - (1.0 / (2.0 * PI).sqrt()).ln()).abs() < 1e-15);
}

#[test]
fn multinomial_third_cell_margin() {
    let m = ModelSpec::multinomial4(5.0).unwrap();
    let t = m.params(&[0.2]).unwrap();
    let lp = m.margin_logpdf(&[2], &[0.0, 0.0, 1.0], &t).unwrap();
    assert!((lp - 0.04_f64.ln()).abs() < 1e-15);
}

#[test]
fn bivariate_margin_matches_closed_form_density() {
    let (m, t) = emvn(3, 0.5, 1.0);
    let lp = m.margin_logpdf(&[0, 1], &[0.0, 0.0, 7.0], &t).unwrap();
    let want = (1.0 / (2.0 * PI * (1.0 - 0.25_f64).sqrt())).ln();
    assert!((lp - want).abs() < 1e-14);
    // off the origin: exp(-(x² - 2ρxy + y²) / (2(1-ρ²)))
    let (x, y) = (0.3, -1.1);
    let lp = m.margin_logpdf(&[0, 1], &[x, y, 0.0], &t).unwrap();
    let q = (x * x - 2.0 * 0.5 * x * y + y * y) / (2.0 * 0.75);
    assert!((lp - (want - q)).abs() < 1e-14);
}

#[test]
fn independent_conditional_equals_margin() {
    let (m, t) = emvn(4, 0.0, 1.7);
    let y = [0.4, -1.0, 2.0, 0.1];
    for target in 0..4 {
        let given: Vec<usize> = (0..4).filter(|&i| i != target).collect();
        let c = m.conditional_logpdf(target, &given, &y, &t).unwrap();
        let mg = m.margin_logpdf(&[target], &y, &t).unwrap();
        assert!((c - mg).abs() < 1e-14);
    }
}

#[test]
fn equicorrelated_conditional_variance() {
    let (m, t) = emvn(3, 0.5, 1.0);
    let (_, var) = m.conditional_moments(0, &[1, 2], &[0.0; 3], &t).unwrap();
    // (1-ρ)(1+2ρ)/(1+ρ) at ρ = 0.5
    assert!((var - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn conditional_variance_matches_regression_residual() {
    let (m, t) = emvn(3, 0.5, 1.0);
    let data = m.sample(&t, 100_000, 11).unwrap();
    // residual of y1 on (y2, y3) with the population coefficients ρ/(1+ρ)
    let b = 0.5 / 1.5;
    let resid: Vec<f64> = data.rows().map(|r| r[0] - b * (r[1] + r[2])).collect();
    let var = crate::stats::variance(&resid);
    let se = (2.0_f64 / 100_000.0).sqrt() * (2.0 / 3.0);
    assert!((var - 2.0 / 3.0).abs() < 4.0 * se, "var {var}");
}

#[test]
fn domain_violations() {
    let m = ModelSpec::emvn(3).unwrap();
    assert!(matches!(m.params(&[-0.5, 1.0]), Err(Error::Domain { .. })));
    assert!(matches!(m.params(&[-0.5 + 1e-9, 1.0]), Err(Error::Domain { .. })));
    assert!(m.params(&[-0.49, 1.0]).is_ok());
    assert!(matches!(m.params(&[0.2, 0.0]), Err(Error::Domain { .. })));
    let mm = ModelSpec::multinomial4(5.0).unwrap();
    assert!(mm.params(&[5.0 / 11.0]).is_err());
    assert!(mm.params(&[0.0]).is_err());
    assert!(ModelSpec::multinomial4(0.0).is_err());
    assert!(ModelSpec::emvn(1).is_err());
    let tn = ModelSpec::tri_normal();
    assert!(tn.params(&[0.0, 1.0, 2.0]).is_err());
}

#[test]
fn selector_validation() {
    let m = ModelSpec::emvn(3).unwrap();
    let t = m.params(&[0.1, 1.0]).unwrap();
    let y = [0.0; 3];
    assert!(m.conditional_logpdf(1, &[1, 2], &y, &t).is_err());
    assert!(m.margin_logpdf(&[], &y, &t).is_err());
    assert!(m.margin_logpdf(&[3], &y, &t).is_err());
    assert!(m.margin_logpdf(&[0], &[0.0; 2], &t).is_err());
}

#[test]
fn multinomial_sample_mean_band() {
    let m = ModelSpec::multinomial4(5.0).unwrap();
    let t = m.params(&[0.2]).unwrap();
    let n = 100_000;
    let d = m.sample(&t, n, 3).unwrap();
    let band = 3.0 * (0.2 * 0.8 / n as f64).sqrt();
    assert!((d.column_mean(0) - 0.2).abs() < band);
    assert!((d.column_mean(2) - 0.04).abs() < 3.0 * (0.04 * 0.96 / n as f64).sqrt());
    assert!(d.rows().all(|r| r.iter().sum::<f64>() <= 1.0));
}

#[test]
fn emvn_sample_correlation_and_covariance() {
    let (m, t) = emvn(3, 0.5, 1.0);
    let n = 100_000;
    let d = m.sample(&t, n, 5).unwrap();
    let mut mom = crate::stats::Moments::new(3);
    d.rows().for_each(|r| mom.push(r));
    let c = mom.covariance();
    let corr = c.get(0, 1) / (c.get(0, 0) * c.get(1, 1)).sqrt();
    assert!((corr - 0.5).abs() < 0.01, "corr {corr}");
    // entrywise 3-sigma bands: Var(y_i y_j) = σ_ii σ_jj + σ_ij²
    for i in 0..3 {
        for j in 0..3 {
            let s = if i == j { 1.0 } else { 0.5 };
            let se = ((1.0 + s * s) / n as f64).sqrt();
            assert!((c.get(i, j) - s).abs() < 3.0 * se, "({i},{j}) {}", c.get(i, j));
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let (m, t) = emvn(4, -0.2, 2.0);
    assert_eq!(m.sample(&t, 50, 9).unwrap(), m.sample(&t, 50, 9).unwrap());
    assert_ne!(m.sample(&t, 50, 9).unwrap(), m.sample(&t, 50, 10).unwrap());
    let mm = ModelSpec::multinomial4(2.0).unwrap();
    let tt = mm.params(&[0.3]).unwrap();
    assert_eq!(mm.sample(&tt, 50, 1).unwrap(), mm.sample(&tt, 50, 1).unwrap());
}

fn fd_score(m: &ModelSpec, y: &[f64], t: &ParamVector) -> Vec<f64> {
    t.free_indices()
        .into_iter()
        .map(|i| {
            let v = t.values()[i];
            let h = 1e-5 * v.abs().max(1.0);
            let name = t.names()[i];
            let up = t.clone().with_value(name, v + h).unwrap();
            let dn = t.clone().with_value(name, v - h).unwrap();
            (m.joint_logpdf(y, &up).unwrap() - m.joint_logpdf(y, &dn).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn assert_rel(a: &[f64], b: &[f64], tol: f64) {
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0), "{a:?} vs {b:?}");
    }
}

#[test]
fn full_score_matches_finite_differences() {
    let (m, t) = emvn(3, 0.0, 1.0);
    assert_rel(&m.full_score(&[0.0; 3], &t).unwrap(), &fd_score(&m, &[0.0; 3], &t), 1e-6);
    // σ²-score at y = 0 and ρ = 0 is -p/(2σ²)
    assert!((m.full_score(&[0.0; 3], &t).unwrap()[1] + 1.5).abs() < 1e-12);

    let (m, t) = emvn(4, 0.35, 1.8);
    let y = [0.3, -1.2, 0.8, 2.0];
    assert_rel(&m.full_score(&y, &t).unwrap(), &fd_score(&m, &y, &t), 1e-6);

    let tn = ModelSpec::tri_normal();
    let t = tn.params(&[0.4, -0.3, 2.5]).unwrap();
    let y = [1.0, -0.5, 2.2];
    assert_rel(&tn.full_score(&y, &t).unwrap(), &fd_score(&tn, &y, &t), 1e-6);
    let t = t.fix("sigma2").unwrap();
    assert_eq!(tn.full_score(&y, &t).unwrap().len(), 2);

    let mm = ModelSpec::multinomial4(5.0).unwrap();
    let t = mm.params(&[0.2]).unwrap();
    for y in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]] {
        assert_rel(&mm.full_score(&y, &t).unwrap(), &fd_score(&mm, &y, &t), 1e-6);
    }
}

#[test]
fn multinomial_score_vanishes_at_mle() {
    let mm = ModelSpec::multinomial4(5.0).unwrap();
    let t = mm.params(&[0.2]).unwrap();
    let d = mm.sample(&t, 1000, 2).unwrap();
    let mle = (d.column_mean(0) + d.column_mean(1) + d.column_mean(2)) / 2.2;
    let at = t.clone().with_value("theta", mle).unwrap();
    let total: f64 = d.rows().map(|r| mm.full_score(r, &at).unwrap()[0]).sum();
    assert!(total.abs() < 1e-8 * 1000.0, "score sum {total}");
}

#[test]
fn fisher_information_closed_form_and_monte_carlo() {
    let mm = ModelSpec::multinomial4(5.0).unwrap();
    let t = mm.params(&[0.2]).unwrap();
    let fi = mm.fisher_information(&t, 0, 0).unwrap();
    assert!((fi.info.get(0, 0) - 1.0 / (0.2 / 2.2 - 0.04)).abs() < 1e-12);
    assert!((fi.info.get(0, 0) - 19.642_857).abs() < 1e-5);

    let tn = ModelSpec::tri_normal();
    let t = tn.params(&[0.0, 0.0, 2.0]).unwrap().fix("rho").unwrap().fix("sigma2").unwrap();
    let fi = tn.fisher_information(&t, 100_000, 1).unwrap();
    let se = fi.std_err.unwrap().get(0, 0);
    assert!((fi.info.get(0, 0) - 2.5).abs() < 3.0 * se, "{} ± {se}", fi.info.get(0, 0));
}

#[test]
fn score_is_unbiased_under_the_model() {
    let cases: Vec<(ModelSpec, ParamVector)> = vec![
        emvn(3, 0.4, 1.5),
        (ModelSpec::tri_normal(), ModelSpec::tri_normal().params(&[0.5, 0.3, 2.0]).unwrap()),
        {
            let m = ModelSpec::multinomial4(5.0).unwrap();
            (m, m.params(&[0.3]).unwrap())
        },
    ];
    for (m, t) in cases {
        let d = m.sample(&t, 100_000, 17).unwrap();
        let mut mom = crate::stats::Moments::new(t.free_dim());
        d.rows().for_each(|r| mom.push(&m.full_score(r, &t).unwrap()));
        let cov = mom.covariance();
        for j in 0..t.free_dim() {
            let se = (cov.get(j, j) / d.n() as f64).sqrt();
            assert!(mom.mean()[j].abs() < 4.0 * se, "{m} coord {j}: {}", mom.mean()[j]);
        }
    }
}

#[test]
fn multinomial_cells_sum_to_one() {
    for &(k, frac) in &[(0.3, 0.2), (1.0, 0.5), (5.0, 0.9), (100.0, 0.01)] {
        let s = MultinomialStructure {
            theta: frac * k / (2.0 * k + 1.0),
            k,
        };
        let p = s.cell_probs();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&x| x > 0.0));
    }
}

fn chain_sum(m: &ModelSpec, y: &[f64], t: &ParamVector) -> f64 {
    (0..m.dim())
        .map(|i| {
            let given: Vec<usize> = (0..i).collect();
            m.conditional_logpdf(i, &given, y, t).unwrap()
        })
        .sum()
}

proptest! {
    #[test]
    fn chain_rule_emvn(p in 2usize..6, rf in 0.02f64..0.98, s2 in 0.2f64..4.0,
                       y in proptest::collection::vec(-3.0f64..3.0, 6)) {
        let lo = -1.0 / (p as f64 - 1.0);
        let rho = lo + rf * (1.0 - lo);
        let (m, t) = emvn(p, rho, s2);
        let y = &y[..p];
        let joint = m.joint_logpdf(y, &t).unwrap();
        prop_assert!((chain_sum(&m, y, &t) - joint).abs() < 1e-10);
    }

    #[test]
    fn chain_rule_trinormal(mu in -2.0f64..2.0, rho in -0.95f64..0.95, s2 in 0.2f64..4.0,
                            y in proptest::collection::vec(-3.0f64..3.0, 3)) {
        let m = ModelSpec::tri_normal();
        let t = m.params(&[mu, rho, s2]).unwrap();
        let joint = m.joint_logpdf(&y, &t).unwrap();
        prop_assert!((chain_sum(&m, &y, &t) - joint).abs() < 1e-10);
        // reverse order chain as well
        let rev = m.margin_logpdf(&[2], &y, &t).unwrap()
            + m.conditional_logpdf(1, &[2], &y, &t).unwrap()
            + m.conditional_logpdf(0, &[1, 2], &y, &t).unwrap();
        prop_assert!((rev - joint).abs() < 1e-10);
    }

    #[test]
    fn chain_rule_multinomial(k in 0.1f64..20.0, frac in 0.02f64..0.98, cell in 0usize..4) {
        let m = ModelSpec::multinomial4(k).unwrap();
        let t = m.params(&[frac * k / (2.0 * k + 1.0)]).unwrap();
        let y: Vec<f64> = (0..3).map(|i| if i == cell { 1.0 } else { 0.0 }).collect();
        let joint = m.joint_logpdf(&y, &t).unwrap();
        prop_assert!((chain_sum(&m, &y, &t) - joint).abs() < 1e-10);
    }
}

#[test]
fn summaries_reproduce_row_totals() {
    let sels = [
        Selector::margin(&[0, 2]),
        Selector::conditional(1, &[0, 2]),
        Selector::margin(&[1]),
    ];
    let gauss = ModelSpec::tri_normal();
    let multi = ModelSpec::multinomial4(3.0).unwrap();
    let cases = [
        (gauss, gauss.params(&[0.3, 0.5, 1.7]).unwrap()),
        (multi, multi.params(&[0.15]).unwrap()),
    ];
    for (m, t) in cases {
        let data = m.sample(&t, 300, 4).unwrap();
        let s = DataSummary::new(&m, &data).unwrap();
        assert_eq!(s.n(), 300);
        let st = m.structure(&t).unwrap();
        for sel in &sels {
            let rows: f64 = data.rows().map(|y| m.logpdf(sel, y, &t).unwrap()).sum();
            let total = ModelSpec::total_logpdf_with(&st, sel, &s).unwrap();
            assert!((rows - total).abs() < 1e-9 * rows.abs().max(1.0));

            let k = ModelSpec::selector_kernel(&st, sel).unwrap();
            let mut by_row = vec![0.0; k.coords()];
            for y in data.rows() {
                for (a, b) in by_row.iter_mut().zip(k.eval(y).unwrap()) {
                    *a += b;
                }
            }
            for (a, b) in by_row.iter().zip(k.eval_total(&s).unwrap()) {
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
