use proptest::prelude::*;

use super::closed_form::cubic_roots_in;
use super::*;
use crate::composite::{info_analytic, CompositeSpec};

fn emvn(p: usize, rho: f64, s2: f64) -> (ModelSpec, ParamVector) {
    let m = ModelSpec::emvn(p).unwrap();
    let t = m.params(&[rho, s2]).unwrap();
    (m, t)
}

#[test]
fn cubic_roots() {
    // (x - 0.5)(x + 0.2)(x - 3) = x³ - 3.3x² + 0.8x + 0.3
    let r = cubic_roots_in([0.3, 0.8, -3.3, 1.0], -1.0, 1.0);
    assert_eq!(r.len(), 2);
    assert!((r[0] + 0.2).abs() < 1e-14);
    assert!((r[1] - 0.5).abs() < 1e-14);
    assert!(cubic_roots_in([1.0, 0.0, 0.0, 1.0], 0.0, 1.0).is_empty());
}

#[test]
fn multinomial_newton_matches_closed_form() {
    let m = ModelSpec::multinomial4(5.0).unwrap();
    let t = m.params(&[0.2]).unwrap();
    let data = m.sample(&t, 2_000, 1).unwrap();
    let spec = CompositeSpec::full(3);
    let start = m.params(&[0.1]).unwrap();
    let newton = mcle_newton(&spec, &m, &data, &start).unwrap();
    assert!(newton.converged);
    assert_eq!(newton.solver, Solver::Newton);
    let exact = (0..3).map(|j| data.column_mean(j)).sum::<f64>() / 2.2;
    assert!((newton.theta_hat.values()[0] - exact).abs() < 1e-10);
    let cf = closed_form(ClosedForm::MultinomialMle, &m, &data, &t).unwrap();
    assert!((cf.theta_hat.values()[0] - exact).abs() < 1e-15);
    assert!(cf.converged);
}

#[test]
fn trinormal_cl123_newton_matches_closed_form() {
    let m = ModelSpec::tri_normal();
    let t = m
        .params(&[0.4, 0.3, 2.0])
        .unwrap()
        .fix("rho")
        .unwrap()
        .fix("sigma2")
        .unwrap();
    let data = m.sample(&t, 1_000, 2).unwrap();
    let spec = CompositeSpec::margins(&[0, 1, 2]).unwrap();
    let start = t.clone().with_value("mu", -1.0).unwrap();
    let newton = mcle_newton(&spec, &m, &data, &start).unwrap();
    let (y1, y2, y3) = (data.column_mean(0), data.column_mean(1), data.column_mean(2));
    let exact = (2.0 * (y1 + y2) + y3) / 5.0;
    assert!((newton.theta_hat.get("mu").unwrap() - exact).abs() < 1e-10);
    let cf = fit(&spec, &m, &data, &t).unwrap();
    assert_eq!(cf.solver, Solver::ClosedForm);
    assert!((cf.theta_hat.get("mu").unwrap() - exact).abs() < 1e-14);
}

#[test]
fn mu12_is_the_average_of_two_means() {
    let m = ModelSpec::tri_normal();
    let data = Dataset::from_rows(&[vec![0.0, 2.0, 5.0], vec![2.0, 4.0, -1.0]]).unwrap();
    let t = m
        .params(&[0.0, 0.3, 2.0])
        .unwrap()
        .fix("rho")
        .unwrap()
        .fix("sigma2")
        .unwrap();
    let r = closed_form(ClosedForm::TriNormalMu12, &m, &data, &t).unwrap();
    assert!((r.theta_hat.get("mu").unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn multinomial_mle_formula() {
    let m = ModelSpec::multinomial4(5.0).unwrap();
    let t = m.params(&[0.2]).unwrap();
    let rows = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ];
    let data = Dataset::from_rows(&rows).unwrap();
    let r = closed_form(ClosedForm::MultinomialMle, &m, &data, &t).unwrap();
    assert!((r.theta_hat.values()[0] - 0.6 / 2.2).abs() < 1e-15);
}

#[test]
fn closed_form_rejects_mismatched_roles() {
    let (m, t) = emvn(3, 0.5, 1.0);
    let data = m.sample(&t, 50, 1).unwrap();
    assert!(closed_form(ClosedForm::EmvnPairwiseKnownVariance, &m, &data, &t).is_err());
    assert!(closed_form(ClosedForm::TriNormalMu12, &m, &data, &t).is_err());
}

#[test]
fn pairwise_closed_forms_agree_with_newton() {
    let spec = CompositeSpec::pairwise(3);
    for r in 0..50u64 {
        let rho = -0.4 + 0.025 * r as f64;
        let (m, t) = emvn(3, rho, 1.0);
        let data = m.sample(&t, 200, 100 + r).unwrap();

        let cf = closed_form(ClosedForm::EmvnPairwise, &m, &data, &t).unwrap();
        assert!(cf.converged, "rep {r}: {cf:?}");
        let nt = mcle_newton(&spec, &m, &data, &default_start(&m, &data, &t).unwrap()).unwrap();
        for (a, b) in cf.theta_hat.values().iter().zip(nt.theta_hat.values()) {
            assert!((a - b).abs() < 1e-8, "rep {r}: {a} vs {b}");
        }

        let known = t.clone().fix("sigma2").unwrap();
        let cf = closed_form(ClosedForm::EmvnPairwiseKnownVariance, &m, &data, &known).unwrap();
        assert!(cf.converged, "rep {r}: {cf:?}");
        let start = known.clone().with_value("rho", 0.0).unwrap();
        let opts = NewtonOptions {
            multistart: true,
            ..NewtonOptions::default()
        };
        let nt = mcle_newton_with(&spec, &m, &data, &start, &opts).unwrap();
        let (a, b) = (cf.theta_hat.get("rho").unwrap(), nt.theta_hat.get("rho").unwrap());
        assert!((a - b).abs() < 1e-8, "rep {r}: {a} vs {b}");
    }
}

#[test]
fn pairwise_estimator_is_the_full_mle() {
    for seed in 0..5u64 {
        for rho in [-0.3, 0.2, 0.7] {
            let (m, t) = emvn(3, rho, 1.3);
            let data = m.sample(&t, 300, seed).unwrap();
            let pl = fit(&CompositeSpec::pairwise(3), &m, &data, &t).unwrap();
            let full = fit(&CompositeSpec::full(3), &m, &data, &t).unwrap();
            let fc = fit(&CompositeSpec::full_conditional(3), &m, &data, &t).unwrap();
            assert_eq!(full.solver, Solver::Newton);
            let r = pl.theta_hat.get("rho").unwrap();
            assert!((full.theta_hat.get("rho").unwrap() - r).abs() < 1e-6);
            assert!((fc.theta_hat.get("rho").unwrap() - r).abs() < 1e-6);
        }
    }
}

#[test]
fn estimates_fall_in_the_sandwich_band() {
    let n = 10_000;
    let cases: Vec<(CompositeSpec, ModelSpec, ParamVector)> = vec![
        (CompositeSpec::pairwise(3), emvn(3, 0.4, 1.5).0, emvn(3, 0.4, 1.5).1),
        (
            CompositeSpec::full_conditional(4),
            emvn(4, -0.2, 0.8).0,
            emvn(4, -0.2, 0.8).1,
        ),
        (
            CompositeSpec::independence(3),
            ModelSpec::multinomial4(5.0).unwrap(),
            ModelSpec::multinomial4(5.0).unwrap().params(&[0.3]).unwrap(),
        ),
    ];
    for (spec, m, t) in cases {
        let data = m.sample(&t, n, 77).unwrap();
        let est = fit(&spec, &m, &data, &t).unwrap();
        assert!(est.converged);
        let avar = info_analytic(&spec, &m, &t).unwrap().avar().unwrap();
        for (j, (a, b)) in est.theta_hat.free_values().iter().zip(t.free_values()).enumerate() {
            let band = 4.0 * (avar.get(j, j) / n as f64).sqrt();
            assert!((a - b).abs() < band, "{spec}: {a} vs {b}, band {band}");
        }
    }
}

#[test]
fn newton_ignores_row_order() {
    let (m, t) = emvn(3, 0.3, 1.0);
    let data = m.sample(&t, 400, 5).unwrap();
    let mut rows: Vec<Vec<f64>> = data.rows().map(|r| r.to_vec()).collect();
    rows.reverse();
    let shuffled = Dataset::from_rows(&rows).unwrap();
    let spec = CompositeSpec::full_conditional(3);
    let a = fit(&spec, &m, &data, &t).unwrap();
    let b = fit(&spec, &m, &shuffled, &t).unwrap();
    for (x, y) in a.theta_hat.values().iter().zip(b.theta_hat.values()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let (m, t) = emvn(3, 0.3, 1.0);
    let data = m.sample(&t, 400, 5).unwrap();
    let start = m.params(&[-0.4, 3.0]).unwrap();
    let opts = NewtonOptions {
        max_iter: 1,
        ..NewtonOptions::default()
    };
    let r = mcle_newton_with(&CompositeSpec::full(3), &m, &data, &start, &opts).unwrap();
    assert!(!r.converged);
    assert!(matches!(r.require_converged(), Err(Error::NotConverged { .. })));
}

#[test]
fn start_outside_domain_is_rejected() {
    let m = ModelSpec::emvn(3).unwrap();
    let data = m.sample(&m.params(&[0.3, 1.0]).unwrap(), 10, 1).unwrap();
    let bad = ParamVector::new(m.param_names(), &[-0.7, 1.0]).unwrap();
    let err = mcle_newton(&CompositeSpec::pairwise(3), &m, &data, &bad).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_forms_zero_the_pairwise_score(rho in -0.45f64..0.95, s2 in 0.3f64..3.0, seed in 0u64..1000) {
        let (m, t) = emvn(3, rho, s2);
        let data = m.sample(&t, 100, seed).unwrap();
        let spec = CompositeSpec::pairwise(3);
        let free = closed_form(ClosedForm::EmvnPairwise, &m, &data, &t);
        if let Ok(r) = free {
            let obj = Objective::new(&spec, &m, &data, &t).unwrap();
            let s = obj.score(&r.theta_hat.free_values()).unwrap();
            prop_assert!(s.iter().all(|v| v.abs() < 1e-8 * 100.0));
        }
        let known = t.fix("sigma2").unwrap();
        if let Ok(r) = closed_form(ClosedForm::EmvnPairwiseKnownVariance, &m, &data, &known) {
            prop_assert!(r.converged);
        }
    }
}
