use super::*;
use crate::linalg::loewner_geq;
use crate::models::Selector;
use crate::params::Role;
use crate::stats::Moments;

fn emvn(p: usize, rho: f64, s2: f64) -> (ModelSpec, ParamVector) {
    let m = ModelSpec::emvn(p).unwrap();
    let t = m.params(&[rho, s2]).unwrap();
    (m, t)
}

fn multinomial(k: f64, theta: f64) -> (ModelSpec, ParamVector) {
    let m = ModelSpec::multinomial4(k).unwrap();
    let t = m.params(&[theta]).unwrap();
    (m, t)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn pairwise_at_two_dims_is_the_joint() {
    let (m, t) = emvn(2, 0.3, 1.7);
    let y = [0.4, -1.1];
    let cl = composite_logdensity(&CompositeSpec::pairwise(2), &m, &y, &t).unwrap();
    assert!((cl - m.joint_logpdf(&y, &t).unwrap()).abs() < 1e-12);
}

#[test]
fn independence_at_zero_correlation_is_the_joint() {
    let (m, t) = emvn(4, 0.0, 2.0);
    let y = [0.4, -1.1, 2.0, 0.3];
    let cl = composite_logdensity(&CompositeSpec::independence(4), &m, &y, &t).unwrap();
    assert!((cl - m.joint_logpdf(&y, &t).unwrap()).abs() < 1e-12);
}

#[test]
fn pairwise_at_zero_correlation_is_a_power_of_the_joint() {
    let (m, t) = emvn(5, 0.0, 0.7);
    let y = [0.4, -1.1, 2.0, 0.3, -0.2];
    let cl = composite_logdensity(&CompositeSpec::pairwise(5), &m, &y, &t).unwrap();
    assert!((cl - 4.0 * m.joint_logpdf(&y, &t).unwrap()).abs() < 1e-10);
}

#[test]
fn analytic_scores_match_finite_differences() {
    let cases: Vec<(ModelSpec, ParamVector, Vec<f64>)> = vec![
        (emvn(3, 0.4, 1.5).0, emvn(3, 0.4, 1.5).1, vec![0.3, -0.8, 1.2]),
        (emvn(4, -0.2, 0.8).0, emvn(4, -0.2, 0.8).1, vec![0.3, -0.8, 1.2, 0.1]),
        (
            ModelSpec::tri_normal(),
            ModelSpec::tri_normal().params(&[0.5, -0.3, 2.0]).unwrap(),
            vec![1.0, -0.2, 0.7],
        ),
        (multinomial(5.0, 0.2).0, multinomial(5.0, 0.2).1, vec![0.0, 1.0, 0.0]),
        (multinomial(2.0, 0.3).0, multinomial(2.0, 0.3).1, vec![0.0, 0.0, 0.0]),
    ];
    for (m, t, y) in cases {
        let dim = m.dim();
        let specs = vec![
            CompositeSpec::independence(dim),
            CompositeSpec::pairwise(dim),
            CompositeSpec::full_conditional(dim),
            CompositeSpec::chain(&[1, 2]).unwrap(),
            CompositeSpec::full(dim),
        ];
        for spec in specs {
            let a = composite_score(&spec, &m, &y, &t).unwrap();
            let n = composite_score_fd(&spec, &m, &y, &t).unwrap();
            for (x, z) in a.iter().zip(&n) {
                assert!(rel_close(*x, *z, 1e-6), "{} on {}: {x} vs {z}", spec, m);
            }
        }
    }
}

#[test]
fn known_parameters_drop_out_of_the_score() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let t = t.fix("sigma2").unwrap();
    let y = [0.3, -0.8, 1.2];
    let s = composite_score(&CompositeSpec::pairwise(3), &m, &y, &t).unwrap();
    assert_eq!(s.len(), 1);
    let fd = composite_score_fd(&CompositeSpec::pairwise(3), &m, &y, &t).unwrap();
    assert!(rel_close(s[0], fd[0], 1e-6));
}

#[test]
fn composite_scores_are_unbiased() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let spec = CompositeSpec::full_conditional(3);
    let kernel = spec.kernel(&m, &t).unwrap();
    let sampler = m.sampler(&t).unwrap();
    let mut mom = Moments::new(2);
    let mut rng = crate::rng::substream(7, 0);
    for _ in 0..100_000 {
        mom.push(&kernel.eval(&sampler.draw(&mut rng)).unwrap());
    }
    let cov = mom.covariance();
    for j in 0..2 {
        let se = (cov.get(j, j) / 100_000.0).sqrt();
        assert!(mom.mean()[j].abs() < 4.0 * se);
    }
}

#[test]
fn emvn_pairwise_score_is_a_linear_image_of_the_full_score() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let spec = CompositeSpec::pairwise(3);
    let info = info_analytic(&spec, &m, &t).unwrap();
    let jhinv = info.j.to_matrix().mul(&info.h.invert().unwrap().to_matrix()).unwrap();
    let data = m.sample(&t, 50, 3).unwrap();
    for y in data.rows() {
        let uc = composite_score(&spec, &m, y, &t).unwrap();
        let u = jhinv.mul_vec(&m.full_score(y, &t).unwrap()).unwrap();
        for (a, b) in uc.iter().zip(&u) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}

#[test]
fn analytic_independence_sensitivity_matches_printed_formula() {
    let (m, t) = multinomial(5.0, 0.2);
    let info = info_analytic(&CompositeSpec::independence(3), &m, &t).unwrap();
    let (th, k) = (0.2, 5.0);
    let h = 2.0 / th + 2.0 / (1.0 - th) + 1.0 / (k * th) + 1.0 / (k * (k - th));
    assert!((info.h.get(0, 0) - h).abs() < 1e-12);
    assert!((h - 13.5417).abs() < 1e-4);
}

#[test]
fn monte_carlo_independence_sensitivity() {
    let (m, t) = multinomial(5.0, 0.2);
    let info = info_monte_carlo(&CompositeSpec::independence(3), &m, &t, 100_000, 11).unwrap();
    let se = info.std_err.as_ref().unwrap();
    assert!((info.h.get(0, 0) - 13.5417).abs() < 3.0 * se.h.get(0, 0));
    assert_eq!(info.provenance, Provenance::MonteCarlo);
    assert_eq!(info.draws, Some(100_000));
}

#[test]
fn full_likelihood_is_information_unbiased() {
    for (m, t) in [emvn(3, 0.4, 1.5), multinomial(5.0, 0.3)] {
        let spec = CompositeSpec::full(m.dim());
        let info = info_monte_carlo(&spec, &m, &t, 50_000, 5).unwrap();
        let se = info.std_err.as_ref().unwrap();
        let fisher = info_analytic(&spec, &m, &t).unwrap().j;
        for r in 0..info.dim() {
            for c in 0..info.dim() {
                assert!((info.h.get(r, c) - fisher.get(r, c)).abs() < 3.0 * se.h.get(r, c));
                assert!((info.j.get(r, c) - fisher.get(r, c)).abs() < 3.0 * se.j.get(r, c));
            }
        }
        assert!(info_bias_measure(&info).unwrap() < 3.0 * info.bias_std_err().unwrap());
    }
}

#[test]
fn emvn_pairwise_is_information_biased() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let info = info_monte_carlo(&CompositeSpec::pairwise(3), &m, &t, 20_000, 5).unwrap();
    assert!(info_bias_measure(&info).unwrap() > 10.0 * info.bias_std_err().unwrap());
}

#[test]
fn monte_carlo_agrees_with_analytic() {
    let cases = vec![
        (CompositeSpec::pairwise(3), emvn(3, -0.3, 0.8)),
        (CompositeSpec::full_conditional(3), emvn(3, 0.6, 1.2)),
        (
            CompositeSpec::margins(&[0, 1, 2]).unwrap(),
            (
                ModelSpec::tri_normal(),
                ModelSpec::tri_normal()
                    .params(&[0.1, 0.3, 2.0])
                    .unwrap()
                    .fix("rho")
                    .unwrap(),
            ),
        ),
        (CompositeSpec::pairwise(3), multinomial(5.0, 0.2)),
    ];
    for (spec, (m, t)) in cases {
        let exact = info_analytic(&spec, &m, &t).unwrap();
        let mc = info_monte_carlo(&spec, &m, &t, 40_000, 21).unwrap();
        let se = mc.std_err.as_ref().unwrap();
        for r in 0..exact.dim() {
            for c in 0..exact.dim() {
                let dh = (mc.h.get(r, c) - exact.h.get(r, c)).abs();
                assert!(dh < 4.0 * se.h.get(r, c) + 1e-7, "{spec} {r}{c}: {dh} {:?}", se.h);
                assert!((mc.j.get(r, c) - exact.j.get(r, c)).abs() < 4.0 * se.j.get(r, c));
                assert!((mc.g.get(r, c) - exact.g.get(r, c)).abs() < 4.0 * se.g.get(r, c));
            }
        }
    }
}

#[test]
fn godambe_is_recomputable_from_h_and_j() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let info = info_monte_carlo(&CompositeSpec::pairwise(3), &m, &t, 5_000, 1).unwrap();
    let g = crate::linalg::sandwich(&info.h, &info.j).unwrap();
    for r in 0..2 {
        for c in 0..2 {
            assert!((g.get(r, c) - info.g.get(r, c)).abs() <= 1e-10 * g.max_abs());
        }
    }
    assert!(info.j.is_psd(0.0));
}

#[test]
fn monte_carlo_is_deterministic() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let spec = CompositeSpec::pairwise(3);
    let a = info_monte_carlo(&spec, &m, &t, 3_000, 9).unwrap();
    let b = info_monte_carlo(&spec, &m, &t, 3_000, 9).unwrap();
    assert_eq!(a.h, b.h);
    assert_eq!(a.j, b.j);
}

#[test]
fn too_few_draws_rejected() {
    let (m, t) = emvn(3, 0.4, 1.5);
    assert!(info_monte_carlo(&CompositeSpec::pairwise(3), &m, &t, 999, 1).is_err());
}

#[test]
fn theorem1_emvn_pairwise_is_fully_efficient() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let rep = theorem1_check(&CompositeSpec::pairwise(3), &m, &t, 10_000, 17).unwrap();
    assert!(rep.fully_efficient, "{rep:?}");
    for j in 0..2 {
        assert!(rep.residual_mean[j].abs() < 3.0 * rep.residual_mean_std_err[j]);
    }
    assert!(rep.residual_cov.is_psd(1e-12));
}

#[test]
fn theorem1_multinomial_pairwise_is_not_fully_efficient() {
    let (m, t) = multinomial(5.0, 0.2);
    let rep = theorem1_check(&CompositeSpec::pairwise(3), &m, &t, 100_000, 17).unwrap();
    assert!(!rep.fully_efficient, "{rep:?}");
    let i_minus_g = rep.fisher.sub(&rep.info.g).unwrap();
    let gap = (rep.residual_cov.get(0, 0) - i_minus_g.get(0, 0)).abs();
    assert!(gap < 3.0 * rep.residual_gap_std_err.get(0, 0) + 1e-12);
    let cross_gap = (rep.info.h.get(0, 0) - rep.cross_cov[(0, 0)]).abs();
    assert!(cross_gap < 3.0 * rep.cross_cov_gap_std_err[(0, 0)]);
}

#[test]
fn theorem1_full_likelihood_has_negligible_residuals() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let rep = theorem1_check(&CompositeSpec::full(3), &m, &t, 10_000, 2).unwrap();
    assert!(rep.fully_efficient);
    assert!(rep.residual_cov.max_abs() < 1e-2 * rep.fisher.max_abs());
}

#[test]
fn projection_recovers_the_full_score() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let spec = CompositeSpec::pairwise(3);
    let info = info_analytic(&spec, &m, &t).unwrap();
    let data = m.sample(&t, 100, 4).unwrap();
    for y in data.rows() {
        let proj = project_score(&info, &composite_score(&spec, &m, y, &t).unwrap()).unwrap();
        let u = m.full_score(y, &t).unwrap();
        for (a, b) in proj.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
    }
}

#[test]
fn projection_is_identity_when_information_unbiased() {
    let (m, t) = multinomial(5.0, 0.3);
    let info = info_analytic(&CompositeSpec::full(3), &m, &t).unwrap();
    let v = project_score(&info, &[1.7]).unwrap();
    assert!((v[0] - 1.7).abs() < 1e-12);
}

#[test]
fn projected_score_is_information_unbiased() {
    let (m, t) = multinomial(5.0, 0.3);
    let spec = CompositeSpec::pairwise(3);
    let exact = info_analytic(&spec, &m, &t).unwrap();
    let proj = ProjectedScore::new(spec, &exact).unwrap();
    let mc = info_monte_carlo(&proj, &m, &t, 50_000, 8).unwrap();
    assert!(info_bias_measure(&mc).unwrap() < 3.0 * mc.bias_std_err().unwrap());
    let star = info_analytic(&proj, &m, &t).unwrap();
    assert!(rel_close(star.g.get(0, 0), exact.g.get(0, 0), 1e-10));
    assert!(rel_close(star.h.get(0, 0), star.j.get(0, 0), 1e-10));
}

#[test]
fn paradox_at_negative_correlation() {
    let (m, t) = emvn(3, -0.45, 1.0);
    let t = t.nuisance("sigma2").unwrap();
    let info = info_analytic(&CompositeSpec::pairwise(3), &m, &t).unwrap();
    let pv = partitioned_variance(&info, &t.partition()).unwrap();
    assert!(pv.avar_known.get(0, 0) > pv.avar_profile.get(0, 0));
    // Known-variance pairwise variance has a closed form.
    let (rho, p) = (-0.45_f64, 3.0_f64);
    let c = (1.0 - rho).powi(2) * (3.0 * rho * rho + 1.0)
        + p * rho * (-3.0 * rho.powi(3) + 8.0 * rho * rho - 3.0 * rho + 2.0)
        + p * p * rho * rho * (1.0 - rho).powi(2);
    let eq1 = 2.0 * (1.0 - rho).powi(2) * c / (p * (p - 1.0) * (1.0 + rho * rho).powi(2));
    assert!(rel_close(pv.avar_known.get(0, 0), eq1, 1e-9));
    let eq2 = 2.0 * (1.0 - rho).powi(2) * (1.0 + 2.0 * rho).powi(2) / 6.0;
    assert!(rel_close(pv.avar_profile.get(0, 0), eq2, 1e-9));
}

#[test]
fn information_unbiased_profile_dominates_known() {
    let (m, t) = emvn(4, 0.3, 1.2);
    let t = t.with_role("sigma2", Role::Nuisance).unwrap();
    let info = info_analytic(&CompositeSpec::full(4), &m, &t).unwrap();
    let pv = partitioned_variance(&info, &t.partition()).unwrap();
    assert!(loewner_geq(&pv.avar_profile, &pv.avar_known, 1e-12).unwrap());
}

#[test]
fn orthogonal_parameters_give_equal_variances() {
    let h = SymMatrix::diag(&[2.0, 5.0]);
    let info = InfoTriple::analytic(h.clone(), h).unwrap();
    let part = crate::params::Partition {
        interest: vec![0],
        nuisance: vec![1],
    };
    let pv = partitioned_variance(&info, &part).unwrap();
    assert!((pv.avar_profile.get(0, 0) - 0.5).abs() < 1e-15);
    assert!((pv.avar_known.get(0, 0) - 0.5).abs() < 1e-15);
    let empty = crate::params::Partition {
        interest: vec![0, 1],
        nuisance: vec![],
    };
    assert!(partitioned_variance(&info, &empty).is_err());
}

use crate::linalg::SymMatrix;

#[test]
fn proposition1_covariance_matches_closed_form() {
    let (m, t) = emvn(3, 0.5, 1.0);
    let t = t.nuisance("sigma2").unwrap();
    let rep = proposition1_diagnostics(&CompositeSpec::pairwise(3), &m, &t, 100_000, 3).unwrap();
    let rho = 0.5;
    let expect = 2.0 * rho * (1.0 - rho) * (1.0 + 2.0 * rho) / 3.0;
    assert!((rep.acov_profile - expect).abs() < 3.0 * rep.acov_profile_std_err);

    let exact = info_analytic(&CompositeSpec::pairwise(3), &m, &t).unwrap();
    let ginv = exact.g.invert().unwrap();
    assert!(rel_close(ginv.get(0, 1), expect, 1e-9));
}

#[test]
fn proposition1_pattern_near_lower_bound() {
    let (m, t) = emvn(3, -0.49, 1.0);
    let t = t.nuisance("sigma2").unwrap();
    let rep = proposition1_diagnostics(&CompositeSpec::pairwise(3), &m, &t, 100_000, 3).unwrap();
    assert!(rep.paradox);
    assert!(rep.acov_profile.abs() < 0.05);
    assert!(rep.acov_known.abs() > 3.0 * rep.acov_known_std_err);
}

#[test]
fn chain_component_scores_are_uncorrelated() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let spec = CompositeSpec::chain(&[0, 1, 2]).unwrap();
    let blocks = component_cross_covariances(&spec, &m, &t, 50_000, 6).unwrap();
    assert_eq!(blocks.len(), 3);
    for b in &blocks {
        assert!(b.max_z() < 4.0, "{b:?}");
    }
}

#[test]
fn pairwise_component_scores_are_correlated() {
    let (m, t) = emvn(3, 0.4, 1.5);
    let blocks = component_cross_covariances(&CompositeSpec::pairwise(3), &m, &t, 50_000, 6).unwrap();
    assert!(blocks.iter().any(|b| b.max_z() > 10.0));
}

#[test]
fn sandwich_dominance_and_its_negative_control() {
    let (m, t) = multinomial(5.0, 0.2);
    let spec = CompositeSpec::independence(3);
    let ok = sandwich_dominance(&spec, &m, &t, 100_000, 12, DominanceOptions::default()).unwrap();
    assert!(ok.holds, "{ok:?}");
    let tampered = DominanceOptions {
        h_shift: 0.1,
        ..DominanceOptions::default()
    };
    let bad = sandwich_dominance(&spec, &m, &t, 100_000, 12, tampered).unwrap();
    assert!(!bad.holds, "{bad:?}");
}

#[test]
fn custom_spec_with_weights() {
    let (m, t) = emvn(3, 0.2, 1.0);
    let spec = CompositeSpec::custom(
        "weighted",
        vec![
            Component {
                selector: Selector::margin(&[0, 1]),
                weight: 2.0,
            },
            Component {
                selector: Selector::conditional(2, &[0]),
                weight: 0.5,
            },
        ],
    )
    .unwrap();
    let y = [0.1, 0.9, -0.4];
    let a = composite_score(&spec, &m, &y, &t).unwrap();
    let n = composite_score_fd(&spec, &m, &y, &t).unwrap();
    for (x, z) in a.iter().zip(&n) {
        assert!(rel_close(*x, *z, 1e-6));
    }
}

#[test]
fn exact_score_means_vanish() {
    let tri = ModelSpec::tri_normal();
    let cases = vec![
        emvn(4, -0.2, 0.8),
        (tri, tri.params(&[0.5, -0.3, 2.0]).unwrap()),
        multinomial(5.0, 0.2),
    ];
    for (m, t) in cases {
        for spec in [
            CompositeSpec::independence(m.dim()),
            CompositeSpec::pairwise(m.dim()),
            CompositeSpec::full_conditional(m.dim()),
        ] {
            for v in score_mean_analytic(&spec, &m, &t).unwrap() {
                assert!(v.abs() < 1e-12, "{spec} on {m}: {v}");
            }
        }
    }
}
