use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;
use typeii::characters::*;
use typeii::cyclic::{random_chain, random_element};
use typeii::fredholm::{random_unbounded, UnboundedModule};
use typeii::linalg::{c, diag_real, random_complex, random_hermitian, CMat};
use typeii::quadrature::QuadratureSpec;
use typeii::semifinite::{Grading, Parity, TraceContext};
use typeii::Error;

fn graded(seed: u64) -> UnboundedModule {
    let ctx = Arc::new(TraceContext::new(&[(4, 1.0), (2, 0.5)]).unwrap());
    let g = Grading::from_signs(&[1, -1, 1, -1, 1, -1]).unwrap();
    random_unbounded(ctx, Some(g), 2, 1.5, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn ungraded(seed: u64) -> UnboundedModule {
    let ctx = Arc::new(TraceContext::new(&[(2, 1.0), (2, 0.5)]).unwrap());
    random_unbounded(ctx, None, 2, 1.5, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn e(i: usize, j: usize, n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = c(1.0, 0.0);
    m
}

#[test]
fn simplex_integrals_in_closed_form() {
    let (a, b) = (0.3f64, 1.7f64);
    assert!((simplex_exp_integral(&[a]) - (-a).exp()).abs() < 1e-15);
    let two = ((-a).exp() - (-b).exp()) / (b - a);
    assert!((simplex_exp_integral(&[a, b]) - two).abs() < 1e-15);
    // confluent nodes: the derivative, then e^{-a}/2 for three equal nodes
    assert!((simplex_exp_integral(&[a, a]) - (-a).exp()).abs() < 1e-14);
    assert!((simplex_exp_integral(&[a, a, a]) - (-a).exp() / 2.0).abs() < 1e-14);
    assert!((simplex_exp_integral(&[0.0; 4]) - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn bracket_for_zero_dirac_is_a_simplex_volume() {
    let ctx = Arc::new(TraceContext::new(&[(3, 0.5)]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = HeatKernel::new(&ctx, &CMat::zeros(3, 3), None, 1.0).unwrap();
    let fs: Vec<CMat> = (0..3).map(|_| random_complex(&mut rng, 3, 3)).collect();
    let prod = &fs[0] * &fs[1] * &fs[2];
    let want = ctx.trace(&prod) / c(2.0, 0.0);
    assert!((k.bracket(&[&fs[0], &fs[1], &fs[2]]).unwrap() - want).norm() < 1e-14);
}

#[test]
fn off_diagonal_bracket_is_a_divided_difference() {
    let ctx = Arc::new(TraceContext::new(&[(2, 1.0)]).unwrap());
    let (l, m) = (0.4f64, 1.1f64);
    let k = HeatKernel::new(&ctx, &diag_real(&[l, m]), None, 1.0).unwrap();
    let v = k.bracket(&[&e(0, 1, 2), &e(1, 0, 2)]).unwrap();
    let want = ((-l * l).exp() - (-m * m).exp()) / (m * m - l * l);
    assert!((v.re - want).abs() < 1e-15 && v.im.abs() < 1e-15);
}

#[test]
fn connes_coefficients() {
    assert!((connes_coefficient(0) - 0.5).abs() < 1e-14);
    assert!((connes_coefficient(1) - std::f64::consts::PI.sqrt() / 4.0).abs() < 1e-14);
    assert!((connes_coefficient(2) - 0.25).abs() < 1e-14);
}

#[test]
fn scalar_factor_matches_gamma() {
    for n in 0..4 {
        let rep = scalar_factor_check(n, &QuadratureSpec::default()).unwrap();
        assert!((rep.exact - gamma(n as f64 / 2.0 + 1.0) / 2.0).abs() < 1e-15);
        assert!(rep.residual <= 1e-10 && rep.pass, "{rep:?}");
    }
}

#[test]
fn parity_mismatch_is_an_error() {
    assert!(matches!(jlo_cochain(&graded(1), 1), Err(Error::Level(_) | Error::Parity(_))));
    assert!(matches!(jlo_cochain(&ungraded(1), 2), Err(Error::Level(_) | Error::Parity(_))));
}

#[test]
fn getzler_rejects_bad_parameters() {
    let m = ungraded(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fs = vec![(None, random_element(&m.ctx, None, &mut rng)); 2];
    assert!(getzler_check(&m, &fs, 0.5, 0.1).is_err());
    assert!(getzler_check(&m, &fs, 0.05, 1.0).is_err());
    assert!(getzler_check(&m, &fs, 0.05, 0.1).unwrap().pass);
}

#[test]
fn jlo_cocycle_on_both_parities() {
    for (m, levels) in [(graded(5), vec![0, 2]), (ungraded(5), vec![1])] {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in levels {
            let cs: Vec<_> = (0..3).map(|_| random_chain(&m.ctx, n + 1, 2, m.grading.as_ref(), &mut rng)).collect();
            let rep = jlo_cocycle_check(&m, n, &cs).unwrap();
            assert!(rep.pass && rep.max_relative <= 1e-8, "{rep:?}");
        }
    }
}

#[test]
fn duhamel_converges_at_second_order() {
    let m = ungraded(8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v = random_hermitian(&mut rng, 4);
    let v = m.ctx.assemble(&[m.ctx.block(&v, 0), m.ctx.block(&v, 1)]);
    let fs: Vec<CMat> = (0..2).map(|_| random_element(&m.ctx, None, &mut rng)).collect();
    let rep = duhamel_check(&m, &v, &fs, 0.02).unwrap();
    let slope = rep.slope.expect("non-trivial derivative");
    assert!(rep.pass && (slope - 2.0).abs() < 0.4, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn divided_differences_match_quadrature(seed in any::<u64>(), d in 2usize..5, n in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = Arc::new(TraceContext::new(&[(d, 1.0)]).unwrap());
        let h = random_hermitian(&mut rng, d) * c(rng.gen_range(0.2..2.0), 0.0);
        let k = HeatKernel::new(&ctx, &h, None, 1.0).unwrap();
        let fs: Vec<CMat> = (0..=n).map(|_| random_complex(&mut rng, d, d)).collect();
        let refs: Vec<&CMat> = fs.iter().collect();
        let exact = k.bracket(&refs).unwrap();
        let q = k.bracket_nested_quadrature(&refs, 1e-10).unwrap();
        prop_assert!((exact - q).norm() <= 1e-8 * exact.norm().max(1e-3));
    }

    #[test]
    fn bracket_lemmas(seed in any::<u64>(), graded_module in any::<bool>()) {
        let m = if graded_module { graded(seed) } else { ungraded(seed) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
        let fs: Vec<(CMat, Parity)> = (0..3)
            .map(|k| {
                let x = random_element(&m.ctx, None, &mut rng);
                match &m.grading {
                    Some(g) if k % 2 == 1 => (g.odd_part(&x), Parity::Odd),
                    Some(g) => (g.even_part(&x), Parity::Even),
                    None => (x, Parity::Unassigned),
                }
            })
            .collect();
        for v in [LemmaVariant::Cyclic, LemmaVariant::InsertOnes, LemmaVariant::BracketD] {
            let rep = lemma_misc_check(&m, &fs, v, 0).unwrap();
            prop_assert!(rep.pass, "{:?}", rep);
        }
        for j in 1..3 {
            let rep = lemma_misc_check(&m, &fs, LemmaVariant::BracketD2, j).unwrap();
            prop_assert!(rep.pass, "{:?}", rep);
        }
    }

    #[test]
    fn jlo_vanishes_on_degenerate_chains(seed in any::<u64>()) {
        let m = ungraded(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = jlo_cochain(&m, 3).unwrap();
        let mut entries: Vec<CMat> = (0..4).map(|_| random_element(&m.ctx, None, &mut rng)).collect();
        entries[2] = m.ctx.identity() * c(1.3, 0.0);
        let v = typeii::cyclic::Cochain::evaluate(&ch, &entries).unwrap();
        prop_assert!(v.norm() < 1e-12);
    }
}
