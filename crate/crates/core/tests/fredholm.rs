use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typeii::cyclic::random_element;
use typeii::fredholm::*;
use typeii::linalg::{c, diag_real, from_real_rows, op_norm, random_complex, random_hermitian, random_unitary, CMat};
use typeii::semifinite::{Grading, TraceContext};
use typeii::Error;

fn type_i() -> UnboundedModule {
    let ctx = Arc::new(TraceContext::new(&[(2, 1.0)]).unwrap());
    let d = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let g = Grading::from_signs(&[1, -1]).unwrap();
    UnboundedModule::new(ctx, d, Some(g), vec![diag_real(&[1.0, 0.0])]).unwrap()
}

fn fractional() -> UnboundedModule {
    let ctx = Arc::new(TraceContext::new(&[(3, 1.0 / 3.0)]).unwrap());
    let g = Grading::from_signs(&[1, 1, -1]).unwrap();
    UnboundedModule::new(ctx, CMat::zeros(3, 3), Some(g), vec![]).unwrap()
}

/// A random projection commuting with the block structure, of random rank in each block.
fn random_projection(ctx: &TraceContext, rng: &mut ChaCha8Rng) -> CMat {
    let pieces: Vec<CMat> = ctx
        .blocks()
        .iter()
        .map(|b| {
            let u = random_unitary(rng, b.dim);
            let d: Vec<f64> = (0..b.dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            &u * diag_real(&d) * u.adjoint()
        })
        .collect();
    ctx.assemble(&pieces)
}

#[test]
fn type_i_worked_example() {
    let m = type_i();
    let b = m.to_bounded().unwrap();
    let p = diag_real(&[1.0, 0.0]);
    assert_eq!(pairing_even_bounded(&b, &p, 1).unwrap().value, 1.0);
    for k in [1, 3] {
        assert!((pairing_even_parametrix(&b, &p, 1, k).unwrap().value - 1.0).abs() < 1e-12);
    }
    for t in [0.5, 1.0, 2.0] {
        assert!((mckean_singer(&m, &p, 1, t).unwrap().value - 1.0).abs() < 1e-12);
    }
    for level in [0, 2, 4] {
        assert!((connes_pairing_even(&b, &p, 1, level).unwrap().value - 1.0).abs() < 1e-12);
    }
    let jlo = jlo_pairing_even(&m, &p, 1, 6).unwrap();
    assert!((jlo.value - 1.0).abs() <= 1e-8 + jlo.diagnostics.get("tail_bound").copied().unwrap_or(0.0));
}

#[test]
fn odd_example_has_index_zero() {
    let ctx = Arc::new(TraceContext::new(&[(2, 1.0)]).unwrap());
    let m = UnboundedModule::new(ctx, diag_real(&[1.0, -1.0]), None, vec![]).unwrap();
    let b = m.to_bounded().unwrap();
    let u = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    assert_eq!(pairing_odd_bounded(&b, &u, 1).unwrap().value, 0.0);
    assert!(connes_pairing_odd(&b, &u, 1, 1).unwrap().value.abs() < 1e-12);
    assert!(spectral_flow_pairing(&m, &u, 1).unwrap().value.abs() < 1e-12);
}

#[test]
fn fractional_example_needs_doubling_for_the_phase() {
    let m = fractional();
    let one = m.ctx.identity();
    assert!(matches!(m.to_bounded(), Err(Error::NotInvertible(_))));
    assert!((mckean_singer(&m, &one, 1, 1.0).unwrap().value - 1.0 / 3.0).abs() < 1e-14);
    let dd = m.doubled();
    let b = dd.to_bounded().unwrap();
    let big_one = m.ctx.embed_first_copy(&one);
    let k = pairing_even_bounded(&b, &big_one, 1).unwrap().value;
    assert!((k - 1.0 / 3.0).abs() < 1e-14, "{k}");
}

#[test]
fn ef_index_of_a_compression() {
    let ctx = TraceContext::new(&[(2, 1.0)]).unwrap();
    let (e, f) = (ctx.identity(), diag_real(&[1.0, 0.0]));
    let r = ef_index_kernel(&ctx, &e, &f, &ctx.identity(), DEFAULT_KERNEL_TOL).unwrap();
    assert_eq!(r.value, 1.0);
    assert!(ef_index_kernel(&ctx, &from_real_rows(&[&[1.0, 1.0], &[0.0, 0.0]]), &f, &e, 1e-9).is_err());
}

#[test]
fn spectral_flow_counts_weighted_crossings() {
    let ctx = TraceContext::new(&[(2, 1.0), (1, 0.5)]).unwrap();
    let path: Vec<CMat> = (0..=8)
        .map(|k| {
            let t = k as f64 / 8.0;
            diag_real(&[2.0, 1.0 - 2.0 * t, -1.0 + 2.0 * t])
        })
        .collect();
    // block 0 goes down once, block 1 (weight 1/2) goes up once
    let r = spectral_flow(&ctx, &path).unwrap();
    assert!((r.value - (0.5 - 1.0)).abs() < 1e-15, "{r:?}");
    assert!(spectral_flow(&ctx, &path[..1]).is_err());
}

#[test]
fn log_constants_are_pi_and_zero() {
    let k = log_constants().unwrap();
    assert!((k.c1 - std::f64::consts::PI).abs() < 1e-8);
    assert!(k.c1_prime.abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_index_equals_parametrix_index(seed in any::<u64>(), m in 1u32..4, degenerate in any::<bool>()) {
        let ctx = TraceContext::new(&[(3, 1.0), (2, 0.25)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_projection(&ctx, &mut rng);
        let f = random_projection(&ctx, &mut rng);
        let mut t = random_element(&ctx, None, &mut rng);
        if degenerate {
            // a rank-deficient operator in the first block
            let u = random_complex(&mut rng, 3, 1);
            let low = &u * u.adjoint();
            t = ctx.assemble(&[low, ctx.block(&t, 1)]);
        }
        let k = ef_index_kernel(&ctx, &e, &f, &t, DEFAULT_KERNEL_TOL).unwrap().value;
        let s = pseudo_parametrix(&ctx, &e, &f, &t).unwrap();
        let p = ef_index_parametrix(&ctx, &e, &f, &t, &s, m).unwrap().value;
        prop_assert!((k - p).abs() <= 1e-8, "kernel {} parametrix {}", k, p);
    }

    #[test]
    fn doubling_squares_to_shifted_laplacian(seed in any::<u64>(), graded in any::<bool>()) {
        let ctx = Arc::new(TraceContext::new(&[(2, 1.0), (2, 0.5)]).unwrap());
        let g = graded.then(|| Grading::from_signs(&[1, -1, 1, -1]).unwrap());
        let m = random_unbounded(ctx, g, 1, 1.5, &mut ChaCha8Rng::seed_from_u64(seed));
        let dd = m.doubled();
        prop_assert!(dd.validate(&[]).ok);
        // D'² = (D² + 1) ⊕ (D² + 1) in every block
        let sq = &dd.d * &dd.d;
        let pieces: Vec<CMat> = (0..m.ctx.blocks().len())
            .map(|k| {
                let b = m.ctx.block(&m.d, k);
                let n = b.nrows();
                let lap = &b * &b + CMat::identity(n, n);
                let mut x = CMat::zeros(2 * n, 2 * n);
                x.view_mut((0, 0), (n, n)).copy_from(&lap);
                x.view_mut((n, n), (n, n)).copy_from(&lap);
                x
            })
            .collect();
        let want = dd.ctx.assemble(&pieces);
        prop_assert!(op_norm(&(&sq - &want)) <= 1e-12 * op_norm(&want));
        prop_assert!(dd.spectrum().unwrap().min_abs() >= 1.0 - 1e-12);
    }

    #[test]
    fn alpha_endpoints(seed in any::<u64>()) {
        let ctx = Arc::new(TraceContext::new(&[(2, 1.0), (2, 0.5)]).unwrap());
        let g = Grading::from_signs(&[1, -1, 1, -1]).unwrap();
        let m = random_unbounded(ctx, Some(g), 1, 1.5, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&m.d_alpha(0.0).unwrap().d, &m.d);
        let f = m.to_bounded().unwrap().f;
        prop_assert!(op_norm(&(m.d_alpha(1.0).unwrap().d - &f)) <= 1e-12);
        prop_assert!(op_norm(&(&f * &f - m.ctx.identity())) <= 1e-12);
    }

    #[test]
    fn certified_interpolation_and_perturbation_bounds(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let ctx = Arc::new(TraceContext::new(&[(2, 1.0), (2, 0.5)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_unbounded(ctx.clone(), None, 1, rng.gen_range(0.5..3.0), &mut rng);
        let a = random_element(&ctx, None, &mut rng);
        let rep = interpolation_bound_check(&m, &a, alpha, 2.0).unwrap();
        prop_assert!(rep.certified_pass, "{:?}", rep);
        let v = random_hermitian(&mut rng, 4);
        let v = ctx.assemble(&[ctx.block(&v, 0), ctx.block(&v, 1)]) * c(0.5, 0.0);
        let rep = perturbation_bound_check(&m, &v, 0.5).unwrap();
        prop_assert!(rep.pass, "{:?}", rep);
    }
}
