use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typeii::linalg::{c, diag_real, op_norm, random_complex, CMat};
use typeii::semifinite::*;

fn ctx() -> Arc<TraceContext> {
    Arc::new(TraceContext::new(&[(2, 1.0), (3, 0.25)]).unwrap())
}

fn random_op(ctx: &TraceContext, rng: &mut ChaCha8Rng) -> CMat {
    let pieces: Vec<CMat> = ctx.blocks().iter().map(|b| random_complex(rng, b.dim, b.dim)).collect();
    ctx.assemble(&pieces)
}

#[test]
fn trace_is_weighted_by_block() {
    let ctx = ctx();
    assert_eq!(ctx.dim(), 5);
    assert!((ctx.trace(&ctx.identity()).re - 2.75).abs() < 1e-15);
    assert!((ctx.unit_trace() - 2.75).abs() < 1e-15);
    let x = diag_real(&[1.0, 2.0, 4.0, 4.0, 8.0]);
    assert!((ctx.trace(&x).re - (3.0 + 16.0 * 0.25)).abs() < 1e-14);
}

#[test]
fn bad_contexts_are_rejected() {
    assert!(TraceContext::new(&[]).is_err());
    assert!(TraceContext::new(&[(2, 0.0)]).is_err());
    assert!(TraceContext::new(&[(0, 1.0)]).is_err());
    assert!(TraceContext::new(&[(2, f64::NAN)]).is_err());
}

#[test]
fn off_block_matrices_are_not_affiliated() {
    let ctx = ctx();
    let mut x = ctx.identity();
    x[(0, 4)] = c(1.0, 0.0);
    assert!(ctx.check_affiliated(&x).is_err());
    assert!(ctx.check_affiliated(&ctx.identity()).is_ok());
}

#[test]
fn schatten_norm_of_the_identity() {
    let ctx = ctx();
    let one = Operator::identity(ctx.clone());
    for p in [1.0, 2.0, 3.5] {
        let n = p_norm(&one, p).unwrap();
        assert!((n - 2.75f64.powf(1.0 / p)).abs() < 1e-13, "p = {p}: {n}");
    }
    assert!((p_norm(&one, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn heat_trace_of_zero_is_the_unit_trace() {
    let ctx = ctx();
    let d = Operator::new(ctx.clone(), CMat::zeros(5, 5), Parity::Unassigned).unwrap();
    assert!((heat_trace(&d, 1.0).unwrap() - 2.75).abs() < 1e-14);
}

#[test]
fn singular_profile_is_a_step_function() {
    // one block of weight 1/2 holding singular values 3 and 1: μ = 3 on [0, 1/2), 1 on [1/2, 1)
    let ctx = Arc::new(TraceContext::new(&[(2, 0.5)]).unwrap());
    let t = Operator::new(ctx, diag_real(&[1.0, -3.0]), Parity::Unassigned).unwrap();
    let prof = singular_profile(&t).unwrap();
    assert!((prof.total_weight() - 1.0).abs() < 1e-15);
    assert_eq!(prof.mu(0.25), 3.0);
    assert_eq!(prof.mu(0.75), 1.0);
    assert_eq!(prof.mu(1.5), 0.0);
    assert!((prof.p_norm(1.0) - 2.0).abs() < 1e-14);
}

#[test]
fn inflation_scales_the_trace() {
    let ctx = ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_op(&ctx, &mut rng);
    let big = ctx.inflate(3).unwrap();
    let xx = ctx.inflate_operator(&x, 3);
    assert!(big.check_affiliated(&xx).is_ok());
    assert!((big.trace(&xx) - ctx.trace(&x) * c(3.0, 0.0)).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grids_round_trip_through_inflation(seed in any::<u64>(), n in 1usize..4) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid: Vec<Vec<CMat>> = (0..n).map(|_| (0..n).map(|_| random_op(&ctx, &mut rng)).collect()).collect();
        let big = ctx.inflate_grid(&grid).unwrap();
        prop_assert!(ctx.inflate(n).unwrap().check_affiliated(&big).is_ok());
        let back = ctx.extract_grid(&big, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(&back[i][j], &grid[i][j]);
            }
        }
    }

    #[test]
    fn holder_inequality(seed in any::<u64>(), pi in 0usize..4, qi in 0usize..4) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = [1.0, 2.0, 3.0, f64::INFINITY];
        let (p, q) = (ps[pi], ps[qi]);
        let r = 1.0 / (1.0 / p + 1.0 / q);
        let s = Operator::new(ctx.clone(), random_op(&ctx, &mut rng), Parity::Unassigned).unwrap();
        let t = Operator::new(ctx.clone(), random_op(&ctx, &mut rng), Parity::Unassigned).unwrap();
        let chk = holder_check(&s, &t, p, q, r).unwrap();
        prop_assert!(chk.pass, "{:?}", chk);
    }

    #[test]
    fn trace_norm_is_the_integral_of_mu(seed in any::<u64>()) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_op(&ctx, &mut rng);
        prop_assert!(tau_integral_defect(&ctx, &t).unwrap() <= 1e-10);
        let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        prop_assert!(mu_identity_defect(&ctx, &t, z).unwrap() <= 1e-10);
    }

    #[test]
    fn operator_norm_is_the_top_of_the_profile(seed in any::<u64>()) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_op(&ctx, &mut rng);
        let t = Operator::new(ctx.clone(), x.clone(), Parity::Unassigned).unwrap();
        prop_assert!((operator_norm(&t) - op_norm(&x)).abs() <= 1e-12 * op_norm(&x));
        prop_assert!((singular_profile(&t).unwrap().mu(0.0) - op_norm(&x)).abs() <= 1e-12 * op_norm(&x));
    }
}
