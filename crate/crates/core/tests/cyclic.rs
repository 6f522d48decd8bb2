use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use typeii::characters::chern_plus;
use typeii::cyclic::*;
use typeii::linalg::{c, commutator, diag_real, CMat, C64};
use typeii::semifinite::TraceContext;

fn ctx() -> Arc<TraceContext> {
    Arc::new(TraceContext::new(&[(2, 1.0), (2, 0.5)]).unwrap())
}

/// `(a_0, a_1) ↦ τ(a_0 [X, a_1])`, a Hochschild cocycle for any `X`.
struct Derivation {
    ctx: Arc<TraceContext>,
    x: CMat,
}

impl Cochain for Derivation {
    fn supports(&self, level: usize) -> bool {
        level == 1
    }
    fn evaluate(&self, e: &[CMat]) -> typeii::Result<C64> {
        Ok(self.ctx.trace(&(&e[0] * commutator(&self.x, &e[1]))))
    }
}

/// `a_0 ↦ τ(a_0)`.
struct Trace(Arc<TraceContext>);

impl Cochain for Trace {
    fn supports(&self, level: usize) -> bool {
        level == 0
    }
    fn evaluate(&self, e: &[CMat]) -> typeii::Result<C64> {
        Ok(self.0.trace(&e[0]))
    }
}

#[test]
fn boundary_of_a_level_one_chain_is_a_commutator() {
    let ctx = ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = (random_element(&ctx, None, &mut rng), random_element(&ctx, None, &mut rng));
    let ch = Chain::elementary(ctx.clone(), c(1.0, 0.0), vec![a.clone(), b.clone()]).unwrap();
    let bc = hochschild_boundary(&ch);
    assert_eq!(bc.level(), 0);
    assert_eq!(bc.len(), 2);
    let total: CMat = bc.terms().iter().map(|t| &t.entries[0] * t.coeff).fold(CMat::zeros(4, 4), |s, x| s + x);
    assert!((total - commutator(&a, &b)).norm() < 1e-14);
    // traces kill commutators
    assert!(pair(&Trace(ctx), &bc).unwrap().norm() < 1e-14);
}

#[test]
fn boundary_of_level_zero_is_zero() {
    let ctx = ctx();
    let ch = Chain::elementary(ctx.clone(), c(2.0, 0.0), vec![ctx.identity()]).unwrap();
    assert!(hochschild_boundary(&ch).is_empty());
}

#[test]
fn canonicalize_merges_and_drops() {
    let ctx = ctx();
    let x = diag_real(&[1.0, 2.0, 3.0, 4.0]);
    let mut ch = Chain::elementary(ctx.clone(), c(1.0, 0.0), vec![x.clone(), x.clone()]).unwrap();
    ch.push(c(0.5, 1.0), vec![x.clone(), x.clone()]).unwrap();
    ch.push(c(3.0, 0.0), vec![x.clone(), ctx.identity() * c(2.0, 0.0)]).unwrap();
    let k = canonicalize(&ch);
    assert_eq!(k.len(), 1);
    assert!((k.terms()[0].coeff - c(1.5, 1.0)).norm() < 1e-15);
}

#[test]
fn mismatched_levels_do_not_add() {
    let ctx = ctx();
    let a = Chain::zero(ctx.clone(), 1);
    let b = Chain::zero(ctx, 2);
    assert!(a.add(&b).is_err());
}

#[test]
fn test_cochains_are_normalised() {
    let ctx = ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for level in 1..4 {
        let phi = TestCochain::random(ctx.clone(), level, 17);
        for slot in 1..=level {
            let mut e: Vec<CMat> = (0..=level).map(|_| random_element(&ctx, None, &mut rng)).collect();
            e[slot] = ctx.identity() * c(0.7, -0.2);
            assert!(phi.evaluate(&e).unwrap().norm() < 1e-13, "level {level} slot {slot}");
        }
    }
}

#[test]
fn chern_character_of_a_projection_is_a_cycle() {
    // b ch_{2k} + B ch_{2k-2} = 0 against normalised cochains
    let ctx = ctx();
    let p = diag_real(&[1.0, 0.0, 0.0, 1.0]);
    let u = typeii::linalg::random_unitary(&mut ChaCha8Rng::seed_from_u64(4), 2);
    let p = ctx.assemble(&[&u * ctx.block(&p, 0) * u.adjoint(), ctx.block(&p, 1)]);
    let ch = chern_plus(&ctx, &p, 3).unwrap();
    for k in 1..=3 {
        let b = hochschild_boundary(ch.get(2 * k).unwrap());
        let big_b = connes_boundary(ch.get(2 * k - 2).unwrap());
        let total = b.add(&big_b).unwrap();
        for seed in 0..4 {
            let phi = TestCochain::random(ctx.clone(), 2 * k - 1, seed);
            let v = phi.pair_chain(&total).unwrap();
            assert!(v.value.norm() <= 1e-12 * v.scale.max(1.0), "k = {k}: {v:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bicomplex_relations(seed in any::<u64>(), level in 0usize..5) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = canonicalize(&random_chain(&ctx, level, 2, None, &mut rng));
        let rep = bicomplex_check(&[ch], &[seed, seed ^ 1], 1e-10).unwrap();
        prop_assert!(rep.pass, "{:?}", rep);
    }

    #[test]
    fn hochschild_cocycles_vanish_on_boundaries(seed in any::<u64>()) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = Derivation { ctx: ctx.clone(), x: random_element(&ctx, None, &mut rng) };
        let ch = random_chain(&ctx, 2, 3, None, &mut rng);
        let v = phi.pair_chain(&hochschild_boundary(&ch)).unwrap();
        prop_assert!(v.value.norm() <= 1e-12 * v.scale.max(1.0));
    }

    #[test]
    fn canonicalize_preserves_normalised_pairings(seed in any::<u64>(), level in 1usize..4) {
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ch = random_chain(&ctx, level, 2, None, &mut rng);
        let mut degenerate: Vec<CMat> = (0..=level).map(|_| random_element(&ctx, None, &mut rng)).collect();
        degenerate[level] = ctx.identity();
        ch.push(c(1.0, 0.0), degenerate).unwrap();
        let twice = ch.add(&ch).unwrap();
        let k = canonicalize(&twice);
        prop_assert!(k.len() <= 2);
        let phi = TestCochain::random(ctx.clone(), level, seed);
        let (a, b) = (phi.pair_chain(&twice).unwrap(), phi.pair_chain(&k).unwrap());
        prop_assert!((a.value - b.value).norm() <= 1e-12 * a.scale.max(1.0));
    }

    #[test]
    fn b_of_a_connes_boundary_is_graded_commutative(seed in any::<u64>(), level in 0usize..4) {
        // bB = -Bb, checked directly as chains against normalised cochains
        let ctx = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_chain(&ctx, level, 1, None, &mut rng);
        let lhs = hochschild_boundary(&connes_boundary(&ch));
        let phi = TestCochain::random(ctx.clone(), level, seed);
        let l = phi.pair_chain(&lhs).unwrap();
        let r = if level == 0 { C64::new(0.0, 0.0) } else { phi.pair_chain(&connes_boundary(&hochschild_boundary(&ch))).unwrap().value };
        prop_assert!((l.value + r).norm() <= 1e-12 * l.scale.max(1.0));
    }
}
