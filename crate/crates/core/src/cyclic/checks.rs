use serde::{Deserialize, Serialize};

use super::{connes_boundary, hochschild_boundary, Chain, Cochain, TestCochain};
use crate::error::Result;

/// Worst relative residuals of `φ(b²c)`, `φ(B²c)` and `φ((bB+Bb)c)`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BicomplexReport {
    pub chains: usize,
    pub cochains: usize,
    pub b_squared: f64,
    pub big_b_squared: f64,
    pub anticommutator: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn relative(value: f64, scale: f64) -> f64 {
    if value <= 1e-14 {
        0.0
    } else {
        value / scale.max(f64::MIN_POSITIVE)
    }
}

fn residual(phi: &TestCochain, c: &Chain) -> Result<f64> {
    if c.is_empty() {
        return Ok(0.0);
    }
    let p = phi.pair_chain(c)?;
    Ok(relative(p.value.norm(), p.scale))
}

/// Pairs the three bicomplex relations against test cochains built from `seeds`.
///
/// The scale of each residual is `Σ|coeff · φ(term)|` over the uncancelled terms.
pub fn bicomplex_check(chains: &[Chain], seeds: &[u64], tolerance: f64) -> Result<BicomplexReport> {
    let mut rep = BicomplexReport { chains: chains.len(), cochains: seeds.len(), tolerance, ..Default::default() };
    for c in chains {
        let n = c.level();
        let ctx = c.ctx().clone();
        let bc = hochschild_boundary(c);
        let bbc = connes_boundary(c);
        let mut mixed = hochschild_boundary(&bbc);
        if n >= 1 {
            mixed = mixed.add(&connes_boundary(&bc))?;
        }
        for &seed in seeds {
            if n >= 2 {
                let phi = TestCochain::random(ctx.clone(), n - 2, seed);
                rep.b_squared = rep.b_squared.max(residual(&phi, &hochschild_boundary(&bc))?);
            }
            let up = TestCochain::random(ctx.clone(), n + 2, seed);
            rep.big_b_squared = rep.big_b_squared.max(residual(&up, &connes_boundary(&bbc))?);
            let same = TestCochain::random(ctx.clone(), n, seed);
            rep.anticommutator = rep.anticommutator.max(residual(&same, &mixed)?);
        }
    }
    rep.pass = rep.b_squared.max(rep.big_b_squared).max(rep.anticommutator) <= tolerance;
    Ok(rep)
}
