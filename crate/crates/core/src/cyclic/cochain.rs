use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{connes_boundary, hochschild_boundary, Chain, GradedChain};
use crate::error::{Error, Result};
use crate::linalg::{random_complex, Accumulator, CMat, C64};
use crate::semifinite::TraceContext;

/// A linear functional on chains, given by its values on elementary tensors.
pub trait Cochain: Send + Sync {
    fn supports(&self, level: usize) -> bool;

    /// Value on the elementary tensor `entries[0] ⊗ … ⊗ entries[n]`.
    fn evaluate(&self, entries: &[CMat]) -> Result<C64>;

    fn pair_chain(&self, chain: &Chain) -> Result<Pairing> {
        if !self.supports(chain.level()) {
            return Err(Error::Level(format!("cochain does not act on level {}", chain.level())));
        }
        let mut acc = Accumulator::new();
        for t in chain.terms() {
            acc.add(t.coeff * self.evaluate(&t.entries)?);
        }
        Ok(Pairing { value: acc.value(), scale: acc.abs_sum() })
    }
}

impl<T: Cochain + ?Sized> Cochain for &T {
    fn supports(&self, level: usize) -> bool {
        (**self).supports(level)
    }
    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        (**self).evaluate(entries)
    }
    fn pair_chain(&self, chain: &Chain) -> Result<Pairing> {
        (**self).pair_chain(chain)
    }
}

impl<T: Cochain + ?Sized> Cochain for Box<T> {
    fn supports(&self, level: usize) -> bool {
        (**self).supports(level)
    }
    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        (**self).evaluate(entries)
    }
    fn pair_chain(&self, chain: &Chain) -> Result<Pairing> {
        (**self).pair_chain(chain)
    }
}

/// A pairing value together with `Σ |coeff · φ(term)|`, the natural scale for residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub value: C64,
    pub scale: f64,
}

pub fn pair(phi: &dyn Cochain, c: &Chain) -> Result<C64> {
    Ok(phi.pair_chain(c)?.value)
}

/// Pairs a cochain with every level of a graded chain it acts on.
pub fn pair_graded(phi: &dyn Cochain, c: &GradedChain) -> Result<Vec<(usize, C64)>> {
    c.parts
        .iter()
        .filter(|(l, _)| phi.supports(**l))
        .map(|(l, ch)| Ok((*l, pair(phi, ch)?)))
        .collect()
}

/// `bφ`, acting by `(bφ)(c) = φ(bc)`.
pub struct HochschildPullback<C> {
    pub inner: C,
    pub ctx: Arc<TraceContext>,
}

impl<C: Cochain> Cochain for HochschildPullback<C> {
    fn supports(&self, level: usize) -> bool {
        level >= 1 && self.inner.supports(level - 1)
    }
    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        let c = Chain::elementary(self.ctx.clone(), C64::new(1.0, 0.0), entries.to_vec())?;
        Ok(self.inner.pair_chain(&hochschild_boundary(&c))?.value)
    }
}

/// `Bφ`, acting by `(Bφ)(c) = φ(Bc)`.
pub struct ConnesPullback<C> {
    pub inner: C,
    pub ctx: Arc<TraceContext>,
}

impl<C: Cochain> Cochain for ConnesPullback<C> {
    fn supports(&self, level: usize) -> bool {
        self.inner.supports(level + 1)
    }
    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        let c = Chain::elementary(self.ctx.clone(), C64::new(1.0, 0.0), entries.to_vec())?;
        let bc = connes_boundary(&c);
        if bc.is_empty() {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(self.inner.pair_chain(&bc)?.value)
    }
}

/// `Σ_k c_k φ_k`, each summand contributing only on the levels it supports.
#[derive(Default)]
pub struct CochainSum<'a> {
    parts: Vec<(C64, Box<dyn Cochain + 'a>)>,
}

impl<'a> CochainSum<'a> {
    pub fn new() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn with(mut self, coeff: f64, phi: impl Cochain + 'a) -> Self {
        self.parts.push((C64::new(coeff, 0.0), Box::new(phi)));
        self
    }
}

impl Cochain for CochainSum<'_> {
    fn supports(&self, level: usize) -> bool {
        self.parts.iter().any(|(_, p)| p.supports(level))
    }
    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        let level = entries.len() - 1;
        let mut acc = Accumulator::new();
        for (k, p) in &self.parts {
            if p.supports(level) {
                acc.add(*k * p.evaluate(entries)?);
            }
        }
        Ok(acc.value())
    }
}

/// Random normalised multilinear cochain
/// `(a_0..a_n) ↦ Σ_t c_t τ(R_{t,0} a_0) Π_{j≥1} τ(R_{t,j} (a_j − τ(a_j)/τ(1)))`.
///
/// Centering the slots `j ≥ 1` makes it vanish on degenerate chains.
pub struct TestCochain {
    ctx: Arc<TraceContext>,
    level: usize,
    terms: Vec<(C64, Vec<CMat>)>,
}

impl TestCochain {
    pub fn random(ctx: Arc<TraceContext>, level: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..2)
            .map(|_| {
                let coeff = C64::new(rand::Rng::gen_range(&mut rng, -1.0..1.0), 0.0);
                let rs = (0..=level).map(|_| random_complex(&mut rng, ctx.dim(), ctx.dim())).collect();
                (coeff, rs)
            })
            .collect();
        Self { ctx, level, terms }
    }
}

impl Cochain for TestCochain {
    fn supports(&self, level: usize) -> bool {
        level == self.level
    }
    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        let avg: Vec<C64> = entries
            .iter()
            .map(|a| self.ctx.trace(a) / self.ctx.unit_trace())
            .collect();
        let mut acc = Accumulator::new();
        for (coeff, rs) in &self.terms {
            let mut prod = *coeff;
            for (j, (r, a)) in rs.iter().zip(entries).enumerate() {
                let mut v = self.ctx.trace(&(r * a));
                if j > 0 {
                    v -= self.ctx.trace(r) * avg[j];
                }
                prod *= v;
            }
            acc.add(prod);
        }
        Ok(acc.value())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    /// `(level, Σ|coeff|Π‖a_j‖, weighted term)` with weight `λ^n / Γ(n/2)`.
    pub levels: Vec<(usize, f64, f64)>,
    pub sup: f64,
}

/// Entire-growth diagnostic `sup_n ‖c_n‖ λ^n / Γ(n/2)`; level 0 carries weight 0.
pub fn growth_report(c: &GradedChain, lambda: f64) -> GrowthReport {
    let mut levels = Vec::new();
    let mut sup: f64 = 0.0;
    for (&n, ch) in &c.parts {
        let bound = ch.norm_bound();
        let weighted = if n == 0 {
            0.0
        } else {
            let log = bound.ln() + n as f64 * lambda.ln() - statrs::function::gamma::ln_gamma(n as f64 / 2.0);
            if bound == 0.0 { 0.0 } else { log.exp() }
        };
        sup = sup.max(weighted);
        levels.push((n, bound, weighted));
    }
    GrowthReport { levels, sup }
}
