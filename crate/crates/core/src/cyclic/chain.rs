use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, op_norm, random_complex, CMat, C64};
use crate::semifinite::{Grading, Operator, TraceContext};

#[derive(Clone, Debug)]
pub struct ChainTerm {
    pub coeff: C64,
    pub entries: Vec<CMat>,
}

/// A finite linear combination of elementary tensors `a_0 ⊗ … ⊗ a_n`.
#[derive(Clone, Debug)]
pub struct Chain {
    ctx: Arc<TraceContext>,
    level: usize,
    terms: Vec<ChainTerm>,
}

impl Chain {
    pub fn zero(ctx: Arc<TraceContext>, level: usize) -> Self {
        Self { ctx, level, terms: Vec::new() }
    }

    pub fn elementary(ctx: Arc<TraceContext>, coeff: C64, entries: Vec<CMat>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Level("an elementary tensor needs at least one entry".into()));
        }
        let mut c = Self::zero(ctx, entries.len() - 1);
        c.push(coeff, entries)?;
        Ok(c)
    }

    pub fn from_operators(coeff: C64, entries: &[Operator]) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Level("an elementary tensor needs at least one entry".into()))?;
        let ctx = first.ctx().clone();
        for e in entries {
            if !(Arc::ptr_eq(e.ctx(), &ctx) || **e.ctx() == *ctx) {
                return Err(Error::ContextMismatch);
            }
        }
        Self::elementary(ctx, coeff, entries.iter().map(|e| e.matrix().clone()).collect())
    }

    pub fn push(&mut self, coeff: C64, entries: Vec<CMat>) -> Result<()> {
        if entries.len() != self.level + 1 {
            return Err(Error::Level(format!(
                "term with {} entries in a level-{} chain",
                entries.len(),
                self.level
            )));
        }
        for e in &entries {
            self.ctx.check_affiliated(e)?;
        }
        self.terms.push(ChainTerm { coeff, entries });
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, coeff: C64, entries: Vec<CMat>) {
        debug_assert_eq!(entries.len(), self.level + 1);
        self.terms.push(ChainTerm { coeff, entries });
    }

    pub fn ctx(&self) -> &Arc<TraceContext> {
        &self.ctx
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn terms(&self) -> &[ChainTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Chain) -> Result<Chain> {
        if self.level != other.level {
            return Err(Error::Level(format!("adding levels {} and {}", self.level, other.level)));
        }
        if *self.ctx != *other.ctx {
            return Err(Error::ContextMismatch);
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn scale(&self, z: C64) -> Chain {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= z;
        }
        out
    }

    /// `Σ |coeff| Π ‖a_j‖`, the projective-norm surrogate used for growth estimates.
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff.norm() * t.entries.iter().map(op_norm).product::<f64>())
            .sum()
    }
}

/// Hochschild boundary `b`. On level 0 it returns the zero chain.
pub fn hochschild_boundary(c: &Chain) -> Chain {
    let n = c.level;
    if n == 0 {
        return Chain::zero(c.ctx.clone(), 0);
    }
    let mut out = Chain::zero(c.ctx.clone(), n - 1);
    for t in &c.terms {
        let a = &t.entries;
        for j in 0..n {
            let mut e = Vec::with_capacity(n);
            e.extend(a[..j].iter().cloned());
            e.push(&a[j] * &a[j + 1]);
            e.extend(a[j + 2..].iter().cloned());
            out.push_unchecked(if j % 2 == 0 { t.coeff } else { -t.coeff }, e);
        }
        let mut e = Vec::with_capacity(n);
        e.push(&a[n] * &a[0]);
        e.extend(a[1..n].iter().cloned());
        out.push_unchecked(if n % 2 == 0 { t.coeff } else { -t.coeff }, e);
    }
    out
}

/// Connes boundary `B(a_0..a_n) = Σ_j (−1)^{nj} (1, a_j, …, a_n, a_0, …, a_{j−1})`, canonicalised.
pub fn connes_boundary(c: &Chain) -> Chain {
    let n = c.level;
    let one = c.ctx.identity();
    let mut out = Chain::zero(c.ctx.clone(), n + 1);
    for t in &c.terms {
        for j in 0..=n {
            let mut e = Vec::with_capacity(n + 2);
            e.push(one.clone());
            e.extend(t.entries[j..].iter().cloned());
            e.extend(t.entries[..j].iter().cloned());
            let sign = if (n * j) % 2 == 0 { 1.0 } else { -1.0 };
            out.push_unchecked(t.coeff * sign, e);
        }
    }
    canonicalize(&out)
}

/// True if `a` is a multiple of the identity, up to `1e-12·max(1,‖a‖)`.
pub fn is_scalar(ctx: &TraceContext, a: &CMat) -> bool {
    let avg = ctx.trace(a) / ctx.unit_trace();
    let resid = a - ctx.scalar(avg);
    crate::linalg::frobenius(&resid) <= 1e-12 * crate::linalg::frobenius(a).max(1.0)
}

/// Drops degenerate terms (scalar entries in slots ≥ 1), merges equal terms
/// and removes negligible coefficients.
pub fn canonicalize(c: &Chain) -> Chain {
    let mut kept: Vec<ChainTerm> = Vec::new();
    for t in &c.terms {
        if t.entries[1..].iter().any(|a| is_scalar(&c.ctx, a)) {
            continue;
        }
        match kept.iter_mut().find(|k| same_entries(&k.entries, &t.entries)) {
            Some(k) => k.coeff += t.coeff,
            None => kept.push(t.clone()),
        }
    }
    let biggest = kept.iter().fold(0.0, |m: f64, t| m.max(t.coeff.norm()));
    kept.retain(|t| t.coeff.norm() > 1e-15 * biggest);
    Chain { ctx: c.ctx.clone(), level: c.level, terms: kept }
}

fn same_entries(a: &[CMat], b: &[CMat]) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let scale = max_abs(x).max(max_abs(y)).max(1.0);
        max_abs(&(x - y)) <= 1e-12 * scale
    })
}

/// Chains at several levels, e.g. a truncated Chern character.
#[derive(Clone, Debug, Default)]
pub struct GradedChain {
    pub parts: BTreeMap<usize, Chain>,
}

impl GradedChain {
    pub fn insert(&mut self, c: Chain) {
        self.parts.insert(c.level(), c);
    }

    pub fn levels(&self) -> Vec<usize> {
        self.parts.keys().copied().collect()
    }

    pub fn get(&self, level: usize) -> Option<&Chain> {
        self.parts.get(&level)
    }
}

/// Random elementary chain; with a grading the entries are even.
pub fn random_chain<R: Rng>(
    ctx: &Arc<TraceContext>,
    level: usize,
    terms: usize,
    grading: Option<&Grading>,
    rng: &mut R,
) -> Chain {
    let mut c = Chain::zero(ctx.clone(), level);
    for _ in 0..terms {
        let coeff = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let entries = (0..=level).map(|_| random_element(ctx, grading, rng)).collect();
        c.push_unchecked(coeff, entries);
    }
    c
}

/// Random block-diagonal matrix, even with respect to `grading` if given.
pub fn random_element<R: Rng>(ctx: &TraceContext, grading: Option<&Grading>, rng: &mut R) -> CMat {
    let pieces: Vec<CMat> = ctx
        .blocks()
        .iter()
        .map(|b| random_complex(rng, b.dim, b.dim))
        .collect();
    let m = ctx.assemble(&pieces);
    match grading {
        Some(g) => g.even_part(&m),
        None => m,
    }
}
