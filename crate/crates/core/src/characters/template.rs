//! Cochains built as signed sums of brackets whose slots are algebra entries,
//! commutators `[X, a_j]`, or fixed operators.

use std::sync::Arc;

use crate::cyclic::Cochain;
use crate::error::{Error, Result};
use crate::linalg::{commutator, Accumulator, CMat, C64};
use crate::semifinite::{Grading, TraceContext};

use super::heat::HeatKernel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// The entry `a_j` itself.
    Entry(usize),
    /// `[X_op, a_j]`.
    Comm(usize, usize),
    /// The fixed operator `X_op`.
    Op(usize),
}

#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: f64,
    pub slots: Vec<Slot>,
}

/// How a list of factors is turned into a number.
#[derive(Clone)]
pub enum Evaluator {
    /// Heat bracket `⟨F_0, …, F_k⟩_D`.
    Heat(Arc<HeatKernel>),
    /// Plain graded trace `τ(χ F_0 ⋯ F_k)`.
    Trace { ctx: Arc<TraceContext>, grading: Option<Grading> },
}

impl Evaluator {
    fn same(&self, other: &Evaluator) -> bool {
        match (self, other) {
            (Evaluator::Heat(a), Evaluator::Heat(b)) => Arc::ptr_eq(a, b),
            (Evaluator::Trace { ctx: a, grading: ga }, Evaluator::Trace { ctx: b, grading: gb }) => {
                a == b && ga == gb
            }
            _ => false,
        }
    }

    fn prepare(&self, x: &CMat) -> CMat {
        match self {
            Evaluator::Heat(k) => k.rotate(x),
            Evaluator::Trace { .. } => x.clone(),
        }
    }

    fn value(&self, factors: &[&CMat]) -> Result<C64> {
        match self {
            Evaluator::Heat(k) => k.bracket_rotated(factors),
            Evaluator::Trace { ctx, grading } => {
                let mut p = factors[0].clone();
                for f in &factors[1..] {
                    p = &p * *f;
                }
                if let Some(g) = grading {
                    p = g.left(&p);
                }
                Ok(ctx.trace(&p))
            }
        }
    }
}

/// A level-`n` cochain `Σ_t c_t ⟨slots_t⟩`.
#[derive(Clone)]
pub struct TemplateCochain {
    level: usize,
    evaluator: Evaluator,
    /// Operators with their formal degree (1 for odd directions such as `D`, `V`).
    ops: Vec<(CMat, u8)>,
    terms: Vec<Term>,
}

impl TemplateCochain {
    pub fn new(level: usize, evaluator: Evaluator, ops: Vec<(CMat, u8)>, terms: Vec<Term>) -> Self {
        Self { level, evaluator, ops, terms }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    fn degree(&self, s: Slot) -> u8 {
        match s {
            Slot::Entry(_) => 0,
            Slot::Comm(o, _) | Slot::Op(o) => self.ops[o].1,
        }
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.coeff *= k;
        }
        self
    }

    /// `self + k·other`; both must share the evaluator and level.
    pub fn plus(mut self, k: f64, other: &TemplateCochain) -> Result<Self> {
        if self.level != other.level || !self.evaluator.same(&other.evaluator) {
            return Err(Error::Level("combining cochains with different levels or kernels".into()));
        }
        let shift = self.ops.len();
        self.ops.extend(other.ops.iter().cloned());
        for t in &other.terms {
            let slots = t
                .slots
                .iter()
                .map(|s| match *s {
                    Slot::Entry(j) => Slot::Entry(j),
                    Slot::Comm(o, j) => Slot::Comm(o + shift, j),
                    Slot::Op(o) => Slot::Op(o + shift),
                })
                .collect();
            self.terms.push(Term { coeff: k * t.coeff, slots });
        }
        Ok(self)
    }

    /// Graded contraction `ι(X)`: inserts `X` into every gap after the first slot,
    /// with sign `(−1)^{|X|·m}` where `m` is the total degree of the slots it passes.
    pub fn iota(mut self, x: CMat, degree: u8) -> Self {
        let op = self.ops.len();
        self.ops.push((x, degree));
        let mut terms = Vec::with_capacity(self.terms.len() * 4);
        for t in &self.terms {
            let mut passed = 0u32;
            for k in 1..=t.slots.len() {
                if k >= 2 {
                    passed += self.degree(t.slots[k - 1]) as u32;
                }
                let sign = if (degree as u32 * passed) % 2 == 0 { 1.0 } else { -1.0 };
                let mut slots = t.slots.clone();
                slots.insert(k, Slot::Op(op));
                terms.push(Term { coeff: sign * t.coeff, slots });
            }
        }
        self.terms = terms;
        self
    }
}

impl Cochain for TemplateCochain {
    fn supports(&self, level: usize) -> bool {
        level == self.level
    }

    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        if entries.len() != self.level + 1 {
            return Err(Error::Level(format!(
                "level-{} cochain evaluated on {} entries",
                self.level,
                entries.len()
            )));
        }
        let ents: Vec<CMat> = entries.iter().map(|a| self.evaluator.prepare(a)).collect();
        let ops: Vec<CMat> = self.ops.iter().map(|(x, _)| self.evaluator.prepare(x)).collect();
        let mut comms: Vec<Vec<Option<CMat>>> = vec![vec![None; ents.len()]; ops.len()];
        for t in &self.terms {
            for s in &t.slots {
                if let Slot::Comm(o, j) = *s {
                    if comms[o][j].is_none() {
                        comms[o][j] = Some(commutator(&ops[o], &ents[j]));
                    }
                }
            }
        }
        let mut acc = Accumulator::new();
        for t in &self.terms {
            if t.coeff == 0.0 {
                continue;
            }
            let factors: Vec<&CMat> = t
                .slots
                .iter()
                .map(|s| match *s {
                    Slot::Entry(j) => &ents[j],
                    Slot::Comm(o, j) => comms[o][j].as_ref().expect("prepared above"),
                    Slot::Op(o) => &ops[o],
                })
                .collect();
            acc.add(self.evaluator.value(&factors)? * t.coeff);
        }
        Ok(acc.value())
    }
}

/// Slots `a_0, [D, a_1], …, [D, a_n]` with `D` as operator 0.
pub fn jlo_slots(n: usize) -> Vec<Slot> {
    std::iter::once(Slot::Entry(0)).chain((1..=n).map(|j| Slot::Comm(0, j))).collect()
}
