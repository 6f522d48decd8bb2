use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TraceContext;
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_defect, op_norm, CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Unassigned,
}

impl Parity {
    pub fn degree(self) -> u8 {
        match self {
            Parity::Odd => 1,
            _ => 0,
        }
    }

    pub fn combine(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::Unassigned, _) | (_, Parity::Unassigned) => Parity::Unassigned,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }
}

/// A bounded operator affiliated with a trace context.
#[derive(Clone, Debug)]
pub struct Operator {
    ctx: Arc<TraceContext>,
    mat: CMat,
    parity: Parity,
}

impl Operator {
    pub fn new(ctx: Arc<TraceContext>, mat: CMat, parity: Parity) -> Result<Self> {
        ctx.check_affiliated(&mat)?;
        Ok(Self { ctx, mat, parity })
    }

    pub fn identity(ctx: Arc<TraceContext>) -> Self {
        let mat = ctx.identity();
        Self { ctx, mat, parity: Parity::Even }
    }

    pub fn ctx(&self) -> &Arc<TraceContext> {
        &self.ctx
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    fn same_ctx(&self, other: &Operator) -> Result<()> {
        if Arc::ptr_eq(&self.ctx, &other.ctx) || *self.ctx == *other.ctx {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_ctx(other)?;
        Ok(Operator {
            ctx: self.ctx.clone(),
            mat: &self.mat * &other.mat,
            parity: self.parity.combine(other.parity),
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_ctx(other)?;
        let parity = if self.parity == other.parity { self.parity } else { Parity::Unassigned };
        Ok(Operator { ctx: self.ctx.clone(), mat: &self.mat + &other.mat, parity })
    }

    pub fn scale(&self, z: C64) -> Operator {
        Operator { ctx: self.ctx.clone(), mat: &self.mat * z, parity: self.parity }
    }

    pub fn adjoint(&self) -> Operator {
        Operator { ctx: self.ctx.clone(), mat: self.mat.adjoint(), parity: self.parity }
    }

    pub fn trace(&self) -> C64 {
        self.ctx.trace(&self.mat)
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.mat)
    }

    pub fn is_self_adjoint(&self) -> bool {
        hermitian_defect(&self.mat) <= 1e-10 * self.norm().max(1.0)
    }
}

/// A ±1 diagonal grading operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grading(Vec<f64>);

impl Grading {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::Invalid { what: "grading entries must be ±1".into(), defect: 1.0 });
        }
        Ok(Self(signs))
    }

    pub fn from_signs(signs: &[i32]) -> Result<Self> {
        Self::new(signs.iter().map(|&s| s as f64).collect())
    }

    pub fn signs(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn matrix(&self) -> CMat {
        crate::linalg::diag_real(&self.0)
    }

    /// `χ·m`.
    pub fn left(&self, m: &CMat) -> CMat {
        let mut out = m.clone();
        for (i, s) in self.0.iter().enumerate() {
            if *s < 0.0 {
                out.row_mut(i).neg_mut();
            }
        }
        out
    }

    /// `χ·m·χ`.
    pub fn conjugate(&self, m: &CMat) -> CMat {
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (self.0[i] * self.0[j]))
    }

    pub fn even_part(&self, m: &CMat) -> CMat {
        (m + self.conjugate(m)) * c(0.5, 0.0)
    }

    pub fn odd_part(&self, m: &CMat) -> CMat {
        (m - self.conjugate(m)) * c(0.5, 0.0)
    }

    /// Size of the component of `m` with the wrong parity.
    pub fn parity_defect(&self, m: &CMat, parity: Parity) -> f64 {
        match parity {
            Parity::Even => op_norm(&self.odd_part(m)),
            Parity::Odd => op_norm(&self.even_part(m)),
            Parity::Unassigned => 0.0,
        }
    }

    pub fn inflate(&self, ctx: &TraceContext, n: usize) -> Grading {
        let m = ctx.inflate_operator(&self.matrix(), n);
        Grading((0..m.nrows()).map(|i| m[(i, i)].re).collect())
    }

    /// `χ ⊕ (−χ)` in the doubled ordering.
    pub fn doubled(&self, ctx: &TraceContext) -> Grading {
        let mut out = Vec::with_capacity(2 * self.0.len());
        for (o, n, _) in ctx.ranges() {
            out.extend_from_slice(&self.0[o..o + n]);
            out.extend(self.0[o..o + n].iter().map(|s| -s));
        }
        Grading(out)
    }

    pub fn trivial(n: usize) -> Grading {
        Grading(vec![1.0; n])
    }
}

/// Blockwise eigendecomposition of a self-adjoint affiliated operator.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub weights: Vec<f64>,
    /// `(offset, dim)` of each block, so callers can work per block.
    pub blocks: Vec<(usize, usize)>,
}

impl HermitianSpectrum {
    pub fn new(ctx: &TraceContext, m: &CMat) -> Result<Self> {
        ctx.check_affiliated(m)?;
        let defect = hermitian_defect(m);
        let norm = op_norm(m);
        if defect > 1e-10 * norm.max(1.0) {
            return Err(Error::NotSelfAdjoint { defect });
        }
        let herm = (m + m.adjoint()) * c(0.5, 0.0);
        let mut values = vec![0.0; ctx.dim()];
        let mut pieces = Vec::new();
        let mut blocks = Vec::new();
        for (k, (o, n, _)) in ctx.ranges().enumerate() {
            let eig = ctx.block(&herm, k).symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let mut vecs = CMat::zeros(n, n);
            for (dst, &src) in order.iter().enumerate() {
                values[o + dst] = eig.eigenvalues[src];
                vecs.set_column(dst, &eig.eigenvectors.column(src));
            }
            pieces.push(vecs);
            blocks.push((o, n));
        }
        Ok(Self { values, vectors: ctx.assemble(&pieces), weights: ctx.weights(), blocks })
    }

    /// `f(m)` by functional calculus.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let diag: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let u = &self.vectors;
        u * crate::linalg::diag_real(&diag) * u.adjoint()
    }

    /// `τ(f(m))`.
    pub fn trace_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        crate::linalg::compensated_sum_real(
            self.values.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)),
        )
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
    }

    /// Rotates `x` into the eigenbasis: `U* x U`.
    pub fn rotate(&self, x: &CMat) -> CMat {
        self.vectors.adjoint() * x * &self.vectors
    }
}
