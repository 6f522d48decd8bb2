use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, compensated_sum, CMat, C64};

/// One summand `M_dim(ℂ)` of the finite-dimensional von Neumann algebra,
/// traced with `weight · Tr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    pub weight: f64,
}

/// A direct sum of weighted full matrix algebras with its faithful normal trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceContext {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct ContextJson {
    blocks: Vec<(usize, f64)>,
}

impl Serialize for TraceContext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ContextJson {
            blocks: self.blocks.iter().map(|b| (b.dim, b.weight)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TraceContext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ContextJson::deserialize(d)?;
        TraceContext::new(&raw.blocks).map_err(serde::de::Error::custom)
    }
}

impl TraceContext {
    pub fn new(blocks: &[(usize, f64)]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidContext("no blocks".into()));
        }
        let mut out = Vec::with_capacity(blocks.len());
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for &(n, w) in blocks {
            if n == 0 {
                return Err(Error::InvalidContext("block of dimension 0".into()));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidContext(format!("block weight {w} must be positive and finite")));
            }
            offsets.push(dim);
            dim += n;
            out.push(Block { dim: n, weight: w });
        }
        Ok(Self { blocks: out, offsets, dim })
    }

    /// `M_n(ℂ)` with the ordinary trace.
    pub fn matrix_algebra(n: usize) -> Result<Self> {
        Self::new(&[(n, 1.0)])
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// `(offset, dim, weight)` for every block, in block-major order.
    pub fn ranges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .map(|(b, &o)| (o, b.dim, b.weight))
    }

    /// Trace weight attached to each basis vector.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            w.extend(std::iter::repeat(b.weight).take(b.dim));
        }
        w
    }

    /// `τ(1)`.
    pub fn unit_trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.dim as f64 * b.weight).sum()
    }

    pub fn check_square(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: if m.nrows() != self.dim { m.nrows() } else { m.ncols() },
            });
        }
        Ok(())
    }

    /// Largest entry outside the block diagonal.
    pub fn affiliation_defect(&self, m: &CMat) -> f64 {
        let mut block_of = vec![0usize; self.dim];
        for (k, (o, n, _)) in self.ranges().enumerate() {
            for slot in &mut block_of[o..o + n] {
                *slot = k;
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows().min(self.dim) {
            for j in 0..m.ncols().min(self.dim) {
                if block_of[i] != block_of[j] {
                    worst = worst.max(m[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn check_affiliated(&self, m: &CMat) -> Result<()> {
        self.check_square(m)?;
        let scale = crate::linalg::max_abs(m).max(1.0);
        let defect = self.affiliation_defect(m);
        if defect > 1e-12 * scale {
            return Err(Error::NotAffiliated(format!(
                "off-block entry of size {defect:.3e}"
            )));
        }
        Ok(())
    }

    /// `τ(m)`, summed block by block with compensation.
    pub fn trace(&self, m: &CMat) -> C64 {
        compensated_sum(self.ranges().flat_map(|(o, n, w)| {
            (o..o + n).map(move |i| m[(i, i)] * w)
        }))
    }

    pub fn block(&self, m: &CMat, k: usize) -> CMat {
        let o = self.offsets[k];
        let n = self.blocks[k].dim;
        m.view((o, o), (n, n)).into_owned()
    }

    /// Block-diagonal matrix from per-block pieces.
    pub fn assemble(&self, pieces: &[CMat]) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for ((o, n, _), p) in self.ranges().zip(pieces) {
            m.view_mut((o, o), (n, n)).copy_from(p);
        }
        m
    }

    pub fn scalar(&self, z: C64) -> CMat {
        CMat::identity(self.dim, self.dim) * z
    }

    pub fn identity(&self) -> CMat {
        self.scalar(c(1.0, 0.0))
    }

    /// Context of `M_n(N)` with the trace `τ ⊗ Tr`.
    pub fn inflate(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidContext("inflation by 0".into()));
        }
        let b: Vec<(usize, f64)> = self.blocks.iter().map(|b| (b.dim * n, b.weight)).collect();
        Self::new(&b)
    }

    /// Context of `N ⊗ M_2(ℂ)` acting on `H ⊕ H`, each block doubled in place.
    pub fn doubled(&self) -> Self {
        let b: Vec<(usize, f64)> = self.blocks.iter().map(|b| (2 * b.dim, b.weight)).collect();
        Self::new(&b).expect("doubling a valid context")
    }

    /// `x ⊗ 1_n` in the inflated ordering `(block, i, k) ↦ offset·n + i·n + k`.
    pub fn inflate_operator(&self, x: &CMat, n: usize) -> CMat {
        let big = self.inflate(n).expect("n > 0");
        let pieces: Vec<CMat> = (0..self.blocks.len())
            .map(|k| self.block(x, k).kronecker(&CMat::identity(n, n)))
            .collect();
        big.assemble(&pieces)
    }

    /// Element of `M_n(N)` from an `n × n` grid of operators.
    pub fn inflate_grid(&self, grid: &[Vec<CMat>]) -> Result<CMat> {
        let n = grid.len();
        if n == 0 || grid.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidContext("inflation grid must be square and non-empty".into()));
        }
        for row in grid {
            for a in row {
                self.check_affiliated(a)?;
            }
        }
        let mut out = CMat::zeros(self.dim * n, self.dim * n);
        for (o, d, _) in self.ranges() {
            for k in 0..n {
                for l in 0..n {
                    let a = &grid[k][l];
                    for i in 0..d {
                        for j in 0..d {
                            out[(o * n + i * n + k, o * n + j * n + l)] = a[(o + i, o + j)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// The `n × n` grid of an element of `M_n(N)`; inverse of [`TraceContext::inflate_grid`].
    pub fn extract_grid(&self, x: &CMat, n: usize) -> Result<Vec<Vec<CMat>>> {
        self.inflate(n)?.check_affiliated(x)?;
        let mut grid = vec![vec![CMat::zeros(self.dim, self.dim); n]; n];
        for (o, d, _) in self.ranges() {
            for (k, row) in grid.iter_mut().enumerate() {
                for (l, a) in row.iter_mut().enumerate() {
                    for i in 0..d {
                        for j in 0..d {
                            a[(o + i, o + j)] = x[(o * n + i * n + k, o * n + j * n + l)];
                        }
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Embeds `x` as `x ⊕ 0` on the doubled space (first copy in each block).
    pub fn embed_first_copy(&self, x: &CMat) -> CMat {
        let big = self.doubled();
        let pieces: Vec<CMat> = (0..self.blocks.len())
            .map(|k| {
                let b = self.block(x, k);
                let n = b.nrows();
                let mut p = CMat::zeros(2 * n, 2 * n);
                p.view_mut((0, 0), (n, n)).copy_from(&b);
                p
            })
            .collect();
        big.assemble(&pieces)
    }
}
