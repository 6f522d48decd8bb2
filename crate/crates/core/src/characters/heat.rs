//! Heat brackets `⟨F_0, …, F_n⟩_D = ∫_{Δ_n} τ(χ F_0 e^{−t_1 D²} F_1 ⋯ F_n e^{−(1−t_n) D²}) dt`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::divided::simplex_exp_integral;
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, Accumulator, CMat, C64};
use crate::quadrature::integrate;
use crate::semifinite::{Grading, HermitianSpectrum, TraceContext};

/// Default caps on simplex dimension and Hilbert space dimension.
pub const MAX_SIMPLEX_DIM: usize = 6;
pub const MAX_SPACE_DIM: usize = 64;
const HARD_SIMPLEX_DIM: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BracketMethod {
    DividedDifference,
    NestedQuadrature { tol: f64 },
    MonteCarlo { seed: u64, samples: usize },
}

/// Precomputed spectral data of `D` for evaluating heat brackets.
pub struct HeatKernel {
    dim: usize,
    spectrum: HermitianSpectrum,
    /// Eigenvalues of `(sD)²` after merging numerically equal ones.
    nodes: Vec<f64>,
    /// Index of each eigenvector's merged node class.
    class: Vec<u8>,
    class_nodes: Vec<f64>,
    chi_rot: Option<CMat>,
    weights: Vec<f64>,
    max_simplex_dim: usize,
    tables: RwLock<HashMap<u128, f64>>,
}

impl HeatKernel {
    /// Heat kernel of `scale·D`; `D` must be self-adjoint and affiliated.
    pub fn new(ctx: &TraceContext, d: &CMat, grading: Option<&Grading>, scale: f64) -> Result<Self> {
        let spectrum = HermitianSpectrum::new(ctx, d)?;
        Self::from_spectrum(spectrum, grading, scale)
    }

    pub fn from_spectrum(spectrum: HermitianSpectrum, grading: Option<&Grading>, scale: f64) -> Result<Self> {
        let dim = spectrum.values.len();
        if dim > 255 {
            return Err(Error::ResourceLimit(format!("dimension {dim} exceeds 255")));
        }
        let nodes: Vec<f64> = spectrum.values.iter().map(|x| (scale * x).powi(2)).collect();
        let (class, class_nodes) = cluster(&nodes);
        let chi_rot = grading.map(|g| spectrum.rotate(&g.matrix()));
        let weights = spectrum.weights.clone();
        Ok(Self {
            dim,
            spectrum,
            nodes,
            class,
            class_nodes,
            chi_rot,
            weights,
            max_simplex_dim: HARD_SIMPLEX_DIM,
            tables: RwLock::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues of `(sD)²`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spectrum(&self) -> &HermitianSpectrum {
        &self.spectrum
    }

    pub fn with_max_simplex_dim(mut self, n: usize) -> Self {
        self.max_simplex_dim = n.min(HARD_SIMPLEX_DIM);
        self
    }

    /// `U* x U` in the eigenbasis of `D`.
    pub fn rotate(&self, x: &CMat) -> CMat {
        self.spectrum.rotate(x)
    }

    /// `W χ̃ x̃_0`: the rotated leading factor carrying grading and trace weights.
    fn lead(&self, x0_rot: &CMat) -> CMat {
        let mut g = match &self.chi_rot {
            Some(chi) => chi * x0_rot,
            None => x0_rot.clone(),
        };
        for (i, w) in self.weights.iter().enumerate() {
            if *w != 1.0 {
                g.row_mut(i).scale_mut(*w);
            }
        }
        g
    }

    fn check_order(&self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::Level("a heat bracket needs at least one factor".into()));
        }
        if m - 1 > self.max_simplex_dim {
            return Err(Error::ResourceLimit(format!(
                "heat bracket of simplex dimension {} exceeds the cap {}",
                m - 1,
                self.max_simplex_dim
            )));
        }
        Ok(())
    }

    pub fn bracket(&self, factors: &[&CMat]) -> Result<C64> {
        let rotated: Vec<CMat> = factors.iter().map(|x| self.rotate(x)).collect();
        let refs: Vec<&CMat> = rotated.iter().collect();
        self.bracket_rotated(&refs)
    }

    /// Divided-difference evaluation with factors already in the eigenbasis.
    pub fn bracket_rotated(&self, factors: &[&CMat]) -> Result<C64> {
        self.check_order(factors.len())?;
        for f in factors {
            if f.nrows() != self.dim || f.ncols() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: f.nrows() });
            }
        }
        let m = factors.len() - 1;
        let g0 = self.lead(factors[0]);
        if m == 0 {
            return Ok(compensated_sum(
                (0..self.dim).map(|i| g0[(i, i)] * (-self.nodes[i]).exp()),
            ));
        }
        let mut gs: Vec<&CMat> = Vec::with_capacity(m + 1);
        gs.push(&g0);
        gs.extend_from_slice(&factors[1..]);
        let d = self.dim;
        let work = d.pow((m + 1) as u32);
        let per_root = |i0: usize| -> C64 {
            let mut idx = vec![0usize; m + 1];
            idx[0] = i0;
            let mut acc = Accumulator::new();
            self.walk(&gs, &mut idx, 1, C64::new(1.0, 0.0), &mut acc);
            acc.value()
        };
        let parts: Vec<C64> = if work > 20_000 {
            (0..d).into_par_iter().map(per_root).collect()
        } else {
            (0..d).map(per_root).collect()
        };
        Ok(compensated_sum(parts))
    }

    fn walk(&self, gs: &[&CMat], idx: &mut [usize], depth: usize, prod: C64, acc: &mut Accumulator) {
        let m = gs.len() - 1;
        let prev = idx[depth - 1];
        if depth > m {
            let closing = gs[m][(prev, idx[0])];
            if closing == C64::new(0.0, 0.0) {
                return;
            }
            acc.add(prod * closing * self.dd(idx));
            return;
        }
        let row = gs[depth - 1].row(prev);
        for (i, z) in row.iter().enumerate() {
            if *z == C64::new(0.0, 0.0) {
                continue;
            }
            idx[depth] = i;
            self.walk(gs, idx, depth + 1, prod * z, acc);
        }
    }

    fn dd(&self, idx: &[usize]) -> f64 {
        let mut cls: Vec<u8> = idx.iter().map(|&i| self.class[i]).collect();
        cls.sort_unstable();
        let mut key: u128 = cls.len() as u128;
        for c in &cls {
            key = (key << 8) | *c as u128;
        }
        if let Some(v) = self.tables.read().expect("cache lock").get(&key) {
            return *v;
        }
        let nodes: Vec<f64> = cls.iter().map(|&c| self.class_nodes[c as usize]).collect();
        let v = simplex_exp_integral(&nodes);
        self.tables.write().expect("cache lock").insert(key, v);
        v
    }

    /// `e^{-sD²}` as a diagonal in the eigenbasis.
    fn heat_diag(&self, s: f64) -> Vec<f64> {
        self.nodes.iter().map(|x| (-s * x).exp()).collect()
    }

    /// Integrand `τ(χ F_0 e^{−s_0 D²} F_1 ⋯ F_n e^{−s_n D²})` in rotated form.
    fn integrand(&self, gs: &[CMat], times: &[f64]) -> C64 {
        let m = gs.len() - 1;
        let mut p = gs[0].clone();
        let mut prev = 0.0;
        for j in 1..=m {
            let e = self.heat_diag(times[j - 1] - prev);
            scale_columns(&mut p, &e);
            p = &p * &gs[j];
            prev = times[j - 1];
        }
        let e = self.heat_diag(1.0 - prev);
        compensated_sum((0..self.dim).map(|i| p[(i, i)] * e[i]))
    }

    /// Nested adaptive Gauss–Legendre over the simplex (independent of divided differences).
    pub fn bracket_nested_quadrature(&self, factors: &[&CMat], tol: f64) -> Result<C64> {
        self.check_order(factors.len())?;
        let mut gs: Vec<CMat> = factors.iter().map(|x| self.rotate(x)).collect();
        gs[0] = self.lead(&gs[0]);
        let m = gs.len() - 1;
        let mut times = vec![0.0; m];
        self.nested(&gs, &mut times, 0, 0.0, tol)
    }

    fn nested(&self, gs: &[CMat], times: &mut Vec<f64>, depth: usize, lo: f64, tol: f64) -> Result<C64> {
        let m = gs.len() - 1;
        if depth == m {
            return Ok(self.integrand(gs, times));
        }
        if 1.0 - lo <= 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let cell = std::cell::RefCell::new(times.clone());
        let r = integrate(
            |t| {
                let mut ts = cell.borrow_mut().clone();
                ts[depth] = t;
                self.nested(gs, &mut ts, depth + 1, t, tol)
            },
            lo,
            1.0,
            1,
            10,
            tol,
        )?;
        Ok(r.value)
    }

    /// Plain Monte Carlo over the simplex; returns the estimate and its standard error.
    pub fn bracket_monte_carlo(&self, factors: &[&CMat], samples: usize, seed: u64) -> Result<(C64, f64)> {
        self.check_order(factors.len())?;
        if samples < 4 {
            return Err(Error::Domain("Monte Carlo needs at least four samples".into()));
        }
        let mut gs: Vec<CMat> = factors.iter().map(|x| self.rotate(x)).collect();
        gs[0] = self.lead(&gs[0]);
        let m = gs.len() - 1;
        let volume = 1.0 / (1..=m).map(|k| k as f64).product::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = Accumulator::new();
        let mut sq = 0.0;
        let mut times = vec![0.0; m];
        let mut mirror = vec![0.0; m];
        // antithetic pairs: t and 1 - reverse(t) both lie in the ordered simplex
        let pairs = samples / 2;
        for _ in 0..pairs {
            for t in times.iter_mut() {
                *t = rng.gen::<f64>();
            }
            times.sort_by(f64::total_cmp);
            for (k, t) in mirror.iter_mut().enumerate() {
                *t = 1.0 - times[m - 1 - k];
            }
            let v = (self.integrand(&gs, &times) + self.integrand(&gs, &mirror)) * 0.5;
            sum.add(v);
            sq += v.norm_sqr();
        }
        let n = pairs as f64;
        let mean = sum.value() / n;
        let var = ((sq / n - mean.norm_sqr()) * n / (n - 1.0)).max(0.0);
        Ok((mean * volume, (var / n).sqrt() * volume))
    }
}

fn scale_columns(p: &mut CMat, e: &[f64]) {
    for (j, s) in e.iter().enumerate() {
        p.column_mut(j).scale_mut(*s);
    }
}

/// Groups nearly equal nodes; returns each node's class and the class representatives.
fn cluster(nodes: &[f64]) -> (Vec<u8>, Vec<f64>) {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    let mut class = vec![0u8; nodes.len()];
    let mut reps: Vec<f64> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let x = nodes[i];
        match reps.last() {
            Some(&r) if (x - r).abs() <= 1e-14 * x.abs().max(1.0) => {
                members.last_mut().expect("non-empty").push(i);
            }
            _ => {
                reps.push(x);
                members.push(vec![i]);
            }
        }
    }
    let mut class_nodes = Vec::with_capacity(members.len());
    for (k, group) in members.iter().enumerate() {
        let mean = group.iter().map(|&i| nodes[i]).sum::<f64>() / group.len() as f64;
        class_nodes.push(mean);
        for &i in group {
            class[i] = k as u8;
        }
    }
    (class, class_nodes)
}

/// `⟨F_0, …, F_n⟩` for a self-adjoint `D` with optional grading, by the chosen method.
///
/// Simplex dimension is capped at 6 and `dim H` at 64 unless `allow_large` is set.
pub fn heat_bracket(
    ctx: &TraceContext,
    d: &CMat,
    grading: Option<&Grading>,
    factors: &[CMat],
    method: BracketMethod,
    allow_large: bool,
) -> Result<C64> {
    if !allow_large {
        if factors.len() > MAX_SIMPLEX_DIM + 1 {
            return Err(Error::ResourceLimit(format!(
                "simplex dimension {} exceeds {MAX_SIMPLEX_DIM}",
                factors.len().saturating_sub(1)
            )));
        }
        if ctx.dim() > MAX_SPACE_DIM {
            return Err(Error::ResourceLimit(format!("dimension {} exceeds {MAX_SPACE_DIM}", ctx.dim())));
        }
    }
    for f in factors {
        ctx.check_affiliated(f)?;
    }
    let kernel = Arc::new(HeatKernel::new(ctx, d, grading, 1.0)?);
    let refs: Vec<&CMat> = factors.iter().collect();
    match method {
        BracketMethod::DividedDifference => kernel.bracket(&refs),
        BracketMethod::NestedQuadrature { tol } => kernel.bracket_nested_quadrature(&refs, tol),
        BracketMethod::MonteCarlo { seed, samples } => Ok(kernel.bracket_monte_carlo(&refs, samples, seed)?.0),
    }
}
