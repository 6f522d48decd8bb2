//! `(e,f)`-indices of compressions `fTe` by kernel counting and by parametrices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::characters::check_projection;
use crate::error::{Error, Result};
use crate::linalg::{range_basis, CMat, C64};
use crate::semifinite::TraceContext;

/// Singular values of `fTe` below `DEFAULT_KERNEL_TOL · ‖T‖` count as kernel. The reference is `‖T‖`
/// rather than the largest singular value of `fTe`, which is pure roundoff when `fTe = 0`.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    Kernel,
    Parametrix,
    MckeanSinger,
    CohomologicalConnes,
    CohomologicalJlo,
    SpectralFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub value: f64,
    pub method: IndexMethod,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IndexReport {
    pub fn new(value: f64, method: IndexMethod) -> Self {
        Self { value, method, diagnostics: BTreeMap::new(), notes: Vec::new() }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }
}

/// `fTe` restricted to `eH → fH` in each block, in orthonormal bases of the two ranges.
struct Compression {
    /// `(E_b, F_b, A_b = F_b* T_b E_b)` per block.
    blocks: Vec<(CMat, CMat, CMat)>,
}

impl Compression {
    fn new(ctx: &TraceContext, e: &CMat, f: &CMat, t: &CMat) -> Result<Self> {
        check_projection(ctx, e)?;
        check_projection(ctx, f)?;
        ctx.check_affiliated(t)?;
        let blocks = (0..ctx.blocks().len())
            .map(|k| {
                let eb = range_basis(&ctx.block(e, k), 1e-6);
                let fb = range_basis(&ctx.block(f, k), 1e-6);
                let a = fb.adjoint() * ctx.block(t, k) * &eb;
                (eb, fb, a)
            })
            .collect();
        Ok(Self { blocks })
    }

    fn singular_values(a: &CMat) -> Vec<f64> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Vec::new();
        }
        a.singular_values().iter().copied().collect()
    }

    /// `‖T‖` over all blocks; at least the largest singular value of any compression.
    fn reference(&self, t: &CMat) -> f64 {
        crate::linalg::op_norm(t).max(self.s_max())
    }

    fn s_max(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|(_, _, a)| Self::singular_values(a))
            .fold(0.0, f64::max)
    }
}

/// `Ind_τ(fTe) = τ(e P_{ker}) − τ(P_{ker*} f)` by thresholded singular values of `fTe: eH → fH`.
pub fn ef_index_kernel(ctx: &TraceContext, e: &CMat, f: &CMat, t: &CMat, tol: f64) -> Result<IndexReport> {
    let comp = Compression::new(ctx, e, f, t)?;
    let s_max = comp.s_max();
    let threshold = tol * comp.reference(t);
    let (mut ker, mut coker) = (0.0, 0.0);
    let (mut below, mut above) = (0.0_f64, f64::INFINITY);
    for ((eb, fb, a), w) in comp.blocks.iter().zip(ctx.blocks().iter().map(|b| b.weight)) {
        let sv = Compression::singular_values(a);
        let rank = sv.iter().filter(|&&s| s > threshold).count();
        for &s in &sv {
            if s > threshold {
                above = above.min(s);
            } else {
                below = below.max(s);
            }
        }
        ker += w * (eb.ncols() - rank) as f64;
        coker += w * (fb.ncols() - rank) as f64;
    }
    let mut r = IndexReport::new(ker - coker, IndexMethod::Kernel)
        .with("kernel_weight", ker)
        .with("cokernel_weight", coker)
        .with("s_max", s_max)
        .with("threshold", threshold)
        .with("largest_below_threshold", below);
    if above.is_finite() {
        r = r.with("smallest_above_threshold", above);
        if threshold > 0.0 && above < 1e3 * threshold {
            r.notes.push(format!("singular value {above:.3e} lies within 1e3 of the threshold {threshold:.3e}"));
        }
    }
    if threshold > 0.0 && below > 1e-3 * threshold {
        r.notes.push(format!("kernel singular value {below:.3e} lies within 1e3 of the threshold {threshold:.3e}"));
    }
    Ok(r)
}

/// Moore–Penrose inverse of `fTe` as a map `fH → eH`, so that `e − eSfTe` and `f − fTeSf`
/// are the kernel and cokernel projections.
pub fn pseudo_parametrix(ctx: &TraceContext, e: &CMat, f: &CMat, t: &CMat) -> Result<CMat> {
    let comp = Compression::new(ctx, e, f, t)?;
    let threshold = DEFAULT_KERNEL_TOL * comp.reference(t);
    let pieces: Vec<CMat> = comp
        .blocks
        .iter()
        .map(|(eb, fb, a)| {
            let pinv = if a.nrows() == 0 || a.ncols() == 0 {
                CMat::zeros(a.ncols(), a.nrows())
            } else {
                let svd = a.clone().svd(true, true);
                let u = svd.u.expect("requested");
                let vt = svd.v_t.expect("requested");
                let mut out = CMat::zeros(a.ncols(), a.nrows());
                for (k, &s) in svd.singular_values.iter().enumerate() {
                    if s > threshold {
                        out += vt.row(k).adjoint() * u.column(k).adjoint() * C64::new(1.0 / s, 0.0);
                    }
                }
                out
            };
            eb * pinv * fb.adjoint()
        })
        .collect();
    Ok(ctx.assemble(&pieces))
}

/// `τ((e − eSfTe)^m) − τ((f − fTeSf)^m)`.
pub fn ef_index_parametrix(
    ctx: &TraceContext,
    e: &CMat,
    f: &CMat,
    t: &CMat,
    s: &CMat,
    m: u32,
) -> Result<IndexReport> {
    check_projection(ctx, e)?;
    check_projection(ctx, f)?;
    ctx.check_affiliated(t)?;
    ctx.check_affiliated(s)?;
    if m == 0 {
        return Err(Error::Domain("parametrix power m must be ≥ 1".into()));
    }
    let fte = f * t * e;
    let k = e - e * s * &fte;
    let c = f - &fte * s * f;
    let pow = |x: &CMat| (1..m).fold(x.clone(), |acc, _| &acc * x);
    let (tk, tc) = (ctx.trace(&pow(&k)), ctx.trace(&pow(&c)));
    let v = tk - tc;
    let idem = |x: &CMat| crate::linalg::op_norm(&(x * x - x));
    Ok(IndexReport::new(v.re, IndexMethod::Parametrix)
        .with("power", m as f64)
        .with("kernel_trace", tk.re)
        .with("cokernel_trace", tc.re)
        .with("imaginary_part", v.im)
        .with("kernel_idempotency_defect", idem(&k))
        .with("cokernel_idempotency_defect", idem(&c)))
}
