//! Chern characters of projections and unitaries as families of chains.

use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::cyclic::{canonicalize, Chain, GradedChain};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, identity, op_norm, CMat, C64};
use crate::semifinite::TraceContext;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `(−1)^k (2k)! / (2·k!)` for `k ≥ 1`; level 0 carries coefficient 1.
pub fn chern_plus_coefficient(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
    s * factorial(2 * k) / (2.0 * factorial(k))
}

/// `(−1)^{k+1} k! / Γ(1/2)`.
pub fn chern_minus_coefficient(k: usize) -> f64 {
    let s = if k % 2 == 0 { -1.0 } else { 1.0 };
    s * factorial(k) / gamma(0.5)
}

pub fn check_projection(ctx: &TraceContext, p: &CMat) -> Result<()> {
    ctx.check_affiliated(p)?;
    let defect = hermitian_defect(p).max(op_norm(&(p * p - p)));
    if defect > 1e-10 {
        return Err(Error::Invalid { what: "projection (p² = p = p*)".into(), defect });
    }
    Ok(())
}

pub fn check_unitary(ctx: &TraceContext, u: &CMat) -> Result<()> {
    ctx.check_affiliated(u)?;
    let defect = op_norm(&(u.adjoint() * u - identity(ctx.dim())));
    if defect > 1e-10 {
        return Err(Error::Invalid { what: "unitary (u*u = 1)".into(), defect });
    }
    Ok(())
}

/// `ch₊(p)`: level 0 is `(p)`, level `2k` is `(−1)^k (2k)!/(2·k!) (2p−1, p, …, p)`.
pub fn chern_plus(ctx: &Arc<TraceContext>, p: &CMat, max_k: usize) -> Result<GradedChain> {
    check_projection(ctx, p)?;
    let mut out = GradedChain::default();
    out.insert(Chain::elementary(ctx.clone(), C64::new(1.0, 0.0), vec![p.clone()])?);
    let sym = p * C64::new(2.0, 0.0) - ctx.identity();
    for k in 1..=max_k {
        let mut entries = vec![sym.clone()];
        entries.extend(std::iter::repeat(p.clone()).take(2 * k));
        let c = Chain::elementary(ctx.clone(), C64::new(chern_plus_coefficient(k), 0.0), entries)?;
        out.insert(canonicalize(&c));
    }
    Ok(out)
}

/// `ch₋(u)`: level `2k+1` is `(−1)^{k+1} k!/Γ(1/2) (u*, u, …, u*, u)`.
pub fn chern_minus(ctx: &Arc<TraceContext>, u: &CMat, max_k: usize) -> Result<GradedChain> {
    check_unitary(ctx, u)?;
    let ustar = u.adjoint();
    let mut out = GradedChain::default();
    for k in 0..=max_k {
        let entries = (0..2 * k + 2).map(|j| if j % 2 == 0 { ustar.clone() } else { u.clone() }).collect();
        let c = Chain::elementary(ctx.clone(), C64::new(chern_minus_coefficient(k), 0.0), entries)?;
        out.insert(canonicalize(&c));
    }
    Ok(out)
}
