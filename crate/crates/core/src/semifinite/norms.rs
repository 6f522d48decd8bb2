use serde::{Deserialize, Serialize};

use super::{HermitianSpectrum, Operator, TraceContext};
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum_real, op_norm, CMat};

/// Generalised singular values of an operator as a descending step function:
/// `μ_t(T) = value_k` on the k-th step of length `weight_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularProfile {
    pub steps: Vec<(f64, f64)>,
}

impl SingularProfile {
    pub fn of(ctx: &TraceContext, m: &CMat) -> Result<Self> {
        ctx.check_affiliated(m)?;
        let mut raw: Vec<(f64, f64)> = Vec::with_capacity(ctx.dim());
        for (k, (_, _, w)) in ctx.ranges().enumerate() {
            for s in ctx.block(m, k).singular_values().iter() {
                raw.push((*s, w));
            }
        }
        raw.sort_by(|a, b| b.0.total_cmp(&a.0));
        let thr = 1e-12 * raw.first().map_or(0.0, |r| r.0);
        let mut steps: Vec<(f64, f64)> = Vec::new();
        for (s, w) in raw {
            match steps.last_mut() {
                Some(last) if (last.0 - s).abs() <= thr => last.1 += w,
                _ => steps.push((s, w)),
            }
        }
        Ok(Self { steps })
    }

    pub fn total_weight(&self) -> f64 {
        self.steps.iter().map(|s| s.1).sum()
    }

    /// `μ_t`, zero past `τ(1)`.
    pub fn mu(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &(s, w) in &self.steps {
            acc += w;
            if t < acc {
                return s;
            }
        }
        0.0
    }

    /// `∫ μ_t^p dt = Σ weight·value^p`.
    pub fn integral_pow(&self, p: f64) -> f64 {
        compensated_sum_real(self.steps.iter().map(|&(s, w)| if s == 0.0 { 0.0 } else { w * s.powf(p) }))
    }

    /// Schatten (quasi-)norm `‖T‖_p`; `p = ∞` gives the operator norm.
    pub fn p_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.steps.first().map_or(0.0, |s| s.0);
        }
        self.integral_pow(p).powf(1.0 / p)
    }
}

pub fn singular_profile(t: &Operator) -> Result<SingularProfile> {
    SingularProfile::of(t.ctx(), t.matrix())
}

pub fn p_norm(t: &Operator, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(singular_profile(t)?.p_norm(p))
}

pub fn p_norm_matrix(ctx: &TraceContext, m: &CMat, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(SingularProfile::of(ctx, m)?.p_norm(p))
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("Schatten exponent must be positive, got {p}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-10) + 1e-300 }
    }
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `‖ST‖_r ≤ ‖S‖_p ‖T‖_q` for `1/p + 1/q = 1/r`.
pub fn holder_check(s: &Operator, t: &Operator, p: f64, q: f64, r: f64) -> Result<BoundCheck> {
    for e in [p, q, r] {
        check_exponent(e)?;
    }
    if (inv(p) + inv(q) - inv(r)).abs() > 1e-12 {
        return Err(Error::ExponentMismatch { p, q, r });
    }
    let st = s.mul(t)?;
    Ok(BoundCheck::new(p_norm(&st, r)?, p_norm(s, p)? * p_norm(t, q)?))
}

/// `τ(e^{-tD²})`.
pub fn heat_trace(d: &Operator, t: f64) -> Result<f64> {
    let spec = HermitianSpectrum::new(d.ctx(), d.matrix())?;
    Ok(spec.trace_of(|x| (-t * x * x).exp()))
}

/// `τ((1 + D²)^{-p/2})`.
pub fn resolvent_trace(d: &Operator, p: f64) -> Result<f64> {
    let spec = HermitianSpectrum::new(d.ctx(), d.matrix())?;
    Ok(spec.trace_of(|x| (1.0 + x * x).powf(-p / 2.0)))
}

/// `τ(e^{-tD²}) ≤ (p/2e)^{p/2} t^{-p/2} e^t τ((1+D²)^{-p/2})`.
pub fn ptheta_check(d: &Operator, p: f64, t: f64) -> Result<BoundCheck> {
    if !(p > 0.0 && t > 0.0) {
        return Err(Error::Domain("p and t must be positive".into()));
    }
    let lhs = heat_trace(d, t)?;
    let k = (p / (2.0 * std::f64::consts::E)).powf(p / 2.0);
    let rhs = k * t.powf(-p / 2.0) * t.exp() * resolvent_trace(d, p)?;
    Ok(BoundCheck::new(lhs, rhs))
}

/// Sample times for the θ-summability bound.
pub const THETA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample {
    pub t: f64,
    pub heat_trace: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummabilityEntry {
    pub p: f64,
    /// `τ((1+D²)^{-p/2})`.
    pub p_value: f64,
    pub theta_samples: Vec<ThetaSample>,
    pub ptheta_bound_pass: bool,
}

/// `τ((1+D²)^{-p/2})` for each `p`, with the heat-trace bound sampled on [`THETA_GRID`].
pub fn summability_report(d: &Operator, p_grid: &[f64]) -> Result<Vec<SummabilityEntry>> {
    p_grid
        .iter()
        .map(|&p| {
            check_exponent(p)?;
            let theta_samples = THETA_GRID
                .iter()
                .map(|&t| {
                    let c = ptheta_check(d, p, t)?;
                    Ok(ThetaSample { t, heat_trace: c.lhs, bound: c.rhs, pass: c.pass })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SummabilityEntry {
                p,
                p_value: resolvent_trace(d, p)?,
                ptheta_bound_pass: theta_samples.iter().all(|s| s.pass),
                theta_samples,
            })
        })
        .collect()
}

pub fn operator_norm(t: &Operator) -> f64 {
    op_norm(t.matrix())
}

impl SingularProfile {
    /// Breakpoints of the step function, and midpoints between them.
    fn sample_points(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut pts = vec![0.0];
        for &(_, w) in &self.steps {
            pts.push(acc + 0.5 * w);
            acc += w;
            pts.push(acc);
        }
        pts
    }
}

/// `max_x (μ_x(a) − c·μ_x(b))` over the breakpoints of both profiles; `≤ 0` when `μ(a) ≤ c·μ(b)`.
pub fn profile_excess(a: &SingularProfile, b: &SingularProfile, c: f64) -> f64 {
    a.sample_points()
        .into_iter()
        .chain(b.sample_points())
        .map(|x| a.mu(x) - c * b.mu(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `μ(T) = μ(|T|) = μ(T*)` and `μ(zT) = |z|μ(T)`: the largest pointwise deviation.
pub fn mu_identity_defect(ctx: &TraceContext, t: &CMat, z: crate::linalg::C64) -> Result<f64> {
    let base = SingularProfile::of(ctx, t)?;
    let abs = {
        let tt = t.adjoint() * t;
        HermitianSpectrum::new(ctx, &tt)?.apply(|x| x.max(0.0).sqrt())
    };
    let others = [
        (SingularProfile::of(ctx, &abs)?, 1.0),
        (SingularProfile::of(ctx, &t.adjoint())?, 1.0),
        (SingularProfile::of(ctx, &(t * z))?, z.norm()),
    ];
    let mut worst: f64 = 0.0;
    for (p, c) in &others {
        worst = worst.max(profile_excess(p, &base, *c).abs()).max(profile_excess(&base, p, 1.0 / c).abs());
    }
    Ok(worst)
}

/// `μ_x(T) ≤ μ_x(S)` for `0 ≤ T ≤ S`.
pub fn mu_monotone_check(ctx: &TraceContext, t: &CMat, s: &CMat) -> Result<BoundCheck> {
    let (a, b) = (SingularProfile::of(ctx, t)?, SingularProfile::of(ctx, s)?);
    let excess = profile_excess(&a, &b, 1.0);
    Ok(BoundCheck::new(excess.max(0.0), 1e-12 * op_norm(s).max(1.0)))
}

/// `μ_x(STR) ≤ ‖S‖‖R‖μ_x(T)`.
pub fn mu_product_check(ctx: &TraceContext, s: &CMat, t: &CMat, r: &CMat) -> Result<BoundCheck> {
    let a = SingularProfile::of(ctx, &(s * t * r))?;
    let b = SingularProfile::of(ctx, t)?;
    let c = op_norm(s) * op_norm(r);
    let excess = profile_excess(&a, &b, c);
    Ok(BoundCheck::new(excess.max(0.0), 1e-12 * c.max(1.0) * op_norm(t).max(1.0)))
}

/// `τ(|T|)` against `∫₀^∞ μ_x(T) dx`; returns the relative difference.
pub fn tau_integral_defect(ctx: &TraceContext, t: &CMat) -> Result<f64> {
    let tt = t.adjoint() * t;
    let abs = HermitianSpectrum::new(ctx, &tt)?.apply(|x| x.max(0.0).sqrt());
    let tau = ctx.trace(&abs).re;
    let integral = SingularProfile::of(ctx, t)?.integral_pow(1.0);
    Ok((tau - integral).abs() / tau.abs().max(1e-300))
}

/// `‖STR‖_p ≤ ‖S‖‖R‖‖T‖_p`.
pub fn str_norm_check(ctx: &TraceContext, s: &CMat, t: &CMat, r: &CMat, p: f64) -> Result<BoundCheck> {
    let lhs = p_norm_matrix(ctx, &(s * t * r), p)?;
    Ok(BoundCheck::new(lhs, op_norm(s) * op_norm(r) * p_norm_matrix(ctx, t, p)?))
}
