//! Operator inequalities for the passage `D ↦ D|D|^{−α}`: interpolation of commutators,
//! the `[F ln|D|, a]` estimate and stability of the heat trace under bounded perturbations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator, hermitian_defect, op_norm, CMat, C64};
use crate::quadrature::integrate;
use crate::semifinite::{p_norm_matrix, HermitianSpectrum, Parity};

use super::module::UnboundedModule;

fn invertible_spectrum(module: &UnboundedModule) -> Result<HermitianSpectrum> {
    let spec = module.spectrum()?;
    crate::characters::require_invertible(&spec)?;
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub alpha: f64,
    pub p: f64,
    /// `‖[D_α, a]‖_{p/α}`, the operator norm at `α = 0`.
    pub lhs: f64,
    /// `‖[D,a]‖ · ‖(1+D²)^{−1/2}‖_p^α`.
    pub rhs: f64,
    pub pass: bool,
    /// `‖[D,a]‖ · ‖|D|^{−1}‖_p^α`, which holds at every scale of `D`.
    pub certified_rhs: f64,
    pub certified_pass: bool,
}

/// `‖[D|D|^{−α}, a]‖_{p/α} ≤ ‖[D,a]‖ · C_p^α`.
pub fn interpolation_bound_check(module: &UnboundedModule, a: &CMat, alpha: f64, p: f64) -> Result<InterpolationReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("α = {alpha} must lie in [0, 1]")));
    }
    if !(p > 0.0) {
        return Err(Error::Domain(format!("p = {p} must be positive")));
    }
    module.ctx.check_affiliated(a)?;
    let spec = invertible_spectrum(module)?;
    let da = module.d_alpha(alpha)?;
    let c = commutator(&da.d, a);
    let lhs = if alpha == 0.0 { op_norm(&c) } else { p_norm_matrix(&module.ctx, &c, p / alpha)? };
    let base = op_norm(&commutator(&module.d, a));
    let displayed = p_norm_matrix(&module.ctx, &spec.apply(|x| (1.0 + x * x).powf(-0.5)), p)?;
    let inverse = p_norm_matrix(&module.ctx, &spec.apply(|x| 1.0 / x.abs()), p)?;
    let rhs = base * displayed.powf(alpha);
    let certified_rhs = base * inverse.powf(alpha);
    let ok = |r: f64| lhs <= r * (1.0 + 1e-10) + 1e-14;
    Ok(InterpolationReport { alpha, p, lhs, rhs, pass: ok(rhs), certified_rhs, certified_pass: ok(certified_rhs) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogConstants {
    /// `∫₀^∞ (1+x)^{−1} x^{−1/2} dx`.
    pub c1: f64,
    /// `∫₀^∞ (1+x)^{−1} x^{−1/2} ln x dx`.
    pub c1_prime: f64,
    pub error: f64,
    pub tail: f64,
}

/// Both constants by adaptive Gauss–Legendre quadrature after `x = e^s`, which turns the
/// integrands into `1/(2cosh(s/2))` and `s/(2cosh(s/2))` on `[−S, S]`.
pub fn log_constants() -> Result<LogConstants> {
    const S: f64 = 90.0;
    let k1 = integrate(|s| Ok(C64::new(0.5 / (0.5 * s).cosh(), 0.0)), -S, S, 16, 12, 1e-14)?;
    let k2 = integrate(|s| Ok(C64::new(0.5 * s / (0.5 * s).cosh(), 0.0)), -S, S, 16, 12, 1e-14)?;
    // ∫_S^∞ e^{−s/2} = 2e^{−S/2} and ∫_S^∞ s e^{−s/2} = (2S+4)e^{−S/2}, on both sides
    let tail = 2.0 * (2.0 * S + 4.0) * (-0.5 * S).exp();
    Ok(LogConstants { c1: k1.value.re, c1_prime: k2.value.re, error: k1.error.max(k2.error), tail })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogCommutatorReport {
    /// `‖[F ln|D|, a]‖`.
    pub lhs: f64,
    /// `½‖[D,a]‖(‖|D|⁻¹ln|D|‖ + (C₁′/C₁)‖|D|⁻¹‖) + (C₁′/2C₁)‖[F,a]‖`.
    pub rhs: f64,
    pub pass: bool,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C1prime")]
    pub c1_prime: f64,
    /// Schur-multiplier bound `‖g[λ_i, λ_j]‖_{S} · ‖[D,a]‖`, `g(x) = sign(x) ln|x|`.
    pub certified_rhs: f64,
    pub certified_pass: bool,
}

/// Bound on the Schur multiplier norm of `M` by its largest row or column `ℓ²` norm.
fn schur_norm_bound(m: &CMat) -> f64 {
    let rows = (0..m.nrows()).map(|i| m.row(i).norm()).fold(0.0, f64::max);
    let cols = (0..m.ncols()).map(|j| m.column(j).norm()).fold(0.0, f64::max);
    rows.min(cols)
}

pub fn log_commutator_check(module: &UnboundedModule, a: &CMat, constants: &LogConstants) -> Result<LogCommutatorReport> {
    module.ctx.check_affiliated(a)?;
    let spec = invertible_spectrum(module)?;
    let g = |x: f64| x.signum() * x.abs().ln();
    let lhs = op_norm(&commutator(&spec.apply(g), a));
    let f = spec.apply(f64::signum);
    let da = op_norm(&commutator(&module.d, a));
    let fa = op_norm(&commutator(&f, a));
    let inv = op_norm(&spec.apply(|x| 1.0 / x.abs()));
    let inv_log = op_norm(&spec.apply(|x| x.abs().ln() / x.abs()));
    let ratio = constants.c1_prime / constants.c1;
    let rhs = 0.5 * da * (inv_log + ratio * inv) + 0.5 * ratio * fa;

    let scale = spec.max_abs();
    let mut schur: f64 = 0.0;
    for &(o, n) in &spec.blocks {
        let l = &spec.values[o..o + n];
        let m = CMat::from_fn(n, n, |i, j| {
            let v = if (l[i] - l[j]).abs() <= 1e-12 * scale { 1.0 / l[i].abs() } else { (g(l[i]) - g(l[j])) / (l[i] - l[j]) };
            C64::new(v, 0.0)
        });
        schur = schur.max(schur_norm_bound(&m));
    }
    let certified_rhs = schur * da;
    let ok = |r: f64| lhs <= r * (1.0 + 1e-10) + 1e-14;
    Ok(LogCommutatorReport {
        lhs,
        rhs,
        pass: ok(rhs),
        c1: constants.c1,
        c1_prime: constants.c1_prime,
        certified_rhs,
        certified_pass: ok(certified_rhs),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `τ(e^{−(1−ε/2)(D+V)²}) ≤ e^{(1+2/ε)‖V‖²} τ(e^{−(1−ε)D²})`.
pub fn perturbation_bound_check(module: &UnboundedModule, v: &CMat, eps: f64) -> Result<PerturbationReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} must lie in (0, 1)")));
    }
    module.ctx.check_affiliated(v)?;
    let vn = op_norm(v);
    let defect = hermitian_defect(v);
    if defect > 1e-10 * vn.max(1.0) {
        return Err(Error::NotSelfAdjoint { defect });
    }
    if let Some(g) = &module.grading {
        let d = g.parity_defect(v, Parity::Odd);
        if d > 1e-10 * vn.max(1.0) {
            return Err(Error::Parity(format!("perturbation is not odd (defect {d:.3e})")));
        }
    }
    let lhs = HermitianSpectrum::new(&module.ctx, &(&module.d + v))?.trace_of(|x| (-(1.0 - eps / 2.0) * x * x).exp());
    let heat = module.spectrum()?.trace_of(|x| (-(1.0 - eps) * x * x).exp());
    let rhs = ((1.0 + 2.0 / eps) * vn * vn).exp() * heat;
    Ok(PerturbationReport { epsilon: eps, lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-12) })
}
