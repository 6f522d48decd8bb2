//! Retracted JLO cochain `C̃hⁿ_t(D) = Ch^{≤n}(tD) − B∫₀ᵗ Chⁿ⁺¹(uD, D) du`, its reduction to the
//! Connes character, the Getzler estimate and the `D_α = D|D|^{−α}` transgression.

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::cyclic::{connes_boundary, hochschild_boundary, Chain, Cochain};
use crate::error::{Error, Result};
use crate::fredholm::UnboundedModule;
use crate::linalg::{commutator, op_norm, CMat, C64};
use crate::quadrature::{integrate, integrate_to_infinity, Integral, QuadratureSpec};
use crate::semifinite::{BoundCheck, Grading, HermitianSpectrum, TraceContext};

use super::checks::{pairing, slope_check, IdentityReport, SlopeReport};
use super::connes::connes_cochain;
use super::heat::HeatKernel;
use super::jlo::{check_level_parity, jlo_template, jlo_v_template};

/// Upper limit `t` of the retraction; `∞` requires `D` invertible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(t) => s.serialize_f64(*t),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(Horizon::Finite(t)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Horizon::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// Rejects `D` whose smallest `|λ|` is below `1e-8·‖D‖`.
pub fn require_invertible(spec: &HermitianSpectrum) -> Result<f64> {
    let (gap, norm) = (spec.min_abs(), spec.max_abs());
    if norm == 0.0 || gap <= 1e-8 * norm {
        return Err(Error::NotInvertible(format!(
            "min |λ(D)| = {gap:.3e} against ‖D‖ = {norm:.3e}; apply double() first"
        )));
    }
    Ok(gap)
}

/// `C̃hⁿ_t(D)` as a cochain on levels `m ≤ n` of the module's parity.
pub struct RetractedJlo {
    ctx: Arc<TraceContext>,
    spectrum: HermitianSpectrum,
    d: CMat,
    grading: Option<Grading>,
    n: usize,
    horizon: Horizon,
    quad: QuadratureSpec,
    gap: f64,
}

impl RetractedJlo {
    pub fn new(module: &UnboundedModule, n: usize, horizon: Horizon, quad: QuadratureSpec) -> Result<Self> {
        module.require_valid()?;
        check_level_parity(module.is_graded(), n)?;
        let spectrum = module.spectrum()?;
        let gap = match horizon {
            Horizon::Infinite => require_invertible(&spectrum)?,
            Horizon::Finite(t) if !(t >= 0.0 && t.is_finite()) => {
                return Err(Error::Domain(format!("retraction time {t} must be finite and ≥ 0")))
            }
            Horizon::Finite(_) => spectrum.min_abs(),
        };
        Ok(Self {
            ctx: module.ctx.clone(),
            spectrum,
            d: module.d.clone(),
            grading: module.grading.clone(),
            n,
            horizon,
            quad,
            gap,
        })
    }

    fn kernel(&self, scale: f64) -> Result<Arc<HeatKernel>> {
        Ok(Arc::new(HeatKernel::from_spectrum(self.spectrum.clone(), self.grading.as_ref(), scale)?))
    }

    /// `Ch^m(tD)(entries)`; zero at `t = ∞`.
    fn truncated(&self, entries: &[CMat]) -> Result<C64> {
        match self.horizon {
            Horizon::Infinite => Ok(C64::new(0.0, 0.0)),
            Horizon::Finite(t) => {
                let m = entries.len() - 1;
                jlo_template(&self.kernel(t)?, &(&self.d * C64::new(t, 0.0)), m).evaluate(entries)
            }
        }
    }

    /// `∫₀ᵗ Chⁿ⁺¹(uD, D)(B(a_0..a_n)) du`, with a certified tail bound when `t = ∞`.
    pub fn integral(&self, entries: &[CMat]) -> Result<Integral> {
        let c = Chain::elementary(self.ctx.clone(), C64::new(1.0, 0.0), entries.to_vec())?;
        let bc = connes_boundary(&c);
        if bc.is_empty() {
            return Ok(Integral::default());
        }
        let n = self.n;
        let f = |u: f64| -> Result<C64> {
            let k = self.kernel(u)?;
            let phi = jlo_v_template(&k, &(&self.d * C64::new(u, 0.0)), &self.d, n + 1);
            Ok(pairing(&phi, &bc)?.value)
        };
        match self.horizon {
            Horizon::Finite(t) => integrate(f, 0.0, t, self.quad.panels, self.quad.order, self.quad.tol),
            Horizon::Infinite => {
                // |Chⁿ⁺¹(uD,D)(term)| ≤ τ(1)/(n+2)! · (n+2)·‖a_0‖Π‖[D,a_j]‖·‖D‖ · u^{n+1} e^{−u²m²}
                let dn = op_norm(&self.d);
                let k: f64 = bc
                    .terms()
                    .iter()
                    .map(|t| {
                        t.coeff.norm()
                            * op_norm(&t.entries[0])
                            * t.entries[1..].iter().map(|a| op_norm(&commutator(&self.d, a))).product::<f64>()
                    })
                    .sum::<f64>()
                    * dn
                    * (n + 2) as f64
                    * self.ctx.unit_trace()
                    / factorial(n + 2);
                let m = self.gap;
                let s = (n + 2) as f64 / 2.0;
                let tail = move |upper: f64| {
                    if k == 0.0 {
                        return 0.0;
                    }
                    k * 0.5 * m.powf(-(n as f64 + 2.0)) * gamma(s) * gamma_ur(s, (upper * m).powi(2))
                };
                integrate_to_infinity(f, tail, &self.quad)
            }
        }
    }

    /// Value together with the integral diagnostics (level `n` only).
    pub fn evaluate_detailed(&self, entries: &[CMat]) -> Result<(C64, Option<Integral>)> {
        let m = entries.len() - 1;
        if !self.supports(m) {
            return Err(Error::Level(format!("retracted cochain of level ≤ {} evaluated at level {m}", self.n)));
        }
        let base = self.truncated(entries)?;
        if m < self.n {
            return Ok((base, None));
        }
        let i = self.integral(entries)?;
        Ok((base - i.value, Some(i)))
    }
}

impl Cochain for RetractedJlo {
    fn supports(&self, level: usize) -> bool {
        level <= self.n && (level % 2 == 0) == self.grading.is_some()
    }

    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        Ok(self.evaluate_detailed(entries)?.0)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarFactorReport {
    pub n: usize,
    pub value: f64,
    /// `Γ(n/2+1)/2`.
    pub exact: f64,
    pub residual: f64,
    pub tail: f64,
    pub pass: bool,
}

/// `∫₀^∞ u^{n+1} e^{−u²} du` by quadrature against `Γ(n/2+1)/2`.
pub fn scalar_factor_check(n: usize, quad: &QuadratureSpec) -> Result<ScalarFactorReport> {
    let s = (n + 2) as f64 / 2.0;
    let i = integrate_to_infinity(
        |u| Ok(C64::new(u.powi(n as i32 + 1) * (-u * u).exp(), 0.0)),
        |upper| 0.5 * gamma(s) * gamma_ur(s, upper * upper),
        quad,
    )?;
    let exact = gamma(n as f64 / 2.0 + 1.0) / 2.0;
    let residual = (i.value.re - exact).abs();
    Ok(ScalarFactorReport { n, value: i.value.re, exact, residual, tail: i.tail, pass: residual <= 1e-10 })
}

/// `C̃hⁿ_∞(F)(c) = chⁿ(F)(c)` for `F = D|D|^{−1}`, i.e. `−B∫₀^∞ Chⁿ⁺¹(uF,F)du = chⁿ(F)`.
pub fn reduction_check(
    module: &UnboundedModule,
    n: usize,
    chains: &[Chain],
    quad: &QuadratureSpec,
) -> Result<IdentityReport> {
    let bounded = module.to_bounded()?;
    let phase = UnboundedModule { d: bounded.f.clone(), ..module.clone() };
    let retracted = RetractedJlo::new(&phase, n, Horizon::Infinite, *quad)?;
    let ch = connes_cochain(&bounded, n)?;
    let mut rep = IdentityReport::new(format!("reduction to the Connes character, level {n}"), 1e-8);
    for c in chains {
        if c.level() != n {
            return Err(Error::Level(format!("expected level-{n} chains")));
        }
        let l = pairing(&retracted, c)?;
        let r = pairing(&ch, c)?;
        rep.record(l.value, r.value, l.scale + r.scale);
    }
    Ok(rep)
}

/// `(2/((1−ε)δe))^k · τ(e^{−(1−δ)D²})/(n−k)! · Π(‖F_j‖ + ‖R_j‖)`.
#[allow(clippy::too_many_arguments)]
pub fn getzler_bound(
    ctx: &TraceContext,
    d: &CMat,
    n: usize,
    k: usize,
    f_norms: &[f64],
    r_norms: &[f64],
    delta: f64,
    eps: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0 / (2.0 * std::f64::consts::E)) {
        return Err(Error::Domain(format!("δ = {delta} must lie in (0, 1/(2e))")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("ε = {eps} must lie in [0, 1)")));
    }
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if f_norms.len() != n + 1 || r_norms.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: f_norms.len().min(r_norms.len()) });
    }
    let spec = HermitianSpectrum::new(ctx, d)?;
    let heat = spec.trace_of(|x| (-(1.0 - delta) * x * x).exp());
    let c = 2.0 / ((1.0 - eps) * delta * std::f64::consts::E);
    let prod: f64 = f_norms.iter().zip(r_norms).map(|(f, r)| f + r).product();
    Ok(c.powi(k as i32) * heat / factorial(n - k) * prod)
}

/// Evaluates `|⟨F_0|D|^{1+ε}+R_0, …⟩|` (a missing `F_j` means `0`) against [`getzler_bound`].
pub fn getzler_check(
    module: &UnboundedModule,
    factors: &[(Option<CMat>, CMat)],
    delta: f64,
    eps: f64,
) -> Result<BoundCheck> {
    if factors.is_empty() {
        return Err(Error::Level("no factors".into()));
    }
    let n = factors.len() - 1;
    let spec = module.spectrum()?;
    let power = spec.apply(|x| x.abs().powf(1.0 + eps));
    let mut mats = Vec::with_capacity(n + 1);
    let (mut fn_, mut rn) = (Vec::new(), Vec::new());
    for (f, r) in factors {
        let x = match f {
            Some(f) => f * &power + r,
            None => r.clone(),
        };
        mats.push(x);
        fn_.push(f.as_ref().map_or(0.0, op_norm));
        rn.push(op_norm(r));
    }
    let k = factors.iter().filter(|(f, _)| f.is_some()).count();
    let kernel = HeatKernel::new(&module.ctx, &module.d, module.grading.as_ref(), 1.0)?;
    let refs: Vec<&CMat> = mats.iter().collect();
    let lhs = kernel.bracket(&refs)?.norm();
    let rhs = getzler_bound(&module.ctx, &module.d, n, k, &fn_, &rn, delta, eps)?;
    Ok(BoundCheck::new(lhs, rhs))
}

/// `d/dα C̃hⁿ_t(D_α) = (b+B)(Ch^{≤n−1}(tD_α, tḊ_α) + ∫₀ᵗ bι(D_α)Chⁿ(uD_α, uḊ_α)du)` with
/// `Ḋ_α = −D_α ln|D|`, checked by central differences in `α` on chains of levels `≤ n`.
pub fn d_alpha_transgression_check(
    module: &UnboundedModule,
    n: usize,
    alpha: f64,
    t: f64,
    chains: &[Chain],
    h0: f64,
    quad: &QuadratureSpec,
) -> Result<SlopeReport> {
    check_level_parity(module.is_graded(), n)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("α = {alpha} must lie in [0, 1]")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be finite and positive")));
    }
    for c in chains {
        if c.level() > n || !(c.level() % 2 == 0) == module.is_graded() {
            return Err(Error::Level(format!("chain level {} not in the support of the level-{n} family", c.level())));
        }
    }
    let da = module.d_alpha(alpha)?;
    let ddot = module.d_alpha_derivative(alpha)?;
    let spec = da.spectrum()?;
    let g = module.grading.as_ref();
    let kernel_t = Arc::new(HeatKernel::from_spectrum(spec.clone(), g, t)?);
    let td = &da.d * C64::new(t, 0.0);
    let tddot = &ddot * C64::new(t, 0.0);
    let mut exact = Vec::with_capacity(chains.len());
    for c in chains {
        let m = c.level();
        let mut v = C64::new(0.0, 0.0);
        if m >= 1 {
            let lo = jlo_v_template(&kernel_t, &td, &tddot, m - 1);
            v += pairing(&lo, &hochschild_boundary(c))?.value;
        }
        if m < n {
            if m + 1 < n {
                let hi = jlo_v_template(&kernel_t, &td, &tddot, m + 1);
                v += pairing(&hi, &connes_boundary(c))?.value;
            }
        } else {
            // ∫₀ᵗ (ι(D_α) Chⁿ(uD_α, uḊ_α))(bBc) du
            let bbc = hochschild_boundary(&connes_boundary(c));
            if !bbc.is_empty() {
                let f = |u: f64| -> Result<C64> {
                    let k = Arc::new(HeatKernel::from_spectrum(spec.clone(), g, u)?);
                    let x = jlo_v_template(&k, &(&da.d * C64::new(u, 0.0)), &(&ddot * C64::new(u, 0.0)), n)
                        .iota(da.d.clone(), 1);
                    Ok(pairing(&x, &bbc)?.value)
                };
                v += integrate(f, 0.0, t, quad.panels, quad.order, quad.tol)?.value;
            }
        }
        exact.push(v);
    }
    let f = |a: f64| -> Result<Vec<C64>> {
        let ma = module.d_alpha(a)?;
        let r = RetractedJlo::new(&ma, n, Horizon::Finite(t), *quad)?;
        chains.iter().map(|c| Ok(pairing(&r, c)?.value)).collect()
    };
    slope_check(&format!("α-transgression of the retracted cochain, level {n}"), f, alpha, &exact, h0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub scales: Vec<f64>,
    /// `Σ_c |Ch^{≤n}(tD)(c)|` at each scale.
    pub values: Vec<f64>,
    /// Index from which the sequence is non-increasing.
    pub monotone_from: usize,
    /// `min |λ(D)|`; the values fall roughly like `e^{−t²·gap²}`.
    pub gap: f64,
    pub pass: bool,
}

pub const SCALING_GRID: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Decay of `Ch^{≤n}(tD)` on fixed chains as `t` grows, for invertible `D`.
pub fn scaling_limit_report(module: &UnboundedModule, n: usize, chains: &[Chain], scales: &[f64]) -> Result<ScalingReport> {
    check_level_parity(module.is_graded(), n)?;
    let spec = module.spectrum()?;
    let gap = require_invertible(&spec)?;
    let mut values = Vec::with_capacity(scales.len());
    for &t in scales {
        let k = Arc::new(HeatKernel::from_spectrum(spec.clone(), module.grading.as_ref(), t)?);
        let td = &module.d * C64::new(t, 0.0);
        let mut total = 0.0;
        for c in chains.iter().filter(|c| c.level() <= n) {
            total += pairing(&jlo_template(&k, &td, c.level()), c)?.value.norm();
        }
        values.push(total);
    }
    let mut monotone_from = values.len().saturating_sub(1);
    while monotone_from > 0 && values[monotone_from - 1] >= values[monotone_from] {
        monotone_from -= 1;
    }
    let last = values.last().copied().unwrap_or(0.0);
    let peak = values.iter().copied().fold(0.0, f64::max);
    // a small gap gives slow but still monotone decay; ask for the last two steps at least
    let pass = monotone_from + 2 < values.len() && (last < peak || peak == 0.0);
    Ok(ScalingReport { scales: scales.to_vec(), values, monotone_from, gap, pass })
}
