//! Index pairings of modules with projections and unitaries over `M_N(A)`, computed
//! analytically (kernels, McKean–Singer, spectral flow) and cohomologically (Connes, JLO).

use crate::characters::{
    chern_minus, chern_minus_coefficient, chern_plus, check_projection, check_unitary,
    connes_cochain, pairing, Jlo,
};
use crate::error::{Error, Result};
use crate::linalg::{commutator, op_norm, CMat, C64};
use crate::semifinite::{Grading, HermitianSpectrum, Parity, TraceContext};

use super::index::{ef_index_kernel, ef_index_parametrix, pseudo_parametrix, IndexMethod, IndexReport, DEFAULT_KERNEL_TOL};
use super::module::{BoundedModule, UnboundedModule};

/// Default `δ` in the Getzler tail estimate of truncated JLO pairings.
pub const JLO_DELTA: f64 = 0.05;
/// Target for the certified tail of a truncated JLO pairing.
pub const JLO_TAIL_TARGET: f64 = 1e-11;

fn require_graded(g: Option<&Grading>) -> Result<&Grading> {
    g.ok_or_else(|| Error::Parity("even pairings need a graded module".into()))
}

fn require_ungraded(g: Option<&Grading>) -> Result<()> {
    match g {
        Some(_) => Err(Error::Parity("odd pairings need an ungraded module".into())),
        None => Ok(()),
    }
}

fn check_even_projection(ctx: &TraceContext, g: &Grading, p: &CMat) -> Result<()> {
    check_projection(ctx, p)?;
    let d = g.parity_defect(p, Parity::Even);
    if d > 1e-10 {
        return Err(Error::Parity(format!("projection is not even (defect {d:.3e})")));
    }
    Ok(())
}

/// `p± = p(1 ± χ)/2` for an even projection `p`.
fn graded_halves(ctx: &TraceContext, g: &Grading, p: &CMat) -> (CMat, CMat) {
    let chi = g.matrix();
    let one = ctx.identity();
    let half = C64::new(0.5, 0.0);
    (p * (&one + &chi) * half, p * (&one - &chi) * half)
}

/// `Ind_τ(p⁻(F⊗1_N)p⁺)` by the kernel method in the inflated context.
pub fn pairing_even_bounded(module: &BoundedModule, p: &CMat, n: usize) -> Result<IndexReport> {
    module.require_valid()?;
    require_graded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    let g = big.grading.as_ref().expect("inflated grading");
    check_even_projection(&big.ctx, g, p)?;
    let (pp, pm) = graded_halves(&big.ctx, g, p);
    ef_index_kernel(&big.ctx, &pp, &pm, &big.f, DEFAULT_KERNEL_TOL)
}

/// The same index through `τ((e−eSfTe)^m) − τ((f−fTeSf)^m)` with the pseudo-parametrix.
pub fn pairing_even_parametrix(module: &BoundedModule, p: &CMat, n: usize, m: u32) -> Result<IndexReport> {
    module.require_valid()?;
    require_graded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    let g = big.grading.as_ref().expect("inflated grading");
    check_even_projection(&big.ctx, g, p)?;
    let (pp, pm) = graded_halves(&big.ctx, g, p);
    let s = pseudo_parametrix(&big.ctx, &pp, &pm, &big.f)?;
    ef_index_parametrix(&big.ctx, &pp, &pm, &big.f, &s, m)
}

/// `Ind_τ(QuQ)` on `Q·H^N`, `Q = (F⊗1_N + 1)/2`.
pub fn pairing_odd_bounded(module: &BoundedModule, u: &CMat, n: usize) -> Result<IndexReport> {
    module.require_valid()?;
    require_ungraded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    check_unitary(&big.ctx, u)?;
    let q = (&big.f + big.ctx.identity()) * C64::new(0.5, 0.0);
    ef_index_kernel(&big.ctx, &q, &q, &(&q * u * &q), DEFAULT_KERNEL_TOL)
}

/// `τ⊗Tr(χ p e^{−t D₁²})` with `D₁ = pDp + (1−p)D(1−p)`.
pub fn mckean_singer(module: &UnboundedModule, p: &CMat, n: usize, t: f64) -> Result<IndexReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    module.require_valid()?;
    require_graded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    let g = big.grading.as_ref().expect("inflated grading");
    check_even_projection(&big.ctx, g, p)?;
    let q = big.ctx.identity() - p;
    let d1 = p * &big.d * p + &q * &big.d * &q;
    let heat = HermitianSpectrum::new(&big.ctx, &d1)?.apply(|x| (-t * x * x).exp());
    let v = big.ctx.trace(&g.left(&(p * heat)));
    Ok(IndexReport::new(v.re, IndexMethod::MckeanSinger)
        .with("t", t)
        .with("commutator_norm", op_norm(&commutator(&big.d, p)))
        .with("imaginary_part", v.im))
}

/// `⟨chⁿ(F⊗1_N), ch₊(p)_n⟩` for even `n`.
pub fn connes_pairing_even(module: &BoundedModule, p: &CMat, n: usize, level: usize) -> Result<IndexReport> {
    require_graded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    check_even_projection(&big.ctx, big.grading.as_ref().expect("inflated grading"), p)?;
    let ch = chern_plus(&big.ctx, p, level / 2)?;
    let phi = connes_cochain(&big, level)?;
    let v = match ch.get(level) {
        Some(c) => pairing(&phi, c)?.value,
        None => C64::new(0.0, 0.0),
    };
    Ok(IndexReport::new(v.re, IndexMethod::CohomologicalConnes)
        .with("level", level as f64)
        .with("imaginary_part", v.im))
}

/// `⟨chⁿ(F⊗1_N), ch₋(u)_n⟩` for odd `n`.
pub fn connes_pairing_odd(module: &BoundedModule, u: &CMat, n: usize, level: usize) -> Result<IndexReport> {
    require_ungraded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    let ch = chern_minus(&big.ctx, u, level / 2)?;
    let phi = connes_cochain(&big, level)?;
    let v = match ch.get(level) {
        Some(c) => pairing(&phi, c)?.value,
        None => C64::new(0.0, 0.0),
    };
    Ok(IndexReport::new(v.re, IndexMethod::CohomologicalConnes)
        .with("level", level as f64)
        .with("imaginary_part", v.im))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Sums `term(k)` for `k > from` until the terms are negligible; `term` must eventually decrease.
fn series_tail(from: usize, term: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    for k in from + 1..from + 400 {
        let t = term(k);
        total += t;
        if k > from + 2 && t <= 1e-17 * total.max(1e-300) {
            break;
        }
    }
    total
}

struct JloSetup {
    big: UnboundedModule,
    spectrum: HermitianSpectrum,
}

impl JloSetup {
    fn new(module: &UnboundedModule, n: usize) -> Result<Self> {
        module.require_valid()?;
        let big = module.inflate(n)?;
        let spectrum = big.spectrum()?;
        Ok(Self { big, spectrum })
    }

    fn heat(&self, s: f64, delta: f64) -> f64 {
        self.spectrum.trace_of(|x| (-(1.0 - delta) * s * s * x * x).exp())
    }

    /// Largest `s = 2^{−j} ≤ 1` whose tail is below the target.
    fn choose_scale(&self, tail: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut s = 1.0;
        let mut t = tail(s);
        while t > JLO_TAIL_TARGET && s > 1e-9 {
            s *= 0.5;
            t = tail(s);
        }
        (s, t)
    }

    fn evaluate(&self, s: f64, chain: &crate::cyclic::GradedChain, levels: &[usize]) -> Result<C64> {
        let jlo = Jlo::new(&self.big, s)?;
        let mut v = C64::new(0.0, 0.0);
        for &l in levels {
            if let Some(c) = chain.get(l) {
                v += pairing(&jlo.level(l)?, c)?.value;
            }
        }
        Ok(v)
    }
}

/// `Σ_{k≤K} Ch^{2k}(sD⊗1_N)(ch₊(p)_{2k})` with `2K ≤ max_level` and a Getzler tail bound;
/// the scale `s` is reduced until the tail is negligible.
pub fn jlo_pairing_even(module: &UnboundedModule, p: &CMat, n: usize, max_level: usize) -> Result<IndexReport> {
    require_graded(module.grading.as_ref())?;
    let setup = JloSetup::new(module, n)?;
    let big = &setup.big;
    check_even_projection(&big.ctx, big.grading.as_ref().expect("inflated grading"), p)?;
    let k_max = max_level / 2;
    let sym_norm = op_norm(&(p * C64::new(2.0, 0.0) - big.ctx.identity()));
    let dp = op_norm(&commutator(&big.d, p));
    // |c_k Ch^{2k}(sD)(2p−1, p, …, p)| ≤ τ(e^{−(1−δ)s²D²}) ‖2p−1‖ x^k / (2·k!), x = s²‖[D,p]‖²
    let tail = |s: f64| {
        let x = s * s * dp * dp;
        let h = setup.heat(s, JLO_DELTA) * sym_norm / 2.0;
        h * series_tail(k_max, |k| x.powi(k as i32) / factorial(k))
    };
    let (s, t) = setup.choose_scale(tail);
    let chain = chern_plus(&big.ctx, p, k_max)?;
    let levels: Vec<usize> = (0..=k_max).map(|k| 2 * k).collect();
    let v = setup.evaluate(s, &chain, &levels)?;
    let mut r = IndexReport::new(v.re, IndexMethod::CohomologicalJlo)
        .with("scale", s)
        .with("max_level", (2 * k_max) as f64)
        .with("tail_bound", t)
        .with("delta", JLO_DELTA)
        .with("imaginary_part", v.im);
    if t > JLO_TAIL_TARGET {
        r.notes.push(format!("tail bound {t:.3e} exceeds the target {JLO_TAIL_TARGET:.0e}"));
    }
    Ok(r)
}

/// `Σ_{k≤K} Ch^{2k+1}(sD⊗1_N)(ch₋(u)_{2k+1})` with a Getzler tail bound.
pub fn jlo_pairing_odd(module: &UnboundedModule, u: &CMat, n: usize, max_level: usize) -> Result<IndexReport> {
    require_ungraded(module.grading.as_ref())?;
    let setup = JloSetup::new(module, n)?;
    let big = &setup.big;
    check_unitary(&big.ctx, u)?;
    if max_level == 0 {
        return Err(Error::Level("odd pairings need a level ≥ 1".into()));
    }
    let k_max = (max_level - 1) / 2;
    let du = op_norm(&commutator(&big.d, u));
    // |c_k Ch^{2k+1}(sD)(u*, u, …)| ≤ τ(e^{−(1−δ)s²D²}) k!/Γ(1/2) (s‖[D,u]‖)^{2k+1}/(2k+1)!
    let tail = |s: f64| {
        let y = s * du;
        setup.heat(s, JLO_DELTA)
            * series_tail(k_max, |k| chern_minus_coefficient(k).abs() * y.powi(2 * k as i32 + 1) / factorial(2 * k + 1))
    };
    let (s, t) = setup.choose_scale(tail);
    let chain = chern_minus(&big.ctx, u, k_max)?;
    let levels: Vec<usize> = (0..=k_max).map(|k| 2 * k + 1).collect();
    let v = setup.evaluate(s, &chain, &levels)?;
    Ok(IndexReport::new(v.re, IndexMethod::CohomologicalJlo)
        .with("scale", s)
        .with("max_level", (2 * k_max + 1) as f64)
        .with("tail_bound", t)
        .with("delta", JLO_DELTA)
        .with("imaginary_part", v.im))
}

/// Sorted eigenvalues of each block.
fn block_spectra(ctx: &TraceContext, d: &CMat) -> Result<Vec<Vec<f64>>> {
    let spec = HermitianSpectrum::new(ctx, d)?;
    Ok(spec.blocks.iter().map(|&(o, n)| spec.values[o..o + n].to_vec()).collect())
}

/// Weighted count of zero crossings along a discretised path of self-adjoint operators,
/// matching eigenvalues by order between consecutive points.
pub fn spectral_flow(ctx: &TraceContext, path: &[CMat]) -> Result<IndexReport> {
    if path.len() < 2 {
        return Err(Error::Domain("a spectral-flow path needs at least two points".into()));
    }
    let spectra: Vec<Vec<Vec<f64>>> = path.iter().map(|d| block_spectra(ctx, d)).collect::<Result<_>>()?;
    let scale = path.iter().map(op_norm).fold(0.0, f64::max).max(1e-300);
    let weights: Vec<f64> = ctx.blocks().iter().map(|b| b.weight).collect();
    let (mut up, mut down) = (0.0, 0.0);
    let mut worst_ratio: f64 = 0.0;
    for (step, pair) in spectra.windows(2).enumerate() {
        for (b, w) in weights.iter().enumerate() {
            let (a, c) = (&pair[0][b], &pair[1][b]);
            let gap = a
                .windows(2)
                .map(|x| x[1] - x[0])
                .filter(|&g| g > 1e-12 * scale)
                .fold(f64::INFINITY, f64::min);
            let moved = a.iter().zip(c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if gap.is_finite() {
                worst_ratio = worst_ratio.max(moved / gap);
            }
            if moved > 0.5 * gap {
                return Err(Error::Ambiguous(format!(
                    "step {step} moves an eigenvalue by {moved:.3e}, more than half the gap {gap:.3e}; refine the path"
                )));
            }
            for (x, y) in a.iter().zip(c) {
                if *x < 0.0 && *y >= 0.0 {
                    up += w;
                } else if *x >= 0.0 && *y < 0.0 {
                    down += w;
                }
            }
        }
    }
    Ok(IndexReport::new(up - down, IndexMethod::SpectralFlow)
        .with("up_crossings", up)
        .with("down_crossings", down)
        .with("steps", (path.len() - 1) as f64)
        .with("max_move_to_gap", worst_ratio))
}

/// Spectral flow along `(1−t)D_N + t·uD_Nu*`, refining the grid until matching is unambiguous.
pub fn spectral_flow_pairing(module: &UnboundedModule, u: &CMat, n: usize) -> Result<IndexReport> {
    module.require_valid()?;
    require_ungraded(module.grading.as_ref())?;
    let big = module.inflate(n)?;
    check_unitary(&big.ctx, u)?;
    let end = u * &big.d * u.adjoint();
    let mut steps = 16usize;
    loop {
        let path: Vec<CMat> = (0..=steps)
            .map(|k| {
                let t = k as f64 / steps as f64;
                &big.d * C64::new(1.0 - t, 0.0) + &end * C64::new(t, 0.0)
            })
            .collect();
        match spectral_flow(&big.ctx, &path) {
            Err(Error::Ambiguous(_)) if steps < 1 << 14 => steps *= 2,
            other => return other,
        }
    }
}
