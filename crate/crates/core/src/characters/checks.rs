//! Residual checks for the bracket lemma, the JLO cocycle identity and the
//! variation formulas, plus the finite-difference slope machinery they share.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cyclic::{connes_boundary, hochschild_boundary, Chain, Cochain, Pairing};
use crate::error::{Error, Result};
use crate::fredholm::UnboundedModule;
use crate::linalg::{anticommutator, identity, CMat, C64};
use crate::semifinite::Parity;

use super::heat::HeatKernel;
use super::jlo::{check_level_parity, Jlo};

/// Worst residual of `lhs = rhs` over a set of samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub samples: usize,
    pub max_residual: f64,
    /// Largest `|lhs − rhs| / scale`; `scale` is the size of the summed contributions.
    pub max_relative: f64,
    pub tolerance: f64,
    /// Residuals below this absolute level count as roundoff whatever the scale.
    pub floor: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(identity: impl Into<String>, tolerance: f64) -> Self {
        Self {
            identity: identity.into(),
            samples: 0,
            max_residual: 0.0,
            max_relative: 0.0,
            tolerance,
            floor: 1e-13,
            pass: true,
        }
    }

    pub fn record(&mut self, lhs: C64, rhs: C64, scale: f64) {
        let r = (lhs - rhs).norm();
        self.samples += 1;
        self.max_residual = self.max_residual.max(r);
        let rel = if r == 0.0 { 0.0 } else { r / scale.max(f64::MIN_POSITIVE) };
        self.max_relative = self.max_relative.max(rel);
        self.pass &= rel <= self.tolerance || r <= self.floor;
    }

    pub fn merge(&mut self, other: &IdentityReport) {
        self.samples += other.samples;
        self.max_residual = self.max_residual.max(other.max_residual);
        self.max_relative = self.max_relative.max(other.max_relative);
        self.pass &= other.pass;
    }
}

/// Central differences at `h, h/2, h/4` against an exact derivative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeReport {
    pub identity: String,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Size of the exact derivative.
    pub scale: f64,
    /// Mean `log₂` ratio of consecutive errors; `None` when the errors sit at roundoff.
    pub slope: Option<f64>,
    pub pass: bool,
}

/// Compares central differences of `f` around `s0` with `exact`, componentwise.
pub fn slope_check<F>(identity: &str, f: F, s0: f64, exact: &[C64], h0: f64) -> Result<SlopeReport>
where
    F: Fn(f64) -> Result<Vec<C64>>,
{
    let scale = exact.iter().map(|z| z.norm()).sum::<f64>();
    let steps = vec![h0, h0 / 2.0, h0 / 4.0];
    let mut errors = Vec::with_capacity(3);
    for &h in &steps {
        let (p, m) = (f(s0 + h)?, f(s0 - h)?);
        let e: f64 = p
            .iter()
            .zip(&m)
            .zip(exact)
            .map(|((a, b), x)| ((a - b) / (2.0 * h) - x).norm())
            .sum();
        errors.push(e);
    }
    let floor = 1e-10 * scale.max(1.0);
    let (slope, pass) = if errors.iter().all(|&e| e <= floor) {
        (None, true)
    } else {
        let s = (0..2).map(|k| (errors[k] / errors[k + 1]).log2()).sum::<f64>() / 2.0;
        let converging = errors[2] <= 1e-2 * scale.max(1e-12);
        (Some(s), (s - 2.0).abs() <= 0.4 && converging)
    };
    Ok(SlopeReport { identity: identity.to_string(), steps, errors, scale, slope, pass })
}

/// Pairing that treats empty chains and unsupported levels as zero.
pub fn pairing(phi: &dyn Cochain, c: &Chain) -> Result<Pairing> {
    if c.is_empty() || !phi.supports(c.level()) {
        return Ok(Pairing::default());
    }
    phi.pair_chain(c)
}

fn both(x: Pairing, y: Pairing) -> (C64, f64) {
    (x.value + y.value, x.scale + y.scale)
}

/// `Chⁿ(bc) + Chⁿ⁺²(Bc) = 0` on chains of level `n+1`.
pub fn jlo_cocycle_check(module: &UnboundedModule, n: usize, chains: &[Chain]) -> Result<IdentityReport> {
    check_level_parity(module.is_graded(), n)?;
    let jlo = Jlo::new(module, 1.0)?;
    let (lo, hi) = (jlo.level(n)?, jlo.level(n + 2)?);
    let mut rep = IdentityReport::new(format!("JLO cocycle, level {n}"), 1e-8);
    for c in chains {
        expect_level(c, n + 1)?;
        let (v, s) = both(pairing(&lo, &hochschild_boundary(c))?, pairing(&hi, &connes_boundary(c))?);
        rep.record(v, C64::new(0.0, 0.0), s);
    }
    Ok(rep)
}

fn expect_level(c: &Chain, n: usize) -> Result<()> {
    if c.level() != n {
        return Err(Error::Level(format!("expected a level-{n} chain, got level {}", c.level())));
    }
    Ok(())
}

/// `bChⁿ⁻¹(D,V) + BChⁿ⁺¹(D,V) = −ι(DV+VD)Chⁿ(D) + αⁿ(D,V)` on level-`n` chains.
pub fn variation_check(module: &UnboundedModule, v: &CMat, n: usize, chains: &[Chain]) -> Result<IdentityReport> {
    check_level_parity(module.is_graded(), n)?;
    let jlo = Jlo::new(module, 1.0)?;
    let dv = anticommutator(&module.d, v);
    let rhs = jlo.level(n)?.iota(dv, 0).scaled(-1.0).plus(1.0, &jlo.alpha(v, n))?;
    let hi = jlo.with_v(v, n + 1);
    let lo = (n >= 1).then(|| jlo.with_v(v, n - 1));
    let mut rep = IdentityReport::new(format!("variation formula, level {n}"), 1e-8);
    for c in chains {
        expect_level(c, n)?;
        let l = match &lo {
            Some(lo) => pairing(lo, &hochschild_boundary(c))?,
            None => Pairing::default(),
        };
        let (lhs, s1) = both(l, pairing(&hi, &connes_boundary(c))?);
        let r = pairing(&rhs, c)?;
        rep.record(lhs, r.value, s1 + r.scale);
    }
    Ok(rep)
}

/// `bChⁿ⁻¹(D,V,W) + BChⁿ⁺¹(D,V,W) = ι(V)[−ι(DW+WD)Chⁿ + αⁿ(D,W)] − ι(W)[−ι(DV+VD)Chⁿ + αⁿ(D,V)]`
/// with the graded contraction, on level-`n` chains of the parity opposite to the module's.
pub fn level2aux_check(
    module: &UnboundedModule,
    v: &CMat,
    w: &CMat,
    n: usize,
    chains: &[Chain],
) -> Result<IdentityReport> {
    check_level_parity(!module.is_graded(), n)?;
    let jlo = Jlo::new(module, 1.0)?;
    let d = &module.d;
    let side = |x: &CMat, y: &CMat| -> Result<_> {
        let inner = ch_any(&jlo, n)
            .iota(anticommutator(d, y), 0)
            .scaled(-1.0)
            .plus(1.0, &jlo.alpha(y, n))?;
        Ok(inner.iota(x.clone(), 1))
    };
    let rhs = side(v, w)?.plus(-1.0, &side(w, v)?)?;
    let hi = jlo.with_vw(v, w, n + 1);
    let lo = (n >= 1).then(|| jlo.with_vw(v, w, n - 1));
    let mut rep = IdentityReport::new(format!("level-two variation formula, level {n}"), 1e-8);
    for c in chains {
        expect_level(c, n)?;
        let l = match &lo {
            Some(lo) => pairing(lo, &hochschild_boundary(c))?,
            None => Pairing::default(),
        };
        let (lhs, s1) = both(l, pairing(&hi, &connes_boundary(c))?);
        let r = pairing(&rhs, c)?;
        rep.record(lhs, r.value, s1 + r.scale);
    }
    Ok(rep)
}

/// `Chⁿ` of the kernel regardless of level parity (vanishes when it does not match).
fn ch_any(jlo: &Jlo, n: usize) -> super::template::TemplateCochain {
    super::jlo::jlo_template(jlo.kernel(), jlo.dirac(), n)
}

/// `d/ds Chⁿ(D+sV)|₀ = bChⁿ⁻¹(D,V) + BChⁿ⁺¹(D,V)` by central differences.
pub fn cobound_check(module: &UnboundedModule, v: &CMat, n: usize, chains: &[Chain], h0: f64) -> Result<SlopeReport> {
    check_level_parity(module.is_graded(), n)?;
    let jlo = Jlo::new(module, 1.0)?;
    let hi = jlo.with_v(v, n + 1);
    let lo = (n >= 1).then(|| jlo.with_v(v, n - 1));
    let mut exact = Vec::new();
    for c in chains {
        expect_level(c, n)?;
        let l = match &lo {
            Some(lo) => pairing(lo, &hochschild_boundary(c))?.value,
            None => C64::new(0.0, 0.0),
        };
        exact.push(l + pairing(&hi, &connes_boundary(c))?.value);
    }
    let f = |s: f64| -> Result<Vec<C64>> {
        let m = UnboundedModule { d: &module.d + v * C64::new(s, 0.0), ..module.clone() };
        let ch = Jlo::new(&m, 1.0)?.level(n)?;
        chains.iter().map(|c| Ok(pairing(&ch, c)?.value)).collect()
    };
    slope_check(&format!("JLO variation along V, level {n}"), f, 0.0, &exact, h0)
}

/// Duhamel formula `d/ds ⟨F_0..F_n⟩_{D+sV} = −Σ_j ⟨F_0..F_{j−1}, DV+VD, F_j..F_n⟩` at `s = 0`.
pub fn duhamel_check(module: &UnboundedModule, v: &CMat, factors: &[CMat], h0: f64) -> Result<SlopeReport> {
    let g = module.grading.as_ref();
    let kernel = HeatKernel::new(&module.ctx, &module.d, g, 1.0)?;
    let dv = anticommutator(&module.d, v);
    let mut exact = C64::new(0.0, 0.0);
    for j in 1..=factors.len() {
        let mut fs: Vec<&CMat> = factors.iter().collect();
        fs.insert(j, &dv);
        exact -= kernel.bracket(&fs)?;
    }
    let refs: Vec<&CMat> = factors.iter().collect();
    let f = |s: f64| -> Result<Vec<C64>> {
        let k = HeatKernel::new(&module.ctx, &(&module.d + v * C64::new(s, 0.0)), g, 1.0)?;
        Ok(vec![k.bracket(&refs)?])
    };
    slope_check("Duhamel formula", f, 0.0, &[exact], h0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaVariant {
    /// `⟨F_0..F_n⟩ = (−1)^{|F_n|} ⟨F_n, F_0..F_{n−1}⟩` (sign only with a grading).
    Cyclic,
    /// `⟨F_0..F_n⟩ = Σ_{j=0}^{n} ⟨F_0..F_j, 1, F_{j+1}..F_n⟩`.
    InsertOnes,
    /// `Σ_j (−1)^{|F_0|+…+|F_{j−1}|} ⟨F_0..[D,F_j]..F_n⟩ = 0` with graded commutators.
    BracketD,
    /// `⟨..F_{j−1}, [D²,F_j], F_{j+1}..⟩ = ⟨..F_{j−1}F_j..⟩ − ⟨..F_jF_{j+1}..⟩`.
    BracketD2,
}

fn degree_of(p: Parity, graded: bool, what: &str) -> Result<u8> {
    if !graded {
        return Ok(0);
    }
    match p {
        Parity::Even => Ok(0),
        Parity::Odd => Ok(1),
        Parity::Unassigned => Err(Error::Parity(format!("{what} needs a declared parity"))),
    }
}

fn sgn(deg: u32) -> f64 {
    if deg % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Both sides of one bracket identity for the heat kernel of `module.d`.
///
/// `j` selects the factor for [`LemmaVariant::BracketD2`] (`1 ≤ j ≤ n`).
pub fn lemma_misc_check(
    module: &UnboundedModule,
    factors: &[(CMat, Parity)],
    variant: LemmaVariant,
    j: usize,
) -> Result<IdentityReport> {
    if factors.is_empty() {
        return Err(Error::Level("no factors".into()));
    }
    let graded = module.is_graded();
    let kernel = Arc::new(HeatKernel::new(&module.ctx, &module.d, module.grading.as_ref(), 1.0)?);
    let br = |fs: &[&CMat]| kernel.bracket(fs);
    let n = factors.len() - 1;
    let mats: Vec<&CMat> = factors.iter().map(|(m, _)| m).collect();
    let mut terms = Vec::new();
    let lhs = br(&mats)?;
    let rhs = match variant {
        LemmaVariant::Cyclic => {
            let s = sgn(degree_of(factors[n].1, graded, "the last factor")? as u32);
            let mut rot = vec![mats[n]];
            rot.extend_from_slice(&mats[..n]);
            let v = br(&rot)? * s;
            terms.push(v);
            v
        }
        LemmaVariant::InsertOnes => {
            let one = identity(module.ctx.dim());
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..=n {
                let mut fs = mats.clone();
                fs.insert(k + 1, &one);
                let v = br(&fs)?;
                terms.push(v);
                acc += v;
            }
            acc
        }
        LemmaVariant::BracketD => {
            let mut acc = C64::new(0.0, 0.0);
            let mut passed = 0u32;
            let degs: Vec<u8> = factors
                .iter()
                .enumerate()
                .map(|(k, (_, p))| degree_of(*p, graded, &format!("factor {k}")))
                .collect::<Result<_>>()?;
            for k in 0..=n {
                let x = mats[k];
                let gc = &module.d * x - x * &module.d * C64::new(sgn(degs[k] as u32), 0.0);
                let mut fs = mats.clone();
                fs[k] = &gc;
                let v = br(&fs)? * sgn(passed);
                terms.push(v);
                acc += v;
                passed += degs[k] as u32;
            }
            // the identity reads Σ = 0; compare the lhs bracket-free sum with zero
            return finish(variant, acc, C64::new(0.0, 0.0), &terms);
        }
        LemmaVariant::BracketD2 => {
            if j == 0 || j > n {
                return Err(Error::Domain(format!("index j = {j} must lie in 1..={n}")));
            }
            let d2 = &module.d * &module.d;
            let c = &d2 * mats[j] - mats[j] * &d2;
            let mut fs = mats.clone();
            fs[j] = &c;
            let l = br(&fs)?;
            terms.push(l);
            let left_prod = mats[j - 1] * mats[j];
            let mut a: Vec<&CMat> = mats[..j - 1].to_vec();
            a.push(&left_prod);
            a.extend_from_slice(&mats[j + 1..]);
            let va = br(&a)?;
            let vb = if j < n {
                let p = mats[j] * mats[j + 1];
                let mut b: Vec<&CMat> = mats[..j].to_vec();
                b.push(&p);
                b.extend_from_slice(&mats[j + 2..]);
                br(&b)?
            } else {
                let s = sgn(degree_of(factors[n].1, graded, "the last factor")? as u32);
                let p = mats[n] * mats[0];
                let mut b: Vec<&CMat> = vec![&p];
                b.extend_from_slice(&mats[1..n]);
                br(&b)? * s
            };
            terms.push(va);
            terms.push(vb);
            return finish(variant, l, va - vb, &terms);
        }
    };
    terms.push(lhs);
    finish(variant, lhs, rhs, &terms)
}

fn finish(variant: LemmaVariant, lhs: C64, rhs: C64, terms: &[C64]) -> Result<IdentityReport> {
    let scale = terms.iter().map(|z| z.norm()).sum::<f64>() + lhs.norm();
    let mut rep = IdentityReport::new(format!("bracket lemma ({variant:?})"), 1e-9);
    rep.record(lhs, rhs, scale);
    Ok(rep)
}
