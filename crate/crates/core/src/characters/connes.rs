//! Connes character `chⁿ(F)`, the cochains `ψⁿ⁺¹(F)` and the transgression
//! cochain `ι(Ḟ)chⁿ⁻¹(F)` of a pre-Fredholm module.

use statrs::function::gamma::gamma;

use crate::cyclic::{connes_boundary, hochschild_boundary, Chain, Cochain};
use crate::error::{Error, Result};
use crate::fredholm::BoundedModule;
use crate::linalg::{commutator, op_norm, unitary_flow, CMat, C64};
use crate::semifinite::{Grading, Parity, TraceContext};

use super::checks::{pairing, slope_check, IdentityReport, SlopeReport};
use super::jlo::check_level_parity;
use super::template::{Evaluator, Slot, TemplateCochain, Term};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Γ(n/2+1) / (2·n!)`.
pub fn connes_coefficient(n: usize) -> f64 {
    gamma(n as f64 / 2.0 + 1.0) / (2.0 * factorial(n))
}

fn evaluator(module: &BoundedModule) -> Evaluator {
    Evaluator::Trace { ctx: module.ctx.clone(), grading: module.grading.clone() }
}

fn prepare(module: &BoundedModule, n: usize) -> Result<()> {
    module.require_valid()?;
    check_level_parity(module.is_graded(), n)
}

/// `chⁿ(F)(a_0..a_n) = Γ(n/2+1)/(2·n!) · τ(χ F [F,a_0] ⋯ [F,a_n])`.
pub fn connes_cochain(module: &BoundedModule, n: usize) -> Result<TemplateCochain> {
    prepare(module, n)?;
    Ok(connes_template(module, n))
}

fn connes_template(module: &BoundedModule, n: usize) -> TemplateCochain {
    let slots = std::iter::once(Slot::Op(0)).chain((0..=n).map(|j| Slot::Comm(0, j))).collect();
    TemplateCochain::new(
        n,
        evaluator(module),
        vec![(module.f.clone(), 1)],
        vec![Term { coeff: connes_coefficient(n), slots }],
    )
}

/// `ψⁿ⁺¹(F)(a_0..a_{n+1}) = Γ(n/2+1)/(2·(n+1)!) · τ(χ a_0 F [F,a_1] ⋯ [F,a_{n+1}])`,
/// a level-`n+1` cochain with `chⁿ = Bψⁿ⁺¹` and `chⁿ⁺² = −bψⁿ⁺¹`.
pub fn psi_cochain(module: &BoundedModule, n: usize) -> Result<TemplateCochain> {
    prepare(module, n)?;
    let slots = [Slot::Entry(0), Slot::Op(0)]
        .into_iter()
        .chain((1..=n + 1).map(|j| Slot::Comm(0, j)))
        .collect();
    let coeff = gamma(n as f64 / 2.0 + 1.0) / (2.0 * factorial(n + 1));
    Ok(TemplateCochain::new(n + 1, evaluator(module), vec![(module.f.clone(), 1)], vec![Term { coeff, slots }]))
}

/// The Connes character as a family over all levels of the module's parity.
#[derive(Clone)]
pub struct Connes {
    module: BoundedModule,
}

impl Connes {
    pub fn new(module: &BoundedModule) -> Result<Self> {
        module.require_valid()?;
        Ok(Self { module: module.clone() })
    }
}

impl Cochain for Connes {
    fn supports(&self, level: usize) -> bool {
        self.module.is_graded() == (level % 2 == 0)
    }

    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        let n = entries.len() - 1;
        check_level_parity(self.module.is_graded(), n)?;
        connes_template(&self.module, n).evaluate(entries)
    }
}

/// `ι(Ḟ)chⁿ⁻¹(F)(b_0..b_{n−1}) = Γ(n/2+1)/(2·n!) Σ_k (−1)^{k+1} τ(χF[F,b_0]⋯[F,b_k] Ḟ [F,b_{k+1}]⋯)`,
/// normalised so that `d/dt chⁿ(F_t) = b ι(Ḟ_t)chⁿ⁻¹(F_t)`.
pub fn connes_iota_cochain(module: &BoundedModule, fdot: &CMat, n: usize) -> Result<TemplateCochain> {
    if n == 0 {
        return Err(Error::Level("the transgression cochain needs n ≥ 1".into()));
    }
    prepare(module, n)?;
    let c = connes_coefficient(n);
    let terms = (0..n)
        .map(|k| {
            let mut slots = vec![Slot::Op(0)];
            slots.extend((0..=k).map(|j| Slot::Comm(0, j)));
            slots.push(Slot::Op(1));
            slots.extend((k + 1..n).map(|j| Slot::Comm(0, j)));
            Term { coeff: if k % 2 == 0 { -c } else { c }, slots }
        })
        .collect();
    Ok(TemplateCochain::new(n - 1, evaluator(module), vec![(module.f.clone(), 1), (fdot.clone(), 1)], terms))
}

/// `chⁿ(c) = ψⁿ⁺¹(Bc)` on level-`n` chains and `chⁿ⁺²(c') = −ψⁿ⁺¹(bc')` on level-`n+2` chains.
pub fn psi_identities_check(
    module: &BoundedModule,
    n: usize,
    chains: &[Chain],
    chains_up: &[Chain],
) -> Result<IdentityReport> {
    let psi = psi_cochain(module, n)?;
    let (ch, ch2) = (connes_cochain(module, n)?, connes_cochain(module, n + 2)?);
    let mut rep = IdentityReport::new(format!("Connes degree shift, level {n}"), 1e-10);
    for c in chains {
        let l = pairing(&ch, c)?;
        let r = pairing(&psi, &connes_boundary(c))?;
        rep.record(l.value, r.value, l.scale + r.scale);
    }
    for c in chains_up {
        let l = pairing(&ch2, c)?;
        let r = pairing(&psi, &hochschild_boundary(c))?;
        rep.record(l.value, -r.value, l.scale + r.scale);
    }
    Ok(rep)
}

/// `chⁿ(bc) = 0` and `chⁿ(Bc) = 0`, the two halves of the Connes cocycle condition.
pub fn connes_cocycle_check(module: &BoundedModule, n: usize, chains: &[Chain]) -> Result<IdentityReport> {
    let ch = connes_cochain(module, n)?;
    let mut rep = IdentityReport::new(format!("Connes cocycle, level {n}"), 1e-10);
    let zero = C64::new(0.0, 0.0);
    for c in chains {
        if c.level() + 1 == n {
            let p = pairing(&ch, &connes_boundary(c))?;
            rep.record(p.value, zero, p.scale);
        } else if c.level() == n + 1 {
            let p = pairing(&ch, &hochschild_boundary(c))?;
            rep.record(p.value, zero, p.scale);
        } else {
            return Err(Error::Level(format!("chains must have level {} or {}", n.saturating_sub(1), n + 1)));
        }
    }
    Ok(rep)
}

fn check_generator(ctx: &TraceContext, grading: Option<&Grading>, h: &CMat) -> Result<()> {
    ctx.check_affiliated(h)?;
    let defect = crate::linalg::hermitian_defect(h);
    if defect > 1e-10 * op_norm(h).max(1.0) {
        return Err(Error::NotSelfAdjoint { defect });
    }
    if let Some(g) = grading {
        let p = g.parity_defect(h, Parity::Even);
        if p > 1e-10 * op_norm(h).max(1.0) {
            return Err(Error::Parity(format!("rotation generator is not even (defect {p:.3e})")));
        }
    }
    Ok(())
}

/// Along `F_t = e^{itH} F e^{−itH}` with `H` even Hermitian, compares central differences
/// of `chⁿ(F_t)(c)` at `t = 0` with `ι(Ḟ)chⁿ⁻¹(F)(bc)`, `Ḟ = i[H, F]`.
pub fn connes_transgression_check(
    module: &BoundedModule,
    h: &CMat,
    n: usize,
    chains: &[Chain],
    h0: f64,
) -> Result<SlopeReport> {
    check_generator(&module.ctx, module.grading.as_ref(), h)?;
    let fdot = commutator(h, &module.f) * C64::new(0.0, 1.0);
    let exact: Vec<C64> = if n == 0 {
        vec![C64::new(0.0, 0.0); chains.len()]
    } else {
        let iota = connes_iota_cochain(module, &fdot, n)?;
        chains
            .iter()
            .map(|c| Ok(pairing(&iota, &hochschild_boundary(c))?.value))
            .collect::<Result<_>>()?
    };
    let rotated = |t: f64| -> Result<BoundedModule> {
        let u = unitary_flow(h, t);
        let f = &u * &module.f * u.adjoint();
        Ok(BoundedModule { f, ..module.clone() })
    };
    let f = |t: f64| -> Result<Vec<C64>> {
        let ch = connes_cochain(&rotated(t)?, n)?;
        chains.iter().map(|c| Ok(pairing(&ch, c)?.value)).collect()
    };
    slope_check(&format!("Connes transgression, level {n}"), f, 0.0, &exact, h0)
}
