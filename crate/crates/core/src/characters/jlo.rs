//! JLO cochains `Chⁿ(D)`, their variations `Chⁿ(D,V)`, `Chⁿ(D,V,W)`, `αⁿ(D,V)`.

use std::sync::Arc;

use crate::cyclic::Cochain;
use crate::error::{Error, Result};
use crate::fredholm::UnboundedModule;
use crate::linalg::{CMat, C64};
use crate::semifinite::{Grading, Parity};

use super::heat::HeatKernel;
use super::template::{jlo_slots, Evaluator, Slot, TemplateCochain, Term};

/// Even levels for graded modules, odd levels otherwise.
pub fn check_level_parity(graded: bool, n: usize) -> Result<()> {
    if graded != (n % 2 == 0) {
        return Err(Error::Parity(format!(
            "level {n} does not match a {} module",
            if graded { "graded (even)" } else { "ungraded (odd)" }
        )));
    }
    Ok(())
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn insert(slots: &[Slot], at: usize, s: Slot) -> Vec<Slot> {
    let mut v = slots.to_vec();
    v.insert(at, s);
    v
}

/// `(a_0..a_n) ↦ ⟨a_0, [D,a_1], …, [D,a_n]⟩` for the kernel of `D`.
pub fn jlo_template(kernel: &Arc<HeatKernel>, d: &CMat, n: usize) -> TemplateCochain {
    TemplateCochain::new(
        n,
        Evaluator::Heat(kernel.clone()),
        vec![(d.clone(), 1)],
        vec![Term { coeff: 1.0, slots: jlo_slots(n) }],
    )
}

/// `Chⁿ(D,V) = Σ_{j=1}^{n+1} (−1)^j ⟨a_0, [D,a_1], …, [D,a_{j−1}], V, [D,a_j], …, [D,a_n]⟩`.
pub fn jlo_v_template(kernel: &Arc<HeatKernel>, d: &CMat, v: &CMat, n: usize) -> TemplateCochain {
    let base = jlo_slots(n);
    let terms = (1..=n + 1)
        .map(|j| Term { coeff: sign(j), slots: insert(&base, j, Slot::Op(1)) })
        .collect();
    TemplateCochain::new(n, Evaluator::Heat(kernel.clone()), vec![(d.clone(), 1), (v.clone(), 1)], terms)
}

/// `αⁿ(D,V) = Σ_{j=1}^{n} ⟨a_0, [D,a_1], …, [V,a_j], …, [D,a_n]⟩`.
pub fn alpha_template(kernel: &Arc<HeatKernel>, d: &CMat, v: &CMat, n: usize) -> TemplateCochain {
    let base = jlo_slots(n);
    let terms = (1..=n)
        .map(|j| {
            let mut slots = base.clone();
            slots[j] = Slot::Comm(1, j);
            Term { coeff: 1.0, slots }
        })
        .collect();
    TemplateCochain::new(n, Evaluator::Heat(kernel.clone()), vec![(d.clone(), 1), (v.clone(), 1)], terms)
}

/// `Chⁿ(D,V,W) = Σ_{j=1}^{n+1} Σ_{k=1}^{j} (−1)^{j+k} (⟨…W…V…⟩ − ⟨…V…W…⟩)`, where the first
/// operator sits in gap `k` and the second in gap `j` of `a_0, [D,a_1], …, [D,a_n]`.
pub fn jlo_vw_template(kernel: &Arc<HeatKernel>, d: &CMat, v: &CMat, w: &CMat, n: usize) -> TemplateCochain {
    let base = jlo_slots(n);
    let (vs, ws) = (Slot::Op(1), Slot::Op(2));
    let mut terms = Vec::new();
    for j in 1..=n + 1 {
        for k in 1..=j {
            let s = sign(j + k);
            terms.push(Term { coeff: s, slots: insert(&insert(&base, j, vs), k, ws) });
            terms.push(Term { coeff: -s, slots: insert(&insert(&base, j, ws), k, vs) });
        }
    }
    TemplateCochain::new(
        n,
        Evaluator::Heat(kernel.clone()),
        vec![(d.clone(), 1), (v.clone(), 1), (w.clone(), 1)],
        terms,
    )
}

fn check_direction(module: &UnboundedModule, v: &CMat) -> Result<()> {
    module.ctx.check_affiliated(v)?;
    if let Some(g) = &module.grading {
        let defect = g.parity_defect(v, Parity::Odd);
        if defect > 1e-10 * crate::linalg::op_norm(v).max(1.0) {
            return Err(Error::Parity(format!("direction is not odd (defect {defect:.3e})")));
        }
    }
    Ok(())
}

/// The JLO character of `sD` as a family over all levels of the module's parity.
#[derive(Clone)]
pub struct Jlo {
    kernel: Arc<HeatKernel>,
    d: CMat,
    graded: bool,
}

impl Jlo {
    pub fn new(module: &UnboundedModule, scale: f64) -> Result<Self> {
        module.require_valid()?;
        let kernel = Arc::new(HeatKernel::new(&module.ctx, &module.d, module.grading.as_ref(), scale)?);
        Ok(Self { kernel, d: &module.d * C64::new(scale, 0.0), graded: module.is_graded() })
    }

    pub fn from_parts(kernel: Arc<HeatKernel>, d: CMat, grading: Option<&Grading>) -> Self {
        Self { kernel, d, graded: grading.is_some() }
    }

    pub fn kernel(&self) -> &Arc<HeatKernel> {
        &self.kernel
    }

    /// The (scaled) operator `sD` used in the commutators.
    pub fn dirac(&self) -> &CMat {
        &self.d
    }

    pub fn is_graded(&self) -> bool {
        self.graded
    }

    pub fn level(&self, n: usize) -> Result<TemplateCochain> {
        check_level_parity(self.graded, n)?;
        Ok(jlo_template(&self.kernel, &self.d, n))
    }

    pub fn with_v(&self, v: &CMat, n: usize) -> TemplateCochain {
        jlo_v_template(&self.kernel, &self.d, v, n)
    }

    pub fn alpha(&self, v: &CMat, n: usize) -> TemplateCochain {
        alpha_template(&self.kernel, &self.d, v, n)
    }

    pub fn with_vw(&self, v: &CMat, w: &CMat, n: usize) -> TemplateCochain {
        jlo_vw_template(&self.kernel, &self.d, v, w, n)
    }
}

impl Cochain for Jlo {
    fn supports(&self, level: usize) -> bool {
        self.graded == (level % 2 == 0)
    }

    fn evaluate(&self, entries: &[CMat]) -> Result<C64> {
        self.level(entries.len() - 1)?.evaluate(entries)
    }
}

pub fn jlo_cochain(module: &UnboundedModule, n: usize) -> Result<TemplateCochain> {
    Jlo::new(module, 1.0)?.level(n)
}

pub fn jlo_v_cochain(module: &UnboundedModule, v: &CMat, n: usize) -> Result<TemplateCochain> {
    check_direction(module, v)?;
    Ok(Jlo::new(module, 1.0)?.with_v(v, n))
}

pub fn alpha_cochain(module: &UnboundedModule, v: &CMat, n: usize) -> Result<TemplateCochain> {
    check_direction(module, v)?;
    Ok(Jlo::new(module, 1.0)?.alpha(v, n))
}

pub fn jlo_vw_cochain(module: &UnboundedModule, v: &CMat, w: &CMat, n: usize) -> Result<TemplateCochain> {
    check_direction(module, v)?;
    check_direction(module, w)?;
    Ok(Jlo::new(module, 1.0)?.with_vw(v, w, n))
}
