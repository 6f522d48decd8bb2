use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator, hermitian_defect, identity, op_norm, CMat};
use crate::semifinite::{
    p_norm_matrix, summability_report, Grading, HermitianSpectrum, Operator, Parity,
    SummabilityEntry, TraceContext,
};

/// Finite spectral triple `(A, H, D)`: `D` self-adjoint and affiliated,
/// optionally graded with `D` odd and the generators even.
#[derive(Clone, Debug)]
pub struct UnboundedModule {
    pub ctx: Arc<TraceContext>,
    pub d: CMat,
    pub grading: Option<Grading>,
    pub generators: Vec<CMat>,
}

/// Pre-Fredholm module `(A, H, F)` with `F = F*`, `F² = 1`.
#[derive(Clone, Debug)]
pub struct BoundedModule {
    pub ctx: Arc<TraceContext>,
    pub f: CMat,
    pub grading: Option<Grading>,
    pub generators: Vec<CMat>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub self_adjoint_defect: f64,
    pub parity_defect: f64,
    pub generator_parity_defects: Vec<f64>,
    /// `‖F² − 1‖` for bounded modules.
    pub involution_defect: Option<f64>,
    /// `‖[D, a]‖` (or `‖[F, a]‖_p` for bounded modules).
    pub commutator_norms: Vec<f64>,
    pub summability: Vec<SummabilityEntry>,
    pub issues: Vec<String>,
    pub ok: bool,
}

fn check_structure(ctx: &TraceContext, op: &CMat, grading: Option<&Grading>, gens: &[CMat]) -> Result<()> {
    ctx.check_affiliated(op)?;
    for a in gens {
        ctx.check_affiliated(a)?;
    }
    if let Some(g) = grading {
        if g.dim() != ctx.dim() {
            return Err(Error::DimensionMismatch { expected: ctx.dim(), found: g.dim() });
        }
    }
    Ok(())
}

fn parity_checks(
    op: &CMat,
    grading: Option<&Grading>,
    gens: &[CMat],
    report: &mut ValidationReport,
    name: &str,
) {
    let norm = op_norm(op).max(1.0);
    report.self_adjoint_defect = hermitian_defect(op);
    if report.self_adjoint_defect > 1e-10 * norm {
        report.issues.push(format!("{name} is not self-adjoint (defect {:.3e})", report.self_adjoint_defect));
    }
    if let Some(g) = grading {
        report.parity_defect = g.parity_defect(op, Parity::Odd);
        if report.parity_defect > 1e-10 * norm {
            report.issues.push(format!("{name} is not odd (defect {:.3e})", report.parity_defect));
        }
        for (k, a) in gens.iter().enumerate() {
            let d = g.parity_defect(a, Parity::Even);
            if d > 1e-10 * op_norm(a).max(1.0) {
                report.issues.push(format!("generator {k} is not even (defect {d:.3e})"));
            }
            report.generator_parity_defects.push(d);
        }
    }
}

impl UnboundedModule {
    pub fn new(ctx: Arc<TraceContext>, d: CMat, grading: Option<Grading>, generators: Vec<CMat>) -> Result<Self> {
        check_structure(&ctx, &d, grading.as_ref(), &generators)?;
        Ok(Self { ctx, d, grading, generators })
    }

    pub fn is_graded(&self) -> bool {
        self.grading.is_some()
    }

    pub fn dirac(&self) -> Result<Operator> {
        Operator::new(self.ctx.clone(), self.d.clone(), Parity::Odd)
    }

    pub fn spectrum(&self) -> Result<HermitianSpectrum> {
        HermitianSpectrum::new(&self.ctx, &self.d)
    }

    pub fn validate(&self, p_grid: &[f64]) -> ValidationReport {
        let mut r = ValidationReport::default();
        parity_checks(&self.d, self.grading.as_ref(), &self.generators, &mut r, "D");
        r.commutator_norms = self.generators.iter().map(|a| op_norm(&commutator(&self.d, a))).collect();
        if r.issues.is_empty() && !p_grid.is_empty() {
            match self.dirac().and_then(|d| summability_report(&d, p_grid)) {
                Ok(s) => r.summability = s,
                Err(e) => r.issues.push(e.to_string()),
            }
        }
        r.ok = r.issues.is_empty();
        r
    }

    pub fn require_valid(&self) -> Result<()> {
        let r = self.validate(&[]);
        match r.issues.first() {
            None => Ok(()),
            Some(msg) => Err(Error::Invalid { what: msg.clone(), defect: r.self_adjoint_defect.max(r.parity_defect) }),
        }
    }

    /// The module over `M_n(A)` acting on `H ⊗ ℂⁿ`.
    pub fn inflate(&self, n: usize) -> Result<Self> {
        let ctx = Arc::new(self.ctx.inflate(n)?);
        Ok(Self {
            d: self.ctx.inflate_operator(&self.d, n),
            grading: self.grading.as_ref().map(|g| g.inflate(&self.ctx, n)),
            generators: self.generators.iter().map(|a| self.ctx.inflate_operator(a, n)).collect(),
            ctx,
        })
    }

    fn check_invertible(&self, spec: &HermitianSpectrum) -> Result<()> {
        let norm = spec.max_abs();
        let gap = spec.min_abs();
        if norm == 0.0 || gap <= 1e-8 * norm {
            return Err(Error::NotInvertible(format!(
                "min |λ(D)| = {gap:.3e} against ‖D‖ = {norm:.3e}; apply double() first"
            )));
        }
        Ok(())
    }

    /// Phase `F = D|D|^{-1}`; requires `D` invertible.
    pub fn to_bounded(&self) -> Result<BoundedModule> {
        self.require_valid()?;
        let spec = self.spectrum()?;
        self.check_invertible(&spec)?;
        Ok(BoundedModule {
            ctx: self.ctx.clone(),
            f: spec.apply(f64::signum),
            grading: self.grading.clone(),
            generators: self.generators.clone(),
        })
    }

    /// `D_α = D|D|^{-α}` for `α ∈ [0, 1]`.
    pub fn d_alpha(&self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("α = {alpha} must lie in [0, 1]")));
        }
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        self.require_valid()?;
        let spec = self.spectrum()?;
        self.check_invertible(&spec)?;
        Ok(Self {
            d: spec.apply(|x| x * x.abs().powf(-alpha)),
            ..self.clone()
        })
    }

    /// `dD_α/dα = −D_α ln|D|`.
    pub fn d_alpha_derivative(&self, alpha: f64) -> Result<CMat> {
        let spec = self.spectrum()?;
        self.check_invertible(&spec)?;
        Ok(spec.apply(|x| -x * x.abs().powf(-alpha) * x.abs().ln()))
    }

    /// `D' = [[D, 1], [1, −D]]` on `H ⊕ H`, graded by `χ ⊕ (−χ)`, generators `a ⊕ 0`.
    ///
    /// `D'² = (D² + 1) ⊕ (D² + 1)`, so `D'` is invertible and index pairings are unchanged.
    pub fn doubled(&self) -> Self {
        let big = Arc::new(self.ctx.doubled());
        let pieces: Vec<CMat> = (0..self.ctx.blocks().len())
            .map(|k| {
                let b = self.ctx.block(&self.d, k);
                let n = b.nrows();
                let mut m = CMat::zeros(2 * n, 2 * n);
                m.view_mut((0, 0), (n, n)).copy_from(&b);
                m.view_mut((n, n), (n, n)).copy_from(&(-&b));
                m.view_mut((0, n), (n, n)).copy_from(&identity(n));
                m.view_mut((n, 0), (n, n)).copy_from(&identity(n));
                m
            })
            .collect();
        Self {
            d: big.assemble(&pieces),
            grading: self.grading.as_ref().map(|g| g.doubled(&self.ctx)),
            generators: self.generators.iter().map(|a| self.ctx.embed_first_copy(a)).collect(),
            ctx: big,
        }
    }
}

impl BoundedModule {
    pub fn new(ctx: Arc<TraceContext>, f: CMat, grading: Option<Grading>, generators: Vec<CMat>) -> Result<Self> {
        check_structure(&ctx, &f, grading.as_ref(), &generators)?;
        Ok(Self { ctx, f, grading, generators })
    }

    pub fn is_graded(&self) -> bool {
        self.grading.is_some()
    }

    /// Checks `F = F*`, `F² = 1`, parity, and reports `‖[F, a]‖_p` when `p` is given.
    pub fn validate(&self, p: Option<f64>) -> ValidationReport {
        let mut r = ValidationReport::default();
        parity_checks(&self.f, self.grading.as_ref(), &self.generators, &mut r, "F");
        let inv = op_norm(&(&self.f * &self.f - identity(self.ctx.dim())));
        r.involution_defect = Some(inv);
        if inv > 1e-10 {
            r.issues.push(format!("F² ≠ 1 (defect {inv:.3e})"));
        }
        for a in &self.generators {
            let c = commutator(&self.f, a);
            let v = match p {
                Some(p) => p_norm_matrix(&self.ctx, &c, p).unwrap_or(f64::NAN),
                None => op_norm(&c),
            };
            r.commutator_norms.push(v);
        }
        r.ok = r.issues.is_empty();
        r
    }

    pub fn require_valid(&self) -> Result<()> {
        let r = self.validate(None);
        match r.issues.first() {
            None => Ok(()),
            Some(msg) => Err(Error::Invalid {
                what: msg.clone(),
                defect: r.self_adjoint_defect.max(r.parity_defect).max(r.involution_defect.unwrap_or(0.0)),
            }),
        }
    }

    pub fn inflate(&self, n: usize) -> Result<Self> {
        let ctx = Arc::new(self.ctx.inflate(n)?);
        Ok(Self {
            f: self.ctx.inflate_operator(&self.f, n),
            grading: self.grading.as_ref().map(|g| g.inflate(&self.ctx, n)),
            generators: self.generators.iter().map(|a| self.ctx.inflate_operator(a, n)).collect(),
            ctx,
        })
    }
}

/// Random block-diagonal Hermitian matrix, odd with respect to `grading` if given.
pub fn random_odd_hermitian<R: rand::Rng>(ctx: &TraceContext, grading: Option<&Grading>, rng: &mut R) -> CMat {
    let pieces: Vec<CMat> = ctx.blocks().iter().map(|b| crate::linalg::random_hermitian(rng, b.dim)).collect();
    let m = ctx.assemble(&pieces);
    match grading {
        Some(g) => g.odd_part(&m),
        None => m,
    }
}

/// Random module with `D` odd Hermitian of norm about `scale` and random even generators.
pub fn random_unbounded<R: rand::Rng>(
    ctx: Arc<TraceContext>,
    grading: Option<Grading>,
    generators: usize,
    scale: f64,
    rng: &mut R,
) -> UnboundedModule {
    let d = random_odd_hermitian(&ctx, grading.as_ref(), rng);
    let norm = op_norm(&d).max(1e-300);
    let d = d * crate::linalg::c(scale / norm, 0.0);
    let generators = (0..generators)
        .map(|_| crate::cyclic::random_element(&ctx, grading.as_ref(), rng))
        .collect();
    UnboundedModule { ctx, d, grading, generators }
}
