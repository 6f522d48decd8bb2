//! JLO-type characters built from heat brackets, their transgressions, and
//! the Connes character of the associated pre-Fredholm module.

pub mod checks;
pub mod chern;
pub mod connes;
pub mod divided;
pub mod heat;
pub mod jlo;
pub mod retracted;
pub mod template;

pub use divided::simplex_exp_integral;
pub use heat::{heat_bracket, BracketMethod, HeatKernel, MAX_SIMPLEX_DIM, MAX_SPACE_DIM};
pub use template::{Evaluator, Slot, TemplateCochain, Term};
pub use jlo::{alpha_cochain, check_level_parity, jlo_cochain, jlo_v_cochain, jlo_vw_cochain, Jlo};
pub use checks::{
    cobound_check, duhamel_check, jlo_cocycle_check, lemma_misc_check, level2aux_check, pairing, slope_check,
    variation_check, IdentityReport, LemmaVariant, SlopeReport,
};
pub use chern::{chern_minus, chern_minus_coefficient, chern_plus, chern_plus_coefficient, check_projection, check_unitary};
pub use connes::{
    connes_cochain, connes_coefficient, connes_cocycle_check, connes_iota_cochain, connes_transgression_check,
    psi_cochain, psi_identities_check, Connes,
};
pub use retracted::{
    d_alpha_transgression_check, getzler_bound, getzler_check, reduction_check, require_invertible,
    scalar_factor_check, scaling_limit_report, Horizon, RetractedJlo, ScalarFactorReport, ScalingReport,
    SCALING_GRID,
};
