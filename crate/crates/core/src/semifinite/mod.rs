//! Finite semifinite von Neumann algebras: weighted block traces, affiliated
//! operators, gradings, singular value functions and Schatten norms.

mod context;
mod norms;
mod operator;

pub use context::{Block, TraceContext};
pub use norms::{
    heat_trace, holder_check, mu_identity_defect, mu_monotone_check, mu_product_check, profile_excess,
    str_norm_check, tau_integral_defect, operator_norm, p_norm, p_norm_matrix, ptheta_check,
    resolvent_trace, singular_profile, summability_report, BoundCheck, SingularProfile,
    SummabilityEntry, ThetaSample, THETA_GRID,
};
pub use operator::{Grading, HermitianSpectrum, Operator, Parity};
