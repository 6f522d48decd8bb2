mod bounds;
mod index;
mod module;
mod pairings;

pub use bounds::{
    interpolation_bound_check, log_commutator_check, log_constants, perturbation_bound_check, InterpolationReport,
    LogCommutatorReport, LogConstants, PerturbationReport,
};
pub use index::{
    ef_index_kernel, ef_index_parametrix, pseudo_parametrix, IndexMethod, IndexReport, DEFAULT_KERNEL_TOL,
};
pub use module::{random_odd_hermitian, random_unbounded, BoundedModule, UnboundedModule, ValidationReport};
pub use pairings::{
    connes_pairing_even, connes_pairing_odd, jlo_pairing_even, jlo_pairing_odd, mckean_singer, pairing_even_bounded,
    pairing_even_parametrix, pairing_odd_bounded, spectral_flow, spectral_flow_pairing, JLO_DELTA, JLO_TAIL_TARGET,
};
