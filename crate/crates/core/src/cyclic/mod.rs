//! Normalised cyclic (b, B)-bicomplex of the algebra: chains, boundaries and cochains.

mod chain;
mod checks;
mod cochain;

pub use chain::{
    canonicalize, connes_boundary, hochschild_boundary, is_scalar, random_chain, random_element,
    Chain, ChainTerm, GradedChain,
};
pub use checks::{bicomplex_check, BicomplexReport};
pub use cochain::{
    growth_report, pair, pair_graded, Cochain, CochainSum, ConnesPullback, GrowthReport,
    HochschildPullback, Pairing, TestCochain,
};
