pub mod characters;
pub mod cyclic;
pub mod error;
pub mod fredholm;
pub mod linalg;
pub mod quadrature;
pub mod scenario;
pub mod semifinite;

pub use error::{Error, Result};
