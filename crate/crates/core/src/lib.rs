//! Numerical laboratory for the spinorial Perelman entropy 𝕎_λ on flat spin
//! tori: pseudo-spectral geometry, spinor operators, the entropy and its first
//! variation, the coupled spinorial Ricci flow with DeTurck gauge, and
//! principal-symbol probes.

pub mod clifford;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod random;
pub mod spinor;
pub mod symbols;
pub mod variation;

pub use error::{Error, Result};
