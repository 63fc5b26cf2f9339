//! Sparse random circulant matrices over finite abelian groups: spectra,
//! limiting laws, exact moment formulas and seeded experiments.

pub mod caps;
pub mod circulant;
pub mod error;
pub mod experiments;
pub mod group;
pub mod limit;
pub mod linsys;
pub mod moments;
pub mod number_theory;
pub mod output;
pub mod seed;

pub use caps::Caps;
pub use circulant::{SparseCirculant, Spectrum};
pub use error::{Error, Result};
pub use group::{Character, FiniteAbelianGroup, GroupElement};
