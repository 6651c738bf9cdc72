//! Numerical operator algebra for C*-valued weights between finite-dimensional
//! C*-algebras.
//!
//! Algebras are direct sums of full matrix blocks, so multiplier algebras
//! coincide with the algebras themselves and the strict topology is the norm
//! topology. Every construction is an explicit linear-algebra computation
//! paired with residual checks.

pub mod algebra;
pub mod cpmap;
pub mod ksgns;
pub mod error;
pub mod hmodule;
pub mod json;
pub mod linalg;
pub mod random;
pub mod regular;
pub mod report;
pub mod suite;
pub mod tensor;
pub mod verify;

pub use algebra::{AlgebraSpec, Element, PartialUnitNet};
pub use error::{Error, Result};
pub use hmodule::{ModuleMap, ModuleRep};
pub use report::{Check, Report};
