//! Scalar coefficient fields on box-shaped chart domains.

mod domain;
mod map;
pub mod poly;
mod scalar;

pub use domain::ChartDomain;
pub use map::ChartMap;
pub use poly::{Coeff, Polynomial};
pub use scalar::{Body, EvalFn, PartialFn, ScalarField, Smoothness};
pub(crate) use scalar::same_domain;
