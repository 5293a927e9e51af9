//! Calculus of matrix-valued differential forms on Euclidean chart boxes,
//! with a superdensity estimator and Maurer-Cartan tooling.

pub mod cartan;
pub mod corpus;
pub mod ded;
pub mod density;
pub mod error;
pub mod exterior;
pub mod field;
pub mod form;
pub mod lab;
pub mod literal;
pub mod quadrature;
pub mod selftest;

pub use error::{Error, Result};
pub use exterior::{enumerate_multiindices, merge, MergeResult, MultiIndex};
pub use field::{ChartDomain, ChartMap, Coeff, Polynomial, ScalarField, Smoothness};
pub use form::MatrixForm;
