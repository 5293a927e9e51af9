//! Seeded random polynomial forms and maps for identity checks.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exterior::enumerate_multiindices;
use crate::field::{ChartDomain, ChartMap, Coeff, Polynomial, ScalarField};
use crate::form::MatrixForm;

/// Shape limits for random polynomial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusShape {
    pub max_size: usize,
    pub max_dim: usize,
    pub max_poly_degree: i32,
    /// Maximum number of monomials per coefficient.
    pub max_terms: usize,
    /// Probability that a given (entry, component) slot is populated.
    pub density: f64,
}

impl Default for CorpusShape {
    fn default() -> Self {
        CorpusShape { max_size: 3, max_dim: 4, max_poly_degree: 3, max_terms: 3, density: 0.5 }
    }
}

fn random_coeff<R: Rng>(rng: &mut R) -> Coeff {
    let n = rng.gen_range(-4..=4);
    let n = if n == 0 { 1 } else { n };
    if rng.gen_bool(0.25) {
        Coeff::ratio(n, rng.gen_range(2..=5))
    } else {
        Coeff::int(n)
    }
}

/// Random polynomial with non-negative exponents and total degree at most
/// `max_degree`.
pub fn random_polynomial<R: Rng>(rng: &mut R, dim: usize, max_degree: i32, max_terms: usize) -> Polynomial {
    let terms = rng.gen_range(1..=max_terms.max(1));
    let mut p = Polynomial::zero(dim);
    for _ in 0..terms {
        let mut e = vec![0; dim];
        let deg = rng.gen_range(0..=max_degree);
        for _ in 0..deg {
            e[rng.gen_range(0..dim)] += 1;
        }
        p = p.add(&Polynomial::monomial(dim, e, random_coeff(rng)));
    }
    p
}

/// Random polynomial-coefficient form of the given size and degree.
pub fn random_form<R: Rng>(rng: &mut R, domain: &Arc<ChartDomain>, size: usize, degree: usize, shape: &CorpusShape) -> Result<MatrixForm> {
    let mut form = MatrixForm::zero(size, degree, domain.clone())?;
    if degree > domain.dim() {
        return Ok(form);
    }
    let basis = enumerate_multiindices(domain.dim(), degree)?;
    for i in 0..size {
        for j in 0..size {
            for alpha in &basis {
                if rng.gen_bool(shape.density) {
                    let p = random_polynomial(rng, domain.dim(), shape.max_poly_degree, shape.max_terms);
                    form.add_term(i, j, alpha.clone(), ScalarField::polynomial(domain.clone(), p)?)?;
                }
            }
        }
    }
    Ok(form)
}

/// Random polynomial map between chart boxes (components of degree ≤ 2 so
/// pulled-back coefficients stay small).
pub fn random_map<R: Rng>(rng: &mut R, source: &Arc<ChartDomain>, target: &Arc<ChartDomain>) -> Result<ChartMap> {
    let comps = (0..target.dim())
        .map(|_| random_polynomial(rng, source.dim(), 2, 3))
        .collect();
    ChartMap::polynomial(source.clone(), target.clone(), comps)
}

/// A random (size, dim) pair within the shape limits.
pub fn random_shape<R: Rng>(rng: &mut R, shape: &CorpusShape) -> (usize, usize) {
    (rng.gen_range(1..=shape.max_size), rng.gen_range(1..=shape.max_dim))
}
