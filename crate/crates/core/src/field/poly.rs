//! Sparse multivariate Laurent polynomials with exact-rational or float
//! coefficients.
//!
//! Exponents are signed so that forms like `a^-1 da` (Maurer-Cartan forms
//! of affine and diagonal groups) stay exact. Negative exponents only make
//! sense away from the coordinate hyperplanes; evaluation there yields a
//! non-finite value that callers report as a domain error.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// A polynomial coefficient. Arithmetic stays exact until a float is
/// involved, after which it is float.
#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    Exact(BigRational),
    Float(f64),
}

impl Coeff {
    pub fn int(n: i64) -> Self {
        Coeff::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Coeff::Exact(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Coeff::int(0)
    }

    pub fn one() -> Self {
        Coeff::int(1)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Exact(r) => r.is_zero(),
            Coeff::Float(f) => *f == 0.0,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coeff::Exact(_))
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Coeff::Exact(r) => r.is_negative(),
            Coeff::Float(f) => *f < 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Coeff::Float(f) => *f,
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a + b),
            _ => Coeff::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a * b),
            _ => Coeff::Float(self.to_f64() * other.to_f64()),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(-a),
            Coeff::Float(f) => Coeff::Float(-f),
        }
    }

    pub fn abs(&self) -> Coeff {
        if self.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(&self) -> Option<Coeff> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Coeff::Exact(a) => Coeff::Exact(a.recip()),
            Coeff::Float(f) => Coeff::Float(1.0 / f),
        })
    }

    fn powi(&self, e: i32) -> Option<Coeff> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let mut acc = Coeff::one();
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Some(acc)
    }
}

impl From<i64> for Coeff {
    fn from(n: i64) -> Self {
        Coeff::int(n)
    }
}

impl From<f64> for Coeff {
    fn from(f: f64) -> Self {
        Coeff::Float(f)
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Exact(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            // Debug formatting is the shortest round-trip representation and
            // always carries a '.' or an exponent, which keeps floats
            // distinguishable from integers when parsed back.
            Coeff::Float(x) => write!(f, "{x:?}"),
        }
    }
}

/// Exponent vector of a monomial, one entry per coordinate.
pub type Exponents = Vec<i32>;

/// Sparse polynomial in `dim` variables. Zero coefficients are never stored.
#[derive(Clone)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Exponents, Coeff>,
    float_terms: OnceLock<Vec<(Exponents, f64)>>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.terms == other.terms
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[{}]({})", self.dim, self)
    }
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self::from_terms(dim, BTreeMap::new())
    }

    pub fn constant(dim: usize, c: impl Into<Coeff>) -> Self {
        Self::monomial(dim, vec![0; dim], c.into())
    }

    /// The coordinate function `x_i` (1-based).
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i >= 1 && i <= dim, "variable x{i} outside 1..={dim}");
        let mut e = vec![0; dim];
        e[i - 1] = 1;
        Self::monomial(dim, e, Coeff::one())
    }

    pub fn monomial(dim: usize, exponents: Exponents, c: Coeff) -> Self {
        assert_eq!(exponents.len(), dim);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exponents, c);
        }
        Self::from_terms(dim, terms)
    }

    /// Builds from a term map, dropping zero coefficients.
    pub fn from_terms(dim: usize, mut terms: BTreeMap<Exponents, Coeff>) -> Self {
        terms.retain(|e, c| {
            debug_assert_eq!(e.len(), dim);
            !c.is_zero()
        });
        Polynomial { dim, terms, float_terms: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, Coeff> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every coefficient is an exact rational.
    pub fn is_exact(&self) -> bool {
        self.terms.values().all(Coeff::is_exact)
    }

    /// True when no exponent is negative.
    pub fn is_ordinary(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k >= 0))
    }

    /// The constant coefficient if the polynomial is constant.
    pub fn as_constant(&self) -> Option<Coeff> {
        match self.terms.len() {
            0 => Some(Coeff::zero()),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                e.iter().all(|&k| k == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> i32 {
        self.terms.keys().map(|e| e.iter().sum::<i32>()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            let slot = terms.entry(e.clone()).or_insert_with(Coeff::zero);
            *slot = slot.add(c);
        }
        Self::from_terms(self.dim, terms)
    }

    pub fn neg(&self) -> Polynomial {
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect();
        Self::from_terms(self.dim, terms)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Coeff) -> Polynomial {
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), c.mul(s))).collect();
        Self::from_terms(self.dim, terms)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, other.dim);
        let mut terms: BTreeMap<Exponents, Coeff> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                let prod = ca.mul(cb);
                match terms.get_mut(&e) {
                    Some(slot) => *slot = slot.add(&prod),
                    None => {
                        terms.insert(e, prod);
                    }
                }
            }
        }
        Self::from_terms(self.dim, terms)
    }

    /// Integer power; negative powers only for single-term polynomials.
    pub fn powi(&self, e: i32) -> Option<Polynomial> {
        if e < 0 {
            let (ex, c) = self.single_term()?;
            let inv: Exponents = ex.iter().map(|k| k * e).collect();
            return Some(Self::monomial(self.dim, inv, c.powi(e)?));
        }
        let mut acc = Self::constant(self.dim, 1);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        Some(acc)
    }

    fn single_term(&self) -> Option<(&Exponents, &Coeff)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    /// Formal partial derivative with respect to `x_i` (1-based).
    pub fn partial(&self, i: usize) -> Polynomial {
        assert!(i >= 1 && i <= self.dim);
        let k = i - 1;
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut de = e.clone();
            de[k] -= 1;
            terms.insert(de, c.mul(&Coeff::int(e[k] as i64)));
        }
        Self::from_terms(self.dim, terms)
    }

    /// Substitutes `x_k := components[k]`. Returns `None` when a negative
    /// exponent meets a component that is not a single term.
    pub fn substitute(&self, components: &[Polynomial]) -> Option<Polynomial> {
        assert_eq!(components.len(), self.dim);
        let out_dim = components.first().map(|p| p.dim).unwrap_or(0);
        let mut acc = Polynomial::zero(out_dim);
        // cache powers per (variable, exponent)
        let mut powers: BTreeMap<(usize, i32), Polynomial> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut term = Polynomial::constant(out_dim, c.clone());
            for (k, &ek) in e.iter().enumerate() {
                if ek == 0 {
                    continue;
                }
                let p = match powers.get(&(k, ek)) {
                    Some(p) => p.clone(),
                    None => {
                        let p = components[k].powi(ek)?;
                        powers.insert((k, ek), p.clone());
                        p
                    }
                };
                term = term.mul(&p);
            }
            acc = acc.add(&term);
        }
        Some(acc)
    }

    fn float_terms(&self) -> &[(Exponents, f64)] {
        self.float_terms
            .get_or_init(|| self.terms.iter().map(|(e, c)| (e.clone(), c.to_f64())).collect())
    }

    /// Floating-point evaluation. Exactness for exact coefficients holds up
    /// to the final rounding of each term.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut sum = 0.0;
        for (e, c) in self.float_terms() {
            let mut t = *c;
            for (xk, &ek) in x.iter().zip(e) {
                if ek != 0 {
                    t *= xk.powi(ek);
                }
            }
            sum += t;
        }
        sum
    }

    /// Exact evaluation at a rational point (`None` on division by zero or
    /// when a float coefficient is present).
    pub fn eval_exact(&self, x: &[BigRational]) -> Option<BigRational> {
        let mut sum = BigRational::zero();
        for (e, c) in &self.terms {
            let Coeff::Exact(c) = c else { return None };
            let mut t = c.clone();
            for (xk, &ek) in x.iter().zip(e) {
                if ek < 0 && xk.is_zero() {
                    return None;
                }
                t *= num::pow::Pow::pow(xk, ek);
            }
            sum += t;
        }
        Some(sum)
    }
}

impl fmt::Display for Polynomial {
    /// Literal syntax: `3/2*x1^2*x2 - x3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (n, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k != 0)
                .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, k) })
                .collect();
            let unit = mag == Coeff::one();
            if vars.is_empty() {
                write!(f, "{mag}")?;
            } else if unit {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(dim: usize, i: usize) -> Polynomial {
        Polynomial::var(dim, i)
    }

    #[test]
    fn arithmetic_examples() {
        let s = x(2, 1).add(&x(2, 2));
        assert_eq!(s.to_string(), "x2 + x1");
        assert!(x(2, 1).mul(&Polynomial::zero(2)).is_zero());
        let p = x(2, 1).mul(&x(2, 1)).mul(&x(2, 2)); // x1^2 x2
        assert_eq!(p.partial(1), x(2, 1).mul(&x(2, 2)).scale(&Coeff::int(2)));
        assert!(x(2, 1).partial(2).is_zero());
        assert_eq!(x(2, 1).mul(&x(2, 2)).eval(&[2.0, 3.0]), 6.0);
    }

    #[test]
    fn substitution_example() {
        // x3 ∘ (x, y, xy) = x1 x2
        let z = x(3, 3);
        let comps = vec![x(2, 1), x(2, 2), x(2, 1).mul(&x(2, 2))];
        assert_eq!(z.substitute(&comps).unwrap(), x(2, 1).mul(&x(2, 2)));
    }

    #[test]
    fn laurent_inverse_and_substitution() {
        let inv = x(1, 1).powi(-1).unwrap();
        assert_eq!(inv.mul(&x(1, 1)), Polynomial::constant(1, 1));
        assert_eq!(inv.partial(1), x(1, 1).powi(-2).unwrap().neg());
        // (x1)^-1 ∘ (3 x1) = 1/3 x1^-1
        let scaled = x(1, 1).scale(&Coeff::int(3));
        assert_eq!(inv.substitute(&[scaled]).unwrap(), inv.scale(&Coeff::ratio(1, 3)));
        // not a monomial: no exact substitution
        let shifted = x(1, 1).add(&Polynomial::constant(1, 1));
        assert!(inv.substitute(&[shifted]).is_none());
    }

    #[test]
    fn mixed_coefficients_degrade_to_float() {
        let p = Polynomial::constant(1, Coeff::ratio(1, 2)).add(&Polynomial::constant(1, 0.25));
        assert_eq!(p.as_constant(), Some(Coeff::Float(0.75)));
        assert!(!p.is_exact());
    }

    #[test]
    fn display_forms() {
        let p = x(3, 1)
            .mul(&x(3, 1))
            .mul(&x(3, 2))
            .scale(&Coeff::ratio(3, 2))
            .sub(&x(3, 3));
        assert_eq!(p.to_string(), "-x3 + 3/2*x1^2*x2");
        assert_eq!(Polynomial::zero(2).to_string(), "0");
        assert_eq!(Polynomial::constant(1, 2.0).to_string(), "2.0");
    }
}
