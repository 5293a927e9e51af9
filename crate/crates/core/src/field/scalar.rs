use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::domain::ChartDomain;
use super::poly::{Coeff, Polynomial};
use crate::error::{domain, Error, Result};

/// Declared differentiability class of a coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    C0,
    C1,
    C2,
    CInf,
}

impl Smoothness {
    /// Class of a derivative of a field of this class.
    pub fn decrement(self) -> Smoothness {
        match self {
            Smoothness::C0 | Smoothness::C1 => Smoothness::C0,
            Smoothness::C2 => Smoothness::C1,
            Smoothness::CInf => Smoothness::CInf,
        }
    }
}

pub type EvalFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;
/// Produces the partial derivative field with respect to a 1-based axis.
pub type PartialFn = Arc<dyn Fn(usize) -> Result<ScalarField> + Send + Sync>;

#[derive(Clone)]
enum Derivative {
    Analytic(PartialFn),
    FiniteDifference,
}

/// A callable coefficient. The callable must be pure.
#[derive(Clone)]
pub struct Numeric {
    eval: EvalFn,
    derivative: Derivative,
}

#[derive(Clone)]
pub enum Body {
    Polynomial(Polynomial),
    Numeric(Numeric),
}

/// A real-valued coefficient function on a chart box.
#[derive(Clone)]
pub struct ScalarField {
    domain: Arc<ChartDomain>,
    body: Body,
    smoothness: Smoothness,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Polynomial(p) => write!(f, "ScalarField({p})"),
            Body::Numeric(_) => write!(f, "ScalarField(<numeric {:?}>)", self.smoothness),
        }
    }
}

/// Structural equality: polynomial bodies compare by coefficient map,
/// numeric bodies only by identity of the callable.
impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        if !same_domain(&self.domain, &other.domain) {
            return false;
        }
        match (&self.body, &other.body) {
            (Body::Polynomial(a), Body::Polynomial(b)) => a == b,
            (Body::Numeric(a), Body::Numeric(b)) => Arc::ptr_eq(&a.eval, &b.eval),
            _ => false,
        }
    }
}

pub(crate) fn same_domain(a: &Arc<ChartDomain>, b: &Arc<ChartDomain>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl ScalarField {
    pub fn polynomial(domain: Arc<ChartDomain>, p: Polynomial) -> Result<Self> {
        if p.dim() != domain.dim() {
            return domain_err(format!(
                "polynomial in {} variables on a {}-dimensional domain",
                p.dim(),
                domain.dim()
            ));
        }
        Ok(ScalarField { domain, body: Body::Polynomial(p), smoothness: Smoothness::CInf })
    }

    pub fn zero(domain: Arc<ChartDomain>) -> Self {
        let p = Polynomial::zero(domain.dim());
        ScalarField { domain, body: Body::Polynomial(p), smoothness: Smoothness::CInf }
    }

    pub fn constant(domain: Arc<ChartDomain>, c: impl Into<Coeff>) -> Self {
        let p = Polynomial::constant(domain.dim(), c);
        ScalarField { domain, body: Body::Polynomial(p), smoothness: Smoothness::CInf }
    }

    /// Coordinate function `x_i`, 1-based.
    pub fn var(domain: Arc<ChartDomain>, i: usize) -> Result<Self> {
        if i == 0 || i > domain.dim() {
            return domain_err(format!("coordinate x{i} outside 1..={}", domain.dim()));
        }
        let p = Polynomial::var(domain.dim(), i);
        Self::polynomial(domain, p)
    }

    /// Numeric field whose derivatives, if any, come from central finite
    /// differences.
    pub fn from_fn<F>(domain: Arc<ChartDomain>, smoothness: Smoothness, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let eval: EvalFn = Arc::new(move |x| Ok(f(x)));
        ScalarField {
            domain,
            body: Body::Numeric(Numeric { eval, derivative: Derivative::FiniteDifference }),
            smoothness,
        }
    }

    /// Like [`ScalarField::from_fn`] for a fallible callable (e.g. one that
    /// reports a singular point).
    pub fn from_fallible_fn<F>(domain: Arc<ChartDomain>, smoothness: Smoothness, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarField {
            domain,
            body: Body::Numeric(Numeric { eval: Arc::new(f), derivative: Derivative::FiniteDifference }),
            smoothness,
        }
    }

    /// Numeric field with analytic partials supplied by `partials(i)`.
    pub fn from_fn_with_partials<F, D>(
        domain: Arc<ChartDomain>,
        smoothness: Smoothness,
        f: F,
        partials: D,
    ) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        D: Fn(usize) -> Result<ScalarField> + Send + Sync + 'static,
    {
        let eval: EvalFn = Arc::new(move |x| Ok(f(x)));
        Self::numeric(domain, smoothness, eval, Arc::new(partials))
    }

    pub(crate) fn numeric(
        domain: Arc<ChartDomain>,
        smoothness: Smoothness,
        eval: EvalFn,
        partials: PartialFn,
    ) -> Self {
        ScalarField {
            domain,
            body: Body::Numeric(Numeric { eval, derivative: Derivative::Analytic(partials) }),
            smoothness,
        }
    }

    pub fn domain(&self) -> &Arc<ChartDomain> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Overrides the declared class (e.g. to downgrade a numeric field).
    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        match &self.body {
            Body::Polynomial(p) => Some(p),
            Body::Numeric(_) => None,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.body, Body::Polynomial(_))
    }

    /// True only for the exactly-zero polynomial.
    pub fn is_zero(&self) -> bool {
        matches!(&self.body, Body::Polynomial(p) if p.is_zero())
    }

    /// Value at `x`; `x` must lie in the closed domain box.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.domain.check_point(x)?;
        self.eval_raw(x)
    }

    /// Value without the domain-membership check.
    pub(crate) fn eval_raw(&self, x: &[f64]) -> Result<f64> {
        match &self.body {
            Body::Polynomial(p) => {
                let v = p.eval(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    domain(format!("polynomial {p} is singular at {x:?}"))
                }
            }
            Body::Numeric(n) => (n.eval)(x),
        }
    }

    /// Partial derivative along the 1-based axis `i`.
    pub fn partial(&self, i: usize) -> Result<ScalarField> {
        if i == 0 || i > self.dim() {
            return domain_err(format!("axis {i} outside 1..={}", self.dim()));
        }
        match &self.body {
            Body::Polynomial(p) => Self::polynomial(self.domain.clone(), p.partial(i)),
            Body::Numeric(n) => {
                if self.smoothness < Smoothness::C1 {
                    if let Derivative::FiniteDifference = n.derivative {
                        return Err(Error::Capability(
                            "C^0 numeric field has no analytic partials to differentiate".into(),
                        ));
                    }
                }
                let class = self.smoothness.decrement();
                match &n.derivative {
                    Derivative::Analytic(d) => {
                        let df = d(i)?;
                        let s = df.smoothness.min(class);
                        Ok(df.with_smoothness(s))
                    }
                    Derivative::FiniteDifference => Ok(self.finite_difference(i, class)),
                }
            }
        }
    }

    fn finite_difference(&self, i: usize, class: Smoothness) -> ScalarField {
        let base = self.clone();
        let richardson = self.smoothness >= Smoothness::C2;
        let k = i - 1;
        let eval: EvalFn = Arc::new(move |x: &[f64]| {
            let h = f64::EPSILON.cbrt() * x[k].abs().max(1.0);
            let mut xs = x.to_vec();
            let mut central = |h: f64| -> Result<f64> {
                xs[k] = x[k] + h;
                let fp = base.eval_raw(&xs)?;
                xs[k] = x[k] - h;
                let fm = base.eval_raw(&xs)?;
                Ok((fp - fm) / (2.0 * h))
            };
            let coarse = central(h)?;
            if richardson {
                let fine = central(0.5 * h)?;
                Ok((4.0 * fine - coarse) / 3.0)
            } else {
                Ok(coarse)
            }
        });
        ScalarField {
            domain: self.domain.clone(),
            body: Body::Numeric(Numeric { eval, derivative: Derivative::FiniteDifference }),
            smoothness: class,
        }
    }

    fn check_compatible(&self, other: &ScalarField) -> Result<()> {
        if same_domain(&self.domain, &other.domain) {
            Ok(())
        } else {
            domain_err(format!(
                "incompatible field domains {:?} and {:?}",
                self.domain.bounds(),
                other.domain.bounds()
            ))
        }
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_compatible(other)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if let (Body::Polynomial(a), Body::Polynomial(b)) = (&self.body, &other.body) {
            return Self::polynomial(self.domain.clone(), a.add(b));
        }
        let (a, b) = (self.clone(), other.clone());
        let (da, db) = (self.clone(), other.clone());
        let eval: EvalFn = Arc::new(move |x| Ok(a.eval_raw(x)? + b.eval_raw(x)?));
        let partials: PartialFn = Arc::new(move |i| da.partial(i)?.add(&db.partial(i)?));
        Ok(Self::numeric(
            self.domain.clone(),
            self.smoothness.min(other.smoothness),
            eval,
            partials,
        ))
    }

    pub fn neg(&self) -> ScalarField {
        self.scale(&Coeff::int(-1))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Coeff) -> ScalarField {
        match &self.body {
            Body::Polynomial(p) => ScalarField {
                domain: self.domain.clone(),
                body: Body::Polynomial(p.scale(c)),
                smoothness: self.smoothness,
            },
            Body::Numeric(_) if c.is_zero() => Self::zero(self.domain.clone()),
            Body::Numeric(_) => {
                let s = c.to_f64();
                let (a, da, c) = (self.clone(), self.clone(), c.clone());
                let eval: EvalFn = Arc::new(move |x| Ok(s * a.eval_raw(x)?));
                let partials: PartialFn = Arc::new(move |i| Ok(da.partial(i)?.scale(&c)));
                Self::numeric(self.domain.clone(), self.smoothness, eval, partials)
            }
        }
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_compatible(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.domain.clone()));
        }
        match (&self.body, &other.body) {
            (Body::Polynomial(a), Body::Polynomial(b)) => Self::polynomial(self.domain.clone(), a.mul(b)),
            // constant polynomial times anything is a plain rescale
            (Body::Polynomial(a), _) if a.as_constant().is_some() => {
                Ok(other.scale(&a.as_constant().unwrap()))
            }
            (_, Body::Polynomial(b)) if b.as_constant().is_some() => {
                Ok(self.scale(&b.as_constant().unwrap()))
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let (da, db) = (self.clone(), other.clone());
                let eval: EvalFn = Arc::new(move |x| Ok(a.eval_raw(x)? * b.eval_raw(x)?));
                let partials: PartialFn = Arc::new(move |i| {
                    da.partial(i)?.mul(&db)?.add(&da.mul(&db.partial(i)?)?)
                });
                Ok(Self::numeric(
                    self.domain.clone(),
                    self.smoothness.min(other.smoothness),
                    eval,
                    partials,
                ))
            }
        }
    }

    /// Same body re-attached to an equal-dimensional domain (used to move a
    /// field onto a sub-box for integration or restriction).
    pub fn restrict(&self, domain: Arc<ChartDomain>) -> Result<ScalarField> {
        if domain.dim() != self.dim() {
            return domain_err("restriction must preserve dimension");
        }
        if !self.domain.contains_box(&domain) {
            return domain_err(format!(
                "restriction box {:?} not inside {:?}",
                domain.bounds(),
                self.domain.bounds()
            ));
        }
        self.rehome(domain)
    }

    fn rehome(&self, domain: Arc<ChartDomain>) -> Result<ScalarField> {
        match &self.body {
            Body::Polynomial(p) => Self::polynomial(domain, p.clone()),
            Body::Numeric(_) => {
                let (a, da, dom) = (self.clone(), self.clone(), domain.clone());
                let eval: EvalFn = Arc::new(move |x| a.eval_raw(x));
                let partials: PartialFn = Arc::new(move |i| da.partial(i)?.rehome(dom.clone()));
                Ok(Self::numeric(domain, self.smoothness, eval, partials))
            }
        }
    }
}

fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    domain(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom(dim: usize) -> Arc<ChartDomain> {
        Arc::new(ChartDomain::cube(dim, -2.0, 2.0).unwrap())
    }

    #[test]
    fn eval_examples() {
        let d = Arc::new(ChartDomain::cube(2, 0.0, 5.0).unwrap());
        let xy = ScalarField::var(d.clone(), 1).unwrap().mul(&ScalarField::var(d.clone(), 2).unwrap()).unwrap();
        assert_eq!(xy.eval(&[2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(ScalarField::constant(d.clone(), 1).eval(&[4.0, 0.5]).unwrap(), 1.0);
        assert!(matches!(xy.eval(&[6.0, 0.0]), Err(Error::Domain(_))));
        let sq = ScalarField::from_fn(dom(1), Smoothness::CInf, |x| x[0] * x[0]);
        assert_eq!(sq.eval(&[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn partial_examples() {
        let d = dom(2);
        let x1 = ScalarField::var(d.clone(), 1).unwrap();
        let x2 = ScalarField::var(d.clone(), 2).unwrap();
        let f = x1.mul(&x1).unwrap().mul(&x2).unwrap();
        let expect = x1.mul(&x2).unwrap().scale(&Coeff::int(2));
        assert_eq!(f.partial(1).unwrap(), expect);
        assert!(x1.partial(2).unwrap().is_zero());
        let sq = ScalarField::from_fn(dom(1), Smoothness::CInf, |x| x[0] * x[0]);
        assert!((sq.partial(1).unwrap().eval(&[1.0]).unwrap() - 2.0).abs() < 1e-6);
        assert!(f.partial(3).is_err());
    }

    #[test]
    fn c0_numeric_cannot_be_differentiated() {
        let abs = ScalarField::from_fn(dom(1), Smoothness::C0, |x| x[0].abs());
        assert!(matches!(abs.partial(1), Err(Error::Capability(_))));
        // but a C0 field with analytic partials is fine
        let d = dom(1);
        let dd = d.clone();
        let abs = ScalarField::from_fn_with_partials(d, Smoothness::C0, |x| x[0].abs(), move |_| {
            Ok(ScalarField::from_fn(dd.clone(), Smoothness::C0, |x| x[0].signum()))
        });
        assert_eq!(abs.partial(1).unwrap().eval(&[-0.5]).unwrap(), -1.0);
    }

    #[test]
    fn zero_is_absorbing_and_mixing_degrades_to_numeric() {
        let d = dom(2);
        let x1 = ScalarField::var(d.clone(), 1).unwrap();
        assert!(x1.mul(&ScalarField::zero(d.clone())).unwrap().is_zero());
        let num = ScalarField::from_fn(d.clone(), Smoothness::CInf, |x| x[0].exp());
        let mixed = x1.add(&num).unwrap();
        assert!(!mixed.is_polynomial());
        assert!((mixed.eval(&[1.0, 0.0]).unwrap() - (1.0 + 1f64.exp())).abs() < 1e-15);
        // product rule through the lazy derivative tower
        let prod = x1.mul(&num).unwrap();
        let d1 = prod.partial(1).unwrap().eval(&[0.5, 0.0]).unwrap();
        assert!((d1 - 1.5 * 0.5f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn mismatched_domains_rejected() {
        let a = ScalarField::var(dom(2), 1).unwrap();
        let b = ScalarField::var(Arc::new(ChartDomain::cube(2, 0.0, 1.0).unwrap()), 1).unwrap();
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn finite_differences_match_exact_partials() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = dom(3);
        for _ in 0..20 {
            // random polynomial up to degree 4
            let mut p = Polynomial::zero(3);
            for _ in 0..5 {
                let e: Vec<i32> = (0..3).map(|_| rng.gen_range(0..=1)).chain([]).collect();
                let mut e = e;
                e[rng.gen_range(0..3)] += rng.gen_range(0..=2);
                p = p.add(&Polynomial::monomial(3, e, Coeff::int(rng.gen_range(-5..=5))));
            }
            let exact = ScalarField::polynomial(d.clone(), p.clone()).unwrap();
            let pp = p.clone();
            let numeric = ScalarField::from_fn(d.clone(), Smoothness::CInf, move |x| pp.eval(x));
            for _ in 0..5 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.9..1.9)).collect();
                for i in 1..=3 {
                    let fd = numeric.partial(i).unwrap().eval(&x).unwrap();
                    let ex = exact.partial(i).unwrap().eval(&x).unwrap();
                    assert!((fd - ex).abs() < 1e-6, "{fd} vs {ex}");
                }
            }
        }
    }
}
