//! L×L matrices of differential h-forms on a chart box.
//!
//! Each matrix entry is a map from [`MultiIndex`] to coefficient field;
//! absent keys are zero and exact-zero polynomial coefficients are pruned,
//! so two forms with polynomial coefficients are equal iff their stored
//! coefficient maps are equal.
//!
//! Degrees above the chart dimension are allowed and always hold the zero
//! form (there are no h-covectors for h > M). Wedge products and exterior
//! derivatives that overflow the dimension land there instead of failing.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::exterior::{enumerate_multiindices, merge, MergeResult, MultiIndex};
use crate::field::{same_domain, ChartDomain, ChartMap, Coeff, ScalarField};

/// Coefficients of one matrix entry, in lexicographic multi-index order.
pub type Component = BTreeMap<MultiIndex, ScalarField>;

#[derive(Clone, Debug)]
pub struct MatrixForm {
    size: usize,
    degree: usize,
    domain: Arc<ChartDomain>,
    // row-major, size * size
    entries: Vec<Component>,
}

impl PartialEq for MatrixForm {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
            && self.degree == other.degree
            && same_domain(&self.domain, &other.domain)
            && self.entries == other.entries
    }
}

fn add_into(comp: &mut Component, key: MultiIndex, value: ScalarField) -> Result<()> {
    if value.is_zero() {
        return Ok(());
    }
    match comp.remove(&key) {
        Some(prev) => {
            let sum = prev.add(&value)?;
            if !sum.is_zero() {
                comp.insert(key, sum);
            }
        }
        None => {
            comp.insert(key, value);
        }
    }
    Ok(())
}

impl MatrixForm {
    pub fn zero(size: usize, degree: usize, domain: Arc<ChartDomain>) -> Result<Self> {
        if size == 0 {
            return domain_err("matrix size must be at least 1");
        }
        Ok(MatrixForm { size, degree, domain, entries: vec![Component::new(); size * size] })
    }

    /// Builds a form from row-major entries, validating keys and domains.
    pub fn from_entries(
        size: usize,
        degree: usize,
        domain: Arc<ChartDomain>,
        entries: Vec<Component>,
    ) -> Result<Self> {
        if size == 0 || entries.len() != size * size {
            return domain_err(format!("expected {} entries for a {size}×{size} form", size * size));
        }
        let mut form = MatrixForm::zero(size, degree, domain)?;
        for (slot, comp) in entries.into_iter().enumerate() {
            for (alpha, f) in comp {
                form.check_term(&alpha, &f)?;
                add_into(&mut form.entries[slot], alpha, f)?;
            }
        }
        Ok(form)
    }

    fn check_term(&self, alpha: &MultiIndex, f: &ScalarField) -> Result<()> {
        if alpha.dim() != self.dim() || alpha.degree() != self.degree {
            return domain_err(format!(
                "component d{alpha} does not belong to a degree-{} form on a {}-dimensional domain",
                self.degree,
                self.dim()
            ));
        }
        if !same_domain(f.domain(), &self.domain) {
            return domain_err("coefficient field lives on a different domain");
        }
        Ok(())
    }

    /// Scalar (L = 1) form `f dx_alpha`.
    pub fn monomial(f: ScalarField, alpha: MultiIndex) -> Result<Self> {
        let domain = f.domain().clone();
        let mut comp = Component::new();
        comp.insert(alpha.clone(), f);
        Self::from_entries(1, alpha.degree(), domain, vec![comp])
    }

    /// Scalar 0-form.
    pub fn function(f: ScalarField) -> Self {
        let dim = f.dim();
        Self::monomial(f, MultiIndex::empty(dim)).expect("0-form is always valid")
    }

    /// Constant-coefficient 0-form with the given matrix.
    pub fn constant_matrix(domain: Arc<ChartDomain>, m: &[Vec<Coeff>]) -> Result<Self> {
        let size = m.len();
        let mut form = Self::zero(size, 0, domain.clone())?;
        for (i, row) in m.iter().enumerate() {
            if row.len() != size {
                return domain_err("constant matrix must be square");
            }
            for (j, c) in row.iter().enumerate() {
                form.add_term(i, j, MultiIndex::empty(domain.dim()), ScalarField::constant(domain.clone(), c.clone()))?;
            }
        }
        Ok(form)
    }

    /// Places a scalar form at entry `(i, j)` of an otherwise-zero L×L form.
    pub fn one_hot(size: usize, i: usize, j: usize, scalar: &MatrixForm) -> Result<Self> {
        if scalar.size != 1 {
            return domain_err("one_hot expects a scalar (1×1) form");
        }
        if i >= size || j >= size {
            return domain_err(format!("entry ({i}, {j}) outside a {size}×{size} matrix"));
        }
        let mut form = Self::zero(size, scalar.degree, scalar.domain.clone())?;
        form.entries[i * size + j] = scalar.entries[0].clone();
        Ok(form)
    }

    /// Adds `f dx_alpha` to entry `(i, j)` (0-based matrix position).
    pub fn add_term(&mut self, i: usize, j: usize, alpha: MultiIndex, f: ScalarField) -> Result<()> {
        if i >= self.size || j >= self.size {
            return domain_err(format!("entry ({i}, {j}) outside a {0}×{0} matrix", self.size));
        }
        self.check_term(&alpha, &f)?;
        add_into(&mut self.entries[i * self.size + j], alpha, f)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Arc<ChartDomain> {
        &self.domain
    }

    /// Entry `(i, j)`, 0-based.
    pub fn entry(&self, i: usize, j: usize) -> &Component {
        &self.entries[i * self.size + j]
    }

    pub fn coefficient(&self, i: usize, j: usize, alpha: &MultiIndex) -> Option<&ScalarField> {
        self.entry(i, j).get(alpha)
    }

    /// Iterates `(i, j, alpha, coefficient)` in row-major, lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, &MultiIndex, &ScalarField)> {
        let n = self.size;
        self.entries
            .iter()
            .enumerate()
            .flat_map(move |(k, c)| c.iter().map(move |(a, f)| (k / n, k % n, a, f)))
    }

    /// True when no coefficient is stored. Numeric coefficients are never
    /// considered exactly zero.
    pub fn is_exactly_zero(&self) -> bool {
        self.entries.iter().all(BTreeMap::is_empty)
    }

    /// True when every coefficient is a polynomial.
    pub fn is_polynomial(&self) -> bool {
        self.terms().all(|(_, _, _, f)| f.is_polynomial())
    }

    fn check_same_shape(&self, other: &MatrixForm) -> Result<()> {
        if self.size != other.size {
            return domain_err(format!("matrix sizes {} and {} differ", self.size, other.size));
        }
        if !same_domain(&self.domain, &other.domain) {
            return domain_err("forms live on different domains");
        }
        Ok(())
    }

    pub fn add(&self, other: &MatrixForm) -> Result<MatrixForm> {
        self.check_same_shape(other)?;
        if self.degree != other.degree {
            return domain_err(format!("cannot add forms of degree {} and {}", self.degree, other.degree));
        }
        let mut out = self.clone();
        for (k, comp) in other.entries.iter().enumerate() {
            for (alpha, f) in comp {
                add_into(&mut out.entries[k], alpha.clone(), f.clone())?;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Coeff) -> MatrixForm {
        let mut out = self.clone();
        for comp in &mut out.entries {
            let scaled: Component = std::mem::take(comp)
                .into_iter()
                .map(|(a, f)| (a, f.scale(c)))
                .filter(|(_, f)| !f.is_zero())
                .collect();
            *comp = scaled;
        }
        out
    }

    pub fn neg(&self) -> MatrixForm {
        self.scale(&Coeff::int(-1))
    }

    pub fn sub(&self, other: &MatrixForm) -> Result<MatrixForm> {
        self.add(&other.neg())
    }

    /// Moves the form onto a sub-box of its domain.
    pub fn restrict(&self, sub: Arc<ChartDomain>) -> Result<MatrixForm> {
        let mut out = MatrixForm::zero(self.size, self.degree, sub.clone())?;
        for (k, comp) in self.entries.iter().enumerate() {
            for (a, f) in comp {
                out.entries[k].insert(a.clone(), f.restrict(sub.clone())?);
            }
        }
        Ok(out)
    }

    /// Exterior product with matrix contraction:
    /// `(λ∧μ)^{ij} = Σ_q λ^{iq} ∧ μ^{qj}`.
    pub fn wedge(&self, other: &MatrixForm) -> Result<MatrixForm> {
        self.check_same_shape(other)?;
        let n = self.size;
        let mut out = MatrixForm::zero(n, self.degree + other.degree, self.domain.clone())?;
        if self.degree + other.degree > self.dim() {
            return Ok(out);
        }
        for i in 0..n {
            for j in 0..n {
                let acc = &mut out.entries[i * n + j];
                for q in 0..n {
                    for (a, f) in self.entry(i, q) {
                        for (b, g) in other.entry(q, j) {
                            if let MergeResult::Signed { sign, merged } = merge(a, b)? {
                                let prod = f.mul(g)?;
                                let term = if sign < 0 { prod.neg() } else { prod };
                                add_into(acc, merged, term)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Entrywise exterior derivative.
    pub fn d(&self) -> Result<MatrixForm> {
        let dim = self.dim();
        let mut out = MatrixForm::zero(self.size, self.degree + 1, self.domain.clone())?;
        if self.degree >= dim {
            return Ok(out);
        }
        for (k, comp) in self.entries.iter().enumerate() {
            for (alpha, f) in comp {
                for axis in 1..=dim {
                    if alpha.contains(axis) {
                        continue;
                    }
                    let df = f.partial(axis)?;
                    if df.is_zero() {
                        continue;
                    }
                    let single = MultiIndex::single(dim, axis)?;
                    if let MergeResult::Signed { sign, merged } = merge(&single, alpha)? {
                        let term = if sign < 0 { df.neg() } else { df };
                        add_into(&mut out.entries[k], merged, term)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Pullback along `map`, whose target must be this form's domain.
    pub fn pullback(&self, map: &ChartMap) -> Result<MatrixForm> {
        if !same_domain(map.target(), &self.domain) {
            return domain_err("pullback map target differs from the form's domain");
        }
        let src_dim = map.source().dim();
        let mut out = MatrixForm::zero(self.size, self.degree, map.source().clone())?;
        if self.degree > src_dim {
            return Ok(out);
        }
        let jac = if self.degree > 0 { Some(map.jacobian()?) } else { None };
        let source_indices = enumerate_multiindices(src_dim, self.degree)?;
        let mut minors: BTreeMap<(MultiIndex, MultiIndex), ScalarField> = BTreeMap::new();
        for (k, comp) in self.entries.iter().enumerate() {
            for (beta, g) in comp {
                let gf = g.compose(map)?;
                if self.degree == 0 {
                    add_into(&mut out.entries[k], MultiIndex::empty(src_dim), gf)?;
                    continue;
                }
                for alpha in &source_indices {
                    let key = (beta.clone(), alpha.clone());
                    let minor = match minors.get(&key) {
                        Some(m) => m.clone(),
                        None => {
                            let m = jacobian_minor(jac.as_ref().unwrap(), beta, alpha, map.source())?;
                            minors.insert(key, m.clone());
                            m
                        }
                    };
                    if minor.is_zero() {
                        continue;
                    }
                    add_into(&mut out.entries[k], alpha.clone(), gf.mul(&minor)?)?;
                }
            }
        }
        Ok(out)
    }

    /// `ω_P(v_1, …, v_h)` as an L×L matrix.
    pub fn evaluate(&self, p: &[f64], vectors: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.domain.check_point(p)?;
        if vectors.len() != self.degree {
            return domain_err(format!(
                "a degree-{} form takes {} vectors, got {}",
                self.degree,
                self.degree,
                vectors.len()
            ));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dim()) {
            return domain_err(format!("vector of length {} on a {}-dimensional domain", v.len(), self.dim()));
        }
        self.evaluate_raw(p, vectors)
    }

    pub(crate) fn evaluate_raw(&self, p: &[f64], vectors: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = self.size;
        let mut out = DMatrix::zeros(n, n);
        for (k, comp) in self.entries.iter().enumerate() {
            let mut sum = 0.0;
            for (alpha, f) in comp {
                let h = alpha.degree();
                let minor = DMatrix::from_fn(h, h, |r, c| vectors[c][alpha.indices()[r] - 1]);
                let det = if h == 0 { 1.0 } else { minor.determinant() };
                if det != 0.0 {
                    sum += f.eval_raw(p)? * det;
                }
            }
            out[(k / n, k % n)] = sum;
        }
        Ok(out)
    }

    /// Largest absolute coefficient value at `p` over all entries and
    /// components.
    pub fn max_abs_at(&self, p: &[f64]) -> Result<f64> {
        self.domain.check_point(p)?;
        self.max_abs_raw(p)
    }

    pub(crate) fn max_abs_raw(&self, p: &[f64]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (_, _, _, f) in self.terms() {
            let v = f.eval_raw(p)?.abs();
            if v.is_nan() {
                return Ok(f64::NAN);
            }
            m = m.max(v);
        }
        Ok(m)
    }

    /// Pointwise vanishing test `max |coefficient(P)| ≤ eps`.
    pub fn is_zero_at(&self, p: &[f64], eps: f64) -> Result<bool> {
        Ok(self.max_abs_at(p)? <= eps)
    }

    /// Coefficient matrix of the top-degree component, evaluated at `p`.
    pub(crate) fn top_coefficients_raw(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let top = MultiIndex::top(self.dim());
        for (k, comp) in self.entries.iter().enumerate() {
            out[k] = match comp.get(&top) {
                Some(f) => f.eval_raw(p)?,
                None => 0.0,
            };
        }
        Ok(())
    }
}

fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    crate::error::domain(msg)
}

/// det of the Jacobian minor with target rows `beta` and source columns
/// `alpha`, expanded symbolically along the first row.
fn jacobian_minor(
    jac: &[Vec<ScalarField>],
    beta: &MultiIndex,
    alpha: &MultiIndex,
    source: &Arc<ChartDomain>,
) -> Result<ScalarField> {
    let rows: Vec<usize> = beta.indices().iter().map(|b| b - 1).collect();
    let cols: Vec<usize> = alpha.indices().iter().map(|a| a - 1).collect();
    det_expand(jac, &rows, &cols, source)
}

fn det_expand(
    jac: &[Vec<ScalarField>],
    rows: &[usize],
    cols: &[usize],
    source: &Arc<ChartDomain>,
) -> Result<ScalarField> {
    if rows.is_empty() {
        return Ok(ScalarField::constant(source.clone(), 1));
    }
    let r0 = rows[0];
    let mut acc = ScalarField::zero(source.clone());
    for (c_pos, &c) in cols.iter().enumerate() {
        let entry = &jac[r0][c];
        if entry.is_zero() {
            continue;
        }
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let cof = det_expand(jac, &rows[1..], &sub_cols, source)?;
        let term = entry.mul(&cof)?;
        acc = if c_pos % 2 == 0 { acc.add(&term)? } else { acc.sub(&term)? };
    }
    Ok(acc)
}
