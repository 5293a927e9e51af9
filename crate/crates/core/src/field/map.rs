use std::sync::Arc;

use super::domain::ChartDomain;
use super::poly::Polynomial;
use super::scalar::{same_domain, Body, EvalFn, PartialFn, ScalarField};
use crate::error::{domain, Result};

/// A map between chart boxes, given by one component field per target
/// coordinate.
#[derive(Clone, Debug)]
pub struct ChartMap {
    source: Arc<ChartDomain>,
    target: Arc<ChartDomain>,
    components: Vec<ScalarField>,
}

impl ChartMap {
    pub fn new(
        source: Arc<ChartDomain>,
        target: Arc<ChartDomain>,
        components: Vec<ScalarField>,
    ) -> Result<Self> {
        if components.len() != target.dim() {
            return domain(format!(
                "map has {} components but the target is {}-dimensional",
                components.len(),
                target.dim()
            ));
        }
        for c in &components {
            if !same_domain(c.domain(), &source) {
                return domain("map component defined on a different source domain");
            }
        }
        Ok(ChartMap { source, target, components })
    }

    /// Map with polynomial components.
    pub fn polynomial(
        source: Arc<ChartDomain>,
        target: Arc<ChartDomain>,
        components: Vec<Polynomial>,
    ) -> Result<Self> {
        let comps = components
            .into_iter()
            .map(|p| ScalarField::polynomial(source.clone(), p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(source, target, comps)
    }

    pub fn identity(domain: Arc<ChartDomain>) -> Self {
        let comps = (1..=domain.dim())
            .map(|i| ScalarField::var(domain.clone(), i).expect("axis in range"))
            .collect();
        ChartMap { source: domain.clone(), target: domain, components: comps }
    }

    pub fn source(&self) -> &Arc<ChartDomain> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ChartDomain> {
        &self.target
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn is_polynomial(&self) -> bool {
        self.components.iter().all(ScalarField::is_polynomial)
    }

    /// Image of a source point; errors if the point or its image leaves the
    /// respective box.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.source.check_point(x)?;
        let y = self.apply_raw(x)?;
        self.check_image(&y)?;
        Ok(y)
    }

    pub(crate) fn apply_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval_raw(x)).collect()
    }

    fn check_image(&self, y: &[f64]) -> Result<()> {
        if self.target.contains(y) {
            Ok(())
        } else {
            domain(format!("map image {y:?} escapes target box {:?}", self.target.bounds()))
        }
    }

    /// Jacobian entries `J[k][i] = ∂F_k/∂x_i` (0-based storage).
    pub fn jacobian(&self) -> Result<Vec<Vec<ScalarField>>> {
        self.components
            .iter()
            .map(|c| (1..=self.source.dim()).map(|i| c.partial(i)).collect())
            .collect()
    }

    /// Composition `self ∘ inner`.
    pub fn after(&self, inner: &ChartMap) -> Result<ChartMap> {
        if inner.target.dim() != self.source.dim() {
            return domain("composition dimension mismatch");
        }
        let comps = self
            .components
            .iter()
            .map(|c| c.compose(inner))
            .collect::<Result<Vec<_>>>()?;
        ChartMap::new(inner.source.clone(), self.target.clone(), comps)
    }
}

impl ScalarField {
    /// Pullback of a scalar field along a map: `self ∘ map`.
    ///
    /// Polynomial fields composed with polynomial maps stay polynomial
    /// (substitution); everything else becomes a lazily composed numeric
    /// field that reports an escaping image as a domain error.
    pub fn compose(&self, map: &ChartMap) -> Result<ScalarField> {
        if self.dim() != map.target.dim() {
            return domain(format!(
                "cannot compose a field on a {}-dimensional domain with a map into dimension {}",
                self.dim(),
                map.target.dim()
            ));
        }
        if let Body::Polynomial(p) = self.body() {
            if let Some(c) = p.as_constant() {
                return Ok(ScalarField::constant(map.source.clone(), c));
            }
            if map.is_polynomial() {
                let comps: Vec<Polynomial> =
                    map.components.iter().map(|c| c.as_polynomial().unwrap().clone()).collect();
                if let Some(q) = p.substitute(&comps) {
                    return ScalarField::polynomial(map.source.clone(), q);
                }
            }
        }
        let (g, m) = (self.clone(), map.clone());
        let eval: EvalFn = Arc::new(move |x| {
            let y = m.apply_raw(x)?;
            m.check_image(&y)?;
            g.eval_raw(&y)
        });
        let (g, m) = (self.clone(), map.clone());
        let partials: PartialFn = Arc::new(move |i| {
            // chain rule: Σ_k (D_k g ∘ F) · D_i F_k
            let mut acc = ScalarField::zero(m.source.clone());
            for (k, fk) in m.components.iter().enumerate() {
                let dfk = fk.partial(i)?;
                if dfk.is_zero() {
                    continue;
                }
                let dg = g.partial(k + 1)?.compose(&m)?;
                acc = acc.add(&dg.mul(&dfk)?)?;
            }
            Ok(acc)
        });
        let class = map
            .components
            .iter()
            .map(ScalarField::smoothness)
            .fold(self.smoothness(), Ord::min);
        Ok(ScalarField::numeric(map.source.clone(), class, eval, partials))
    }
}
