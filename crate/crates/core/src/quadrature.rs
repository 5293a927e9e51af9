//! Tensor-product Gauss-Legendre quadrature on boxes with adaptive panel
//! subdivision.
//!
//! Each panel is integrated with two rules (orders `order` and
//! `order / 2`); their difference is the panel's error estimate and the
//! higher-order value is kept. The estimate tracks the coarse rule's error,
//! so it overshoots the error of the kept value. The worst panel is bisected
//! along one axis until the summed estimate drops below the tolerance or the
//! panel budget runs out. The axis is the one with the largest fourth
//! difference through the panel center (widest axis on ties), so a jump
//! across a hyperplane is refined in one direction only.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::ChartDomain;
use crate::form::MatrixForm;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Points per axis of the higher-order panel rule.
    pub order: usize,
    /// Absolute target for the summed error estimate (max over outputs).
    pub tolerance: f64,
    /// Maximum number of leaf panels.
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: 12, tolerance: 1e-9, max_panels: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub values: Vec<f64>,
    pub error: f64,
    pub panels: usize,
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

struct Panel {
    lo: Vec<f64>,
    hi: Vec<f64>,
    values: Vec<f64>,
    error: f64,
    axis: usize,
}

struct Ranked(f64, usize);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger error first; ties broken by lower panel id for determinism
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn apply_rule<F>(rule: &Rule, lo: &[f64], hi: &[f64], n_out: usize, f: &F, x: &mut [f64], buf: &mut [f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let dim = lo.len();
    let n = rule.nodes.len();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b + a)).collect();
    let jac: f64 = half.iter().product();
    let mut acc = vec![0.0; n_out];
    let mut idx = vec![0usize; dim];
    loop {
        let mut w = jac;
        for k in 0..dim {
            x[k] = mid[k] + half[k] * rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        f(x, buf)?;
        for (a, v) in acc.iter_mut().zip(buf.iter()) {
            *a += w * v;
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == dim {
                return Ok(acc);
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Integrates a vector-valued integrand `f(x, out)` with `n_out` outputs
/// over `region`.
pub fn integrate_vector<F>(region: &ChartDomain, n_out: usize, f: F, opts: &QuadratureOptions) -> Result<QuadratureResult>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    if opts.order < 4 {
        return domain("quadrature order must be at least 4");
    }
    let dim = region.dim();
    let (n1, w1) = gauss_legendre(opts.order);
    let (n2, w2) = gauss_legendre(opts.order / 2);
    let fine = Rule { nodes: n1, weights: w1 };
    let coarse = Rule { nodes: n2, weights: w2 };
    let mut x = vec![0.0; dim];
    let mut buf = vec![0.0; n_out];

    let mut evaluate = |lo: Vec<f64>, hi: Vec<f64>| -> Result<Panel> {
        let a = apply_rule(&fine, &lo, &hi, n_out, &f, &mut x, &mut buf)?;
        let b = apply_rule(&coarse, &lo, &hi, n_out, &f, &mut x, &mut buf)?;
        let error = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite integrand value".into()));
        }
        let axis = split_axis(&lo, &hi, n_out, &f, &mut x, &mut buf)?;
        Ok(Panel { lo, hi, values: a, error, axis })
    };

    let (lo, hi): (Vec<f64>, Vec<f64>) = region.bounds().iter().copied().unzip();
    let mut panels: Vec<Option<Panel>> = vec![Some(evaluate(lo, hi)?)];
    let mut heap = BinaryHeap::new();
    heap.push(Ranked(panels[0].as_ref().unwrap().error, 0));
    let mut total_err = panels[0].as_ref().unwrap().error;
    let mut leaves = 1usize;

    while total_err > opts.tolerance {
        if leaves + 1 > opts.max_panels {
            let values = sum_leaves(&panels, n_out);
            return Err(Error::Quadrature { estimate: values, bound: total_err });
        }
        let Some(Ranked(_, id)) = heap.pop() else { break };
        let parent = panels[id].take().unwrap();
        total_err -= parent.error;
        let k = parent.axis;
        let mid = 0.5 * (parent.lo[k] + parent.hi[k]);
        for upper in [false, true] {
            let (mut lo, mut hi) = (parent.lo.clone(), parent.hi.clone());
            if upper {
                lo[k] = mid;
            } else {
                hi[k] = mid;
            }
            let child = evaluate(lo, hi)?;
            total_err += child.error;
            heap.push(Ranked(child.error, panels.len()));
            panels.push(Some(child));
        }
        leaves += 1;
        // guard against drift from repeated subtraction
        total_err = total_err.max(0.0);
    }
    let total_err: f64 = panels.iter().flatten().map(|p| p.error).sum();
    Ok(QuadratureResult { values: sum_leaves(&panels, n_out), error: total_err, panels: leaves })
}

// Fourth-difference axis selection: along each axis compare second
// differences at two scales through the panel center.
fn split_axis<F>(lo: &[f64], hi: &[f64], n_out: usize, f: &F, x: &mut [f64], buf: &mut [f64]) -> Result<usize>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    const L2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
    const L3: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
    let dim = lo.len();
    if dim == 1 {
        return Ok(0);
    }
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    x.copy_from_slice(&mid);
    f(x, buf)?;
    let center = buf[..n_out].to_vec();
    let mut best = (0usize, -1.0f64, 0.0f64);
    let probe = |k: usize, t: f64, x: &mut [f64], buf: &mut [f64]| -> Result<Vec<f64>> {
        x.copy_from_slice(&mid);
        x[k] = mid[k] + t * 0.5 * (hi[k] - lo[k]);
        f(x, buf)?;
        Ok(buf[..n_out].to_vec())
    };
    for k in 0..dim {
        let (a, b) = (probe(k, L2, x, buf)?, probe(k, -L2, x, buf)?);
        let (c, e) = (probe(k, L3, x, buf)?, probe(k, -L3, x, buf)?);
        let ratio = (L2 / L3) * (L2 / L3);
        let diff = (0..n_out)
            .map(|o| {
                let inner = a[o] + b[o] - 2.0 * center[o];
                let outer = c[o] + e[o] - 2.0 * center[o];
                (inner - ratio * outer).abs()
            })
            .fold(0.0, f64::max);
        let width = hi[k] - lo[k];
        if diff > best.1 || (diff == best.1 && width > best.2) {
            best = (k, diff, width);
        }
    }
    Ok(best.0)
}

fn sum_leaves(panels: &[Option<Panel>], n_out: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_out];
    for p in panels.iter().flatten() {
        for (a, b) in v.iter_mut().zip(&p.values) {
            *a += b;
        }
    }
    v
}

/// Integrates `f` over the ball `B_r(center)` in hyperspherical
/// coordinates `x = c + r s ω(φ₁, …, φ_{M−1})`, `s ∈ [0, 1]`, so a radial
/// profile only needs refinement along `s`. `shells` are radial break points
/// in `(0, 1)`; each shell gets an equal share of the tolerance and panel
/// budget. In one dimension the ball is the interval `[c − r, c + r]`.
pub fn integrate_ball<F>(center: &[f64], radius: f64, shells: &[f64], n_out: usize, f: F, opts: &QuadratureOptions) -> Result<QuadratureResult>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let dim = center.len();
    if dim == 0 || !(radius > 0.0) {
        return domain("ball needs a positive radius and dimension");
    }
    let mut breaks: Vec<f64> = shells.iter().copied().filter(|s| *s > 0.0 && *s < 1.0).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut cuts = vec![0.0];
    cuts.extend(&breaks);
    cuts.push(1.0);
    let segments: Vec<(f64, f64)> = if dim == 1 {
        let mut v: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
        v.extend(cuts.windows(2).map(|w| (-w[1], -w[0])));
        v
    } else {
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let share = QuadratureOptions {
        order: opts.order,
        tolerance: opts.tolerance / segments.len() as f64,
        max_panels: (opts.max_panels / segments.len()).max(1),
    };
    let polar = |u: &[f64], x: &mut [f64]| -> f64 {
        // u = (s, φ₁, …, φ_{M−1}); returns the volume element
        if dim == 1 {
            x[0] = center[0] + radius * u[0];
            return radius;
        }
        let s = u[0];
        let mut jac = radius.powi(dim as i32) * s.powi(dim as i32 - 1);
        let mut prod = 1.0;
        for k in 0..dim - 1 {
            let (sn, cs) = u[k + 1].sin_cos();
            x[k] = center[k] + radius * s * prod * cs;
            jac *= sn.powi((dim - 2 - k) as i32);
            prod *= sn;
        }
        x[dim - 1] = center[dim - 1] + radius * s * prod;
        jac
    };
    let mut values = vec![0.0; n_out];
    let (mut error, mut panels, mut exhausted) = (0.0, 0, false);
    for (a, b) in segments {
        let mut bounds = vec![(a, b)];
        if dim > 1 {
            bounds.extend(std::iter::repeat((0.0, std::f64::consts::PI)).take(dim - 2));
            bounds.push((0.0, 2.0 * std::f64::consts::PI));
        }
        let region = ChartDomain::new(bounds)?;
        let res = integrate_vector(
            &region,
            n_out,
            |u, out| {
                let mut x = [0.0; 16];
                let x = x.get_mut(..dim).ok_or_else(|| Error::Domain(format!("ball quadrature supports dimension up to 16, got {dim}")))?;
                let jac = polar(u, x);
                f(x, out)?;
                out.iter_mut().for_each(|v| *v *= jac);
                Ok(())
            },
            &share,
        );
        let (v, e, p) = match res {
            Ok(r) => (r.values, r.error, r.panels),
            Err(Error::Quadrature { estimate, bound }) => {
                exhausted = true;
                (estimate, bound, share.max_panels)
            }
            Err(e) => return Err(e),
        };
        values.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        error += e;
        panels += p;
    }
    if exhausted {
        return Err(Error::Quadrature { estimate: values, bound: error });
    }
    Ok(QuadratureResult { values, error, panels })
}

/// Entrywise integral of a top-degree matrix form over a sub-box of its
/// domain, against `dx_1 ∧ … ∧ dx_M`.
pub fn integrate_box(form: &MatrixForm, region: &ChartDomain, opts: &QuadratureOptions) -> Result<(DMatrix<f64>, QuadratureResult)> {
    if form.degree() != form.dim() {
        return domain(format!(
            "only top-degree forms integrate; got degree {} on a {}-dimensional domain",
            form.degree(),
            form.dim()
        ));
    }
    if !form.domain().contains_box(region) {
        return domain(format!("integration box {:?} not inside the form's domain", region.bounds()));
    }
    let n = form.size();
    let res = integrate_vector(region, n * n, |x, out| form.top_coefficients_raw(x, out), opts)?;
    let m = DMatrix::from_row_slice(n, n, &res.values);
    Ok((m, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::MultiIndex;
    use crate::field::{Coeff, Polynomial, ScalarField};
    use std::sync::Arc;

    #[test]
    fn rules_are_exact_for_low_degree_monomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}: {q} vs {exact}");
            }
        }
    }

    fn unit_square() -> Arc<ChartDomain> {
        Arc::new(ChartDomain::cube(2, 0.0, 1.0).unwrap())
    }

    #[test]
    fn box_integral_examples() {
        let d = unit_square();
        let top = MultiIndex::top(2);
        let opts = QuadratureOptions::default();
        let one = MatrixForm::monomial(ScalarField::constant(d.clone(), 1), top.clone()).unwrap();
        assert!((integrate_box(&one, &d, &opts).unwrap().0[(0, 0)] - 1.0).abs() < 1e-14);
        let x1 = MatrixForm::monomial(ScalarField::var(d.clone(), 1).unwrap(), top.clone()).unwrap();
        assert!((integrate_box(&x1, &d, &opts).unwrap().0[(0, 0)] - 0.5).abs() < 1e-14);

        let mut m = MatrixForm::zero(2, 2, d.clone()).unwrap();
        m.add_term(0, 0, top.clone(), ScalarField::constant(d.clone(), 1)).unwrap();
        m.add_term(1, 1, top.clone(), ScalarField::var(d.clone(), 1).unwrap()).unwrap();
        let (v, _) = integrate_box(&m, &d, &opts).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        assert!((v - expect).abs().max() < 1e-14);
    }

    #[test]
    fn polynomial_integrands_need_one_panel() {
        // degree 7 is exact for both the 8- and 4-point rules
        let d = Arc::new(ChartDomain::new(vec![(-1.0, 2.0), (0.5, 1.5)]).unwrap());
        let p = Polynomial::monomial(2, vec![7, 3], Coeff::int(1))
            .add(&Polynomial::monomial(2, vec![5, 0], Coeff::ratio(1, 7)));
        let f = MatrixForm::monomial(ScalarField::polynomial(d.clone(), p).unwrap(), MultiIndex::top(2)).unwrap();
        let (v, res) = integrate_box(&f, &d, &QuadratureOptions::default()).unwrap();
        // ∫ x^7 y^3 + x^5/7 over the box
        let ix7 = (2f64.powi(8) - 1.0) / 8.0;
        let iy3 = (1.5f64.powi(4) - 0.5f64.powi(4)) / 4.0;
        let ix5 = (2f64.powi(6) - 1.0) / 6.0 / 7.0;
        let exact = ix7 * iy3 + ix5;
        assert!((v[(0, 0)] - exact).abs() < 1e-12 * exact.abs(), "{} vs {exact}", v[(0, 0)]);
        assert_eq!(res.panels, 1);
    }

    #[test]
    fn adaptive_refinement_handles_a_kink() {
        let d = Arc::new(ChartDomain::cube(2, -1.0, 1.0).unwrap());
        let res = integrate_vector(&d, 1, |x, o| {
            o[0] = (x[0] - 0.3).abs() * x[1] * x[1];
            Ok(())
        }, &QuadratureOptions::default())
        .unwrap();
        // ∫|x-0.3| dx over [-1,1] = (1.3² + 0.7²)/2, ∫y² = 2/3
        let exact = (1.69 + 0.49) / 2.0 * (2.0 / 3.0);
        assert!((res.values[0] - exact).abs() < 1e-9, "{} vs {exact} ({} panels, est {})", res.values[0], res.panels, res.error);
        assert!(res.panels > 1);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let d = ChartDomain::cube(1, 0.0, 1.0).unwrap();
        let opts = QuadratureOptions { order: 4, tolerance: 1e-14, max_panels: 4 };
        match integrate_vector(&d, 1, |x, o| {
            o[0] = x[0].sqrt();
            Ok(())
        }, &opts)
        {
            Err(Error::Quadrature { estimate, bound }) => {
                assert!((estimate[0] - 2.0 / 3.0).abs() < 1e-3);
                assert!(bound > 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_top_forms_and_outside_boxes() {
        let d = unit_square();
        let w = MatrixForm::monomial(ScalarField::constant(d.clone(), 1), MultiIndex::single(2, 1).unwrap()).unwrap();
        assert!(integrate_box(&w, &d, &QuadratureOptions::default()).is_err());
        let top = MatrixForm::monomial(ScalarField::constant(d.clone(), 1), MultiIndex::top(2)).unwrap();
        let big = ChartDomain::cube(2, 0.0, 2.0).unwrap();
        assert!(integrate_box(&top, &big, &QuadratureOptions::default()).is_err());
    }

    #[test]
    fn ball_volumes_and_moments() {
        use std::f64::consts::PI;
        let opts = QuadratureOptions::default();
        let vols = [2.0, PI, 4.0 * PI / 3.0, PI * PI / 2.0];
        for (k, v) in vols.iter().enumerate() {
            let dim = k + 1;
            let c = vec![0.3; dim];
            let r = integrate_ball(&c, 0.5, &[0.5], 2, |x, o| {
                o[0] = 1.0;
                o[1] = x[0];
                Ok(())
            }, &opts)
            .unwrap();
            let vol = v * 0.5f64.powi(dim as i32);
            assert!((r.values[0] - vol).abs() < 1e-12, "dim {dim}");
            assert!((r.values[1] - 0.3 * vol).abs() < 1e-12, "dim {dim}");
        }
        // ∫ x₁² over the unit 3-ball is 4π/15
        let r = integrate_ball(&[0.0; 3], 1.0, &[], 1, |x, o| {
            o[0] = x[0] * x[0];
            Ok(())
        }, &opts)
        .unwrap();
        assert!((r.values[0] - 4.0 * PI / 15.0).abs() < 1e-12);
    }
}
