//! Maurer-Cartan forms of matrix group charts, the Maurer-Cartan residual
//! `dφ + φ∧φ`, and development of a matrix 1-form along paths.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exterior::MultiIndex;
use crate::field::{ChartDomain, ChartMap, Coeff, Polynomial, ScalarField, Smoothness};
use crate::form::MatrixForm;

/// A chart of a matrix group: parameters `u` in a box mapped to invertible
/// L×L matrices `z(u)`.
#[derive(Clone, Debug)]
pub struct LieGroupChart {
    name: String,
    size: usize,
    chart: Arc<ChartDomain>,
    // row-major
    entries: Vec<ScalarField>,
    inverse: Option<Vec<ScalarField>>,
}

pub const CATALOG: [&str; 4] = ["gl1+", "affine2", "so2", "diag2+"];

fn poly(dim: usize, terms: &[(Vec<i32>, i64)]) -> Polynomial {
    terms
        .iter()
        .fold(Polynomial::zero(dim), |acc, (e, c)| acc.add(&Polynomial::monomial(dim, e.clone(), Coeff::int(*c))))
}

fn trig(chart: &Arc<ChartDomain>, sin: bool, sign: f64) -> ScalarField {
    // derivatives cycle sin → cos → −sin → −cos
    fn make(chart: Arc<ChartDomain>, phase: u8) -> ScalarField {
        let c2 = chart.clone();
        ScalarField::from_fn_with_partials(
            chart,
            Smoothness::CInf,
            move |x| match phase % 4 {
                0 => x[0].sin(),
                1 => x[0].cos(),
                2 => -x[0].sin(),
                _ => -x[0].cos(),
            },
            move |_| Ok(make(c2.clone(), (phase + 1) % 4)),
        )
    }
    let phase = match (sin, sign > 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (true, false) => 2,
        (false, false) => 3,
    };
    make(chart.clone(), phase)
}

impl LieGroupChart {
    /// Chart from entry fields; `inverse` (entrywise fields of `z(u)^{-1}`)
    /// lets the Maurer-Cartan form be built symbolically.
    pub fn new(
        name: impl Into<String>,
        size: usize,
        chart: Arc<ChartDomain>,
        entries: Vec<ScalarField>,
        inverse: Option<Vec<ScalarField>>,
    ) -> Result<Self> {
        if size == 0 || entries.len() != size * size {
            return domain(format!("a {size}×{size} chart needs {} entry fields", size * size));
        }
        if let Some(inv) = &inverse {
            if inv.len() != size * size {
                return domain("inverse has the wrong number of entries");
            }
        }
        Ok(LieGroupChart { name: name.into(), size, chart, entries, inverse })
    }

    /// Catalog charts: `gl1+` (t ↦ [t], t > 0), `affine2`
    /// ((a, b) ↦ [[a, b], [0, 1]], a > 0), `so2` (θ ↦ rotation by θ) and
    /// `diag2+` ((a, b) ↦ diag(a, b), a, b > 0).
    pub fn catalog(name: &str) -> Result<Self> {
        match name {
            "gl1+" => {
                let d = Arc::new(ChartDomain::new(vec![(0.1, 10.0)])?);
                let z = ScalarField::var(d.clone(), 1)?;
                let inv = ScalarField::polynomial(d.clone(), poly(1, &[(vec![-1], 1)]))?;
                Self::new(name, 1, d, vec![z], Some(vec![inv]))
            }
            "affine2" => {
                let d = Arc::new(ChartDomain::new(vec![(0.1, 10.0), (-10.0, 10.0)])?);
                let f = |terms: &[(Vec<i32>, i64)]| ScalarField::polynomial(d.clone(), poly(2, terms));
                let entries = vec![f(&[(vec![1, 0], 1)])?, f(&[(vec![0, 1], 1)])?, f(&[])?, f(&[(vec![0, 0], 1)])?];
                let inverse = vec![f(&[(vec![-1, 0], 1)])?, f(&[(vec![-1, 1], -1)])?, f(&[])?, f(&[(vec![0, 0], 1)])?];
                Self::new(name, 2, d, entries, Some(inverse))
            }
            "so2" => {
                let d = Arc::new(ChartDomain::new(vec![(-PI, PI)])?);
                let (c, s, ms) = (trig(&d, false, 1.0), trig(&d, true, 1.0), trig(&d, true, -1.0));
                let entries = vec![c.clone(), ms.clone(), s.clone(), c.clone()];
                let inverse = vec![c.clone(), s, ms, c];
                Self::new(name, 2, d, entries, Some(inverse))
            }
            "diag2+" => {
                let d = Arc::new(ChartDomain::new(vec![(0.1, 10.0), (0.1, 10.0)])?);
                let f = |terms: &[(Vec<i32>, i64)]| ScalarField::polynomial(d.clone(), poly(2, terms));
                let entries = vec![f(&[(vec![1, 0], 1)])?, f(&[])?, f(&[])?, f(&[(vec![0, 1], 1)])?];
                let inverse = vec![f(&[(vec![-1, 0], 1)])?, f(&[])?, f(&[])?, f(&[(vec![0, -1], 1)])?];
                Self::new(name, 2, d, entries, Some(inverse))
            }
            other => domain(format!("unknown chart `{other}`; catalog: {}", CATALOG.join(", "))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn chart(&self) -> &Arc<ChartDomain> {
        &self.chart
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// `z(u)`.
    pub fn embed(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.check_point(u)?;
        let v = self.entries.iter().map(|f| f.eval_raw(u)).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(self.size, self.size, &v))
    }

    /// `∂z/∂u_i` from the entry fields' partials (1-based axis).
    pub fn partial_matrix(&self, u: &[f64], i: usize) -> Result<DMatrix<f64>> {
        self.chart.check_point(u)?;
        let v = self
            .entries
            .iter()
            .map(|f| f.partial(i)?.eval_raw(u))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(self.size, self.size, &v))
    }

    /// Smallest `|det z|` over a grid with `per_axis` points per axis.
    pub fn min_abs_det(&self, per_axis: usize) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for u in grid(&self.chart, per_axis) {
            worst = worst.min(self.embed(&u)?.determinant().abs());
        }
        Ok(worst)
    }

    /// Largest gap between the partial matrices and central differences
    /// of `z` at the given points.
    pub fn partials_fd_gap(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for u in points {
            for i in 1..=self.chart.dim() {
                let (lo, hi) = self.chart.bounds()[i - 1];
                let h = 1e-6 * (hi - lo);
                let (mut up, mut dn) = (u.clone(), u.clone());
                up[i - 1] = (u[i - 1] + h).min(hi);
                dn[i - 1] = (u[i - 1] - h).max(lo);
                let fd = (self.embed(&up)? - self.embed(&dn)?) / (up[i - 1] - dn[i - 1]);
                worst = worst.max((fd - self.partial_matrix(u, i)?).abs().max());
            }
        }
        Ok(worst)
    }
}

fn grid(d: &ChartDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let dim = d.dim();
    let n = per_axis.max(2);
    (0..n.pow(dim as u32))
        .map(|mut k| {
            d.bounds()
                .iter()
                .map(|(lo, hi)| {
                    let i = k % n;
                    k /= n;
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// `Γ = z⁻¹ dz`, with `du_k` coefficient matrix `z(u)⁻¹ ∂z/∂u_k`.
///
/// Symbolic when the chart carries its inverse; otherwise each coefficient
/// is a numeric field that solves with `z(u)` and fails at singular points.
pub fn maurer_cartan(g: &LieGroupChart) -> Result<MatrixForm> {
    let n = g.size;
    let dim = g.chart.dim();
    let mut out = MatrixForm::zero(n, 1, g.chart.clone())?;
    for k in 1..=dim {
        let axis = MultiIndex::single(dim, k)?;
        let dz = g.entries.iter().map(|f| f.partial(k)).collect::<Result<Vec<_>>>()?;
        match &g.inverse {
            Some(inv) => {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = ScalarField::zero(g.chart.clone());
                        for q in 0..n {
                            acc = acc.add(&inv[i * n + q].mul(&dz[q * n + j])?)?;
                        }
                        out.add_term(i, j, axis.clone(), acc)?;
                    }
                }
            }
            None => {
                for i in 0..n {
                    for j in 0..n {
                        let g2 = g.clone();
                        let dz2 = dz.clone();
                        let f = ScalarField::from_fallible_fn(g.chart.clone(), Smoothness::CInf, move |u| {
                            let v = g2.entries.iter().map(|f| f.eval_raw(u)).collect::<Result<Vec<_>>>()?;
                            let z = DMatrix::from_row_slice(n, n, &v);
                            let dv = dz2.iter().map(|f| f.eval_raw(u)).collect::<Result<Vec<_>>>()?;
                            let dzm = DMatrix::from_row_slice(n, n, &dv);
                            let lu = z.lu();
                            let sol = lu
                                .solve(&dzm)
                                .ok_or_else(|| Error::Numerical(format!("singular chart matrix at {u:?}")))?;
                            Ok(sol[(i, j)])
                        });
                        out.add_term(i, j, axis.clone(), f)?;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `dφ + φ ∧ φ`; zero exactly when φ satisfies the Maurer-Cartan equation.
pub fn mc_residual(phi: &MatrixForm) -> Result<MatrixForm> {
    if phi.degree() != 1 {
        return domain(format!("the Maurer-Cartan residual takes a 1-form, got degree {}", phi.degree()));
    }
    phi.d()?.add(&phi.wedge(phi)?)
}

/// Step control for [`cartan_integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevelopOptions {
    /// Step length along the path.
    pub step: f64,
    /// Allowed entrywise gap between a solve and the one with half the step.
    pub tolerance: f64,
    /// Maximum number of step halvings.
    pub max_halvings: u32,
}

impl Default for DevelopOptions {
    fn default() -> Self {
        DevelopOptions { step: 1e-3, tolerance: 1e-10, max_halvings: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Development {
    /// `f` at the end of the path.
    pub end: DMatrix<f64>,
    /// `f` at each polyline vertex (including the start).
    pub vertices: Vec<DMatrix<f64>>,
    /// Step actually used after halving.
    pub step: f64,
    /// Gap between the last two halving levels.
    pub halving_gap: f64,
}

fn check_path(phi: &MatrixForm, path: &[Vec<f64>]) -> Result<()> {
    if phi.degree() != 1 {
        return domain("development needs a matrix 1-form");
    }
    if path.len() < 2 {
        return domain("a path needs at least two vertices");
    }
    for p in path {
        phi.domain().check_point(p)?;
    }
    Ok(())
}

fn rk4_path(phi: &MatrixForm, path: &[Vec<f64>], f0: &DMatrix<f64>, step: f64) -> Result<Vec<DMatrix<f64>>> {
    let mut f = f0.clone();
    let mut out = vec![f.clone()];
    let dim = phi.dim();
    let mut x = vec![0.0; dim];
    for seg in path.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let v: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len == 0.0 {
            out.push(f.clone());
            continue;
        }
        let steps = (len / step).ceil().max(1.0) as usize;
        let dt = 1.0 / steps as f64;
        let vs = [v.clone()];
        let mut a_at = |t: f64| -> Result<DMatrix<f64>> {
            for k in 0..dim {
                x[k] = a[k] + t * v[k];
            }
            phi.evaluate_raw(&x, &vs)
        };
        for s in 0..steps {
            let t = s as f64 * dt;
            let am = a_at(t)?;
            let ah = a_at(t + 0.5 * dt)?;
            let ae = a_at(t + dt)?;
            let k1 = &f * &am;
            let k2 = (&f + &k1 * (0.5 * dt)) * &ah;
            let k3 = (&f + &k2 * (0.5 * dt)) * &ah;
            let k4 = (&f + &k3 * dt) * &ae;
            f += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("development blew up".into()));
        }
        out.push(f.clone());
    }
    Ok(out)
}

/// Solves `f' = f · φ_{c(t)}(c'(t))` along a polyline with classical RK4,
/// halving the step until two successive solves agree.
pub fn cartan_integrate(phi: &MatrixForm, path: &[Vec<f64>], f0: Option<&DMatrix<f64>>, opts: &DevelopOptions) -> Result<Development> {
    check_path(phi, path)?;
    if !(opts.step > 0.0) {
        return domain("step must be positive");
    }
    let id = DMatrix::identity(phi.size(), phi.size());
    let f0 = f0.unwrap_or(&id);
    if f0.nrows() != phi.size() || f0.ncols() != phi.size() {
        return domain("initial value has the wrong shape");
    }
    let mut step = opts.step;
    let mut coarse = rk4_path(phi, path, f0, step)?;
    for _ in 0..=opts.max_halvings {
        let fine = rk4_path(phi, path, f0, 0.5 * step)?;
        let gap = fine
            .iter()
            .zip(&coarse)
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0, f64::max);
        if gap <= opts.tolerance {
            return Ok(Development { end: fine.last().unwrap().clone(), vertices: fine, step: 0.5 * step, halving_gap: gap });
        }
        step *= 0.5;
        coarse = fine;
    }
    Err(Error::Numerical(format!(
        "development did not settle to {} after {} halvings (step {step})",
        opts.tolerance, opts.max_halvings
    )))
}

/// `F(x)`: development from `base` to `x` along the straight segment.
pub fn develop_ray(phi: &MatrixForm, base: &[f64], x: &[f64], opts: &DevelopOptions) -> Result<DMatrix<f64>> {
    if base == x {
        return Ok(DMatrix::identity(phi.size(), phi.size()));
    }
    Ok(cartan_integrate(phi, &[base.to_vec(), x.to_vec()], None, opts)?.end)
}

/// Largest entrywise gap between `F⁻¹ ∂_i F` (central differences of the
/// ray development `F` from `base`) and the coefficient of `du_i` in φ, over
/// the given points and all axes.
pub fn pullback_gap(phi: &MatrixForm, base: &[f64], points: &[Vec<f64>], fd_step: f64, opts: &DevelopOptions) -> Result<f64> {
    let dim = phi.dim();
    let gaps: Vec<f64> = points
        .par_iter()
        .map(|p| -> Result<f64> {
            let f = develop_ray(phi, base, p, opts)?;
            let inv = f.clone().try_inverse().ok_or_else(|| Error::Numerical(format!("F singular at {p:?}")))?;
            let mut worst: f64 = 0.0;
            for i in 0..dim {
                let (mut up, mut dn) = (p.clone(), p.clone());
                up[i] += fd_step;
                dn[i] -= fd_step;
                let df = (develop_ray(phi, base, &up, opts)? - develop_ray(phi, base, &dn, opts)?) / (2.0 * fd_step);
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                let want = phi.evaluate(p, &[e])?;
                worst = worst.max((&inv * df - want).abs().max());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// `‖f_loop − I‖` (entrywise max) after developing around a closed polyline.
pub fn holonomy(phi: &MatrixForm, closed_path: &[Vec<f64>], opts: &DevelopOptions) -> Result<f64> {
    if closed_path.first() != closed_path.last() {
        return domain("holonomy needs a closed path");
    }
    let dev = cartan_integrate(phi, closed_path, None, opts)?;
    Ok((dev.end - DMatrix::identity(phi.size(), phi.size())).abs().max())
}

/// Boundary of the box `[lo, hi]` in the first two coordinates, with the
/// remaining coordinates fixed at `rest`, traversed counterclockwise.
pub fn rectangle_loop(lo: [f64; 2], hi: [f64; 2], rest: &[f64]) -> Vec<Vec<f64>> {
    let mk = |x: f64, y: f64| {
        let mut v = vec![x, y];
        v.extend_from_slice(rest);
        v
    };
    vec![mk(lo[0], lo[1]), mk(hi[0], lo[1]), mk(hi[0], hi[1]), mk(lo[0], hi[1]), mk(lo[0], lo[1])]
}

/// Integrates from `I` and from `a`, and returns the largest deviation of
/// `f_a f_I⁻¹` from `a` at the path vertices.
pub fn uniqueness_gap(phi: &MatrixForm, path: &[Vec<f64>], a: &DMatrix<f64>, opts: &DevelopOptions) -> Result<f64> {
    let d1 = cartan_integrate(phi, path, None, opts)?;
    let d2 = cartan_integrate(phi, path, Some(a), opts)?;
    let mut worst: f64 = 0.0;
    for (f1, f2) in d1.vertices.iter().zip(&d2.vertices) {
        let inv = f1.clone().try_inverse().ok_or_else(|| Error::Numerical("development became singular".into()))?;
        worst = worst.max((f2 * inv - a).abs().max());
    }
    Ok(worst)
}

/// Agreement scan result: residual `‖(f^*Γ − φ)_P‖` (entrywise max over
/// all `du` components) at each grid point, and the matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementScan {
    pub points: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub threshold: f64,
    /// Indices into `points` with residual ≤ threshold.
    pub matches: Vec<usize>,
}

/// Pulls the group's Maurer-Cartan form back along `f` and thresholds its
/// distance to φ on a grid.
pub fn agreement_scan(f: &ChartMap, group: &LieGroupChart, phi: &MatrixForm, grid: &[Vec<f64>], eps: f64) -> Result<AgreementScan> {
    let pulled = maurer_cartan(group)?.pullback(f)?;
    let diff = pulled.sub(phi)?;
    let residuals: Vec<f64> = grid.par_iter().map(|p| diff.max_abs_at(p)).collect::<Result<_>>()?;
    let matches = residuals.iter().enumerate().filter(|(_, r)| **r <= eps).map(|(k, _)| k).collect();
    Ok(AgreementScan { points: grid.to_vec(), residuals, threshold: eps, matches })
}

/// Regular grid with `per_axis` points per axis on a box (corners
/// included).
pub fn box_grid(d: &ChartDomain, per_axis: usize) -> Vec<Vec<f64>> {
    grid(d, per_axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::literal::parse_form;

    #[test]
    fn gl1_form_is_dt_over_t() {
        let g = LieGroupChart::catalog("gl1+").unwrap();
        let gamma = maurer_cartan(&g).unwrap();
        let v = gamma.evaluate(&[2.0], &[vec![1.0]]).unwrap();
        assert_eq!(v[(0, 0)], 0.5);
        let expect = parse_form("x1^-1 d(1)", g.chart().clone(), Some(1)).unwrap();
        assert_eq!(gamma, expect);
    }

    #[test]
    fn affine_form_matches_hand_computation() {
        let g = LieGroupChart::catalog("affine2").unwrap();
        let gamma = maurer_cartan(&g).unwrap();
        let expect = parse_form("[[x1^-1 d(1), x1^-1 d(2)],[0, 0]]", g.chart().clone(), Some(1)).unwrap();
        assert_eq!(gamma, expect);
        assert!(mc_residual(&gamma).unwrap().is_exactly_zero());
    }

    #[test]
    fn so2_form_is_the_rotation_generator() {
        let g = LieGroupChart::catalog("so2").unwrap();
        let gamma = maurer_cartan(&g).unwrap();
        for th in [-3.0, -1.0, 0.0, 0.4, 2.5] {
            let v = gamma.evaluate(&[th], &[vec![1.0]]).unwrap();
            let want = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
            assert!((v - want).abs().max() < 1e-15);
        }
        assert!(mc_residual(&gamma).unwrap().is_exactly_zero());
    }

    #[test]
    fn chart_sanity() {
        for name in CATALOG {
            let g = LieGroupChart::catalog(name).unwrap();
            assert!(g.min_abs_det(7).unwrap() > 0.0);
            let pts = grid(&ChartDomain::new(g.chart().bounds().iter().map(|(a, b)| (a + 0.1, b - 0.1)).collect()).unwrap(), 3);
            assert!(g.partials_fd_gap(&pts).unwrap() < 1e-6, "{name}");
        }
    }

    #[test]
    fn numeric_chart_residual_is_small() {
        // affine group without a supplied inverse
        let d = Arc::new(ChartDomain::new(vec![(0.5, 2.0), (-1.0, 1.0)]).unwrap());
        let e = |f: fn(&[f64]) -> f64| ScalarField::from_fn(d.clone(), Smoothness::CInf, f);
        let g = LieGroupChart::new(
            "affine-numeric",
            2,
            d.clone(),
            vec![e(|x| x[0]), e(|x| x[1]), e(|_| 0.0), e(|_| 1.0)],
            None,
        )
        .unwrap();
        let res = mc_residual(&maurer_cartan(&g).unwrap()).unwrap();
        for p in grid(&ChartDomain::new(vec![(0.6, 1.9), (-0.9, 0.9)]).unwrap(), 4) {
            assert!(res.max_abs_at(&p).unwrap() < 1e-6);
        }
    }

    #[test]
    fn singular_numeric_chart_reports_location() {
        let d = Arc::new(ChartDomain::new(vec![(-1.0, 1.0)]).unwrap());
        let g = LieGroupChart::new("t", 1, d.clone(), vec![ScalarField::var(d, 1).unwrap()], None).unwrap();
        let gamma = maurer_cartan(&g).unwrap();
        assert!(matches!(gamma.evaluate(&[0.0], &[vec![1.0]]), Err(Error::Numerical(_))));
        assert!((gamma.evaluate(&[0.5], &[vec![1.0]]).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn left_translations_preserve_gamma() {
        let g = LieGroupChart::catalog("affine2").unwrap();
        let d = g.chart().clone();
        // (a, b) ↦ (2a, 2b + 3): left multiplication by [[2, 3], [0, 1]]
        let t = ChartMap::polynomial(d.clone(), d.clone(), vec![poly(2, &[(vec![1, 0], 2)]), poly(2, &[(vec![0, 1], 2), (vec![0, 0], 3)])]).unwrap();
        let gamma = maurer_cartan(&g).unwrap();
        assert_eq!(gamma.pullback(&t).unwrap(), gamma);
        // a right translation does not preserve it: (a, b) ↦ (2a, b + 3a)
        let r = ChartMap::polynomial(d.clone(), d, vec![poly(2, &[(vec![1, 0], 2)]), poly(2, &[(vec![0, 1], 1), (vec![1, 0], 3)])]).unwrap();
        assert_ne!(gamma.pullback(&r).unwrap(), gamma);
    }

    #[test]
    fn scalar_development_is_exponential() {
        let d = Arc::new(ChartDomain::new(vec![(-1.0, 2.0)]).unwrap());
        let phi = parse_form("0.7 d(1)", d, Some(1)).unwrap();
        let dev = cartan_integrate(&phi, &[vec![0.0], vec![1.0]], None, &DevelopOptions::default()).unwrap();
        assert!((dev.end[(0, 0)] - 0.7f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_form_develops_to_identity() {
        let d = Arc::new(ChartDomain::cube(2, 0.0, 1.0).unwrap());
        let phi = MatrixForm::zero(3, 1, d).unwrap();
        let dev = cartan_integrate(&phi, &[vec![0.0, 0.0], vec![1.0, 0.5], vec![0.2, 0.9]], None, &DevelopOptions::default()).unwrap();
        assert_eq!(dev.end, DMatrix::identity(3, 3));
    }

    #[test]
    fn non_flat_form_has_holonomy_with_closed_form() {
        // B' = v_y + e^x y v_x around the unit square gives −∬ e^x = 1 − e
        let d = Arc::new(ChartDomain::cube(2, -0.5, 1.5).unwrap());
        let ex = ScalarField::from_fn_with_partials(d.clone(), Smoothness::CInf, |x| (-x[0]).exp(), {
            let d = d.clone();
            move |i| Ok(if i == 1 { ScalarField::from_fn(d.clone(), Smoothness::CInf, |x| -(-x[0]).exp()) } else { ScalarField::zero(d.clone()) })
        });
        let mut phi = MatrixForm::zero(2, 1, d.clone()).unwrap();
        phi.add_term(0, 0, MultiIndex::single(2, 1).unwrap(), ScalarField::constant(d.clone(), 1)).unwrap();
        phi.add_term(0, 1, MultiIndex::single(2, 2).unwrap(), ex).unwrap();
        phi.add_term(0, 1, MultiIndex::single(2, 1).unwrap(), ScalarField::var(d.clone(), 2).unwrap()).unwrap();
        let lp = rectangle_loop([0.0, 0.0], [1.0, 1.0], &[]);
        let dev = cartan_integrate(&phi, &lp, None, &DevelopOptions::default()).unwrap();
        assert!((dev.end[(0, 1)] - (1.0 - std::f64::consts::E)).abs() < 1e-9, "{}", dev.end);
        assert!((dev.end[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniqueness_ratio_is_constant() {
        let d = Arc::new(ChartDomain::cube(2, 0.0, 1.0).unwrap());
        let phi = parse_form("[[x2 d(1), d(2)],[x1 d(1), 0]]", d, Some(1)).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]);
        let gap = uniqueness_gap(&phi, &[vec![0.0, 0.0], vec![1.0, 0.3], vec![0.5, 1.0]], &a, &DevelopOptions::default()).unwrap();
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn agreement_scan_examples() {
        let g = LieGroupChart::catalog("affine2").unwrap();
        let src = Arc::new(ChartDomain::cube(2, -1.0, 1.0).unwrap());
        let s1 = src.clone();
        let ex = ScalarField::from_fn_with_partials(src.clone(), Smoothness::CInf, |x| x[0].exp(), move |i| {
            Ok(if i == 1 { ScalarField::from_fn(s1.clone(), Smoothness::CInf, |x| x[0].exp()) } else { ScalarField::zero(s1.clone()) })
        });
        let f = ChartMap::new(src.clone(), g.chart().clone(), vec![ex, ScalarField::var(src.clone(), 2).unwrap()]).unwrap();
        let pulled = maurer_cartan(&g).unwrap().pullback(&f).unwrap();
        let pts = box_grid(&src, 5);
        let same = agreement_scan(&f, &g, &pulled, &pts, 1e-12).unwrap();
        assert_eq!(same.matches.len(), pts.len());
        let offset = parse_form("[[d(1) + d(2), 0],[0, 0]]", src.clone(), Some(1)).unwrap();
        let none = agreement_scan(&f, &g, &offset, &pts, 1e-3).unwrap();
        assert!(none.matches.is_empty());
    }
}
