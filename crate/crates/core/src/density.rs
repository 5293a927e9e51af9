//! Density degree of a set at a point, from the ball deficit
//! `h(r) = vol(B_r(P) \ E)`.
//!
//! `P` is an m-density point of `E` when `h(r) = o(r^m)`. A finite
//! experiment cannot certify a little-o limit, so [`density_degree`] fits
//! the exponent of `h` on a dyadic radius schedule and [`classify`] turns
//! the fit into a verdict with a margin and an explicit inconclusive band.
//!
//! A point where `h(r) = Θ(r^M)` (a boundary point of a half-space, any
//! point of a hyperplane) fits slope `M` but is not an M-density point in
//! the strict sense; with a positive margin it is never reported as one.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;

use crate::error::{domain, Result};
use crate::field::ChartDomain;
use crate::form::MatrixForm;

/// Finite-perimeter threshold `m₀ = N + 1 + 1/(N − 1)` for `N ≥ 2`: at
/// points of a set of locally finite perimeter the density degree cannot
/// reach `m₀` unless the point is interior. Only spot-checked here, on a
/// half-space boundary point.
pub fn finite_perimeter_threshold(n: usize) -> f64 {
    assert!(n >= 2, "threshold defined for N ≥ 2");
    n as f64 + 1.0 + 1.0 / (n as f64 - 1.0)
}

/// Largest density degree reported; exact-zero deficits report this.
pub fn degree_cap(dim: usize) -> f64 {
    4.0 * (dim as f64 + 1.0)
}

/// Lebesgue measure of an M-ball of radius r.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0 + 1.0) * r.powi(dim as i32)
}

/// Volume of the part of `B_r` beyond a hyperplane at signed distance `a`
/// from the center.
pub fn cap_volume(dim: usize, r: f64, a: f64) -> f64 {
    let full = ball_volume(dim, r);
    if a >= r {
        return 0.0;
    }
    if a <= -r {
        return full;
    }
    let x = 1.0 - (a / r).powi(2);
    let half_cap = 0.5 * full * beta_reg((dim as f64 + 1.0) / 2.0, 0.5, x.clamp(0.0, 1.0));
    if a >= 0.0 {
        half_cap
    } else {
        full - half_cap
    }
}

/// Volume of `B_r(p) ∩ B_R(c)`.
pub fn ball_intersection_volume(dim: usize, r: f64, big: f64, dist: f64) -> f64 {
    if dist >= r + big {
        return 0.0;
    }
    if dist <= (big - r).abs() {
        return ball_volume(dim, r.min(big));
    }
    let a1 = (dist * dist + r * r - big * big) / (2.0 * dist);
    cap_volume(dim, r, a1) + cap_volume(dim, big, dist - a1)
}

// Solves a² + a^{2k} = r² for a ∈ (0, r).
fn cusp_crossing(k: u32, r: f64) -> f64 {
    let mut a = r;
    for _ in 0..100 {
        let f = a * a + a.powi(2 * k as i32) - r * r;
        let df = 2.0 * a + 2.0 * k as f64 * a.powi(2 * k as i32 - 1);
        let next = (a - f / df).clamp(0.0, r);
        if (next - a).abs() <= 1e-16 * r {
            return next;
        }
        a = next;
    }
    a
}

/// Area of the cusp `{0 < x₁, |x₂| < x₁^k}` inside `B_r(0)`.
pub fn cusp_area(k: u32, r: f64) -> f64 {
    let a = cusp_crossing(k, r);
    let inner = 2.0 * a.powi(k as i32 + 1) / (k as f64 + 1.0);
    // segment r² acos(a/r) − a √(r² − a²) with r² = a² + a^{2k}, so the
    // angle is atan(u), u = a^{k−1}; written to avoid cancellation
    let u = a.powi(k as i32 - 1);
    let segment = a * a * atan_minus_id(u) + a.powi(2 * k as i32) * u.atan();
    inner + segment
}

/// `atan(u) − u`, by its series for small `u`.
fn atan_minus_id(u: f64) -> f64 {
    if u.abs() > 0.1 {
        return u.atan() - u;
    }
    let u2 = u * u;
    let mut term = -u * u2 / 3.0;
    let mut sum = 0.0;
    let mut pow = u * u2;
    for n in 1..20 {
        sum += term;
        pow *= -u2;
        term = -pow / (2.0 * n as f64 + 3.0);
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Named example sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    Full { dim: usize },
    Empty { dim: usize },
    /// `{x : n·x ≤ offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{x : n·x = offset}`.
    Hyperplane { normal: Vec<f64>, offset: f64 },
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Complement in the plane of the cusp `{0 < x₁, |x₂| < x₁^k}`.
    Cusp { k: u32 },
    ComplementOf { set: Box<SetSpec> },
    Intersection { a: Box<SetSpec>, b: Box<SetSpec> },
}

impl SetSpec {
    /// Parses `full`, `empty`, `half-space`, `hyperplane`, `ball`,
    /// `cusp(k)`, `complement-of(S)` and `intersection(S1,S2)` with default
    /// parameters: `{x₁ ≤ 0}`, `{x₁ = 0}`, the closed unit ball at the
    /// origin.
    pub fn parse(name: &str, dim: usize) -> Result<SetSpec> {
        let name = name.trim();
        let axis = || {
            let mut n = vec![0.0; dim];
            n[0] = 1.0;
            n
        };
        if let Some(inner) = strip_call(name, "cusp") {
            let k: u32 = inner.trim().parse().map_err(|_| crate::Error::Domain(format!("bad cusp order `{inner}`")))?;
            return Ok(SetSpec::Cusp { k });
        }
        if let Some(inner) = strip_call(name, "complement-of") {
            return Ok(SetSpec::ComplementOf { set: Box::new(SetSpec::parse(inner, dim)?) });
        }
        if let Some(inner) = strip_call(name, "intersection") {
            let (a, b) = split_top_comma(inner).ok_or_else(|| crate::Error::Domain(format!("intersection needs two sets: `{inner}`")))?;
            return Ok(SetSpec::Intersection {
                a: Box::new(SetSpec::parse(a, dim)?),
                b: Box::new(SetSpec::parse(b, dim)?),
            });
        }
        match name {
            "full" => Ok(SetSpec::Full { dim }),
            "empty" => Ok(SetSpec::Empty { dim }),
            "half-space" => Ok(SetSpec::HalfSpace { normal: axis(), offset: 0.0 }),
            "hyperplane" => Ok(SetSpec::Hyperplane { normal: axis(), offset: 0.0 }),
            "ball" => Ok(SetSpec::Ball { center: vec![0.0; dim], radius: 1.0 }),
            other => domain(format!("unknown set `{other}`")),
        }
    }
}

fn strip_call<'a>(s: &'a str, head: &str) -> Option<&'a str> {
    s.strip_prefix(head)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

fn split_top_comma(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some((&s[..i], &s[i + 1..])),
            _ => {}
        }
    }
    None
}

type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type ExactDeficit = Arc<dyn Fn(&[f64], f64) -> Option<f64> + Send + Sync>;

/// A measurable set given by a pure membership predicate, optionally with
/// a closed-form deficit.
#[derive(Clone)]
pub struct PointSet {
    dim: usize,
    label: String,
    ambient: Option<ChartDomain>,
    membership: Membership,
    exact: Option<ExactDeficit>,
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointSet")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl PointSet {
    pub fn new<F>(dim: usize, label: impl Into<String>, membership: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        PointSet { dim, label: label.into(), ambient: None, membership: Arc::new(membership), exact: None }
    }

    pub fn with_exact_deficit<F>(mut self, exact: F) -> Self
    where
        F: Fn(&[f64], f64) -> Option<f64> + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(exact));
        self
    }

    /// Restricts sampling to balls inside `ambient`.
    pub fn with_ambient(mut self, ambient: ChartDomain) -> Self {
        self.ambient = Some(ambient);
        self
    }

    /// Zero set `{x : max |coefficient(x)| ≤ eps}` of a form, inside the
    /// form's domain.
    pub fn zero_set(form: &MatrixForm, eps: f64) -> Self {
        let f = form.clone();
        PointSet::new(form.dim(), "zero-set", move |x| f.is_zero_at(x, eps).unwrap_or(false))
            .with_ambient(form.domain().as_ref().clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.membership)(x)
    }

    pub fn has_exact_deficit(&self) -> bool {
        self.exact.is_some()
    }

    /// Closed-form `vol(B_r(p) \ E)` when one is known at this point.
    pub fn exact_deficit(&self, p: &[f64], r: f64) -> Option<f64> {
        self.exact.as_ref().and_then(|e| e(p, r))
    }

    pub fn complement(&self) -> PointSet {
        let m = self.membership.clone();
        let dim = self.dim;
        let mut out = PointSet::new(dim, format!("complement-of({})", self.label), move |x| !m(x));
        out.ambient = self.ambient.clone();
        if let Some(e) = self.exact.clone() {
            out.exact = Some(Arc::new(move |p, r| e(p, r).map(|h| (ball_volume(dim, r) - h).max(0.0))));
        }
        out
    }

    /// Intersection; the deficit is exact only when one side has zero or
    /// full deficit at the queried ball.
    pub fn intersection(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return domain("intersection of sets in different dimensions");
        }
        let (ma, mb) = (self.membership.clone(), other.membership.clone());
        let dim = self.dim;
        let mut out = PointSet::new(dim, format!("intersection({},{})", self.label, other.label), move |x| ma(x) && mb(x));
        out.ambient = self.ambient.clone().or_else(|| other.ambient.clone());
        if let (Some(ea), Some(eb)) = (self.exact.clone(), other.exact.clone()) {
            out.exact = Some(Arc::new(move |p, r| {
                let full = ball_volume(dim, r);
                let (ha, hb) = (ea(p, r), eb(p, r));
                match (ha, hb) {
                    (Some(a), _) if a == 0.0 => hb,
                    (_, Some(b)) if b == 0.0 => ha,
                    (Some(a), _) if a >= full => Some(full),
                    (_, Some(b)) if b >= full => Some(full),
                    _ => None,
                }
            }));
        }
        Ok(out)
    }
}

fn normalized(normal: &[f64], offset: f64) -> Result<(Vec<f64>, f64)> {
    let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(len > 0.0) {
        return domain("hyperplane normal must be nonzero");
    }
    Ok((normal.iter().map(|v| v / len).collect(), offset / len))
}

/// Builds the example set described by `spec`.
pub fn canonical_set(spec: &SetSpec) -> Result<PointSet> {
    Ok(match spec {
        SetSpec::Full { dim } => PointSet::new(*dim, "full", |_| true).with_exact_deficit(|_, _| Some(0.0)),
        SetSpec::Empty { dim } => {
            let d = *dim;
            PointSet::new(d, "empty", |_| false).with_exact_deficit(move |_, r| Some(ball_volume(d, r)))
        }
        SetSpec::HalfSpace { normal, offset } => {
            let (n, c) = normalized(normal, *offset)?;
            let dim = n.len();
            let n2 = n.clone();
            PointSet::new(dim, "half-space", move |x| dot(&n, x) <= c).with_exact_deficit(move |p, r| {
                // the missing part is the cap beyond the plane
                Some(cap_volume(dim, r, c - dot(&n2, p)))
            })
        }
        SetSpec::Hyperplane { normal, offset } => {
            let (n, c) = normalized(normal, *offset)?;
            let dim = n.len();
            PointSet::new(dim, "hyperplane", move |x| dot(&n, x) == c)
                .with_exact_deficit(move |_, r| Some(ball_volume(dim, r)))
        }
        SetSpec::Ball { center, radius } => {
            if !(*radius > 0.0) {
                return domain("ball radius must be positive");
            }
            let dim = center.len();
            let (c, c2, big) = (center.clone(), center.clone(), *radius);
            PointSet::new(dim, "ball", move |x| dist(&c, x) <= big).with_exact_deficit(move |p, r| {
                Some((ball_volume(dim, r) - ball_intersection_volume(dim, r, big, dist(&c2, p))).max(0.0))
            })
        }
        SetSpec::Cusp { k } => {
            if *k < 1 {
                return domain("cusp order must be at least 1");
            }
            let k = *k;
            PointSet::new(2, format!("cusp({k})"), move |x| !(x[0] > 0.0 && x[1].abs() < x[0].powi(k as i32)))
                .with_exact_deficit(move |p, r| {
                    if p.iter().all(|v| *v == 0.0) {
                        Some(cusp_area(k, r))
                    } else {
                        None
                    }
                })
        }
        SetSpec::ComplementOf { set } => canonical_set(set)?.complement(),
        SetSpec::Intersection { a, b } => canonical_set(a)?.intersection(&canonical_set(b)?)?,
    })
}

/// Parses a set name (see [`SetSpec::parse`]) and builds it.
pub fn canonical_sets(name: &str, dim: usize) -> Result<PointSet> {
    canonical_set(&SetSpec::parse(name, dim)?)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Deficit estimate at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitEstimate {
    pub radius: f64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Monte Carlo samples used (0 for a closed-form value).
    pub samples: usize,
    pub outside: usize,
    pub exact: bool,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

const Z95: f64 = 1.959_963_984_540_054;
const CHUNK: usize = 4096;

fn check_ball(set: &PointSet, p: &[f64], r: f64) -> Result<()> {
    if p.len() != set.dim {
        return domain(format!("point has {} coordinates, set lives in dimension {}", p.len(), set.dim));
    }
    if !(r > 0.0) {
        return domain(format!("radius must be positive, got {r}"));
    }
    if let Some(a) = &set.ambient {
        if !a.contains_ball(p, r) {
            return domain(format!("ball of radius {r} around {p:?} leaves the ambient box {:?}", a.bounds()));
        }
    }
    Ok(())
}

/// Monte Carlo deficit from `n` uniform samples in `B_r(p)`, ignoring any
/// closed form. Samples come from a counter-based stream keyed by
/// `(seed, stream, chunk)`, so the result does not depend on threading.
pub fn deficit_sampled(set: &PointSet, p: &[f64], r: f64, n: usize, seed: u64, stream: u64) -> Result<DeficitEstimate> {
    check_ball(set, p, r)?;
    if n == 0 {
        return domain("need at least one sample");
    }
    let dim = set.dim;
    let chunks = n.div_ceil(CHUNK);
    let outside: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((stream << 32) | c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut u = vec![0.0; dim];
            let mut x = vec![0.0; dim];
            let mut out = 0;
            for _ in 0..count {
                loop {
                    for v in u.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                        break;
                    }
                }
                for k in 0..dim {
                    x[k] = p[k] + r * u[k];
                }
                if !set.contains(&x) {
                    out += 1;
                }
            }
            out
        })
        .sum();
    let vol = ball_volume(dim, r);
    let (lo, hi) = wilson_interval(outside, n, Z95);
    Ok(DeficitEstimate {
        radius: r,
        estimate: vol * outside as f64 / n as f64,
        ci_lo: vol * lo,
        ci_hi: vol * hi,
        samples: n,
        outside,
        exact: false,
    })
}

/// Deficit `vol(B_r(p) \ E)`: the closed form when the set has one at this
/// ball, else a Monte Carlo estimate with a 95% Wilson interval.
pub fn deficit(set: &PointSet, p: &[f64], r: f64, n: usize, seed: u64) -> Result<DeficitEstimate> {
    deficit_on_stream(set, p, r, n, seed, 0)
}

fn deficit_on_stream(set: &PointSet, p: &[f64], r: f64, n: usize, seed: u64, stream: u64) -> Result<DeficitEstimate> {
    check_ball(set, p, r)?;
    if let Some(h) = set.exact_deficit(p, r) {
        let h = h.clamp(0.0, ball_volume(set.dim, r));
        return Ok(DeficitEstimate { radius: r, estimate: h, ci_lo: h, ci_hi: h, samples: 0, outside: 0, exact: true });
    }
    deficit_sampled(set, p, r, n, seed, stream)
}

/// Dyadic radii `r₀ 2^{−k}`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub r0: f64,
    pub count: usize,
}

impl Schedule {
    pub fn radii(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.r0 * 0.5f64.powi(k as i32)).collect()
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { r0: 0.4, count: 8 }
    }
}

/// How deficits are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Closed form where available, otherwise Monte Carlo.
    #[default]
    Auto,
    /// Monte Carlo always.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub probe: Vec<f64>,
    pub deficits: Vec<DeficitEstimate>,
    pub samples: usize,
    /// Least-squares slope of `ln ĥ` against `ln r` over nonzero deficits.
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// Every deficit was zero; the slope is then the cap.
    pub exact_zero: bool,
    pub cap: f64,
}

impl DensityReport {
    /// Fitted degree, with exact-zero reports at the cap.
    pub fn degree(&self) -> Option<f64> {
        if self.exact_zero {
            Some(self.cap)
        } else {
            self.slope
        }
    }
}

/// Least-squares line through `(x, y)`; returns slope and its standard
/// error (0 when the fit is exact or has two points).
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let se = if n > 2 {
        let icpt = my - slope * mx;
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, se))
}

/// Deficits along the schedule and the fitted density degree at `p`.
pub fn density_degree(set: &PointSet, p: &[f64], schedule: &Schedule, n: usize, seed: u64, mode: SamplingMode) -> Result<DensityReport> {
    if schedule.count < 4 {
        return domain("the radius schedule needs at least 4 radii");
    }
    let radii = schedule.radii();
    let deficits: Vec<DeficitEstimate> = radii
        .par_iter()
        .enumerate()
        .map(|(k, &r)| match mode {
            SamplingMode::Auto => deficit_on_stream(set, p, r, n, seed, k as u64),
            SamplingMode::Sampled => deficit_sampled(set, p, r, n, seed, k as u64),
        })
        .collect::<Result<_>>()?;
    let exact_zero = deficits.iter().all(|d| d.estimate == 0.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = deficits
        .iter()
        .filter(|d| d.estimate > 0.0)
        .map(|d| (d.radius.ln(), d.estimate.ln()))
        .unzip();
    let cap = degree_cap(set.dim);
    let (slope, slope_se) = if exact_zero {
        (Some(cap), Some(0.0))
    } else {
        match fit_slope(&xs, &ys) {
            Some((s, se)) => (Some(s), Some(se)),
            None => (None, None),
        }
    };
    Ok(DensityReport { probe: p.to_vec(), deficits, samples: n, slope, slope_se, exact_zero, cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Superdense,
    Not,
    Inconclusive,
}

pub const DEFAULT_MARGIN: f64 = 0.2;

/// Verdict on whether the probe is an m-density point.
pub fn classify(report: &DensityReport, m: f64, margin: f64) -> Verdict {
    if report.exact_zero {
        return Verdict::Superdense;
    }
    let (Some(s), Some(se)) = (report.slope, report.slope_se) else {
        return Verdict::Inconclusive;
    };
    if s - se > m + margin {
        Verdict::Superdense
    } else if s + se < m - margin {
        Verdict::Not
    } else {
        Verdict::Inconclusive
    }
}
