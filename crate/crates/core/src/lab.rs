//! Experiment harnesses: density of zero sets against pointwise vanishing
//! of derivatives, on configurable instances.
//!
//! * `thm31`: at probes where the zero set `Z_γ` of a C¹ form γ is
//!   (M+1)-dense, `dγ` must vanish.
//! * `tangency`: for a graph `f_u(x, y) = (x, y, u(x, y))` and a contact-type
//!   form ω, tangency points where `f^*dω ≠ 0` must not be (M+1)-dense.
//! * `cor52`: where a matrix 1-form φ violates the Maurer-Cartan equation,
//!   the set `{f^*Γ = φ}` has no (M+1)-dense points.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cartan::{agreement_scan, box_grid, maurer_cartan, mc_residual, LieGroupChart};
use crate::density::{classify, density_degree, PointSet, SamplingMode, Schedule, Verdict, DEFAULT_MARGIN};
use crate::error::{domain, Result};
use crate::exterior::MultiIndex;
use crate::field::{ChartDomain, ChartMap, Polynomial, ScalarField, Smoothness};
use crate::form::MatrixForm;
use crate::literal::{format_form, parse_form, parse_polynomial};

/// Where to put density probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeSpec {
    Points { points: Vec<Vec<f64>> },
    /// Uniform random points in the ball of the given radius at the origin.
    BallInterior { count: usize, radius: f64 },
    /// Random points on `{x_axis = 0}` with the other coordinates uniform
    /// in `[−extent, extent]` (axis is 1-based).
    Hyperplane { count: usize, axis: usize, extent: f64 },
}

impl ProbeSpec {
    pub fn points(&self, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        match self {
            ProbeSpec::Points { points } => {
                if let Some(p) = points.iter().find(|p| p.len() != dim) {
                    return domain(format!("probe {p:?} is not {dim}-dimensional"));
                }
                Ok(points.clone())
            }
            ProbeSpec::BallInterior { count, radius } => Ok((0..*count)
                .map(|_| loop {
                    let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    if u.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                        break u.iter().map(|v| v * radius).collect();
                    }
                })
                .collect()),
            ProbeSpec::Hyperplane { count, axis, extent } => {
                if *axis == 0 || *axis > dim {
                    return domain(format!("axis {axis} outside 1..={dim}"));
                }
                Ok((0..*count)
                    .map(|_| {
                        (1..=dim)
                            .map(|k| if k == *axis { 0.0 } else { rng.gen_range(-extent..*extent) })
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

/// Density settings shared by the harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensitySettings {
    pub schedule: Schedule,
    pub samples: usize,
    pub seed: u64,
    pub margin: f64,
    /// Pointwise tolerance defining the zero / agreement set.
    pub zero_eps: f64,
}

impl Default for DensitySettings {
    fn default() -> Self {
        DensitySettings { schedule: Schedule::default(), samples: 100_000, seed: 1, margin: DEFAULT_MARGIN, zero_eps: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thm31Config {
    pub dim: usize,
    /// Defaults to `[−2, 2]^dim`.
    pub domain: Option<ChartDomain>,
    /// `flat-ball` (`(max(0, |x|² − 1))² dx₁`), `x1-dx2`, `zero`, or a form
    /// literal.
    pub gamma: String,
    pub probes: ProbeSpec,
    pub density: DensitySettings,
    /// Bound on `‖(dγ)_Q‖` at superdense probes.
    pub tolerance: f64,
}

impl Default for Thm31Config {
    fn default() -> Self {
        Thm31Config {
            dim: 2,
            domain: None,
            gamma: "flat-ball".into(),
            probes: ProbeSpec::BallInterior { count: 50, radius: 0.5 },
            density: DensitySettings::default(),
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TangencyConfig {
    /// Height function `u(x1, x2)` as a polynomial literal.
    pub u: String,
    /// Contact-type 1-form on the 3-dimensional target.
    pub omega: String,
    /// Parameter box; defaults to `[−2, 2]²`.
    pub domain: Option<ChartDomain>,
    /// Region scanned for tangency points.
    pub scan: ChartDomain,
    pub scan_per_axis: usize,
    /// Number of detected tangency points used as density probes.
    pub probe_count: usize,
    pub density: DensitySettings,
    /// `‖f^*dω‖` above this counts as nonzero.
    pub tolerance: f64,
}

impl Default for TangencyConfig {
    fn default() -> Self {
        TangencyConfig {
            u: "x1*x2".into(),
            omega: "d(3) - x2 d(1)".into(),
            domain: None,
            scan: ChartDomain::cube(2, -1.0, 1.0).expect("valid box"),
            scan_per_axis: 41,
            probe_count: 20,
            density: DensitySettings::default(),
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Cor52Config {
    /// `canonical` (`φ = [[dx, e^{−x}dy + y dx], [0, 0]]`), `pullback`
    /// (`φ = f^*Γ`) or `offset` (`φ = [[dx + dy, 0], [0, 0]]`); the map is
    /// always `f(x, y) = (e^x, y)` into the affine chart.
    pub instance: String,
    pub domain: Option<ChartDomain>,
    pub scan: ChartDomain,
    pub scan_per_axis: usize,
    pub probe_count: usize,
    /// Agreement threshold `‖(f^*Γ − φ)_P‖ ≤ eps`.
    pub agreement_eps: f64,
    /// Residual `‖(dφ + φ∧φ)_P‖` above this counts as a violation of the
    /// Maurer-Cartan equation.
    pub mc_threshold: f64,
    pub density: DensitySettings,
}

impl Default for Cor52Config {
    fn default() -> Self {
        Cor52Config {
            instance: "canonical".into(),
            domain: None,
            scan: ChartDomain::cube(2, -1.0, 1.0).expect("valid box"),
            scan_per_axis: 41,
            probe_count: 20,
            agreement_eps: 1e-8,
            mc_threshold: 1e-6,
            density: DensitySettings { zero_eps: 1e-8, ..DensitySettings::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "harness", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Thm31(Thm31Config),
    Tangency(TangencyConfig),
    Cor52(Cor52Config),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    /// The instance does not satisfy the harness hypothesis; nothing is
    /// claimed.
    HypothesisNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub point: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    pub exact_zero: bool,
    pub verdict: Verdict,
    /// Norm of the derivative quantity the harness tests at this probe.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub harness: String,
    pub dim: usize,
    /// Density order tested (M + 1).
    pub m: f64,
    pub probes: Vec<ProbeResult>,
    pub outcome: Outcome,
    pub notes: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

fn probe_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn density_probes<F>(set: &PointSet, probes: &[Vec<f64>], s: &DensitySettings, m: f64, norm: F) -> Result<Vec<ProbeResult>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    probes
        .par_iter()
        .enumerate()
        .map(|(k, q)| {
            let rep = density_degree(set, q, &s.schedule, s.samples, probe_seed(s.seed, k), SamplingMode::Auto)?;
            Ok(ProbeResult {
                point: q.clone(),
                slope: rep.slope,
                slope_se: rep.slope_se,
                exact_zero: rep.exact_zero,
                verdict: classify(&rep, m, s.margin),
                norm: norm(q)?,
            })
        })
        .collect()
}

/// `(max(0, |x|² − 1))²`, C¹ with analytic first partials, flat on the
/// closed unit ball.
pub fn flat_ball(domain: Arc<ChartDomain>) -> ScalarField {
    let d = domain.clone();
    let excess = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() - 1.0).max(0.0);
    ScalarField::from_fn_with_partials(domain, Smoothness::C1, move |x| excess(x).powi(2), move |i| {
        Ok(ScalarField::from_fn(d.clone(), Smoothness::C0, move |x| 4.0 * x[i - 1] * excess(x)))
    })
}

fn thm31_gamma(name: &str, domain: Arc<ChartDomain>) -> Result<MatrixForm> {
    let dim = domain.dim();
    match name {
        "flat-ball" => MatrixForm::monomial(flat_ball(domain), MultiIndex::single(dim, 1)?),
        "x1-dx2" => {
            if dim < 2 {
                return domain_err("x1-dx2 needs dimension ≥ 2");
            }
            MatrixForm::monomial(ScalarField::var(domain, 1)?, MultiIndex::single(dim, 2)?)
        }
        "zero" => MatrixForm::zero(1, 1, domain),
        literal => parse_form(literal, domain, None),
    }
}

fn domain_err<T>(msg: &str) -> Result<T> {
    domain(msg)
}

fn settle(failures: usize, notes: &mut Vec<String>) -> Outcome {
    if failures == 0 {
        Outcome::Pass
    } else {
        notes.push(format!("{failures} probe(s) contradict the claim"));
        Outcome::Fail
    }
}

/// Density of `Z_γ` at each probe against `‖(dγ)_Q‖`.
pub fn run_thm31(cfg: &Thm31Config) -> Result<ExperimentReport> {
    let dim = cfg.dim;
    let dom = Arc::new(match &cfg.domain {
        Some(d) => d.clone(),
        None => ChartDomain::cube(dim, -2.0, 2.0)?,
    });
    if dom.dim() != dim {
        return domain("config dim differs from the domain's dimension");
    }
    let gamma = thm31_gamma(&cfg.gamma, dom.clone())?;
    let dgamma = gamma.d()?;
    let zero_set = PointSet::zero_set(&gamma, cfg.density.zero_eps);
    let probes = cfg.probes.points(dim, cfg.density.seed)?;
    let m = dim as f64 + 1.0;
    let results = density_probes(&zero_set, &probes, &cfg.density, m, |q| dgamma.max_abs_at(q))?;
    let mut notes = vec![format!("gamma: {}", describe(&gamma))];
    let failures = results
        .iter()
        .filter(|p| p.verdict == Verdict::Superdense && !(p.norm < cfg.tolerance))
        .count();
    let mut metrics = BTreeMap::new();
    summarize(&results, &mut metrics);
    let outcome = settle(failures, &mut notes);
    Ok(ExperimentReport { harness: "thm31".into(), dim, m, probes: results, outcome, notes, metrics })
}

fn describe(form: &MatrixForm) -> String {
    if form.is_polynomial() {
        format_form(form).unwrap_or_else(|_| "<unprintable>".into())
    } else {
        format!("<numeric {}-form, {}×{}>", form.degree(), form.size(), form.size())
    }
}

fn summarize(results: &[ProbeResult], metrics: &mut BTreeMap<String, f64>) {
    let slopes: Vec<f64> = results.iter().filter(|p| !p.exact_zero).filter_map(|p| p.slope).collect();
    if !slopes.is_empty() {
        metrics.insert("slope_min".into(), slopes.iter().copied().fold(f64::INFINITY, f64::min));
        metrics.insert("slope_max".into(), slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    metrics.insert("probes".into(), results.len() as f64);
    metrics.insert("superdense".into(), results.iter().filter(|p| p.verdict == Verdict::Superdense).count() as f64);
    metrics.insert("exact_zero".into(), results.iter().filter(|p| p.exact_zero).count() as f64);
    metrics.insert("norm_max".into(), results.iter().map(|p| p.norm).fold(0.0, f64::max));
}

fn pick_evenly<T: Clone>(items: &[T], count: usize) -> Vec<T> {
    if items.len() <= count {
        return items.to_vec();
    }
    (0..count).map(|k| items[k * items.len() / count].clone()).collect()
}

/// Tangency set of the graph of `u` against a contact-type form.
pub fn run_tangency(cfg: &TangencyConfig) -> Result<ExperimentReport> {
    let dom = Arc::new(match &cfg.domain {
        Some(d) => d.clone(),
        None => ChartDomain::cube(2, -2.0, 2.0)?,
    });
    if dom.dim() != 2 || cfg.scan.dim() != 2 || !dom.contains_box(&cfg.scan) {
        return domain("tangency harness works on a 2-dimensional parameter box containing the scan box");
    }
    let u = parse_polynomial(&cfg.u, 2)?;
    let target = Arc::new(ChartDomain::cube(3, -1e6, 1e6)?);
    let omega = parse_form(&cfg.omega, target.clone(), Some(1))?;
    let map = ChartMap::polynomial(dom.clone(), target, vec![Polynomial::var(2, 1), Polynomial::var(2, 2), u])?;
    let pulled = omega.pullback(&map)?;
    let pulled_d = omega.d()?.pullback(&map)?;
    let scan = box_grid(&cfg.scan, cfg.scan_per_axis);
    let eps = cfg.density.zero_eps;
    let tangent: Vec<Vec<f64>> = scan
        .iter()
        .filter(|p| pulled.is_zero_at(p, eps).unwrap_or(false))
        .cloned()
        .collect();
    let mut notes = vec![
        format!("f^*omega = {}", describe(&pulled)),
        format!("f^*d(omega) = {}", describe(&pulled_d)),
        format!("{} of {} scan points are tangency points", tangent.len(), scan.len()),
    ];
    let probes = pick_evenly(&tangent, cfg.probe_count);
    let set = PointSet::zero_set(&pulled, eps);
    let m = 3.0;
    let results = density_probes(&set, &probes, &cfg.density, m, |q| pulled_d.max_abs_at(q))?;
    let failures = results
        .iter()
        .filter(|p| p.norm > cfg.tolerance && p.verdict == Verdict::Superdense)
        .count();
    if probes.is_empty() {
        notes.push("empty tangency set: vacuous".into());
    }
    let mut metrics = BTreeMap::new();
    summarize(&results, &mut metrics);
    metrics.insert("tangency_points".into(), tangent.len() as f64);
    let outcome = settle(failures, &mut notes);
    Ok(ExperimentReport { harness: "tangency".into(), dim: 2, m, probes: results, outcome, notes, metrics })
}

/// `x ↦ e^{±x₁}` with analytic partials.
fn exp_field(domain: Arc<ChartDomain>, sign: f64) -> ScalarField {
    let d = domain.clone();
    ScalarField::from_fn_with_partials(domain, Smoothness::CInf, move |x| (sign * x[0]).exp(), move |i| {
        Ok(if i == 1 { exp_field(d.clone(), sign).scale(&crate::field::Coeff::Float(sign)) } else { ScalarField::zero(d.clone()) })
    })
}

/// The map `(x, y) ↦ (e^x, y)` into the affine chart and the named φ.
pub fn cor52_instance(name: &str, domain: Arc<ChartDomain>) -> Result<(ChartMap, LieGroupChart, MatrixForm)> {
    let group = LieGroupChart::catalog("affine2")?;
    if domain.dim() != 2 {
        return domain_err("the affine instance lives on a 2-dimensional box");
    }
    let f = ChartMap::new(domain.clone(), group.chart().clone(), vec![exp_field(domain.clone(), 1.0), ScalarField::var(domain.clone(), 2)?])?;
    let (dx, dy) = (MultiIndex::single(2, 1)?, MultiIndex::single(2, 2)?);
    let one = ScalarField::constant(domain.clone(), 1);
    let phi = match name {
        "canonical" => {
            let mut phi = MatrixForm::zero(2, 1, domain.clone())?;
            phi.add_term(0, 0, dx.clone(), one)?;
            phi.add_term(0, 1, dy, exp_field(domain.clone(), -1.0))?;
            phi.add_term(0, 1, dx, ScalarField::var(domain.clone(), 2)?)?;
            phi
        }
        "pullback" => maurer_cartan(&group)?.pullback(&f)?,
        "offset" => {
            let mut phi = MatrixForm::zero(2, 1, domain.clone())?;
            phi.add_term(0, 0, dx, one.clone())?;
            phi.add_term(0, 0, dy, one)?;
            phi
        }
        other => return domain_err(&format!("unknown instance `{other}` (canonical, pullback, offset)")),
    };
    Ok((f, group, phi))
}

/// Agreement set of `f^*Γ` and φ, and its density where φ violates the
/// Maurer-Cartan equation.
pub fn run_cor52(cfg: &Cor52Config) -> Result<ExperimentReport> {
    let dom = Arc::new(match &cfg.domain {
        Some(d) => d.clone(),
        None => ChartDomain::cube(2, -2.0, 2.0)?,
    });
    if !dom.contains_box(&cfg.scan) {
        return domain("scan box must lie inside the domain");
    }
    let (f, group, phi) = cor52_instance(&cfg.instance, dom.clone())?;
    let residual = mc_residual(&phi)?;
    let scan = box_grid(&cfg.scan, cfg.scan_per_axis);
    let mc_norms: Vec<f64> = scan.par_iter().map(|p| residual.max_abs_at(p)).collect::<Result<_>>()?;
    let mc_min = mc_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let mc_max = mc_norms.iter().copied().fold(0.0, f64::max);
    let mut metrics = BTreeMap::new();
    metrics.insert("mc_residual_min".into(), mc_min);
    metrics.insert("mc_residual_max".into(), mc_max);

    let agree = agreement_scan(&f, &group, &phi, &scan, cfg.agreement_eps)?;
    let matched: Vec<Vec<f64>> = agree.matches.iter().map(|&k| agree.points[k].clone()).collect();
    metrics.insert("agreement_points".into(), matched.len() as f64);
    if let Some(worst) = matched.iter().map(|p| p[1].abs()).reduce(f64::max) {
        metrics.insert("agreement_max_abs_y".into(), worst);
    }
    let mut notes = vec![format!("{} of {} scan points agree", matched.len(), scan.len())];

    let diff = maurer_cartan(&group)?.pullback(&f)?.sub(&phi)?;
    let set = PointSet::zero_set(&diff, cfg.density.zero_eps);
    let probes = pick_evenly(&matched, cfg.probe_count);
    let m = 3.0;
    let results = density_probes(&set, &probes, &cfg.density, m, |q| residual.max_abs_at(q))?;
    let mut summary = BTreeMap::new();
    summarize(&results, &mut summary);
    metrics.extend(summary);

    let outcome = if !(mc_min > cfg.mc_threshold) {
        notes.push(format!(
            "Maurer-Cartan residual drops to {mc_min:e} on the scan grid: hypothesis not met, no claim made"
        ));
        Outcome::HypothesisNotMet
    } else {
        if probes.is_empty() {
            notes.push("empty agreement set: vacuous".into());
        }
        let failures = results.iter().filter(|p| p.verdict == Verdict::Superdense).count();
        settle(failures, &mut notes)
    };
    Ok(ExperimentReport { harness: "cor52".into(), dim: 2, m, probes: results, outcome, notes, metrics })
}

/// Dispatches on the config variant.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg {
        ExperimentConfig::Thm31(c) => run_thm31(c),
        ExperimentConfig::Tangency(c) => run_tangency(c),
        ExperimentConfig::Cor52(c) => run_cor52(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> DensitySettings {
        DensitySettings { samples: 4000, ..DensitySettings::default() }
    }

    #[test]
    fn flat_ball_vanishes_on_ball() {
        let d = Arc::new(ChartDomain::cube(2, -2.0, 2.0).unwrap());
        let f = flat_ball(d.clone());
        assert_eq!(f.eval(&[0.5, 0.5]).unwrap(), 0.0);
        assert!((f.eval(&[1.5, 0.0]).unwrap() - 1.25f64.powi(2)).abs() < 1e-15);
        let dx = f.partial(1).unwrap();
        assert!((dx.eval(&[1.5, 0.0]).unwrap() - 4.0 * 1.5 * 1.25).abs() < 1e-14);
        assert_eq!(dx.eval(&[0.9, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn thm31_examples() {
        let cfg = Thm31Config { probes: ProbeSpec::BallInterior { count: 5, radius: 0.5 }, density: quick(), ..Default::default() };
        let r = run_thm31(&cfg).unwrap();
        assert_eq!(r.outcome, Outcome::Pass);
        assert!(r.probes.iter().all(|p| p.exact_zero && p.norm < 1e-9));

        let cfg = Thm31Config {
            gamma: "x1-dx2".into(),
            probes: ProbeSpec::Hyperplane { count: 4, axis: 1, extent: 1.0 },
            density: quick(),
            ..Default::default()
        };
        let r = run_thm31(&cfg).unwrap();
        assert_eq!(r.outcome, Outcome::Pass);
        for p in &r.probes {
            assert!((p.slope.unwrap() - 2.0).abs() < 0.2);
            assert_eq!(p.norm, 1.0);
            assert_eq!(p.verdict, Verdict::Not);
        }

        let cfg = Thm31Config { gamma: "zero".into(), probes: ProbeSpec::BallInterior { count: 3, radius: 1.0 }, density: quick(), ..Default::default() };
        let r = run_thm31(&cfg).unwrap();
        assert_eq!(r.outcome, Outcome::Pass);
        assert!(r.probes.iter().all(|p| p.verdict == Verdict::Superdense));
    }

    #[test]
    fn thm31_flags_superdense_probes_over_tolerance() {
        // with tolerance 0 even ‖dγ‖ = 0 is "too large", so the superdense
        // probe must be reported as a contradiction
        let cfg = Thm31Config {
            gamma: "zero".into(),
            probes: ProbeSpec::Points { points: vec![vec![0.0, 0.0]] },
            density: quick(),
            tolerance: 0.0,
            ..Default::default()
        };
        assert_eq!(run_thm31(&cfg).unwrap().outcome, Outcome::Fail);
    }

    #[test]
    fn tangency_example() {
        let cfg = TangencyConfig { probe_count: 4, density: quick(), ..Default::default() };
        let r = run_tangency(&cfg).unwrap();
        assert_eq!(r.outcome, Outcome::Pass);
        assert_eq!(r.notes[0], "f^*omega = [[(x1) d(2)]]");
        assert_eq!(r.notes[1], "f^*d(omega) = [[d(1,2)]]");
        assert_eq!(r.metrics["tangency_points"], 41.0);
        for p in &r.probes {
            assert_eq!(p.point[0], 0.0);
            assert_eq!(p.norm, 1.0);
            assert!(p.slope.unwrap() <= 2.2);
        }
        // u with nowhere-vanishing f^*ω: u = x2 + 5 x1 gives (5 − x2) dx + dy
        let cfg = TangencyConfig { u: "x2 + 5*x1".into(), probe_count: 4, density: quick(), ..Default::default() };
        let r = run_tangency(&cfg).unwrap();
        assert!(r.probes.is_empty());
        assert_eq!(r.outcome, Outcome::Pass);
    }

    #[test]
    fn cor52_instances() {
        let base = Cor52Config { probe_count: 3, scan_per_axis: 21, density: DensitySettings { samples: 4000, zero_eps: 1e-8, ..Default::default() }, ..Default::default() };
        let r = run_cor52(&base).unwrap();
        assert_eq!(r.outcome, Outcome::Pass);
        assert!((r.metrics["mc_residual_min"] - 1.0).abs() < 1e-12);
        assert!((r.metrics["mc_residual_max"] - 1.0).abs() < 1e-12);
        assert_eq!(r.metrics["agreement_points"], 21.0);
        assert!(r.metrics["agreement_max_abs_y"] <= 1e-8);

        let r = run_cor52(&Cor52Config { instance: "pullback".into(), ..base.clone() }).unwrap();
        assert_eq!(r.outcome, Outcome::HypothesisNotMet);
        assert_eq!(r.metrics["agreement_points"], 21.0 * 21.0);

        let r = run_cor52(&Cor52Config { instance: "offset".into(), ..base }).unwrap();
        assert_eq!(r.metrics["agreement_points"], 0.0);
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::Thm31(Thm31Config::default());
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&s).unwrap(), cfg);
    }
}
