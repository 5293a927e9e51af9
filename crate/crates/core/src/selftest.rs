//! The acceptance suite: eight end-to-end checks with fixed seeds and
//! tolerances. Each returns a [`CriterionResult`]; errors inside a check
//! count as failures.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cartan::{
    box_grid, cartan_integrate, holonomy, maurer_cartan, mc_residual, pullback_gap, rectangle_loop, uniqueness_gap,
    DevelopOptions, LieGroupChart, CATALOG,
};
use crate::corpus::{random_form, random_map, CorpusShape};
use crate::ded::{make_bump, verify_ded, BatterySpec};
use crate::density::{
    canonical_sets, classify, deficit_sampled, density_degree, SamplingMode, Schedule, Verdict,
    DEFAULT_MARGIN,
};
use crate::error::Result;
use crate::exterior::{enumerate_multiindices, MultiIndex};
use crate::field::{ChartDomain, Coeff, ScalarField, Smoothness};
use crate::form::MatrixForm;
use crate::lab::{cor52_instance, run_cor52, run_tangency, run_thm31, Cor52Config, Outcome, ProbeSpec, TangencyConfig, Thm31Config};
use crate::literal::parse_form;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    /// One-line summary, e.g. `[PASS] 3 maurer-cartan: …`.
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {} {} ({:.1}s): {}", self.id, self.name, self.seconds, self.detail)
    }
}

fn run(id: u8, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult { id, name: name.into(), passed, detail, seconds: t.elapsed().as_secs_f64() }
}

pub const SEED: u64 = 20_240_601;

/// Exact identities on random polynomial forms: `dd = 0`, Leibniz, wedge
/// associativity and `d f^* = f^* d`.
pub fn algebra_identities(count: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = CorpusShape { max_size: 3, max_dim: 4, max_poly_degree: 3, max_terms: 3, density: 0.35 };
    let mut failures = Vec::new();
    for k in 0..count {
        let size = rng.gen_range(1..=shape.max_size);
        let dim = rng.gen_range(1..=shape.max_dim);
        let dom = Arc::new(ChartDomain::cube(dim, -1.0, 1.0)?);
        let (l, m, n) = (rng.gen_range(0..=dim), rng.gen_range(0..=dim), rng.gen_range(0..=dim));
        let lam = random_form(&mut rng, &dom, size, l, &shape)?;
        let mu = random_form(&mut rng, &dom, size, m, &shape)?;
        let nu = random_form(&mut rng, &dom, size, n, &shape)?;

        if !lam.d()?.d()?.is_exactly_zero() {
            failures.push(format!("#{k}: dd ≠ 0"));
        }
        let sign = if l % 2 == 0 { Coeff::int(1) } else { Coeff::int(-1) };
        let lhs = lam.wedge(&mu)?.d()?;
        let rhs = lam.d()?.wedge(&mu)?.add(&lam.wedge(&mu.d()?)?.scale(&sign))?;
        if lhs != rhs {
            failures.push(format!("#{k}: Leibniz"));
        }
        if lam.wedge(&mu)?.wedge(&nu)? != lam.wedge(&mu.wedge(&nu)?)? {
            failures.push(format!("#{k}: associativity"));
        }
        let tdim = rng.gen_range(1..=shape.max_dim);
        let target = Arc::new(ChartDomain::cube(tdim, -100.0, 100.0)?);
        let map = random_map(&mut rng, &dom, &target)?;
        let k_deg = rng.gen_range(0..=tdim);
        let omega = random_form(&mut rng, &target, size, k_deg, &shape)?;
        if omega.pullback(&map)?.d()? != omega.d()?.pullback(&map)? {
            failures.push(format!("#{k}: pullback/d"));
        }
    }
    let ok = failures.is_empty();
    let detail = if ok {
        format!("{count} random instances, all four identities exact")
    } else {
        format!("{} failures: {}", failures.len(), failures.join("; "))
    };
    Ok((ok, detail))
}

pub fn criterion_1() -> CriterionResult {
    run(1, "algebraic identities", || {
        let t = Instant::now();
        let (ok, detail) = algebra_identities(200, SEED)?;
        let secs = t.elapsed().as_secs_f64();
        Ok((ok && secs < 30.0, format!("{detail}; {secs:.1}s (limit 30s)")))
    })
}

/// Random C¹ polynomial λ on `[−1, 1]^M` with its derivative as candidate,
/// checked on the full default battery.
pub fn ded_random(count: usize, seed: u64) -> Result<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = CorpusShape { max_size: 2, max_dim: 3, max_poly_degree: 3, max_terms: 3, density: 0.6 };
    let spec = BatterySpec::default();
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let dim = 2 + k % 2;
        let size = rng.gen_range(1..=2);
        let h = rng.gen_range(0..dim);
        let dom = Arc::new(ChartDomain::cube(dim, -1.0, 1.0)?);
        let lam = random_form(&mut rng, &dom, size, h, &shape)?;
        let w = verify_ded(&lam, &lam.d()?, &spec)?;
        worst = worst.max(w.max_residual());
        if w.passed() {
            passed += 1;
        }
    }
    Ok((passed, worst))
}

/// `λ = |x₁| dx₂`, candidate `sign(x₁) dx₁∧dx₂` on `[−1, 1]²`.
pub fn abs_example() -> Result<f64> {
    let d = Arc::new(ChartDomain::cube(2, -1.0, 1.0)?);
    let abs = ScalarField::from_fn(d.clone(), Smoothness::C0, |x| x[0].abs());
    let sign = ScalarField::from_fn(d.clone(), Smoothness::C0, |x| x[0].signum());
    let lam = MatrixForm::monomial(abs, MultiIndex::single(2, 2)?)?;
    let cand = MatrixForm::monomial(sign, MultiIndex::top(2))?;
    Ok(verify_ded(&lam, &cand, &BatterySpec::default())?.max_residual())
}

/// Candidate perturbed by `0.1 g dx_γ` in entry (1,1): the battery must
/// reject it.
pub fn ded_negative_control(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = CorpusShape { max_size: 2, max_dim: 2, max_poly_degree: 3, max_terms: 3, density: 0.6 };
    let d = Arc::new(ChartDomain::cube(2, -1.0, 1.0)?);
    let lam = random_form(&mut rng, &d, 2, 1, &shape)?;
    let gamma = enumerate_multiindices(2, 2)?.remove(0);
    let bump = make_bump(d.clone(), &[0.0, 0.0], 0.5, 0.5, gamma)?;
    let perturbed = lam.d()?.add(&MatrixForm::one_hot(2, 0, 0, &bump.scale(&Coeff::Float(0.1)))?)?;
    Ok(verify_ded(&lam, &perturbed, &BatterySpec::default())?.max_residual())
}

pub fn criterion_2() -> CriterionResult {
    run(2, "DED verifier", || {
        let (passed, worst) = ded_random(20, SEED)?;
        let abs = abs_example()?;
        let neg = ded_negative_control(SEED)?;
        let ok = passed == 20 && abs < 1e-6 && neg > 1e-3;
        Ok((
            ok,
            format!("{passed}/20 random λ pass (max residual {worst:.2e}); |x1| case {abs:.2e}; negative control {neg:.2e} (> 1e-3)"),
        ))
    })
}

pub fn criterion_3() -> CriterionResult {
    run(3, "Maurer-Cartan equation", || {
        let mut notes = Vec::new();
        let mut ok = true;
        for name in ["affine2", "so2"] {
            let exact = mc_residual(&maurer_cartan(&LieGroupChart::catalog(name)?)?)?.is_exactly_zero();
            ok &= exact;
            notes.push(format!("{name} symbolic zero: {exact}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        for name in CATALOG {
            let g = LieGroupChart::catalog(name)?;
            let res = mc_residual(&maurer_cartan(&g)?)?;
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let u: Vec<f64> = g.chart().bounds().iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
                worst = worst.max(res.max_abs_at(&u)?);
            }
            ok &= worst < 1e-10;
            notes.push(format!("{name} max {worst:.1e}"));
        }
        Ok((ok, notes.join(", ")))
    })
}

pub fn thm31_configs() -> Vec<(String, Thm31Config)> {
    let mut out = Vec::new();
    for dim in [2, 3] {
        out.push((format!("flat-ball M={dim}"), Thm31Config { dim, ..Thm31Config::default() }));
    }
    out.push((
        "x1 dx2 M=2".into(),
        Thm31Config {
            gamma: "x1-dx2".into(),
            probes: ProbeSpec::Hyperplane { count: 20, axis: 1, extent: 1.0 },
            ..Thm31Config::default()
        },
    ));
    out
}

pub fn criterion_4() -> CriterionResult {
    run(4, "zero-set harness", || {
        let t = Instant::now();
        let mut ok = true;
        let mut notes = Vec::new();
        for (label, cfg) in thm31_configs() {
            let r = run_thm31(&cfg)?;
            let pass = r.outcome == Outcome::Pass;
            if cfg.gamma == "flat-ball" {
                let all = r.probes.iter().all(|p| p.exact_zero && p.verdict == Verdict::Superdense && p.norm < 1e-9);
                ok &= pass && all && r.probes.len() == 50;
                notes.push(format!("{label}: {} probes exact-zero, max |dγ| {:.1e}", r.metrics["exact_zero"], r.metrics["norm_max"]));
            } else {
                let slopes_ok = r.probes.iter().all(|p| p.slope.is_some_and(|s| (s - 2.0).abs() <= 0.2) && p.norm == 1.0);
                ok &= pass && slopes_ok;
                notes.push(format!(
                    "{label}: slopes {:.3}..{:.3}, |dγ| = 1",
                    r.metrics.get("slope_min").copied().unwrap_or(f64::NAN),
                    r.metrics.get("slope_max").copied().unwrap_or(f64::NAN)
                ));
            }
        }
        let secs = t.elapsed().as_secs_f64();
        ok &= secs < 120.0;
        notes.push(format!("{secs:.1}s (limit 120s)"));
        Ok((ok, notes.join("; ")))
    })
}

/// Fraction of repeats whose 95% interval covers the true half-space
/// deficit.
pub fn half_space_coverage(repeats: usize, n: usize, seed: u64) -> Result<usize> {
    let half = canonical_sets("half-space", 2)?;
    let p = [0.0, 0.0];
    let r = 0.25;
    let truth = half.exact_deficit(&p, r).expect("closed form");
    let mut hits = 0;
    for k in 0..repeats {
        let e = deficit_sampled(&half, &p, r, n, seed.wrapping_add(k as u64), 0)?;
        if e.ci_lo <= truth && truth <= e.ci_hi {
            hits += 1;
        }
    }
    Ok(hits)
}

pub fn criterion_5() -> CriterionResult {
    run(5, "superdensity estimator", || {
        let sched = Schedule { r0: 0.4, count: 8 };
        let n = 100_000;
        let mut ok = true;
        let mut notes = Vec::new();
        let half = canonical_sets("half-space", 2)?;
        let rep = density_degree(&half, &[0.0, 0.0], &sched, n, SEED, SamplingMode::Sampled)?;
        let s = rep.slope.unwrap_or(f64::NAN);
        ok &= (s - 2.0).abs() <= 0.1;
        notes.push(format!("half-space boundary slope {s:.4} (sampled)"));
        for k in [2u32, 3, 4] {
            let cusp = canonical_sets(&format!("cusp({k})"), 2)?;
            let rep = density_degree(&cusp, &[0.0, 0.0], &sched, n, SEED, SamplingMode::Auto)?;
            let s = rep.slope.unwrap_or(f64::NAN);
            ok &= (s - (k as f64 + 1.0)).abs() <= 0.3;
            notes.push(format!("cusp({k}) slope {s:.3}"));
        }
        let ball = canonical_sets("ball", 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut interior_ok = true;
        for _ in 0..10 {
            let q = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
            let rep = density_degree(&ball, &q, &Schedule { r0: 0.2, count: 8 }, n, SEED, SamplingMode::Sampled)?;
            interior_ok &= rep.exact_zero && classify(&rep, 3.0, DEFAULT_MARGIN) == Verdict::Superdense;
        }
        ok &= interior_ok;
        notes.push(format!("ball interior exact-zero: {interior_ok}"));
        let hits = half_space_coverage(100, 10_000, SEED)?;
        ok &= hits >= 93;
        notes.push(format!("CI coverage {hits}/100"));
        Ok((ok, notes.join("; ")))
    })
}

pub fn criterion_6() -> CriterionResult {
    run(6, "tangency harness", || {
        let cfg = TangencyConfig::default();
        let r = run_tangency(&cfg)?;
        let on_line = r.probes.iter().all(|p| p.point[0] == 0.0);
        let expected_count = cfg.scan_per_axis as f64;
        let set_ok = r.metrics["tangency_points"] == expected_count;
        let slope_max = r.metrics.get("slope_max").copied().unwrap_or(f64::NAN);
        let d_ok = r.notes[1] == "f^*d(omega) = [[d(1,2)]]" && r.probes.iter().all(|p| p.norm == 1.0);
        let ok = r.outcome == Outcome::Pass && on_line && set_ok && r.probes.len() == 20 && slope_max <= 2.2 && d_ok;
        Ok((
            ok,
            format!(
                "{}; tangency points {} (all on x=0: {on_line}); max slope {slope_max:.3} at {} probes; {}",
                r.notes[0],
                r.metrics["tangency_points"],
                r.probes.len(),
                r.notes[1]
            ),
        ))
    })
}

pub fn criterion_7() -> CriterionResult {
    run(7, "Maurer-Cartan agreement harness", || {
        let cfg = Cor52Config::default();
        let r = run_cor52(&cfg)?;
        let (lo, hi) = (r.metrics["mc_residual_min"], r.metrics["mc_residual_max"]);
        let mc_ok = (lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12;
        // the (1,2) dx∧dy component itself is −1
        let dom = Arc::new(ChartDomain::cube(2, -2.0, 2.0)?);
        let (_, _, phi) = cor52_instance("canonical", dom)?;
        let res = mc_residual(&phi)?;
        let comp_ok = box_grid(&cfg.scan, 5).iter().all(|p| {
            res.coefficient(0, 1, &MultiIndex::top(2)).is_some_and(|f| (f.eval(p).unwrap_or(0.0) + 1.0).abs() < 1e-12)
        });
        let on_line = r.metrics.get("agreement_max_abs_y").is_some_and(|y| *y <= 1e-8);
        let count_ok = r.metrics["agreement_points"] == cfg.scan_per_axis as f64;
        let slopes_ok = r.probes.len() == 20 && r.probes.iter().all(|p| p.slope.is_some_and(|s| (s - 2.0).abs() <= 0.2));
        let ok = r.outcome == Outcome::Pass && mc_ok && comp_ok && on_line && count_ok && slopes_ok;
        Ok((
            ok,
            format!(
                "MC residual in [{lo}, {hi}], (1,2) component −1: {comp_ok}; {} agreement points, max |y| {:e}; slopes {:.3}..{:.3}",
                r.metrics["agreement_points"],
                r.metrics.get("agreement_max_abs_y").copied().unwrap_or(f64::NAN),
                r.metrics.get("slope_min").copied().unwrap_or(f64::NAN),
                r.metrics.get("slope_max").copied().unwrap_or(f64::NAN),
            ),
        ))
    })
}

pub fn criterion_8() -> CriterionResult {
    run(8, "Cartan integration", || {
        let opts = DevelopOptions { step: 1e-3, ..DevelopOptions::default() };
        let line = Arc::new(ChartDomain::new(vec![(-1.0, 2.0)])?);
        let phi = parse_form("0.7 d(1)", line, Some(1))?;
        let f1 = cartan_integrate(&phi, &[vec![0.0], vec![1.0]], None, &opts)?.end[(0, 0)];
        let err = (f1 - 0.7f64.exp()).abs();
        let pts: Vec<Vec<f64>> = (0..10).map(|k| vec![-0.5 + 0.2 * k as f64]).collect();
        let gap = pullback_gap(&phi, &[0.0], &pts, 1e-4, &opts)?;

        let sq = Arc::new(ChartDomain::cube(2, -2.0, 2.0)?);
        let lp = rectangle_loop([0.0, 0.0], [1.0, 1.0], &[]);
        let (_, _, flat) = cor52_instance("pullback", sq.clone())?;
        let (_, _, curved) = cor52_instance("canonical", sq)?;
        let hol_flat = holonomy(&flat, &lp, &opts)?;
        let hol_curved = holonomy(&curved, &lp, &opts)?;

        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.0, 1.0]);
        let uniq = uniqueness_gap(&curved, &[vec![0.0, 0.0], vec![1.0, 0.5], vec![0.3, 1.0]], &a, &opts)?;
        let ok = err < 1e-8 && gap < 1e-6 && hol_flat < 1e-6 && hol_curved > 1e-3 && uniq < 1e-8;
        Ok((
            ok,
            format!(
                "|f(1) − e^0.7| = {err:.1e}; pullback gap {gap:.1e}; holonomy flat {hol_flat:.1e}, curved {hol_curved:.3}; uniqueness {uniq:.1e}"
            ),
        ))
    })
}

/// Runs all eight checks in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ]
}
