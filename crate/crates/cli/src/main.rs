mod input;
mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use superform::cartan::{cartan_integrate, maurer_cartan, mc_residual, DevelopOptions, LieGroupChart};
use superform::ded::{verify_ded, BatterySpec};
use superform::density::{canonical_set, classify, density_degree, PointSet, SamplingMode, Schedule, SetSpec, Verdict, DEFAULT_MARGIN};
use superform::lab::{run_cor52, run_tangency, run_thm31, Cor52Config, ExperimentReport, Outcome as LabOutcome, TangencyConfig, Thm31Config};
use superform::literal::format_form;
use superform::selftest;
use superform::{ChartDomain, Coeff};

use input::{load_form, load_map, matrix_rows, parse_domain, parse_matrix, parse_point, parse_points, read_source, resolve_domain, Source};
use manifest::{write_outputs, Report, RunManifest, Status, Table};

#[derive(Parser)]
#[command(name = "superform", version, about = "Matrix-valued differential forms, superdensity estimates and Maurer-Cartan tools")]
struct Cli {
    /// Directory for report.json and CSV tables.
    #[arg(long, global = true, default_value = "superform-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Algebraic checks on forms.
    #[command(subcommand)]
    Forms(FormsCmd),
    /// Distributional exterior derivative checks.
    #[command(subcommand)]
    Ded(DedCmd),
    /// Density degree of a set at a point.
    Density(DensityArgs),
    /// Maurer-Cartan forms and Cartan integration.
    #[command(subcommand)]
    Cartan(CartanCmd),
    /// Experiment harnesses.
    #[command(subcommand)]
    Lab(LabCmd),
    /// Runs the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Subcommand)]
enum FormsCmd {
    /// Checks d∘d = 0 on a form, Leibniz and associativity with a second
    /// form, pullback/d commutation along a map, or all four identities on
    /// a random corpus.
    Check(FormsCheckArgs),
}

#[derive(Args)]
struct DomainArgs {
    /// Chart box `lo:hi,lo:hi,...` (a single `lo:hi` is used on every axis).
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Chart dimension; inferred from the literals when omitted.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct FormsCheckArgs {
    /// Form literal or file.
    #[arg(long)]
    form: Option<String>,
    /// Second form (Leibniz, associativity with a third `--third`).
    #[arg(long)]
    other: Option<String>,
    #[arg(long, requires = "other")]
    third: Option<String>,
    /// Polynomial map from `--map-source` into the form's domain,
    /// components separated by `;`. Pulls back `--form`.
    #[arg(long)]
    map: Option<String>,
    /// Source box of the map, `lo:hi,...`.
    #[arg(long, requires = "map", allow_hyphen_values = true)]
    map_source: Option<String>,
    /// Number of random instances for the corpus run.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = selftest::SEED)]
    seed: u64,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Subcommand)]
enum DedCmd {
    /// Checks ∫ λ∧dφ = (−1)^{h+1} ∫ μ∧φ on a battery of bump test forms.
    Verify(DedVerifyArgs),
}

#[derive(Args)]
struct DedVerifyArgs {
    /// λ, as a form literal or file.
    #[arg(long)]
    lambda: String,
    /// Candidate μ of degree h+1.
    #[arg(long)]
    candidate: String,
    /// Battery spec as JSON (inline or file); defaults are used for
    /// missing fields.
    #[arg(long)]
    battery: Option<String>,
    /// Residual tolerance.
    #[arg(long)]
    tol_residual: Option<f64>,
    /// Quadrature error target per integral.
    #[arg(long)]
    tol_quadrature: Option<f64>,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Sampled,
}

#[derive(Args)]
struct DensityArgs {
    /// Named set (`half-space`, `cusp(3)`, `complement-of(ball)`, ...) or
    /// a JSON set description.
    #[arg(long, conflicts_with = "form")]
    set: Option<String>,
    /// Zero set of a form (with `--eps`).
    #[arg(long)]
    form: Option<String>,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    /// Probe point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
    /// `r0,count`: radii r0·2^{-k}, k < count.
    #[arg(long, default_value = "0.4,8")]
    radii: String,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Verdict margin around m.
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Subcommand)]
enum CartanCmd {
    /// Maurer-Cartan residual of a catalog chart's Γ.
    McCheck(McCheckArgs),
    /// Develops f' = f φ(c') along a polyline.
    Integrate(IntegrateArgs),
}

#[derive(Args)]
struct McCheckArgs {
    /// One of gl1+, affine2, so2, diag2+.
    #[arg(long)]
    chart: String,
    /// Random evaluation points.
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = selftest::SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol_residual: f64,
}

#[derive(Args)]
struct IntegrateArgs {
    /// φ, a 1-form literal or file.
    #[arg(long)]
    phi: String,
    /// Polyline vertices `x,y;x,y;...`.
    #[arg(long, allow_hyphen_values = true)]
    path: String,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Initial value, rows separated by `;` (identity by default).
    #[arg(long, allow_hyphen_values = true)]
    f0: Option<String>,
    /// Agreement required between successive step halvings.
    #[arg(long)]
    tol_halving: Option<f64>,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Subcommand)]
enum LabCmd {
    Thm31(LabArgs),
    Tangency(LabArgs),
    Cor52(LabArgs),
}

#[derive(Args)]
struct LabArgs {
    /// JSON config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the density seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the samples per radius.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

/// Errors before any computation (bad flags, literals, configs) exit with 2;
/// errors during it exit with 1.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<superform::Error> for Failure {
    fn from(e: superform::Error) -> Self {
        Failure::Usage(e.into())
    }
}

trait RunContext<T> {
    fn run_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> RunContext<T> for Result<T, E> {
    fn run_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Run(e.into()))
    }
}

struct Outcome {
    status: Status,
    summary: String,
    config: Value,
    seed: Option<u64>,
    tolerances: BTreeMap<String, f64>,
    result: Value,
    tables: Vec<Table>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Forms(FormsCmd::Check(a)) => forms_check(a),
        Command::Ded(DedCmd::Verify(a)) => ded_verify(a),
        Command::Density(a) => density(a),
        Command::Cartan(CartanCmd::McCheck(a)) => mc_check(a),
        Command::Cartan(CartanCmd::Integrate(a)) => integrate(a),
        Command::Lab(cmd) => lab(cmd),
        Command::Selftest(a) => run_selftest(a),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let manifest = RunManifest {
        command: std::env::args().collect(),
        config: outcome.config,
        seed: outcome.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        tolerances: outcome.tolerances,
    };
    let report = Report { manifest: &manifest, status: outcome.status, summary: &outcome.summary, result: &outcome.result };
    if let Err(e) = write_outputs(&cli.out, &report, &outcome.tables) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let tag = match outcome.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::HypothesisNotMet => "HYPOTHESIS-NOT-MET",
    };
    println!("{tag}: {} (report in {})", outcome.summary, cli.out.display());
    if outcome.status == Status::Pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn tolerances(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn formatted(form: &superform::MatrixForm) -> Value {
    format_form(form).map(Value::String).unwrap_or(Value::Null)
}

fn forms_check(a: &FormsCheckArgs) -> Result<Outcome, Failure> {
    let mut checks = serde_json::Map::new();
    let mut all = true;
    let mut summary = Vec::new();
    if let Some(count) = a.random {
        let (ok, detail) = selftest::algebra_identities(count, a.seed).run_err()?;
        all &= ok;
        checks.insert("corpus".into(), json!({ "count": count, "passed": ok, "detail": detail }));
        summary.push(detail);
    }
    if let Some(form_arg) = &a.form {
        let src = read_source(form_arg)?;
        let others: Vec<Source> = a.other.iter().chain(&a.third).map(|s| read_source(s)).collect::<anyhow::Result<_>>()?;
        let mut all_src: Vec<&Source> = vec![&src];
        all_src.extend(others.iter());
        let dom = resolve_domain(a.domain.domain.as_deref(), a.domain.dim, &all_src)?;
        let lam = load_form(&src, dom.clone(), None)?;
        let dl = lam.d().run_err()?;
        let dd_zero = dl.d().run_err()?.is_exactly_zero();
        all &= dd_zero;
        checks.insert("form".into(), formatted(&lam));
        checks.insert("degree".into(), json!(lam.degree()));
        checks.insert("d".into(), formatted(&dl));
        checks.insert("dd_zero".into(), json!(dd_zero));
        summary.push(format!("dd = 0: {dd_zero}"));
        if let Some(other) = others.first() {
            let mu = load_form(other, dom.clone(), None)?;
            let sign = if lam.degree() % 2 == 0 { Coeff::int(1) } else { Coeff::int(-1) };
            let lhs = lam.wedge(&mu).run_err()?.d().run_err()?;
            let rhs = dl.wedge(&mu).run_err()?.add(&lam.wedge(&mu.d().run_err()?).run_err()?.scale(&sign)).run_err()?;
            let leibniz = lhs == rhs;
            all &= leibniz;
            checks.insert("leibniz".into(), json!(leibniz));
            summary.push(format!("Leibniz: {leibniz}"));
            if let Some(third) = others.get(1) {
                let nu = load_form(third, dom.clone(), None)?;
                let assoc = lam.wedge(&mu).run_err()?.wedge(&nu).run_err()? == lam.wedge(&mu.wedge(&nu).run_err()?).run_err()?;
                all &= assoc;
                checks.insert("associativity".into(), json!(assoc));
                summary.push(format!("associativity: {assoc}"));
            }
        }
        if let Some(map_arg) = &a.map {
            let msrc = read_source(map_arg)?;
            let source = match &a.map_source {
                Some(s) => Arc::new(parse_domain(s, None)?),
                None => resolve_domain(None, None, &[&msrc])?,
            };
            let map = load_map(&msrc, source, dom.clone())?;
            let pulled = lam.pullback(&map).run_err()?;
            let commutes = pulled.d().run_err()? == dl.pullback(&map).run_err()?;
            all &= commutes;
            checks.insert("pullback".into(), formatted(&pulled));
            checks.insert("pullback_commutes_with_d".into(), json!(commutes));
            summary.push(format!("f^*d = d f^*: {commutes}"));
        }
    }
    if checks.is_empty() {
        return Err(Failure::Usage(anyhow!("nothing to check: pass --form and/or --random")));
    }
    Ok(Outcome {
        status: status(all),
        summary: summary.join("; "),
        config: json!({ "form": a.form, "other": a.other, "third": a.third, "map": a.map, "map_source": a.map_source,
                        "random": a.random, "domain": a.domain.domain, "dim": a.domain.dim }),
        seed: a.random.map(|_| a.seed),
        tolerances: BTreeMap::new(),
        result: Value::Object(checks),
        tables: Vec::new(),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(arg: &str) -> anyhow::Result<T> {
    let src = read_source(arg)?;
    serde_json::from_str(&src.text).with_context(|| format!("parsing JSON from {}", src.origin))
}

fn ded_verify(a: &DedVerifyArgs) -> Result<Outcome, Failure> {
    let ls = read_source(&a.lambda)?;
    let cs = read_source(&a.candidate)?;
    let dom = resolve_domain(a.domain.domain.as_deref(), a.domain.dim, &[&ls, &cs])?;
    let lambda = load_form(&ls, dom.clone(), None)?;
    let candidate = load_form(&cs, dom, Some(lambda.degree() + 1))?;
    let mut spec: BatterySpec = match &a.battery {
        Some(b) => read_json(b)?,
        None => BatterySpec::default(),
    };
    if let Some(t) = a.tol_residual {
        spec.tolerance = t;
    }
    if let Some(t) = a.tol_quadrature {
        spec.quadrature.tolerance = t;
    }
    let w = verify_ded(&lambda, &candidate, &spec).run_err()?;
    let mut table = Table::new("ded_residuals", &["test", "center", "radius", "beta", "row", "col", "residual", "quadrature_bound"]);
    let mut tests = Vec::new();
    for (k, ((t, r), b)) in w.battery.iter().zip(&w.residuals).zip(&w.quadrature_bounds).enumerate() {
        let beta = t.bump.beta.indices().to_vec();
        table.push(vec![
            k.to_string(),
            format!("{:?}", t.bump.center),
            t.bump.radius.to_string(),
            format!("{beta:?}"),
            (t.row + 1).to_string(),
            (t.col + 1).to_string(),
            format!("{r:e}"),
            format!("{b:e}"),
        ]);
        tests.push(json!({ "center": t.bump.center, "radius": t.bump.radius, "beta": beta,
                           "row": t.row + 1, "col": t.col + 1, "residual": r, "quadrature_bound": b }));
    }
    let passed = w.passed();
    let summary = format!(
        "{} tests, max residual {:.3e} (tolerance {:e}){}",
        w.battery.len(),
        w.max_residual(),
        w.tolerance,
        if passed { ", consistent with the candidate being the DED of λ" } else { "" }
    );
    Ok(Outcome {
        status: status(passed),
        summary,
        config: json!({ "lambda": ls.text, "candidate": cs.text, "domain": lambda.domain().bounds(), "battery": spec }),
        seed: None,
        tolerances: tolerances(&[("residual", spec.tolerance), ("quadrature", spec.quadrature.tolerance)]),
        result: json!({ "passed": passed, "max_residual": w.max_residual(), "tolerance": w.tolerance, "tests": tests }),
        tables: vec![table],
    })
}

fn density(a: &DensityArgs) -> Result<Outcome, Failure> {
    let point = parse_point(&a.point)?;
    let dim = a.domain.dim.unwrap_or(point.len());
    if point.len() != dim {
        return Err(Failure::Usage(anyhow!("point has {} coordinates, expected {dim}", point.len())));
    }
    let (r0, count) = a
        .radii
        .split_once(',')
        .ok_or_else(|| anyhow!("--radii expects r0,count"))
        .and_then(|(r, c)| Ok((input::parse_f64(r)?, c.trim().parse::<usize>().context("radius count")?)))?;
    let schedule = Schedule { r0, count };
    let (set, set_desc): (PointSet, Value) = match (&a.set, &a.form) {
        (Some(s), None) => {
            let spec: SetSpec = if s.trim_start().starts_with('{') { read_json(s)? } else { SetSpec::parse(s, dim)? };
            let desc = serde_json::to_value(&spec).map_err(anyhow::Error::from)?;
            (canonical_set(&spec)?, desc)
        }
        (None, Some(f)) => {
            let src = read_source(f)?;
            let domain = match &a.domain.domain {
                Some(d) => Arc::new(parse_domain(d, Some(dim))?),
                None => Arc::new(ChartDomain::cube(dim, -2.0, 2.0)?),
            };
            let form = load_form(&src, domain, None)?;
            (PointSet::zero_set(&form, a.eps), json!({ "kind": "zero-set", "form": src.text, "eps": a.eps, "domain": form.domain().bounds() }))
        }
        _ => return Err(Failure::Usage(anyhow!("pass exactly one of --set and --form"))),
    };
    if set.dim() != dim {
        return Err(Failure::Usage(anyhow!("set is {}-dimensional but the point has {dim} coordinates", set.dim())));
    }
    let mode = match a.mode {
        Mode::Auto => SamplingMode::Auto,
        Mode::Sampled => SamplingMode::Sampled,
    };
    let rep = density_degree(&set, &point, &schedule, a.samples, a.seed, mode).run_err()?;
    let mut table = Table::new("density", &["r", "h", "ci_lo", "ci_hi", "samples", "exact"]);
    for d in &rep.deficits {
        table.push(vec![
            format!("{:e}", d.radius),
            format!("{:e}", d.estimate),
            format!("{:e}", d.ci_lo),
            format!("{:e}", d.ci_hi),
            d.samples.to_string(),
            d.exact.to_string(),
        ]);
    }
    let verdicts: BTreeMap<String, _> = (1..=dim + 1).map(|m| (m.to_string(), classify(&rep, m as f64, a.margin))).collect();
    let summary = match (rep.exact_zero, rep.slope, rep.slope_se) {
        (true, _, _) => "all deficits exactly zero".to_string(),
        (false, Some(s), Some(se)) => format!("fitted density degree {s:.3} ± {se:.3}"),
        _ => "too few nonzero deficits to fit a slope".to_string(),
    };
    Ok(Outcome {
        status: Status::Pass,
        summary,
        config: json!({ "set": set_desc, "point": point, "schedule": schedule, "samples": a.samples, "mode": mode, "margin": a.margin }),
        seed: Some(a.seed),
        tolerances: tolerances(&[("margin", a.margin), ("zero_eps", a.eps)]),
        result: json!({ "set": set.label(), "slope": rep.slope, "slope_se": rep.slope_se, "exact_zero": rep.exact_zero,
                        "degree": rep.degree(), "cap": rep.cap, "verdicts": verdicts, "deficits": rep.deficits }),
        tables: vec![table],
    })
}

fn mc_check(a: &McCheckArgs) -> Result<Outcome, Failure> {
    let g = LieGroupChart::catalog(&a.chart)?;
    let gamma = maurer_cartan(&g).run_err()?;
    let res = mc_residual(&gamma).run_err()?;
    let exact_zero = res.is_exactly_zero();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..a.points {
        let u: Vec<f64> = g.chart().bounds().iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        worst = worst.max(res.max_abs_at(&u).run_err()?);
    }
    let passed = exact_zero || worst < a.tol_residual;
    Ok(Outcome {
        status: status(passed),
        summary: format!("{}: symbolic zero {exact_zero}, max residual {worst:.2e} at {} points", a.chart, a.points),
        config: json!({ "chart": a.chart, "points": a.points }),
        seed: Some(a.seed),
        tolerances: tolerances(&[("residual", a.tol_residual)]),
        result: json!({ "chart": a.chart, "gamma": formatted(&gamma), "exact_zero": exact_zero, "max_residual": worst,
                        "chart_domain": g.chart().bounds() }),
        tables: Vec::new(),
    })
}

fn integrate(a: &IntegrateArgs) -> Result<Outcome, Failure> {
    let src = read_source(&a.phi)?;
    let path = parse_points(&a.path)?;
    let dim = a.domain.dim.or_else(|| path.first().map(|p| p.len()));
    let dom = resolve_domain(a.domain.domain.as_deref(), dim, &[&src])?;
    let phi = load_form(&src, dom, Some(1))?;
    if phi.degree() != 1 {
        bail_usage("φ must be a 1-form")?;
    }
    let f0 = a.f0.as_deref().map(parse_matrix).transpose()?;
    let mut opts = DevelopOptions { step: a.step, ..DevelopOptions::default() };
    if let Some(t) = a.tol_halving {
        opts.tolerance = t;
    }
    let dev = cartan_integrate(&phi, &path, f0.as_ref(), &opts).run_err()?;
    let mut table = Table::new("vertices", &["vertex", "point", "f"]);
    for (k, (p, m)) in path.iter().zip(&dev.vertices).enumerate() {
        table.push(vec![k.to_string(), format!("{p:?}"), format!("{:?}", matrix_rows(m))]);
    }
    Ok(Outcome {
        status: Status::Pass,
        summary: format!("f(end) = {:?} at step {:e}", matrix_rows(&dev.end), dev.step),
        config: json!({ "phi": src.text, "path": path, "f0": f0.as_ref().map(matrix_rows), "domain": phi.domain().bounds(), "options": opts }),
        seed: None,
        tolerances: tolerances(&[("halving", opts.tolerance)]),
        result: json!({ "end": matrix_rows(&dev.end), "step": dev.step, "halving_gap": dev.halving_gap,
                        "vertices": dev.vertices.iter().map(matrix_rows).collect::<Vec<_>>() }),
        tables: vec![table],
    })
}

fn bail_usage(msg: &str) -> Result<(), Failure> {
    Err(Failure::Usage(anyhow!("{msg}")))
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> anyhow::Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

fn lab(cmd: &LabCmd) -> Result<Outcome, Failure> {
    let (report, config, tols, seed) = match cmd {
        LabCmd::Thm31(a) => {
            let mut cfg: Thm31Config = load_config(&a.config)?;
            a.seed.inspect(|s| cfg.density.seed = *s);
            a.samples.inspect(|n| cfg.density.samples = *n);
            let tols = tolerances(&[("norm", cfg.tolerance), ("zero_eps", cfg.density.zero_eps), ("margin", cfg.density.margin)]);
            (run_thm31(&cfg).run_err()?, to_value(&cfg)?, tols, cfg.density.seed)
        }
        LabCmd::Tangency(a) => {
            let mut cfg: TangencyConfig = load_config(&a.config)?;
            a.seed.inspect(|s| cfg.density.seed = *s);
            a.samples.inspect(|n| cfg.density.samples = *n);
            let tols = tolerances(&[("norm", cfg.tolerance), ("zero_eps", cfg.density.zero_eps), ("margin", cfg.density.margin)]);
            (run_tangency(&cfg).run_err()?, to_value(&cfg)?, tols, cfg.density.seed)
        }
        LabCmd::Cor52(a) => {
            let mut cfg: Cor52Config = load_config(&a.config)?;
            a.seed.inspect(|s| cfg.density.seed = *s);
            a.samples.inspect(|n| cfg.density.samples = *n);
            let tols = tolerances(&[
                ("agreement", cfg.agreement_eps),
                ("mc_threshold", cfg.mc_threshold),
                ("zero_eps", cfg.density.zero_eps),
                ("margin", cfg.density.margin),
            ]);
            (run_cor52(&cfg).run_err()?, to_value(&cfg)?, tols, cfg.density.seed)
        }
    };
    Ok(lab_outcome(report, config, tols, seed))
}

fn to_value<T: serde::Serialize>(v: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn lab_outcome(report: ExperimentReport, config: Value, tolerances: BTreeMap<String, f64>, seed: u64) -> Outcome {
    let mut table = Table::new("probes", &["point", "slope", "slope_se", "exact_zero", "verdict", "norm"]);
    for p in &report.probes {
        table.push(vec![
            format!("{:?}", p.point),
            p.slope.map_or(String::new(), |s| s.to_string()),
            p.slope_se.map_or(String::new(), |s| s.to_string()),
            p.exact_zero.to_string(),
            format!("{:?}", p.verdict).to_lowercase(),
            p.norm.to_string(),
        ]);
    }
    let status = match report.outcome {
        LabOutcome::Pass => Status::Pass,
        LabOutcome::Fail => Status::Fail,
        LabOutcome::HypothesisNotMet => Status::HypothesisNotMet,
    };
    let superdense = report.probes.iter().filter(|p| p.verdict == Verdict::Superdense).count();
    let summary = format!(
        "{}: {} probes, {superdense} superdense; {}",
        report.harness,
        report.probes.len(),
        report.notes.join("; ")
    );
    Outcome {
        status,
        summary,
        config,
        seed: Some(seed),
        tolerances,
        result: serde_json::to_value(&report).unwrap_or(Value::Null),
        tables: vec![table],
    }
}

fn run_selftest(a: &SelftestArgs) -> Result<Outcome, Failure> {
    let all: [fn() -> selftest::CriterionResult; 8] = [
        selftest::criterion_1,
        selftest::criterion_2,
        selftest::criterion_3,
        selftest::criterion_4,
        selftest::criterion_5,
        selftest::criterion_6,
        selftest::criterion_7,
        selftest::criterion_8,
    ];
    if let Some(bad) = a.only.iter().find(|k| !(1..=8).contains(*k)) {
        return Err(Failure::Usage(anyhow!("no criterion {bad}; ids are 1..=8")));
    }
    let mut results = Vec::new();
    for (k, f) in all.iter().enumerate() {
        let id = k as u8 + 1;
        if a.only.is_empty() || a.only.contains(&id) {
            let r = f();
            println!("{}", r.line());
            results.push(r);
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let mut table = Table::new("selftest", &["id", "name", "passed", "seconds", "detail"]);
    for r in &results {
        table.push(vec![r.id.to_string(), r.name.clone(), r.passed.to_string(), format!("{:.2}", r.seconds), r.detail.clone()]);
    }
    Ok(Outcome {
        status: status(passed == results.len()),
        summary: format!("{passed}/{} criteria pass", results.len()),
        config: json!({ "only": a.only }),
        seed: Some(selftest::SEED),
        tolerances: BTreeMap::new(),
        result: serde_json::to_value(&results).map_err(anyhow::Error::from)?,
        tables: vec![table],
    })
}
