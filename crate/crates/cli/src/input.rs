//! Parsing of command-line values: domains, points, paths, matrices and
//! form literals given inline or as files.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use superform::literal::{max_basis_index, max_variable_index, parse_form, parse_polynomial};
use superform::{ChartDomain, ChartMap, Error, MatrixForm, Polynomial};

/// A literal given inline, or the contents of the file it names.
pub struct Source {
    pub origin: String,
    pub text: String,
}

pub fn read_source(arg: &str) -> Result<Source> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        Ok(Source { origin: arg.to_string(), text: text.trim_end().to_string() })
    } else {
        Ok(Source { origin: "<inline>".into(), text: arg.to_string() })
    }
}

/// Turns a parse error into a message pointing at the offending line and
/// column.
pub fn annotate(src: &Source, err: Error) -> anyhow::Error {
    let Error::Parse { position, message } = &err else {
        return anyhow!(err);
    };
    let pos = (*position).min(src.text.len());
    let before = &src.text[..pos];
    let line_no = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |k| k + 1);
    let line_end = src.text[pos..].find('\n').map_or(src.text.len(), |k| pos + k);
    let col = src.text[line_start..pos].chars().count() + 1;
    let caret = " ".repeat(col - 1);
    anyhow!(
        "{}:{line_no}:{col}: parse error: {message}\n  {}\n  {caret}^",
        src.origin,
        &src.text[line_start..line_end]
    )
}

/// `lo:hi,lo:hi,...`; a single `lo:hi` is repeated over `dim` axes.
pub fn parse_domain(s: &str, dim: Option<usize>) -> Result<ChartDomain> {
    let mut bounds = Vec::new();
    for part in s.split(',') {
        let (lo, hi) = part.split_once(':').ok_or_else(|| anyhow!("domain axis `{part}` is not of the form lo:hi"))?;
        bounds.push((parse_f64(lo)?, parse_f64(hi)?));
    }
    if bounds.len() == 1 {
        if let Some(d) = dim {
            bounds = vec![bounds[0]; d];
        }
    }
    if let Some(d) = dim {
        if bounds.len() != d {
            bail!("domain has {} axes, expected {d}", bounds.len());
        }
    }
    Ok(ChartDomain::new(bounds)?)
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "pi" => Ok(std::f64::consts::PI),
        "-pi" => Ok(-std::f64::consts::PI),
        _ => t.parse().map_err(|_| anyhow!("`{t}` is not a number")),
    }
}

/// Comma-separated coordinates.
pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

/// Points separated by `;`.
pub fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_point).collect()
}

/// Square matrix with rows separated by `;`.
pub fn parse_matrix(s: &str) -> Result<DMatrix<f64>> {
    let rows = parse_points(s)?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        bail!("matrix `{s}` is not square");
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Dimension implied by the literals, or the explicit one.
pub fn infer_dim(explicit: Option<usize>, sources: &[&Source]) -> Result<usize> {
    if let Some(d) = explicit {
        return Ok(d);
    }
    let d = sources
        .iter()
        .map(|s| max_variable_index(&s.text).max(max_basis_index(&s.text)))
        .max()
        .unwrap_or(0);
    if d == 0 {
        bail!("cannot infer the dimension from the literals; pass --dim or --domain");
    }
    Ok(d)
}

/// The chart domain from `--domain`/`--dim`, defaulting to `[-1, 1]^M`.
pub fn resolve_domain(domain: Option<&str>, dim: Option<usize>, sources: &[&Source]) -> Result<Arc<ChartDomain>> {
    let d = match domain {
        Some(s) => parse_domain(s, dim)?,
        None => ChartDomain::cube(infer_dim(dim, sources)?, -1.0, 1.0)?,
    };
    Ok(Arc::new(d))
}

pub fn load_form(src: &Source, domain: Arc<ChartDomain>, degree: Option<usize>) -> Result<MatrixForm> {
    parse_form(&src.text, domain, degree).map_err(|e| annotate(src, e))
}

/// Map literal: polynomial components separated by `;`.
pub fn load_map(src: &Source, source: Arc<ChartDomain>, target: Arc<ChartDomain>) -> Result<ChartMap> {
    let mut comps: Vec<Polynomial> = Vec::new();
    let mut offset = 0;
    for part in src.text.split(';') {
        let p = parse_polynomial(part, source.dim()).map_err(|e| match e {
            Error::Parse { position, message } => annotate(src, Error::Parse { position: position + offset, message }),
            other => anyhow!(other),
        })?;
        comps.push(p);
        offset += part.len() + 1;
    }
    if comps.len() != target.dim() {
        bail!("map has {} components but the target is {}-dimensional", comps.len(), target.dim());
    }
    Ok(ChartMap::polynomial(source, target, comps)?)
}
