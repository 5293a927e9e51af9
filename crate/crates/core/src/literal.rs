//! Text syntax for polynomials and matrix forms.
//!
//! Polynomials: sums of terms `c * x1^a1 * … * xM^aM`, e.g.
//! `3/2*x1^2*x2 - x3`. Coefficients are integers or rationals (exact) or
//! decimals / scientific notation (float). Exponents may be negative.
//!
//! Forms: `[[ <entry>, … ], [ … ]]`, each entry a sum of terms
//! `<coefficient> d(i,j,…)` where `d(i,j)` names `dx_i ∧ dx_j`. A
//! multi-term coefficient must be parenthesised: `(x1 + x2) d(2)`. A
//! bare entry without brackets is a 1×1 form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num::{BigInt, BigRational};

use crate::error::{Error, Result};
use crate::exterior::MultiIndex;
use crate::field::{ChartDomain, Coeff, Polynomial, ScalarField};
use crate::form::MatrixForm;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

type FormTerms = BTreeMap<Vec<usize>, Polynomial>;

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> Self {
        Parser { src: src.as_bytes(), pos: 0, dim }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn unsigned(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an integer");
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse().map_err(|_| Error::Parse { position: start, message: format!("integer {s} out of range") })
    }

    fn exponent(&mut self) -> Result<i32> {
        if !self.eat(b'^') {
            return Ok(1);
        }
        let neg = self.eat(b'-');
        let paren = !neg && self.eat(b'(');
        let neg = neg || (paren && self.eat(b'-'));
        let e = self.unsigned()?;
        if paren {
            self.expect(b')')?;
        }
        let e = i32::try_from(e).map_err(|_| Error::Parse { position: self.pos, message: "exponent too large".into() })?;
        Ok(if neg { -e } else { e })
    }

    fn number(&mut self) -> Result<Coeff> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        let mut float = false;
        if self.src.get(self.pos) == Some(&b'.') {
            float = true;
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            float = true;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            digits(self);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if float {
            return text
                .parse::<f64>()
                .map(Coeff::Float)
                .map_err(|_| Error::Parse { position: start, message: format!("bad number '{text}'") });
        }
        let numer: BigInt = text
            .parse()
            .map_err(|_| Error::Parse { position: start, message: format!("bad number '{text}'") })?;
        // '/' directly followed by a digit is a rational literal
        let save = self.pos;
        if self.eat(b'/') {
            self.skip_ws();
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                let denom_pos = self.pos;
                let denom = BigInt::from(self.unsigned()?);
                if denom == BigInt::from(0) {
                    return Err(Error::Parse { position: denom_pos, message: "zero denominator".into() });
                }
                return Ok(Coeff::Exact(BigRational::new(numer, denom)));
            }
            self.pos = save;
        }
        Ok(Coeff::Exact(BigRational::from_integer(numer)))
    }

    fn factor(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'x') => {
                let at = self.pos;
                self.pos += 1;
                let i = self.unsigned()? as usize;
                if i == 0 || i > self.dim {
                    return Err(Error::Parse {
                        position: at,
                        message: format!("variable x{i} outside x1..x{}", self.dim),
                    });
                }
                let e = self.exponent()?;
                let mut ex = vec![0; self.dim];
                ex[i - 1] = e;
                Ok(Polynomial::monomial(self.dim, ex, Coeff::one()))
            }
            Some(b'(') => {
                self.pos += 1;
                let p = self.sum()?;
                self.expect(b')')?;
                let at = self.pos;
                let e = self.exponent()?;
                p.powi(e).ok_or(Error::Parse {
                    position: at,
                    message: "negative power of a multi-term polynomial".into(),
                })
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let c = self.number()?;
                Ok(Polynomial::constant(self.dim, c))
            }
            _ => self.err("expected a number, a variable or '('"),
        }
    }

    // factor ('*' factor)*; stops before a trailing '* d(' so that the form
    // parser can pick up the basis covector.
    fn product(&mut self) -> Result<Polynomial> {
        let mut acc = self.factor()?;
        loop {
            let save = self.pos;
            if !self.eat(b'*') {
                break;
            }
            if self.peek() == Some(b'd') {
                self.pos = save;
                break;
            }
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn sum(&mut self) -> Result<Polynomial> {
        let mut acc = Polynomial::zero(self.dim);
        let mut first = true;
        loop {
            let neg = if self.eat(b'-') {
                true
            } else if self.eat(b'+') || first {
                false
            } else {
                break;
            };
            first = false;
            let t = self.product()?;
            acc = if neg { acc.sub(&t) } else { acc.add(&t) };
        }
        Ok(acc)
    }

    fn basis(&mut self) -> Result<Vec<usize>> {
        let at = self.pos;
        self.expect(b'd')?;
        self.expect(b'(')?;
        let mut ix = Vec::new();
        if !self.eat(b')') {
            loop {
                ix.push(self.unsigned()? as usize);
                if self.eat(b')') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        MultiIndex::new(self.dim, ix.clone())
            .map_err(|e| Error::Parse { position: at, message: e.to_string() })?;
        Ok(ix)
    }

    fn entry(&mut self) -> Result<FormTerms> {
        let mut terms = FormTerms::new();
        let mut first = true;
        loop {
            let neg = if self.eat(b'-') {
                true
            } else if self.eat(b'+') || first {
                false
            } else {
                break;
            };
            first = false;
            let coeff = if self.peek() == Some(b'd') {
                Polynomial::constant(self.dim, 1)
            } else {
                self.product()?
            };
            self.eat(b'*');
            let alpha = if self.peek() == Some(b'd') { self.basis()? } else { Vec::new() };
            let coeff = if neg { coeff.neg() } else { coeff };
            let slot = terms.entry(alpha).or_insert_with(|| Polynomial::zero(self.dim));
            *slot = slot.add(&coeff);
        }
        Ok(terms)
    }

    fn matrix(&mut self) -> Result<Vec<Vec<FormTerms>>> {
        if self.peek() != Some(b'[') {
            return Ok(vec![vec![self.entry()?]]);
        }
        self.expect(b'[')?;
        let mut rows = Vec::new();
        loop {
            self.expect(b'[')?;
            let mut row = vec![self.entry()?];
            while self.eat(b',') {
                row.push(self.entry()?);
            }
            self.expect(b']')?;
            rows.push(row);
            if !self.eat(b',') {
                break;
            }
        }
        self.expect(b']')?;
        Ok(rows)
    }
}

/// Parses a polynomial in `dim` variables.
pub fn parse_polynomial(src: &str, dim: usize) -> Result<Polynomial> {
    let mut p = Parser::new(src, dim);
    let poly = p.sum()?;
    if !p.at_end() {
        return p.err("unexpected trailing input");
    }
    Ok(poly)
}

/// Parses a matrix form on `domain`. The degree is read off the `d(...)`
/// terms; `degree` is required only when every coefficient is zero and
/// must agree with the terms otherwise.
pub fn parse_form(src: &str, domain: Arc<ChartDomain>, degree: Option<usize>) -> Result<MatrixForm> {
    let dim = domain.dim();
    let mut p = Parser::new(src, dim);
    let rows = p.matrix()?;
    if !p.at_end() {
        return p.err("unexpected trailing input");
    }
    let size = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != size) {
        return Err(Error::Parse {
            position: 0,
            message: format!("row {} has {} entries, expected {size}", bad + 1, rows[bad].len()),
        });
    }
    let mut found: Option<usize> = degree;
    for (alpha, poly) in rows.iter().flatten().flat_map(|e| e.iter()) {
        if poly.is_zero() {
            continue;
        }
        match found {
            Some(d) if d != alpha.len() => {
                return Err(Error::Parse {
                    position: 0,
                    message: format!("mixed degrees: d{:?} in a degree-{d} form", alpha),
                })
            }
            _ => found = Some(alpha.len()),
        }
    }
    let degree = found.unwrap_or(0);
    let mut form = MatrixForm::zero(size, degree, domain.clone())?;
    for (i, row) in rows.into_iter().enumerate() {
        for (j, entry) in row.into_iter().enumerate() {
            for (alpha, poly) in entry {
                if poly.is_zero() {
                    continue;
                }
                let mi = MultiIndex::new(dim, alpha)?;
                form.add_term(i, j, mi, ScalarField::polynomial(domain.clone(), poly)?)?;
            }
        }
    }
    Ok(form)
}

/// Highest `xK` variable index mentioned in a literal (0 if none).
pub fn max_variable_index(src: &str) -> usize {
    let b = src.as_bytes();
    let mut best = 0;
    for (k, &c) in b.iter().enumerate() {
        if c == b'x' {
            let digits: String = b[k + 1..].iter().take_while(|c| c.is_ascii_digit()).map(|&c| c as char).collect();
            if let Ok(i) = digits.parse::<usize>() {
                best = best.max(i);
            }
        }
    }
    best
}

/// Highest axis index named inside `d(...)` groups (0 if none).
pub fn max_basis_index(src: &str) -> usize {
    let mut best = 0;
    let mut rest = src;
    while let Some(k) = rest.find("d(") {
        rest = &rest[k + 2..];
        let end = rest.find(')').unwrap_or(rest.len());
        for t in rest[..end].split(',') {
            if let Ok(i) = t.trim().parse::<usize>() {
                best = best.max(i);
            }
        }
    }
    best
}

fn write_basis(out: &mut String, alpha: &MultiIndex) {
    out.push_str("d(");
    for (k, i) in alpha.indices().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{i}");
    }
    out.push(')');
}

/// Prints a form in the literal syntax. Fails on numeric coefficients,
/// which have no textual representation.
pub fn format_form(form: &MatrixForm) -> Result<String> {
    let mut out = String::from("[");
    for i in 0..form.size() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for j in 0..form.size() {
            if j > 0 {
                out.push_str(", ");
            }
            let entry = form.entry(i, j);
            if entry.is_empty() {
                out.push('0');
                continue;
            }
            for (n, (alpha, f)) in entry.iter().enumerate() {
                let p = f.as_polynomial().ok_or_else(|| {
                    Error::Capability("numeric coefficients have no literal form".into())
                })?;
                if n > 0 {
                    out.push_str(" + ");
                }
                let text = p.to_string();
                let unit = p.as_constant() == Some(Coeff::one());
                match (alpha.degree(), unit) {
                    (_, true) if alpha.degree() > 0 => write_basis(&mut out, alpha),
                    (0, _) => {
                        let _ = write!(out, "({text})");
                    }
                    _ => {
                        let _ = write!(out, "({text}) ");
                        write_basis(&mut out, alpha);
                    }
                }
            }
        }
        out.push(']');
    }
    out.push(']');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(dim: usize) -> Arc<ChartDomain> {
        Arc::new(ChartDomain::cube(dim, -1.0, 1.0).unwrap())
    }

    #[test]
    fn polynomial_literals() {
        let p = parse_polynomial("3/2*x1^2*x2 - x3", 3).unwrap();
        assert_eq!(p.to_string(), "-x3 + 3/2*x1^2*x2");
        assert_eq!(parse_polynomial(&p.to_string(), 3).unwrap(), p);
        let q = parse_polynomial("(x1 + 1)^2 - 2*x1", 1).unwrap();
        assert_eq!(q, parse_polynomial("x1^2 + 1", 1).unwrap());
        let f = parse_polynomial("1.5*x1 + 2.0", 1).unwrap();
        assert!(!f.is_exact());
        assert_eq!(parse_polynomial(&f.to_string(), 1).unwrap(), f);
        let laurent = parse_polynomial("x1^-1 * x2^(-2)", 2).unwrap();
        assert_eq!(laurent.to_string(), "x1^-1*x2^-2");
    }

    #[test]
    fn polynomial_errors_carry_positions() {
        match parse_polynomial("x1 + x4", 3) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_polynomial("x1 +", 2).is_err());
        assert!(parse_polynomial("1/0", 1).is_err());
        assert!(parse_polynomial("(x1 + 1)^-1", 1).is_err());
        assert!(parse_polynomial("x1 x2", 2).is_err());
    }

    #[test]
    fn form_literals_round_trip() {
        let d = dom(3);
        let src = "[[ (x1 + x2) d(1,2) + x3 d(2,3), 0 ], [ -d(1,3), 3/2*x1^2*d(2,3) ]]";
        let form = parse_form(src, d.clone(), None).unwrap();
        assert_eq!(form.size(), 2);
        assert_eq!(form.degree(), 2);
        let text = format_form(&form).unwrap();
        assert_eq!(parse_form(&text, d.clone(), None).unwrap(), form);
        assert_eq!(format_form(&parse_form(&text, d, None).unwrap()).unwrap(), text);
    }

    #[test]
    fn scalar_shorthand_and_zero_forms() {
        let d = dom(2);
        let f = parse_form("x1 d(2)", d.clone(), None).unwrap();
        assert_eq!(f.size(), 1);
        assert_eq!(f.degree(), 1);
        let z = parse_form("[[0, 0], [0, 0]]", d.clone(), Some(1)).unwrap();
        assert!(z.is_exactly_zero());
        assert_eq!(z.degree(), 1);
        let fun = parse_form("x1*x2", d, None).unwrap();
        assert_eq!(fun.degree(), 0);
    }

    #[test]
    fn form_errors() {
        let d = dom(2);
        assert!(parse_form("[[d(1), d(1,2)]]", d.clone(), None).is_err());
        assert!(parse_form("[[d(2,1)]]", d.clone(), None).is_err());
        assert!(parse_form("[[d(3)]]", d.clone(), None).is_err());
        assert!(parse_form("[[d(1), 0]]", d.clone(), None).is_err());
        assert!(parse_form("[[d(1)]", d, None).is_err());
        assert_eq!(max_variable_index("x12 + x3 d(1)"), 12);
        assert_eq!(max_basis_index("x1 d(1,4) + d(2)"), 4);
    }
}
