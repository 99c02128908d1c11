//! Tiny expression grammar for closed-form periodic fields:
//! sums of `c*cos(k·x)`, `c*sin(k·x)` and constants.
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := number ['*' trig] | trig
//! trig   := ('cos' | 'sin') '(' wave ')'
//! wave   := ['-'] wterm (('+' | '-') wterm)*
//! wterm  := [integer ['*']] var
//! var    := x1 … xn | y1 … yn      (x, y alias x1, y1)
//! ```
//!
//! Because every term is a trigonometric monomial the exact first and
//! second derivatives are available, which is what manufactured problems
//! need.

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, ScalarField};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub coef: f64,
    pub kind: Trig,
    /// Integer wave vector over real coordinates (x¹, y¹, x², y², …).
    pub wave: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigSeries {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn parse(src: &str) -> Result<Self> {
        Parser::new(src).series()
    }

    /// Number of real coordinates the expression refers to (even).
    pub fn real_dims(&self) -> usize {
        self.terms.iter().map(|t| t.wave.len()).max().unwrap_or(0)
    }

    fn wave_dot(wave: &[i64], x: &[f64]) -> f64 {
        wave.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| {
                    let a = Self::wave_dot(&t.wave, x);
                    t.coef
                        * match t.kind {
                            Trig::Cos => a.cos(),
                            Trig::Sin => a.sin(),
                        }
                })
                .sum::<f64>()
    }

    /// Exact real gradient, length `dims`.
    pub fn gradient(&self, x: &[f64], dims: usize) -> Vec<f64> {
        let mut g = vec![0.0; dims];
        for t in &self.terms {
            let a = Self::wave_dot(&t.wave, x);
            let d = match t.kind {
                Trig::Cos => -t.coef * a.sin(),
                Trig::Sin => t.coef * a.cos(),
            };
            for (c, &k) in t.wave.iter().enumerate() {
                g[c] += d * k as f64;
            }
        }
        g
    }

    /// Exact real Hessian, row-major `dims × dims`.
    pub fn hessian(&self, x: &[f64], dims: usize) -> Vec<f64> {
        let mut h = vec![0.0; dims * dims];
        for t in &self.terms {
            let a = Self::wave_dot(&t.wave, x);
            let d = match t.kind {
                Trig::Cos => -t.coef * a.cos(),
                Trig::Sin => -t.coef * a.sin(),
            };
            for (c, &kc) in t.wave.iter().enumerate() {
                for (e, &ke) in t.wave.iter().enumerate() {
                    h[c * dims + e] += d * (kc * ke) as f64;
                }
            }
        }
        h
    }

    /// Checks the expression fits the geometry: no variable beyond n and
    /// no dependence on an inactive coordinate.
    pub fn check_geometry(&self, geom: &GridGeometry) -> Result<()> {
        for t in &self.terms {
            if t.wave.len() > geom.real_dims() {
                return Err(Error::Expression {
                    column: 0,
                    message: format!("expression uses a coordinate beyond n = {}", geom.n()),
                });
            }
            if let Some(c) = t.wave.iter().enumerate().find(|&(c, &k)| k != 0 && !geom.is_active(c)).map(|(c, _)| c) {
                return Err(Error::Expression {
                    column: 0,
                    message: format!("expression depends on inactive coordinate {}", coord_name(c)),
                });
            }
        }
        Ok(())
    }

    pub fn sample(&self, geom: &Arc<GridGeometry>) -> Result<ScalarField> {
        self.check_geometry(geom)?;
        ScalarField::from_fn(geom.clone(), |x| self.eval(x))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: s * self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    coef: s * t.coef,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

fn coord_name(c: usize) -> String {
    format!("{}{}", if c.is_multiple_of(2) { 'x' } else { 'y' }, c / 2 + 1)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            column: self.pos + 1,
            message: message.into(),
        })
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

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", ch as char))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i == start {
            return Ok(None);
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = i;
                Ok(Some(v))
            }
            Err(_) => self.err(format!("bad number `{text}`")),
        }
    }

    fn series(&mut self) -> Result<TrigSeries> {
        let mut out = TrigSeries::zero();
        let mut sign = if self.eat(b'-') { -1.0 } else { 1.0 };
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        loop {
            self.term(sign, &mut out)?;
            if self.eat(b'+') {
                sign = 1.0;
            } else if self.eat(b'-') {
                sign = -1.0;
            } else if self.peek().is_none() {
                return Ok(out);
            } else {
                return self.err("expected `+`, `-` or end of expression");
            }
        }
    }

    fn term(&mut self, sign: f64, out: &mut TrigSeries) -> Result<()> {
        let coef = match self.number()? {
            Some(c) => {
                if !self.eat(b'*') {
                    out.constant += sign * c;
                    return Ok(());
                }
                c
            }
            None => 1.0,
        };
        let save = self.pos;
        let kind = match self.ident().as_deref() {
            Some("cos") => Trig::Cos,
            Some("sin") => Trig::Sin,
            _ => {
                self.pos = save;
                return self.err("expected a number, `cos(…)` or `sin(…)`");
            }
        };
        self.expect(b'(')?;
        let wave = self.wave()?;
        self.expect(b')')?;
        out.terms.push(TrigTerm {
            coef: sign * coef,
            kind,
            wave,
        });
        Ok(())
    }

    fn wave(&mut self) -> Result<Vec<i64>> {
        let mut wave: Vec<i64> = Vec::new();
        let mut sign = if self.eat(b'-') { -1 } else { 1 };
        loop {
            let k = match self.number()? {
                Some(v) => {
                    if v.fract() != 0.0 {
                        return self.err("wave numbers must be integers on the torus");
                    }
                    self.eat(b'*');
                    v as i64
                }
                None => 1,
            };
            let var = match self.ident() {
                Some(v) => v,
                None => return self.err("expected a coordinate such as x1 or y2"),
            };
            let c = parse_var(&var).ok_or_else(|| Error::Expression {
                column: self.pos,
                message: format!("unknown coordinate `{var}`"),
            })?;
            if wave.len() <= c {
                wave.resize((c / 2 + 1) * 2, 0);
            }
            wave[c] += sign * k;
            if self.eat(b'+') {
                sign = 1;
            } else if self.eat(b'-') {
                sign = -1;
            } else {
                return Ok(wave);
            }
        }
    }
}

fn parse_var(v: &str) -> Option<usize> {
    let (axis, rest) = v.split_at(1);
    let offset = match axis {
        "x" => 0,
        "y" => 1,
        _ => return None,
    };
    let index: usize = if rest.is_empty() { 1 } else { rest.parse().ok()? };
    (index >= 1).then(|| 2 * (index - 1) + offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = TrigSeries::parse("0.5*cos(x1) - 0.25*sin(2*x1 + y1) + 1").unwrap();
        let x = [0.3, 0.7];
        let expect = 0.5 * 0.3f64.cos() - 0.25 * (0.6f64 + 0.7).sin() + 1.0;
        assert!((e.eval(&x) - expect).abs() < 1e-15);
        assert_eq!(e.real_dims(), 2);
    }

    #[test]
    fn second_complex_coordinate() {
        let e = TrigSeries::parse("-cos(x2 - 3y1)").unwrap();
        assert_eq!(e.terms[0].wave, vec![0, -3, 1, 0]);
        assert_eq!(e.terms[0].coef, -1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = TrigSeries::parse("0.3*cos(x1 + 2 y1) + 0.2*sin(3x1) - 0.1*cos(y1)").unwrap();
        let x = [0.4, 1.1];
        let g = e.gradient(&x, 2);
        let h = e.hessian(&x, 2);
        let s = 1e-5;
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += s;
            xm[c] -= s;
            assert!(((e.eval(&xp) - e.eval(&xm)) / (2.0 * s) - g[c]).abs() < 1e-9);
            let gp = e.gradient(&xp, 2);
            let gm = e.gradient(&xm, 2);
            for d in 0..2 {
                assert!(((gp[d] - gm[d]) / (2.0 * s) - h[c * 2 + d]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TrigSeries::parse("").is_err());
        assert!(TrigSeries::parse("cos(x1").is_err());
        assert!(TrigSeries::parse("exp(x1)").is_err());
        assert!(TrigSeries::parse("cos(0.5*x1)").is_err());
        assert!(TrigSeries::parse("cos(z1)").is_err());
        let err = TrigSeries::parse("1 + + 2").unwrap_err();
        assert!(matches!(err, Error::Expression { column: 5, .. }), "{err:?}");
    }

    #[test]
    fn inactive_dependence_rejected() {
        let g = GridGeometry::new(1, vec![8, 1]).unwrap();
        assert!(TrigSeries::parse("cos(y1)").unwrap().check_geometry(&g).is_err());
        assert!(TrigSeries::parse("cos(x1)").unwrap().check_geometry(&g).is_ok());
    }
}
