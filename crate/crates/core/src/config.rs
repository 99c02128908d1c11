//! Problem configuration files.
//!
//! A config is a flat TOML document with the sections `[geometry]`,
//! `[operator]`, `[fields]`, `[path]` and `[trials]`:
//!
//! ```toml
//! [geometry]
//! n = 1
//! shape = [256, 1]          # per real coordinate x1 y1 x2 y2 …; 1 = inactive
//! z = [[1, 1, 1, 1.0, 0.0]] # optional entries [i, j, k, re, im] of A (1-based)
//!
//! [operator]
//! kind = "quotient"         # or "dhym"
//! k = 1
//! l = 0
//! # branch = "supercritical" (dhym: hypercritical | supercritical | full)
//!
//! [fields]
//! omega = "identity"        # identity | "diag 2 1" | "@file"
//! chi = "identity"
//! h = "manufactured"        # manufactured | background | expression | "@file"
//! u_star = "0.5*cos(x1)"    # manufactured solution
//! manufactured_c = 0.0
//! u_sub = "0"               # subsolution candidate
//! u_bar = "auto"            # starting potential; auto = u_sub if admissible, else 0
//!
//! [path]
//! t_step_init = 0.1
//! newton_tol = 1e-10
//!
//! [trials]
//! count = 100
//! seed = 42                 # mandatory whenever count > 0
//! ```
//!
//! Field expressions use the grammar in [`crate::expr`]; a leading `@`
//! names a raw field file (relative to the config file).

use crate::continuity::PathConfig;
use crate::equation::Equation;
use crate::error::{Error, Result};
use crate::expr::TrigSeries;
use crate::grid::{GridGeometry, HermitianField, ScalarField};
use crate::io;
use crate::linalg::CMatrix;
use crate::subsolution::TrialConfig;
use crate::symmetric::{DhymBranch, OperatorSpec};
use crate::verification::{manufactured_problem, ManufacturedProblem};
use num_complex::Complex64;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use toml::{Table, Value};

const SECTIONS: [&str; 5] = ["geometry", "operator", "fields", "path", "trials"];

/// Source text plus table, so semantic errors can point at a line.
struct Doc<'a> {
    text: &'a str,
    table: Table,
}

impl<'a> Doc<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: None,
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        for key in table.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                return Err(Error::Config {
                    key: Some(key.clone()),
                    line: find_line(text, None, key),
                    message: format!("unknown section; expected one of {SECTIONS:?}"),
                });
            }
        }
        Ok(Self { text, table })
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            key: Some(format!("{section}.{key}")),
            line: find_line(self.text, Some(section), key),
            message: message.into(),
        }
    }

    fn section(&self, name: &str) -> Option<&Table> {
        self.table.get(name).and_then(Value::as_table)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.section(section).and_then(|t| t.get(key))
    }

    fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        if let Some(t) = self.section(section) {
            for k in t.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(self.err(section, k, format!("unknown key; expected one of {allowed:?}")));
                }
            }
        }
        Ok(())
    }

    fn int(&self, section: &str, key: &str) -> Result<Option<i64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(_) => Err(self.err(section, key, "expected an integer")),
        }
    }

    fn uint(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.int(section, key)? {
            None => Ok(None),
            Some(i) if i >= 0 => Ok(Some(i as usize)),
            Some(_) => Err(self.err(section, key, "expected a non-negative integer")),
        }
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.err(section, key, "expected a number")),
        }
    }

    fn string(&self, section: &str, key: &str) -> Result<Option<String>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.err(section, key, "expected a string")),
        }
    }

    fn require<T>(&self, section: &str, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Config {
            key: Some(format!("{section}.{key}")),
            line: None,
            message: "required key is missing".into(),
        })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]` (or at top level).
fn find_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if section.is_none() && name.trim() == key {
                return Some(i + 1);
            }
            continue;
        }
        if current.as_deref() == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// How a real field is given.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Expr(TrigSeries),
    File(PathBuf),
}

/// How a Hermitian background form is given.
#[derive(Debug, Clone, PartialEq)]
pub enum FormSpec {
    Identity,
    Diagonal(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhsSpec {
    /// h from a manufactured solution u* and constant c.
    Manufactured { u_star: TrigSeries, c: f64 },
    /// h = F(ω)
    Background,
    Field(FieldSpec),
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub geometry: Arc<GridGeometry>,
    pub op: OperatorSpec,
    pub omega: FormSpec,
    pub chi: FormSpec,
    pub h: RhsSpec,
    pub u_sub: FieldSpec,
    /// None means "auto".
    pub u_bar: Option<FieldSpec>,
    pub path: PathConfig,
    /// Allowance added to the oscillation check after a solve.
    pub oscillation_allowance: f64,
    pub trials: Option<TrialConfig>,
}

impl ProblemConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; `@file` references resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let doc = Doc::parse(text)?;
        doc.check_keys("geometry", &["n", "shape", "z"])?;
        doc.check_keys("operator", &["kind", "k", "l", "branch"])?;
        doc.check_keys(
            "fields",
            &["omega", "chi", "h", "u_star", "manufactured_c", "u_sub", "u_bar"],
        )?;
        doc.check_keys(
            "path",
            &[
                "t_step_init",
                "t_step_min",
                "newton_tol",
                "max_newton",
                "damping",
                "delta_margin",
                "track_adjoint_kernel",
                "oscillation_allowance",
            ],
        )?;
        doc.check_keys("trials", &["count", "seed", "max_mode", "amplitude"])?;

        let geometry = Arc::new(parse_geometry(&doc)?);
        let op = parse_operator(&doc, geometry.n())?;

        let form = |key: &str| -> Result<FormSpec> {
            match doc.string("fields", key)?.as_deref().map(str::trim) {
                None | Some("identity") => Ok(FormSpec::Identity),
                Some(s) if s.starts_with('@') => Ok(FormSpec::File(base.join(&s[1..]))),
                Some(s) if s.starts_with("diag") => {
                    let vals: std::result::Result<Vec<f64>, _> =
                        s["diag".len()..].split_whitespace().map(str::parse).collect();
                    match vals {
                        Ok(v) if v.len() == geometry.n() => Ok(FormSpec::Diagonal(v)),
                        _ => Err(doc.err("fields", key, format!("expected `diag` followed by {} numbers", geometry.n()))),
                    }
                }
                Some(other) => Err(doc.err("fields", key, format!("unrecognized form `{other}`"))),
            }
        };
        let omega = form("omega")?;
        let chi = form("chi")?;

        let field = |key: &str, src: &str| -> Result<FieldSpec> {
            let src = src.trim();
            if let Some(file) = src.strip_prefix('@') {
                return Ok(FieldSpec::File(base.join(file)));
            }
            let expr = TrigSeries::parse(src).map_err(|e| doc.err("fields", key, e.to_string()))?;
            expr.check_geometry(&geometry).map_err(|e| doc.err("fields", key, e.to_string()))?;
            Ok(FieldSpec::Expr(expr))
        };

        let h_src = doc.require("fields", "h", doc.string("fields", "h")?)?;
        let h = match h_src.trim() {
            "manufactured" => {
                let u = doc.require("fields", "u_star", doc.string("fields", "u_star")?)?;
                let u_star = match field("u_star", &u)? {
                    FieldSpec::Expr(e) => e,
                    FieldSpec::File(_) => {
                        return Err(doc.err("fields", "u_star", "a manufactured solution must be a closed-form expression"))
                    }
                };
                RhsSpec::Manufactured {
                    u_star,
                    c: doc.float("fields", "manufactured_c")?.unwrap_or(0.0),
                }
            }
            "background" => RhsSpec::Background,
            other => RhsSpec::Field(field("h", other)?),
        };
        let u_sub = field("u_sub", &doc.string("fields", "u_sub")?.unwrap_or_else(|| "0".into()))?;
        let u_bar = match doc.string("fields", "u_bar")?.as_deref().map(str::trim) {
            None | Some("auto") => None,
            Some(s) => Some(field("u_bar", s)?),
        };

        let defaults = PathConfig::default();
        let path = PathConfig {
            t_step_init: doc.float("path", "t_step_init")?.unwrap_or(defaults.t_step_init),
            t_step_min: doc.float("path", "t_step_min")?.unwrap_or(defaults.t_step_min),
            newton_tol: doc.float("path", "newton_tol")?.unwrap_or(defaults.newton_tol),
            max_newton: doc.uint("path", "max_newton")?.unwrap_or(defaults.max_newton),
            damping: doc.float("path", "damping")?.unwrap_or(defaults.damping),
            delta_margin: doc.float("path", "delta_margin")?.unwrap_or(defaults.delta_margin),
            track_adjoint_kernel: match doc.get("path", "track_adjoint_kernel") {
                None => defaults.track_adjoint_kernel,
                Some(Value::Boolean(b)) => *b,
                Some(_) => return Err(doc.err("path", "track_adjoint_kernel", "expected true or false")),
            },
        };
        path.validate().map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                key: Some("path".into()),
                line: find_line(text, None, "path"),
                message,
            },
            other => other,
        })?;
        let oscillation_allowance = doc.float("path", "oscillation_allowance")?.unwrap_or(0.0);

        let trials = match doc.uint("trials", "count")? {
            None | Some(0) => None,
            Some(count) => {
                let seed = doc.int("trials", "seed")?.ok_or_else(|| Error::Config {
                    key: Some("trials.seed".into()),
                    line: find_line(text, Some("trials"), "count"),
                    message: "a random seed is required for a trial ensemble".into(),
                })?;
                let defaults = TrialConfig::default();
                Some(TrialConfig {
                    count,
                    seed: seed as u64,
                    max_mode: doc.uint("trials", "max_mode")?.map(|m| m as i32).unwrap_or(defaults.max_mode),
                    amplitude: doc.float("trials", "amplitude")?.unwrap_or(defaults.amplitude),
                })
            }
        };

        Ok(Self {
            geometry,
            op,
            omega,
            chi,
            h,
            u_sub,
            u_bar,
            path,
            oscillation_allowance,
            trials,
        })
    }

    /// Materializes fields and the equation.
    pub fn build(&self) -> Result<Problem> {
        let g = &self.geometry;
        let form = |spec: &FormSpec| -> Result<HermitianField> {
            match spec {
                FormSpec::Identity => Ok(HermitianField::identity(g.clone())),
                FormSpec::Diagonal(d) => HermitianField::constant(g.clone(), &CMatrix::from_real_diagonal(d)),
                FormSpec::File(p) => io::read_hermitian(p, g),
            }
        };
        let field = |spec: &FieldSpec| -> Result<ScalarField> {
            match spec {
                FieldSpec::Expr(e) => e.sample(g),
                FieldSpec::File(p) => io::read_scalar(p, g),
            }
        };
        let eq = Equation::new(self.op.clone(), form(&self.omega)?, form(&self.chi)?)?;
        let (h, manufactured) = match &self.h {
            RhsSpec::Manufactured { u_star, c } => {
                let m = manufactured_problem(&eq, u_star, *c)?;
                (m.h.clone(), Some(m))
            }
            RhsSpec::Background => (eq.evaluate_background()?, None),
            RhsSpec::Field(spec) => (field(spec)?, None),
        };
        let u_sub = field(&self.u_sub)?;
        let u_bar = match &self.u_bar {
            Some(spec) => field(spec)?,
            None if eq.is_admissible(&u_sub) => u_sub.clone(),
            None => ScalarField::zeros(g.clone()),
        };
        Ok(Problem {
            eq,
            h,
            u_sub,
            u_bar,
            manufactured,
        })
    }
}

/// A materialized problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub eq: Equation,
    pub h: ScalarField,
    pub u_sub: ScalarField,
    pub u_bar: ScalarField,
    pub manufactured: Option<ManufacturedProblem>,
}

fn parse_geometry(doc: &Doc<'_>) -> Result<GridGeometry> {
    let n = doc.require("geometry", "n", doc.uint("geometry", "n")?)?;
    let shape = match doc.get("geometry", "shape") {
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_integer().filter(|&i| i > 0).map(|i| i as usize))
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| doc.err("geometry", "shape", "expected a list of positive integers"))?,
        Some(_) => return Err(doc.err("geometry", "shape", "expected a list of positive integers")),
        None => return doc.require("geometry", "shape", None),
    };
    let mut z = vec![Complex64::new(0.0, 0.0); n * n * n];
    if let Some(v) = doc.get("geometry", "z") {
        let entries = v
            .as_array()
            .ok_or_else(|| doc.err("geometry", "z", "expected a list of [i, j, k, re, im] entries"))?;
        for e in entries {
            let parts = e.as_array().filter(|p| p.len() == 5).ok_or_else(|| {
                doc.err("geometry", "z", "each entry must be [i, j, k, re, im]")
            })?;
            let idx: Option<Vec<usize>> = parts[..3]
                .iter()
                .map(|p| p.as_integer().filter(|&i| i >= 1 && i as usize <= n).map(|i| i as usize - 1))
                .collect();
            let idx = idx.ok_or_else(|| doc.err("geometry", "z", format!("indices must lie in 1..={n}")))?;
            let num = |v: &Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
            let (re, im) = match (num(&parts[3]), num(&parts[4])) {
                (Some(re), Some(im)) => (re, im),
                _ => return Err(doc.err("geometry", "z", "re and im must be numbers")),
            };
            z[(idx[0] * n + idx[1]) * n + idx[2]] = Complex64::new(re, im);
        }
    }
    GridGeometry::with_z_tensor(n, shape, z).map_err(|e| doc.err("geometry", "shape", e.to_string()))
}

fn parse_operator(doc: &Doc<'_>, n: usize) -> Result<OperatorSpec> {
    let kind = doc.require("operator", "kind", doc.string("operator", "kind")?)?;
    match kind.as_str() {
        "quotient" => {
            let k = doc.require("operator", "k", doc.uint("operator", "k")?)?;
            let l = doc.uint("operator", "l")?.unwrap_or(0);
            OperatorSpec::quotient(n, k, l).map_err(|e| doc.err("operator", "k", e.to_string()))
        }
        "dhym" => {
            let branch = match doc.string("operator", "branch")?.as_deref() {
                None | Some("supercritical") => DhymBranch::Supercritical,
                Some("hypercritical") => DhymBranch::Hypercritical,
                Some("full") => DhymBranch::Full,
                Some(other) => return Err(doc.err("operator", "branch", format!("unknown branch `{other}`"))),
            };
            OperatorSpec::dhym(n, branch)
        }
        other => Err(doc.err("operator", "kind", format!("unknown operator `{other}`; expected quotient or dhym"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[geometry]
n = 1
shape = [32, 1]

[operator]
kind = "quotient"
k = 1
l = 0

[fields]
h = "manufactured"
u_star = "0.5*cos(x1)"

[trials]
count = 3
seed = 9
"#;

    #[test]
    fn parses_basic_config() {
        let cfg = ProblemConfig::parse(BASIC, Path::new(".")).unwrap();
        assert_eq!(cfg.geometry.shape(), &[32, 1]);
        assert!(matches!(cfg.h, RhsSpec::Manufactured { .. }));
        assert_eq!(cfg.trials.as_ref().unwrap().seed, 9);
        let p = cfg.build().unwrap();
        assert_eq!(p.h.len(), 32);
        assert!(p.u_bar.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_value_reports_key_and_line() {
        let text = BASIC.replace("k = 1", "k = \"one\"");
        match ProblemConfig::parse(&text, Path::new(".")).unwrap_err() {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("operator.k"));
                assert_eq!(line, Some(8));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = BASIC.replace("l = 0", "l = 0\nm = 2");
        let err = ProblemConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(10), .. }), "{err}");
    }

    #[test]
    fn seed_is_mandatory_for_trials() {
        let text = BASIC.replace("seed = 9", "");
        let err = ProblemConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { key: Some(ref k), .. } if k == "trials.seed"), "{err}");
    }

    #[test]
    fn syntax_error_has_line() {
        let text = BASIC.replace("n = 1", "n = = 1");
        let err = ProblemConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }), "{err}");
    }
}
