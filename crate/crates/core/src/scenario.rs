//! Problem instances: coefficient expansions, initial data, phase start,
//! free constants, grids and the list of small parameters.
//!
//! Scenarios are TOML documents with a fixed flat key set. Expressions may
//! be given as strings or as plain numbers.

use std::fmt;

use serde::Serialize;

use crate::exprdsl::{Expr, ExprError, Field};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("{0}")]
    Config(String),
    #[error("key `{key}`: {source}")]
    Expr {
        key: String,
        #[source]
        source: ExprError,
    },
    #[error("invalid scenario document: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Which assembly of the asymptotic solution to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Decaying correction: singular terms confined to the curve neighborhood.
    Theorem1,
    /// Plateau correction: an extension term carries the left limit into D⁻.
    Theorem2,
    Auto,
}

impl Form {
    pub fn parse(s: &str) -> Option<Form> {
        match s {
            "theorem1" => Some(Form::Theorem1),
            "theorem2" => Some(Form::Theorem2),
            "auto" => Some(Form::Auto),
            _ => None,
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Theorem1 => "theorem1",
            Form::Theorem2 => "theorem2",
            Form::Auto => "auto",
        })
    }
}

/// Coefficients `a = a0 + eps*a1`, `b = b0 + eps*b1`, `c = c0 + eps*c1`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a0: Field,
    pub a1: Field,
    pub b0: Field,
    pub b1: Field,
    pub c0: Field,
    pub c1: Field,
    /// Higher-order terms (`a2`, `b3`, ...), kept but not used by the
    /// first-order construction.
    pub higher: Vec<(String, Expr)>,
}

impl Coefficients {
    /// Full coefficients `(a, b, c)` at a point for a given `eps`.
    pub fn full(&self, x: f64, t: f64, eps: f64) -> Result<(f64, f64, f64), ExprError> {
        Ok((
            self.a0.value(x, t)? + eps * self.a1.value(x, t)?,
            self.b0.value(x, t)? + eps * self.b1.value(x, t)?,
            self.c0.value(x, t)? + eps * self.c1.value(x, t)?,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub coeffs: Coefficients,
    /// Initial data `u0(x, 0)`; evaluated at `t = 0`.
    pub u0_init: Field,
    pub u1_init: Field,
    pub phi0: f64,
    pub dphi0: f64,
    /// Soliton center offset: the profile is centered at `tau = -center_offset`.
    pub center_offset: f64,
    /// Coefficient of the exponentially growing homogeneous solution of the
    /// correction equation; must be zero for a bounded correction.
    pub growing_mode: f64,
    /// Multiple of the kernel function added to the correction.
    pub kernel_shift: f64,
    pub t_end: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub tau_max: Option<f64>,
    pub eps: Vec<f64>,
    pub form: Form,
    pub warnings: Vec<String>,
}

pub const DEFAULT_EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

const KNOWN_KEYS: [&str; 22] = [
    "a0", "a1", "b0", "b1", "c0", "c1", "u0_init", "u1_init", "phi0", "dphi0", "C0", "C3", "C4", "T",
    "x_min", "x_max", "n_x", "n_t", "tau_max", "eps", "form", "n",
];

fn is_higher_order_key(k: &str) -> bool {
    let mut ch = k.chars();
    matches!(ch.next(), Some('a' | 'b' | 'c'))
        && ch.clone().next().is_some()
        && ch.all(|c| c.is_ascii_digit())
        && k[1..].parse::<u32>().is_ok_and(|n| n >= 2)
}

fn expr_text(key: &str, v: &toml::Value) -> Result<String, ScenarioError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:?}")),
        _ => Err(ScenarioError::Config(format!("key `{key}` must be an expression string or a number"))),
    }
}

fn number(key: &str, v: &toml::Value) -> Result<f64, ScenarioError> {
    match v {
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::Float(f) => Ok(*f),
        _ => Err(ScenarioError::Config(format!("key `{key}` must be a number"))),
    }
}

fn count(key: &str, v: &toml::Value) -> Result<usize, ScenarioError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(ScenarioError::Config(format!("key `{key}` must be a non-negative integer"))),
    }
}

impl Scenario {
    pub fn from_toml(src: &str) -> Result<Scenario, ScenarioError> {
        let table: toml::Table = toml::from_str(src)?;
        let mut warnings = Vec::new();
        let mut higher = Vec::new();
        for (k, v) in &table {
            if KNOWN_KEYS.contains(&k.as_str()) {
                continue;
            }
            if is_higher_order_key(k) {
                let e = crate::exprdsl::parse(&expr_text(k, v)?)
                    .map_err(|source| ScenarioError::Expr { key: k.clone(), source })?;
                warnings.push(format!("coefficient `{k}` is accepted but not used by the first-order construction"));
                higher.push((k.clone(), e));
                continue;
            }
            return Err(ScenarioError::Config(format!("unknown key `{k}`")));
        }
        if let Some(n) = table.get("n") {
            if count("n", n)? != 2 {
                return Err(ScenarioError::Config("n must equal 2".into()));
            }
        }
        let field = |key: &str, default: Option<&str>| -> Result<Field, ScenarioError> {
            let text = match table.get(key) {
                Some(v) => expr_text(key, v)?,
                None => match default {
                    Some(d) => d.to_string(),
                    None => return Err(ScenarioError::MissingKey(key.into())),
                },
            };
            Field::parse(&text).map_err(|source| ScenarioError::Expr { key: key.into(), source })
        };
        let num = |key: &str, default: Option<f64>| -> Result<f64, ScenarioError> {
            match table.get(key) {
                Some(v) => number(key, v),
                None => default.ok_or_else(|| ScenarioError::MissingKey(key.into())),
            }
        };
        let coeffs = Coefficients {
            a0: field("a0", None)?,
            a1: field("a1", Some("0"))?,
            b0: field("b0", None)?,
            b1: field("b1", Some("0"))?,
            c0: field("c0", None)?,
            c1: field("c1", Some("0"))?,
            higher,
        };
        let eps = match table.get("eps") {
            None => DEFAULT_EPS.to_vec(),
            Some(toml::Value::Array(items)) => {
                items.iter().map(|v| number("eps", v)).collect::<Result<Vec<_>, _>>()?
            }
            Some(v) => vec![number("eps", v)?],
        };
        let form = match table.get("form") {
            None => Form::Auto,
            Some(toml::Value::String(s)) => Form::parse(s)
                .ok_or_else(|| ScenarioError::Config(format!("form must be theorem1, theorem2 or auto, got `{s}`")))?,
            Some(_) => return Err(ScenarioError::Config("key `form` must be a string".into())),
        };
        let tau_max = match table.get("tau_max") {
            None => None,
            Some(v) => Some(number("tau_max", v)?),
        };
        let n_x = table.get("n_x").map(|v| count("n_x", v)).transpose()?.unwrap_or(256);
        let n_t = table.get("n_t").map(|v| count("n_t", v)).transpose()?.unwrap_or(64);
        Ok(Scenario {
            coeffs,
            u0_init: field("u0_init", Some("0"))?,
            u1_init: field("u1_init", Some("0"))?,
            phi0: num("phi0", None)?,
            dphi0: num("dphi0", None)?,
            center_offset: num("C0", Some(0.0))?,
            growing_mode: num("C3", Some(0.0))?,
            kernel_shift: num("C4", Some(0.0))?,
            t_end: num("T", None)?,
            x_min: num("x_min", None)?,
            x_max: num("x_max", None)?,
            n_x,
            n_t,
            tau_max,
            eps,
            form,
            warnings,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    /// Initial data as a function of `x` alone.
    pub fn initial_u0(&self, x: f64) -> Result<f64, ExprError> {
        self.u0_init.value(x, 0.0)
    }

    /// Checks every standing hypothesis on the scenario's grid.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut push = |predicate: String, at: Option<(f64, f64)>| report.violations.push(Violation { predicate, at });
        if !(self.t_end > 0.0) {
            push(format!("T must be positive, got {}", self.t_end), None);
        }
        if !(self.x_max > self.x_min) {
            push("x_max must exceed x_min".into(), None);
        }
        if self.n_x < 16 || self.n_t < 16 {
            push(format!("grid sizes must be at least 16, got n_x = {}, n_t = {}", self.n_x, self.n_t), None);
        }
        if let Some(tm) = self.tau_max {
            if !(tm >= 20.0) {
                push(format!("tau_max must be at least 20, got {tm}"), None);
            }
        }
        if self.eps.is_empty() {
            push("eps list is empty".into(), None);
        }
        for (i, e) in self.eps.iter().enumerate() {
            if !(*e > 0.0 && *e < 1.0) {
                push(format!("eps[{i}] = {e} is outside (0, 1)"), None);
            }
            if i > 0 && !(*e < self.eps[i - 1]) {
                push(format!("eps values must be strictly decreasing (eps[{i}] = {e})"), None);
            }
        }
        if self.growing_mode != 0.0 {
            push(
                "C3 must be 0: it multiplies the exponentially growing homogeneous solution of the correction equation"
                    .into(),
                None,
            );
        }
        if !report.violations.is_empty() {
            return report;
        }
        let xs = crate::numerics::linspace(self.x_min, self.x_max, self.n_x);
        let ts = crate::numerics::linspace(0.0, self.t_end, self.n_t);
        let c = &self.coeffs;
        for (name, f) in [("a0", &c.a0), ("b0", &c.b0), ("c0", &c.c0)] {
            if let Some(v) = nonvanishing_violation(name, f, &xs, &ts) {
                report.violations.push(v);
            }
        }
        for (name, f) in [("a1", &c.a1), ("b1", &c.b1), ("c1", &c.c1), ("u1_init", &self.u1_init)] {
            if let Some(v) = domain_violation(name, f, &xs, &ts) {
                report.violations.push(v);
            }
        }
        if let Some(v) = domain_violation("u0_init", &self.u0_init, &xs, &[0.0]) {
            report.violations.push(v);
        }
        report
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Violation {
    pub predicate: String,
    /// First offending sample point `(x, t)`, when the predicate is pointwise.
    pub at: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}", v.predicate)?;
        }
        Ok(())
    }
}

fn domain_violation(name: &str, f: &Field, xs: &[f64], ts: &[f64]) -> Option<Violation> {
    for &t in ts {
        for &x in xs {
            if f.eval(x, t).is_err() {
                return Some(Violation { predicate: format!("{name} is undefined at ({x}, {t})"), at: Some((x, t)) });
            }
        }
    }
    None
}

/// Grid sampling with 4x refinement in every cell that shows a sign change
/// or a value small relative to the grid maximum; zeros are located by
/// bisection along the refined edges.
fn nonvanishing_violation(name: &str, f: &Field, xs: &[f64], ts: &[f64]) -> Option<Violation> {
    let (nx, nt) = (xs.len(), ts.len());
    let mut vals = vec![0.0; nx * nt];
    for (j, &t) in ts.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            match f.value(x, t) {
                Ok(v) => vals[j * nx + i] = v,
                Err(_) => {
                    return Some(Violation { predicate: format!("{name} is undefined at ({x}, {t})"), at: Some((x, t)) })
                }
            }
        }
    }
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-12 * scale.max(1e-300);
    let vanish = |x: f64, t: f64| Violation { predicate: format!("{name} vanishes at ({x}, {t})"), at: Some((x, t)) };
    for (j, &t) in ts.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            if vals[j * nx + i].abs() <= tiny {
                return Some(vanish(x, t));
            }
        }
    }
    let eval = |x: f64, t: f64| f.value(x, t).unwrap_or(f64::NAN);
    for j in 0..nt {
        for i in 0..nx {
            let v = vals[j * nx + i];
            let mut edges = Vec::new();
            if i + 1 < nx {
                edges.push(((xs[i], ts[j]), (xs[i + 1], ts[j]), vals[j * nx + i + 1]));
            }
            if j + 1 < nt {
                edges.push(((xs[i], ts[j]), (xs[i], ts[j + 1]), vals[(j + 1) * nx + i]));
            }
            for (p, q, w) in edges {
                let small = v.abs().min(w.abs()) < 0.05 * scale;
                if !(small || (v > 0.0) != (w > 0.0)) {
                    continue;
                }
                let mut prev = (p, v);
                let mut best = (0.0, v.abs());
                for k in 1..=4 {
                    let s = k as f64 / 4.0;
                    let pt = (p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1));
                    let fv = if k == 4 { w } else { eval(pt.0, pt.1) };
                    if !fv.is_finite() {
                        return Some(Violation {
                            predicate: format!("{name} is undefined at ({}, {})", pt.0, pt.1),
                            at: Some(pt),
                        });
                    }
                    if fv.abs() <= tiny {
                        return Some(vanish(pt.0, pt.1));
                    }
                    if (fv > 0.0) != (prev.1 > 0.0) {
                        let (a, b) = (prev.0, pt);
                        let r = crate::numerics::bisect(
                            |s| eval(a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)),
                            0.0,
                            1.0,
                            1e-13,
                        );
                        let root = (a.0 + r * (b.0 - a.0), a.1 + r * (b.1 - a.1));
                        return Some(vanish(root.0, root.1));
                    }
                    if fv.abs() < best.1 {
                        best = (s, fv.abs());
                    }
                    prev = (pt, fv);
                }
                if small {
                    // a zero touched without a sign change: minimize |f| near the best sample
                    let at = |s: f64| (p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1));
                    let s = golden_min(|s| eval(at(s).0, at(s).1).abs(), (best.0 - 0.25).max(0.0), (best.0 + 0.25).min(1.0));
                    let pt = at(s);
                    if eval(pt.0, pt.1).abs() <= tiny {
                        return Some(vanish(pt.0, pt.1));
                    }
                }
            }
        }
    }
    None
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
