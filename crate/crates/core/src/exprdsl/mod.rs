//! A small infix expression language for coefficient functions of `x` and `t`.
//!
//! Expressions are parsed into an immutable [`Expr`] tree, which can be
//! evaluated, differentiated symbolically and printed back in a form the
//! parser accepts.
//!
//! Grammar (lowest precedence first):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := power (('*' | '/') power)*
//! power   := unary ('^' power)?          right associative
//! unary   := ('-' | '+') unary | primary
//! primary := number | 'x' | 't' | func '(' expr ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'
//! func    := sin | cos | tanh | sinh | cosh | sech | exp | log | sqrt
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x^2` is `(-x)^2`.

mod diff;
mod parse;

use std::fmt;

pub use parse::parse;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("expression `{expr}` is undefined at (x, t) = ({x}, {t})")]
    EvalDomain { expr: String, x: f64, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Sinh,
    Cosh,
    Sech,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sech => "sech",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "sech" => Func::Sech,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Applies the function; `None` outside its real domain.
    pub fn apply(self, v: f64) -> Option<f64> {
        let r = match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tanh => v.tanh(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Sech => 1.0 / v.cosh(),
            Func::Exp => v.exp(),
            Func::Log if v <= 0.0 => return None,
            Func::Log => v.ln(),
            Func::Sqrt if v < 0.0 => return None,
            Func::Sqrt => v.sqrt(),
        };
        r.is_finite().then_some(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> Option<f64> {
        let r = match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div if b == 0.0 => return None,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        };
        r.is_finite().then_some(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// True when the tree contains no variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Bin(_, a, b) => a.depends_on(v) || b.depends_on(v),
        }
    }

    fn eval_opt(&self, x: f64, t: f64) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            Expr::Var(Var::X) => Some(x),
            Expr::Var(Var::T) => Some(t),
            Expr::Neg(a) => Some(-a.eval_opt(x, t)?),
            Expr::Bin(op, a, b) => op.apply(a.eval_opt(x, t)?, b.eval_opt(x, t)?),
            Expr::Call(f, a) => f.apply(a.eval_opt(x, t)?),
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64, ExprError> {
        self.eval_opt(x, t).ok_or_else(|| ExprError::EvalDomain { expr: self.to_string(), x, t })
    }

    /// Exact partial derivative, constant-folded.
    pub fn diff(&self, v: Var) -> Expr {
        diff::derivative(self, v).fold()
    }

    /// Evaluates constant subtrees and removes additive zeros and
    /// multiplicative ones. Subtrees whose value would be undefined are
    /// left in place so evaluation errors are preserved.
    pub fn fold(&self) -> Expr {
        diff::fold(self)
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Bin(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A scalar field of `(x, t)` with the partial derivatives the solvers use.
#[derive(Debug, Clone)]
pub struct Field {
    pub expr: Expr,
    pub dx: Expr,
    pub dt: Expr,
    pub dxx: Expr,
    pub dxt: Expr,
    pub dtt: Expr,
}

/// Value and partial derivatives of a [`Field`] at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldValue {
    pub v: f64,
    pub x: f64,
    pub t: f64,
    pub xx: f64,
    pub xt: f64,
    pub tt: f64,
}

impl Field {
    pub fn new(expr: Expr) -> Field {
        let expr = expr.fold();
        let dx = expr.diff(Var::X);
        let dt = expr.diff(Var::T);
        let dxx = dx.diff(Var::X);
        let dxt = dx.diff(Var::T);
        let dtt = dt.diff(Var::T);
        Field { expr, dx, dt, dxx, dxt, dtt }
    }

    pub fn parse(src: &str) -> Result<Field, ExprError> {
        Ok(Field::new(parse(src)?))
    }

    pub fn constant(v: f64) -> Field {
        Field::new(Expr::Const(v))
    }

    pub fn is_zero(&self) -> bool {
        self.expr.as_const() == Some(0.0)
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64, ExprError> {
        self.expr.eval(x, t)
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<FieldValue, ExprError> {
        Ok(FieldValue {
            v: self.expr.eval(x, t)?,
            x: self.dx.eval(x, t)?,
            t: self.dt.eval(x, t)?,
            xx: self.dxx.eval(x, t)?,
            xt: self.dxt.eval(x, t)?,
            tt: self.dtt.eval(x, t)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(parse("cosh(x)").unwrap().eval(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(parse("x + 2*t").unwrap().eval(1.0, 2.0).unwrap(), 5.0);
        assert!(matches!(
            parse("sqrt(x)").unwrap().eval(-1.0, 0.0),
            Err(ExprError::EvalDomain { x, .. }) if x == -1.0
        ));
        assert!(parse("log(x)").unwrap().eval(0.0, 0.0).is_err());
        assert!(parse("1/x").unwrap().eval(0.0, 0.0).is_err());
    }

    #[test]
    fn sech_is_reciprocal_cosh() {
        let e = parse("sech(x)").unwrap();
        assert!((e.eval(0.7, 0.0).unwrap() - 1.0 / 0.7f64.cosh()).abs() < 1e-16);
    }

    #[test]
    fn display_round_trips() {
        for src in ["1 + 0.1*sin(0.2*x)", "-x^2 + t/3", "pow(x, 2.5) - sech(t)*1e-10", "2^-x", "-(-3)"] {
            let e = parse(src).unwrap();
            let back = parse(&e.to_string()).unwrap();
            for k in 0..10 {
                let (x, t) = (0.3 + 0.17 * k as f64, 0.1 * k as f64);
                assert_eq!(e.eval(x, t).unwrap(), back.eval(x, t).unwrap(), "{src}");
            }
        }
    }

    #[test]
    fn field_derivatives() {
        let f = Field::parse("x*x*t + sin(t)").unwrap();
        let v = f.eval(2.0, 0.5).unwrap();
        assert!((v.x - 2.0).abs() < 1e-15);
        assert!((v.t - (4.0 + 0.5f64.cos())).abs() < 1e-15);
        assert!((v.xx - 1.0).abs() < 1e-15);
        assert!((v.xt - 4.0).abs() < 1e-15);
        assert!((v.tt + 0.5f64.sin()).abs() < 1e-15);
    }
}
