//! Symbolic differentiation and constant folding.

use super::{BinOp, Expr, Func, Var};

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::bin(BinOp::Add, a, b)
}

fn sub(a: Expr, b: Expr) -> Expr {
    Expr::bin(BinOp::Sub, a, b)
}

fn mul(a: Expr, b: Expr) -> Expr {
    Expr::bin(BinOp::Mul, a, b)
}

fn div(a: Expr, b: Expr) -> Expr {
    Expr::bin(BinOp::Div, a, b)
}

pub(super) fn derivative(e: &Expr, v: Var) -> Expr {
    if !e.depends_on(v) {
        return c(0.0);
    }
    match e {
        Expr::Const(_) => c(0.0),
        Expr::Var(w) => c(if *w == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::neg(derivative(a, v)),
        Expr::Bin(op, a, b) => {
            let (da, db) = (derivative(a, v), derivative(b, v));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), mul(b.clone(), b)),
                BinOp::Pow => {
                    if !b.depends_on(v) {
                        // b * a^(b-1) * a'
                        mul(mul(b.clone(), Expr::bin(BinOp::Pow, a, sub(b, c(1.0)))), da)
                    } else {
                        // a^b * (b' ln a + b a'/a)
                        let pow = Expr::bin(BinOp::Pow, a.clone(), b.clone());
                        let log_a = Expr::call(Func::Log, a.clone());
                        mul(pow, add(mul(db, log_a), div(mul(b, da), a)))
                    }
                }
            }
        }
        Expr::Call(f, a) => {
            let da = derivative(a, v);
            let a = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, a),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                Func::Tanh => {
                    let s = Expr::call(Func::Sech, a);
                    mul(s.clone(), s)
                }
                Func::Sinh => Expr::call(Func::Cosh, a),
                Func::Cosh => Expr::call(Func::Sinh, a),
                Func::Sech => Expr::neg(mul(Expr::call(Func::Sech, a.clone()), Expr::call(Func::Tanh, a))),
                Func::Exp => Expr::call(Func::Exp, a),
                Func::Log => div(c(1.0), a),
                Func::Sqrt => div(c(0.5), Expr::call(Func::Sqrt, a)),
            };
            mul(outer, da)
        }
    }
}

pub(super) fn fold(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => match fold(a) {
            Expr::Const(v) => c(-v),
            Expr::Neg(inner) => *inner,
            fa => Expr::neg(fa),
        },
        Expr::Call(f, a) => {
            let fa = fold(a);
            if let Some(v) = fa.as_const() {
                if let Some(r) = f.apply(v) {
                    return c(r);
                }
            }
            Expr::call(*f, fa)
        }
        Expr::Bin(op, a, b) => {
            let (fa, fb) = (fold(a), fold(b));
            if let (Some(x), Some(y)) = (fa.as_const(), fb.as_const()) {
                if let Some(r) = op.apply(x, y) {
                    return c(r);
                }
            }
            let (ca, cb) = (fa.as_const(), fb.as_const());
            match op {
                BinOp::Add if ca == Some(0.0) => fb,
                BinOp::Add | BinOp::Sub if cb == Some(0.0) => fa,
                BinOp::Sub if ca == Some(0.0) => fold(&Expr::neg(fb)),
                BinOp::Mul if ca == Some(0.0) || cb == Some(0.0) => c(0.0),
                BinOp::Mul if ca == Some(1.0) => fb,
                BinOp::Mul | BinOp::Div if cb == Some(1.0) => fa,
                BinOp::Mul if ca == Some(-1.0) => fold(&Expr::neg(fb)),
                BinOp::Mul if cb == Some(-1.0) => fold(&Expr::neg(fa)),
                BinOp::Div if ca == Some(0.0) => c(0.0),
                BinOp::Pow if cb == Some(1.0) => fa,
                BinOp::Pow if cb == Some(0.0) => c(1.0),
                _ => Expr::bin(*op, fa, fb),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::exprdsl::{parse, Var};

    #[test]
    fn table_rules() {
        assert_eq!(parse("x*t").unwrap().diff(Var::X).to_string(), "t");
        assert_eq!(parse("sin(x)").unwrap().diff(Var::X).to_string(), "cos(x)");
        assert_eq!(parse("sin(x)").unwrap().diff(Var::T).to_string(), "0.0");
    }

    #[test]
    fn matches_finite_differences() {
        let srcs = [
            "1 + 0.1*sin(0.2*x)",
            "tanh(x*t) + sech(x) - cosh(0.3*t)",
            "exp(-x^2)*log(2 + t)",
            "sqrt(1 + x*x)/(2 + cos(t))",
            "pow(1.5 + sin(x), 1 + 0.5*t)",
            "x^3 - 2*x*t + 4",
        ];
        for src in srcs {
            let e = parse(src).unwrap();
            for v in [Var::X, Var::T] {
                let d = e.diff(v);
                for k in 0..20 {
                    let (x, t) = (-1.0 + 0.11 * k as f64, 0.05 * k as f64);
                    let h = 1e-6;
                    let (xp, tp, xm, tm) = match v {
                        Var::X => (x + h, t, x - h, t),
                        Var::T => (x, t + h, x, t - h),
                    };
                    let fd = (e.eval(xp, tp).unwrap() - e.eval(xm, tm).unwrap()) / (2.0 * h);
                    let ex = d.eval(x, t).unwrap();
                    assert!((fd - ex).abs() <= 1e-6 * (1.0 + ex.abs()), "{src} d/{v:?} at ({x},{t}): {fd} vs {ex}");
                }
            }
        }
    }

    #[test]
    fn fold_keeps_undefined_subtrees() {
        let e = parse("x + log(-1)").unwrap().fold();
        assert!(e.eval(0.0, 0.0).is_err());
        let e = parse("2*3 + x*1 + 0*t").unwrap().fold();
        assert_eq!(e.to_string(), "(6.0 + x)");
    }
}
