//! Recursive-descent parser for the coefficient expression language.

use super::{BinOp, Expr, ExprError, Func, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let c = bytes[start];
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut e = end + 1;
                    if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                        e += 1;
                    }
                    if e < bytes.len() && bytes[e].is_ascii_digit() {
                        while e < bytes.len() && bytes[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = &self.src[start..end];
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                self.pos = end;
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                Tok::Ident(self.src[start..end].to_string())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
            }
        };
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (t, at) = self.lex.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { offset: self.at, message: message.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if self.tok == want {
            self.bump()
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.power()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exp = self.power()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "t" => return Ok(Expr::Var(Var::T)),
                    _ => {}
                }
                if name == "pow" {
                    self.expect(Tok::LParen, "`(` after `pow`")?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma, "`,` in `pow`")?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::bin(BinOp::Pow, a, b));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ExprError::UnknownIdentifier { name, offset: at });
                };
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let a = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::call(func, a))
            }
            Tok::End => self.error("unexpected end of input"),
            Tok::Op(c) => self.error(format!("unexpected operator `{c}`")),
            Tok::RParen => self.error("unexpected `)`"),
            Tok::Comma => self.error("unexpected `,`"),
        }
    }
}

/// Parses an expression in `x` and `t`.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { lex: Lexer { src, pos: 0 }, tok: Tok::End, at: 0 };
    p.bump()?;
    if p.tok == Tok::End {
        return p.error("empty expression");
    }
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::Var(Var::X)
    }

    #[test]
    fn literal_cases() {
        assert_eq!(parse("x + t").unwrap(), Expr::bin(BinOp::Add, x(), Expr::Var(Var::T)));
        assert_eq!(
            parse("1 + 0.1*sin(x)").unwrap(),
            Expr::bin(
                BinOp::Add,
                Expr::Const(1.0),
                Expr::bin(BinOp::Mul, Expr::Const(0.1), Expr::call(Func::Sin, x()))
            )
        );
    }

    #[test]
    fn precedence() {
        // unary minus binds tighter than ^, and ^ is right associative
        assert_eq!(parse("-x^2").unwrap().eval(3.0, 0.0).unwrap(), 9.0);
        assert_eq!(parse("2^3^2").unwrap().eval(0.0, 0.0).unwrap(), 512.0);
        assert_eq!(parse("1 - 2 - 3").unwrap().eval(0.0, 0.0).unwrap(), -4.0);
        assert_eq!(parse("8 / 4 / 2").unwrap().eval(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(parse("2*3^2").unwrap().eval(0.0, 0.0).unwrap(), 18.0);
        assert_eq!(parse("1.5e-3*x").unwrap().eval(2.0, 0.0).unwrap(), 3e-3);
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse("x + * t").unwrap_err(),
            ExprError::Syntax { offset: 4, message: "unexpected operator `*`".into() }
        );
        assert!(matches!(parse("y + 1"), Err(ExprError::UnknownIdentifier { name, offset: 0 }) if name == "y"));
        assert!(matches!(parse("sin x"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("(x"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x $"), Err(ExprError::Syntax { offset: 2, .. })));
    }
}
