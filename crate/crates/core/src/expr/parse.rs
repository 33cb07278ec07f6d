use super::{BinaryOp, Expr, Signature, UnaryOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn syntax(&self, pos: usize, message: impl Into<String>) -> Error {
        Error::SyntaxError {
            position: pos,
            message: message.into(),
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let v: f64 = text
                .parse()
                .map_err(|_| self.syntax(start, format!("malformed number `{text}`")))?;
            self.pos = end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(self.syntax(start, format!("unexpected character `{ch}`")))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    sig: &'a Signature,
}

/// Parses `text` against the names declared in `sig`.
pub fn parse(text: &str, sig: &Signature) -> Result<Expr> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let (tok, at) = lexer.next()?;
    let mut p = Parser { lexer, tok, at, sig };
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<Tok> {
        let (tok, at) = self.lexer.next()?;
        self.at = at;
        Ok(std::mem::replace(&mut self.tok, tok))
    }

    fn error(&self, message: &str) -> Error {
        let found = match &self.tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        };
        self.lexer.syntax(self.at, format!("{message}, found {found}"))
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.tok == Tok::Op(c) {
            self.bump()?;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Ok(Expr::unary(UnaryOp::Neg, self.unary()?))
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok == Tok::Op('(') {
                    return self.call(&name);
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                Ok(Expr::Var(self.sig.resolve(&name)?))
            }
            _ => Err(self.error("expected an operand")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let at = self.at;
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.tok == Tok::Op(',') {
            self.bump()?;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let arity = |want: usize| -> Result<()> {
            if args.len() == want {
                Ok(())
            } else {
                Err(self.lexer.syntax(at, format!("`{name}` takes {want} argument(s), got {}", args.len())))
            }
        };
        if let Some(op) = UnaryOp::FUNCTIONS.iter().find(|f| f.name() == name) {
            arity(1)?;
            return Ok(Expr::unary(*op, args.pop().unwrap()));
        }
        let op = match name {
            "max" => BinaryOp::Max,
            "min" => BinaryOp::Min,
            "pow" => BinaryOp::Pow,
            _ => return Err(Error::UnknownIdentifier(name.to_string())),
        };
        arity(2)?;
        let b = args.pop().unwrap();
        let a = args.pop().unwrap();
        Ok(Expr::binary(op, a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Var;

    fn sig2() -> Signature {
        Signature::nonlinearity(2)
    }

    #[test]
    fn example_nonlinearities_parse() {
        assert!(parse("sqrt(max(u1,u2)) + tan(max(u1,u2))", &sig2()).is_ok());
        assert!(parse("(1 - sin(u2)) * max(u1,u2)^2", &sig2()).is_ok());
    }

    #[test]
    fn unknown_component_rejected() {
        assert_eq!(parse("u3", &sig2()), Err(Error::UnknownIdentifier("u3".into())));
        assert_eq!(parse("foo(u1)", &sig2()), Err(Error::UnknownIdentifier("foo".into())));
        assert_eq!(parse("x1", &Signature::scalars(["p"])), Err(Error::UnknownIdentifier("x1".into())));
    }

    #[test]
    fn precedence_and_associativity() {
        let s = sig2();
        let u1 = || Expr::Var(Var::U(0));
        assert_eq!(
            parse("-u1^2", &s).unwrap(),
            Expr::unary(UnaryOp::Neg, Expr::binary(BinaryOp::Pow, u1(), Expr::Num(2.0)))
        );
        assert_eq!(
            parse("1 - 2 - 3", &s).unwrap(),
            Expr::binary(
                BinaryOp::Sub,
                Expr::binary(BinaryOp::Sub, Expr::Num(1.0), Expr::Num(2.0)),
                Expr::Num(3.0)
            )
        );
        assert_eq!(
            parse("2^3^2", &s).unwrap(),
            Expr::binary(
                BinaryOp::Pow,
                Expr::Num(2.0),
                Expr::binary(BinaryOp::Pow, Expr::Num(3.0), Expr::Num(2.0))
            )
        );
        assert_eq!(
            parse("1 + 2*3", &s).unwrap(),
            Expr::binary(
                BinaryOp::Add,
                Expr::Num(1.0),
                Expr::binary(BinaryOp::Mul, Expr::Num(2.0), Expr::Num(3.0))
            )
        );
    }

    #[test]
    fn numbers() {
        let s = Signature::constant();
        assert_eq!(parse("1.5e-3", &s).unwrap(), Expr::Num(1.5e-3));
        assert_eq!(parse(".25", &s).unwrap(), Expr::Num(0.25));
        assert_eq!(parse("2E2", &s).unwrap(), Expr::Num(200.0));
        assert!(matches!(parse("1.2.3", &s), Err(Error::SyntaxError { position: 0, .. })));
    }

    #[test]
    fn syntax_errors_report_position() {
        let s = sig2();
        assert!(matches!(parse("u1 +", &s), Err(Error::SyntaxError { position: 4, .. })));
        assert!(matches!(parse("(u1", &s), Err(Error::SyntaxError { position: 3, .. })));
        assert!(matches!(parse("u1 $ u2", &s), Err(Error::SyntaxError { position: 3, .. })));
        assert!(matches!(parse("u1 u2", &s), Err(Error::SyntaxError { position: 3, .. })));
        assert!(matches!(parse("max(u1)", &s), Err(Error::SyntaxError { .. })));
        assert!(matches!(parse("", &s), Err(Error::SyntaxError { position: 0, .. })));
    }
}
