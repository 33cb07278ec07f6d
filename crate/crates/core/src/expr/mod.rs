//! A small expression language for coefficients `a(x)`, nonlinearities
//! `f(x, u)` and the scalar combiners of boundary functionals.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | name | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names are `x1`, `x2`, `u1`..`un` and whatever scalars the [`Signature`]
//! declares. Unary functions: `abs sqrt sin cos tan exp log`; binary:
//! `max min pow`.

mod parse;
mod program;

use std::fmt;

pub use parse::parse;
pub use program::{Env, Program};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Abs,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
}

impl UnaryOp {
    pub const FUNCTIONS: [UnaryOp; 7] = [
        UnaryOp::Abs,
        UnaryOp::Sqrt,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Exp,
        UnaryOp::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Abs => "abs",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Var {
    /// Spatial coordinate, 0-based.
    X(usize),
    /// Solution component, 0-based.
    U(usize),
    Scalar(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Names an expression may reference.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signature {
    pub spatial: bool,
    pub components: usize,
    pub scalars: Vec<String>,
}

impl Signature {
    /// No free names at all.
    pub fn constant() -> Self {
        Signature::default()
    }

    /// Coefficients and weights: `x1`, `x2`.
    pub fn spatial() -> Self {
        Signature {
            spatial: true,
            ..Default::default()
        }
    }

    /// Nonlinearities `f(x, u)` of an `n`-component system.
    pub fn nonlinearity(n: usize) -> Self {
        Signature {
            spatial: true,
            components: n,
            scalars: Vec::new(),
        }
    }

    /// Combiners over named scalars.
    pub fn scalars<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Signature {
            spatial: false,
            components: 0,
            scalars: names.into_iter().map(Into::into).collect(),
        }
    }

    pub(crate) fn resolve(&self, name: &str) -> Result<Var> {
        if let Some(v) = builtin_var(name) {
            let ok = match v {
                Var::X(k) => self.spatial && k < 2,
                Var::U(k) => k < self.components,
                Var::Scalar(_) => unreachable!(),
            };
            return if ok {
                Ok(v)
            } else {
                Err(Error::UnknownIdentifier(name.to_string()))
            };
        }
        if self.scalars.iter().any(|s| s == name) {
            Ok(Var::Scalar(name.to_string()))
        } else {
            Err(Error::UnknownIdentifier(name.to_string()))
        }
    }
}

fn builtin_var(name: &str) -> Option<Var> {
    let (head, digits) = name.split_at(1.min(name.len()));
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    match head {
        "x" => Some(Var::X(k - 1)),
        "u" => Some(Var::U(k - 1)),
        _ => None,
    }
}

/// True if `name` may not be used as a user-declared scalar.
pub fn is_reserved(name: &str) -> bool {
    name == "pi"
        || builtin_var(name).is_some()
        || UnaryOp::FUNCTIONS.iter().any(|f| f.name() == name)
        || matches!(name, "max" | "min" | "pow")
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Expr {
    pub fn parse(text: &str, sig: &Signature) -> Result<Expr> {
        parse(text, sig)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub fn depends_on_space(&self) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Var(Var::X(_))));
        hit
    }

    /// True if no free names occur.
    pub fn is_closed(&self) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Var(_)));
        !hit
    }

    /// Evaluates through a freshly compiled [`Program`].
    pub fn eval(&self, sig: &Signature, env: &Env<'_>) -> Result<f64> {
        Program::compile(self, sig)?.eval(env)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Binary(BinaryOp::Pow, ..) => 4,
            // A negative literal only parses back as a negation.
            Expr::Num(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

struct Wrapped<'a>(&'a Expr, u8);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.precedence() < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(Var::X(k)) => write!(f, "x{}", k + 1),
            Expr::Var(Var::U(k)) => write!(f, "u{}", k + 1),
            Expr::Var(Var::Scalar(s)) => f.write_str(s),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "-{}", Wrapped(a, 3)),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => match op {
                BinaryOp::Add => write!(f, "{} + {}", Wrapped(a, 1), Wrapped(b, 2)),
                BinaryOp::Sub => write!(f, "{} - {}", Wrapped(a, 1), Wrapped(b, 2)),
                BinaryOp::Mul => write!(f, "{}*{}", Wrapped(a, 2), Wrapped(b, 3)),
                BinaryOp::Div => write!(f, "{}/{}", Wrapped(a, 2), Wrapped(b, 3)),
                BinaryOp::Pow => write!(f, "{}^{}", Wrapped(a, 5), Wrapped(b, 3)),
                BinaryOp::Max => write!(f, "max({a}, {b})"),
                BinaryOp::Min => write!(f, "min({a}, {b})"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        assert_eq!(builtin_var("x1"), Some(Var::X(0)));
        assert_eq!(builtin_var("u12"), Some(Var::U(11)));
        assert_eq!(builtin_var("u0"), None);
        assert_eq!(builtin_var("u"), None);
        assert_eq!(builtin_var("xy"), None);
        assert!(is_reserved("tan"));
        assert!(is_reserved("u3"));
        assert!(!is_reserved("p1"));
    }

    #[test]
    fn signature_rejects_out_of_range() {
        let sig = Signature::nonlinearity(2);
        assert!(sig.resolve("u2").is_ok());
        assert_eq!(sig.resolve("u3"), Err(Error::UnknownIdentifier("u3".into())));
        assert!(Signature::scalars(["q"]).resolve("x1").is_err());
    }

    #[test]
    fn printing_keeps_structure() {
        let sig = Signature::nonlinearity(2);
        for text in ["(u1 - u2) - 1", "u1 - (u2 - 1)", "-u1^2", "(-u1)^2", "2^3^2", "(2^3)^2", "u1/(u2*3)", "2^-1"] {
            let e = parse(text, &sig).unwrap();
            let back = parse(&e.to_string(), &sig).unwrap();
            assert_eq!(e, back, "{text} -> {e}");
        }
    }
}
