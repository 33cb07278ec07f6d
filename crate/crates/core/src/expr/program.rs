use std::f64::consts::{FRAC_PI_2, PI};

use super::{BinaryOp, Expr, Signature, UnaryOp, Var};
use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Half-width of the excluded band around the poles of `tan`.
pub const TAN_POLE_GUARD: f64 = 1e-8;

/// Bindings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub x: Point2,
    pub u: &'a [f64],
    /// Values of the declared scalars, in signature order.
    pub scalars: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn new(x: Point2, u: &'a [f64]) -> Self {
        Env { x, u, scalars: &[] }
    }

    pub fn scalars(scalars: &'a [f64]) -> Self {
        Env {
            x: [0.0, 0.0],
            u: &[],
            scalars,
        }
    }

    pub fn empty() -> Env<'static> {
        Env {
            x: [0.0, 0.0],
            u: &[],
            scalars: &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    X(usize),
    U(usize),
    Scalar(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

/// An [`Expr`] flattened to postfix form for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
    names: Vec<String>,
}

impl Program {
    pub fn compile(e: &Expr, sig: &Signature) -> Result<Program> {
        let mut ops = Vec::new();
        emit(e, sig, &mut ops)?;
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Unary(_) => {}
                Op::Binary(_) => depth -= 1,
                _ => depth += 1,
            }
            max_depth = max_depth.max(depth);
        }
        Ok(Program {
            ops,
            depth: max_depth,
            names: sig.scalars.clone(),
        })
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<f64> {
        let mut stack = Vec::with_capacity(self.depth);
        self.eval_with(env, &mut stack)
    }

    /// Evaluates using `stack` as scratch space to avoid reallocation in hot loops.
    pub fn eval_with(&self, env: &Env<'_>, stack: &mut Vec<f64>) -> Result<f64> {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::X(k) => stack.push(env.x[k]),
                Op::U(k) => stack.push(
                    *env.u
                        .get(k)
                        .ok_or_else(|| Error::UnboundName(format!("u{}", k + 1)))?,
                ),
                Op::Scalar(k) => stack.push(
                    *env.scalars
                        .get(k)
                        .ok_or_else(|| Error::UnboundName(self.names[k].clone()))?,
                ),
                Op::Unary(f) => {
                    let a = stack.pop().expect("well-formed program");
                    stack.push(apply_unary(f, a)?);
                }
                Op::Binary(f) => {
                    let b = stack.pop().expect("well-formed program");
                    let a = stack.pop().expect("well-formed program");
                    stack.push(apply_binary(f, a, b)?);
                }
            }
        }
        Ok(stack.pop().expect("well-formed program"))
    }
}

fn emit(e: &Expr, sig: &Signature, ops: &mut Vec<Op>) -> Result<()> {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Pi => ops.push(Op::Const(PI)),
        Expr::Var(Var::X(k)) => {
            if !sig.spatial || *k >= 2 {
                return Err(Error::UnknownIdentifier(format!("x{}", k + 1)));
            }
            ops.push(Op::X(*k))
        }
        Expr::Var(Var::U(k)) => {
            if *k >= sig.components {
                return Err(Error::UnknownIdentifier(format!("u{}", k + 1)));
            }
            ops.push(Op::U(*k))
        }
        Expr::Var(Var::Scalar(name)) => {
            let k = sig
                .scalars
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::UnknownIdentifier(name.clone()))?;
            ops.push(Op::Scalar(k))
        }
        Expr::Unary(f, a) => {
            emit(a, sig, ops)?;
            ops.push(Op::Unary(*f));
        }
        Expr::Binary(f, a, b) => {
            emit(a, sig, ops)?;
            emit(b, sig, ops)?;
            ops.push(Op::Binary(*f));
        }
    }
    Ok(())
}

fn domain_error(op: &str, arg: f64) -> Error {
    Error::EvalDomainError {
        op: op.to_string(),
        arg,
    }
}

fn finite(op: &str, arg: f64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain_error(op, arg))
    }
}

pub(crate) fn apply_unary(f: UnaryOp, a: f64) -> Result<f64> {
    if a.is_nan() {
        return Err(domain_error(f.name(), a));
    }
    match f {
        UnaryOp::Neg => Ok(-a),
        UnaryOp::Abs => Ok(a.abs()),
        UnaryOp::Sqrt if a < 0.0 => Err(domain_error("sqrt", a)),
        UnaryOp::Sqrt => Ok(a.sqrt()),
        UnaryOp::Sin => finite("sin", a, a.sin()),
        UnaryOp::Cos => finite("cos", a, a.cos()),
        UnaryOp::Tan => {
            let k = ((a - FRAC_PI_2) / PI).round();
            if (a - (FRAC_PI_2 + k * PI)).abs() < TAN_POLE_GUARD {
                return Err(domain_error("tan", a));
            }
            finite("tan", a, a.tan())
        }
        UnaryOp::Exp => finite("exp", a, a.exp()),
        UnaryOp::Log if a <= 0.0 => Err(domain_error("log", a)),
        UnaryOp::Log => finite("log", a, a.ln()),
    }
}

pub(crate) fn apply_binary(f: BinaryOp, a: f64, b: f64) -> Result<f64> {
    match f {
        BinaryOp::Add => finite("+", a, a + b),
        BinaryOp::Sub => finite("-", a, a - b),
        BinaryOp::Mul => finite("*", a, a * b),
        BinaryOp::Div if b == 0.0 => Err(domain_error("/", a)),
        BinaryOp::Div => finite("/", a, a / b),
        BinaryOp::Pow => finite("pow", a, a.powf(b)),
        BinaryOp::Max if a.is_nan() || b.is_nan() => Err(domain_error("max", f64::NAN)),
        BinaryOp::Max => Ok(a.max(b)),
        BinaryOp::Min if a.is_nan() || b.is_nan() => Err(domain_error("min", f64::NAN)),
        BinaryOp::Min => Ok(a.min(b)),
    }
}
