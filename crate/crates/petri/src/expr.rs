//! Arc inscriptions, guards and channel arguments.
//!
//! Input and read arcs carry *patterns*: each element is a variable, a
//! constant or a wildcard. Output arcs, guards and channel arguments carry
//! general expressions over the variables bound by the transition.

use std::collections::BTreeMap;
use std::ops;

use thiserror::Error;

use crate::value::Value;

pub type Env = BTreeMap<String, Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var(String),
    Const(Value),
    /// Matches anything; only meaningful inside input/read patterns.
    Any,
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("type mismatch in `{0}`")]
    Type(String),
    #[error("integer overflow")]
    Overflow,
    #[error("wildcard used outside a pattern")]
    Wildcard,
}

pub fn var(name: &str) -> Expr {
    Expr::Var(name.to_owned())
}

pub fn val(v: impl Into<Value>) -> Expr {
    Expr::Const(v.into())
}

pub fn any() -> Expr {
    Expr::Any
}

fn bin(op: BinOp, a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    Expr::Bin(op, Box::new(a.into()), Box::new(b.into()))
}

pub fn eq(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Eq, a, b)
}
pub fn ne(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Ne, a, b)
}
pub fn lt(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Lt, a, b)
}
pub fn le(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Le, a, b)
}
pub fn gt(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Gt, a, b)
}
pub fn ge(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Ge, a, b)
}
pub fn and(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::And, a, b)
}
pub fn or(a: impl Into<Expr>, b: impl Into<Expr>) -> Expr {
    bin(BinOp::Or, a, b)
}
pub fn not(a: impl Into<Expr>) -> Expr {
    Expr::Not(Box::new(a.into()))
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::Const(Value::Int(v))
    }
}

impl From<i32> for Expr {
    fn from(v: i32) -> Self {
        Expr::Const(Value::Int(v as i64))
    }
}

impl From<bool> for Expr {
    fn from(v: bool) -> Self {
        Expr::Const(Value::Bool(v))
    }
}

impl From<Value> for Expr {
    fn from(v: Value) -> Self {
        Expr::Const(v)
    }
}

impl From<&str> for Expr {
    /// A bare string in an expression position names a variable.
    fn from(v: &str) -> Self {
        Expr::Var(v.to_owned())
    }
}

impl<R: Into<Expr>> ops::Add<R> for Expr {
    type Output = Expr;
    fn add(self, rhs: R) -> Expr {
        bin(BinOp::Add, self, rhs)
    }
}

impl<R: Into<Expr>> ops::Sub<R> for Expr {
    type Output = Expr;
    fn sub(self, rhs: R) -> Expr {
        bin(BinOp::Sub, self, rhs)
    }
}

impl<R: Into<Expr>> ops::Mul<R> for Expr {
    type Output = Expr;
    fn mul(self, rhs: R) -> Expr {
        bin(BinOp::Mul, self, rhs)
    }
}

impl Expr {
    pub fn is_pattern_term(&self) -> bool {
        matches!(self, Expr::Var(_) | Expr::Const(_) | Expr::Any)
    }

    /// Variables referenced anywhere in the expression.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Const(_) | Expr::Any => {}
            Expr::Not(e) => e.vars(out),
            Expr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    pub fn eval(&self, env: &Env) -> Result<Value, EvalError> {
        match self {
            Expr::Var(v) => env.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone())),
            Expr::Const(c) => Ok(c.clone()),
            Expr::Any => Err(EvalError::Wildcard),
            Expr::Not(e) => match e.eval(env)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                _ => Err(EvalError::Type("!".into())),
            },
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                apply(*op, a, b)
            }
        }
    }

    /// Evaluates a guard. Anything other than `true` counts as false.
    pub fn holds(&self, env: &Env) -> bool {
        matches!(self.eval(env), Ok(Value::Bool(true)))
    }
}

fn apply(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use BinOp::*;
    match op {
        Eq => return Ok(Value::Bool(a == b)),
        Ne => return Ok(Value::Bool(a != b)),
        And | Or => {
            let (Value::Bool(x), Value::Bool(y)) = (&a, &b) else {
                return Err(EvalError::Type(format!("{op:?}")));
            };
            return Ok(Value::Bool(if op == And { *x && *y } else { *x || *y }));
        }
        _ => {}
    }
    let (Value::Int(x), Value::Int(y)) = (&a, &b) else {
        return Err(EvalError::Type(format!("{op:?}")));
    };
    let (x, y) = (*x, *y);
    Ok(match op {
        Add => Value::Int(x.checked_add(y).ok_or(EvalError::Overflow)?),
        Sub => Value::Int(x.checked_sub(y).ok_or(EvalError::Overflow)?),
        Mul => Value::Int(x.checked_mul(y).ok_or(EvalError::Overflow)?),
        Lt => Value::Bool(x < y),
        Le => Value::Bool(x <= y),
        Gt => Value::Bool(x > y),
        Ge => Value::Bool(x >= y),
        Eq | Ne | And | Or => unreachable!(),
    })
}
