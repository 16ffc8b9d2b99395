//! Closed-form scalar expressions over the coordinates `x1..xN`.
//!
//! Expressions are immutable trees behind `Arc`, so clones are cheap and
//! values can be shared across threads. Construction goes through the
//! simplifying constructors (`add`, `mul`, ...), which fold constants and
//! drop neutral elements; this keeps iterated brackets small enough to
//! evaluate inside ODE right-hand sides.

mod parse;
mod step;

use std::fmt;
use std::sync::Arc;

pub use parse::{parse_expr, ParseContext};
pub use step::smooth_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    /// Derivative of `abs`; zero at the origin.
    Sign,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    /// Power with a constant real exponent.
    Powf(Expr, f64),
    Unary(Func, Expr),
    /// `order`-th derivative of the smooth step (0 below 0, 1 above 1).
    Step { order: u32, arg: Expr },
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Self::from_node(Node::Const(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// Coordinate `x_{index+1}`.
    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => other.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => match other.node() {
                Node::Neg(inner) if inner == self => Expr::zero(),
                _ => Expr::from_node(Node::Add(self.clone(), other.clone())),
            },
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        if self == other {
            return Expr::zero();
        }
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) => scale(a, other),
            (_, Some(b)) => scale(b, self),
            _ => Expr::from_node(Node::Mul(self.clone(), other.clone())),
        }
    }

    pub fn div(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (Some(a), Some(b)) => Expr::constant(a / b),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (_, Some(b)) => scale(1.0 / b, self),
            _ => Expr::from_node(Node::Div(self.clone(), other.clone())),
        }
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            Node::Mul(a, b) => match a.as_const() {
                Some(c) => scale(-c, b),
                None => Expr::from_node(Node::Neg(self.clone())),
            },
            _ => Expr::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn powf(&self, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return self.clone();
        }
        match self.node() {
            Node::Const(c) => Expr::constant(c.powf(exponent)),
            _ => Expr::from_node(Node::Powf(self.clone(), exponent)),
        }
    }

    pub fn apply(&self, func: Func) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(func.apply(c)),
            None => Expr::from_node(Node::Unary(func, self.clone())),
        }
    }

    /// `order`-th derivative of the smooth step evaluated at this expression.
    pub fn step(&self, order: u32) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(smooth_step(order, c)),
            None => Expr::from_node(Node::Step {
                order,
                arg: self.clone(),
            }),
        }
    }

    /// Smooth bump equal to 1 where `radius_sq <= r1^2` and 0 where
    /// `radius_sq >= r2^2`.
    pub fn bump(r1: f64, r2: f64, radius_sq: &Expr) -> Expr {
        let outer = r2 * r2;
        let width = outer - r1 * r1;
        Expr::constant(outer)
            .sub(radius_sq)
            .div(&Expr::constant(width))
            .step(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.node() {
            Node::Const(c) => *c,
            Node::Var(i) => x[*i],
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Neg(a) => -a.eval(x),
            Node::Powf(a, p) => powf(a.eval(x), *p),
            Node::Unary(f, a) => f.apply(a.eval(x)),
            Node::Step { order, arg } => smooth_step(*order, arg.eval(x)),
        }
    }

    /// Exact partial derivative with respect to coordinate `var` (zero-based).
    pub fn diff(&self, var: usize) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => a.diff(var).add(&b.diff(var)),
            Node::Mul(a, b) => a.diff(var).mul(b).add(&a.mul(&b.diff(var))),
            Node::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                da.div(b).sub(&a.mul(&db).div(&b.mul(b)))
            }
            Node::Neg(a) => a.diff(var).neg(),
            Node::Powf(a, p) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::constant(*p).mul(&a.powf(p - 1.0)).mul(&da)
            }
            Node::Unary(f, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => a.apply(Func::Cos),
                    Func::Cos => a.apply(Func::Sin).neg(),
                    Func::Exp => self.clone(),
                    Func::Sqrt => Expr::constant(0.5).div(self),
                    Func::Abs => a.apply(Func::Sign),
                    Func::Sign => return Expr::zero(),
                };
                outer.mul(&da)
            }
            Node::Step { order, arg } => {
                let da = arg.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                arg.step(order + 1).mul(&da)
            }
        }
    }

    /// Number of nodes in the tree (shared subtrees counted each time).
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => 1 + a.size() + b.size(),
            Node::Neg(a) | Node::Powf(a, _) | Node::Unary(_, a) => 1 + a.size(),
            Node::Step { arg, .. } => 1 + arg.size(),
        }
    }

    /// Largest zero-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.max_var().max(b.max_var()),
            Node::Neg(a) | Node::Powf(a, _) | Node::Unary(_, a) => a.max_var(),
            Node::Step { arg, .. } => arg.max_var(),
        }
    }
}

fn scale(c: f64, e: &Expr) -> Expr {
    if c == 0.0 {
        return Expr::zero();
    }
    if c == 1.0 {
        return e.clone();
    }
    match e.node() {
        Node::Mul(a, b) => {
            if let Some(inner) = a.as_const() {
                return scale(c * inner, b);
            }
        }
        Node::Neg(inner) => return scale(-c, inner),
        _ => {}
    }
    if c == -1.0 {
        return Expr::from_node(Node::Neg(e.clone()));
    }
    Expr::from_node(Node::Mul(Expr::constant(c), e.clone()))
}

fn powf(base: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        base.powi(p as i32)
    } else {
        base.powf(p)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Add(a, b) => match b.node() {
                Node::Neg(inner) => write!(f, "({a} - {inner})"),
                _ => write!(f, "({a} + {b})"),
            },
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "{a}/{b}"),
            Node::Neg(a) => write!(f, "-{a}"),
            Node::Powf(a, p) => {
                if *p < 0.0 || p.fract() != 0.0 {
                    write!(f, "{a}^({p})")
                } else {
                    write!(f, "{a}^{p}")
                }
            }
            Node::Unary(func, a) => write!(f, "{}({a})", func.name()),
            Node::Step { order, arg } => write!(f, "step{order}({arg})"),
        }
    }
}
