//! User-supplied potential expressions.
//!
//! Expressions are parsed once into an immutable syntax tree and evaluated
//! over real, dual or hyper-dual scalars, which gives the value, the exact
//! gradient (one dual pass per coordinate) and the exact Hessian (one
//! hyper-dual pass per upper-triangular entry).
//!
//! Grammar: numbers (`2`, `0.5`, `1e-3`), variables `x1..xn`, parameter
//! names, `+ - * / ^`, unary `-`, parentheses and the functions
//! `sin cos tan tanh exp log sqrt abs`. `^` is right-associative and binds
//! tighter than unary minus. `pi` is a built-in constant.

mod parse;
pub mod scalar;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::linalg::SymMatrix;
pub use scalar::{Dual, HyperDual, Scalar};

/// Named parameter values, late-bound at evaluation time.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier '{name}' at offset {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("function '{name}' at offset {pos} takes {expected} argument(s), got {found}")]
    Arity { name: String, pos: usize, expected: usize, found: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
    #[error("point has dimension {found}, expression needs at least {expected}")]
    Dimension { expected: usize, found: usize },
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
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Syntax tree node. Variables are stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Param(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval<S: Scalar>(&self, x: &[S], params: &dyn Fn(&str) -> Option<f64>) -> Result<S, ExprError> {
        Ok(match self {
            Node::Num(v) => S::constant(*v),
            Node::Var(i) => x[*i],
            Node::Param(name) => S::constant(params(name).ok_or_else(|| ExprError::UnboundParameter(name.clone()))?),
            Node::Neg(a) => -a.eval(x, params)?,
            Node::Bin(op, a, b) => {
                let a = a.eval(x, params)?;
                let b = b.eval(x, params)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.re() == 0.0 {
                            return Err(ExprError::Domain("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b)?,
                }
            }
            Node::Call(f, a) => {
                let a = a.eval(x, params)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Tanh => a.tanh(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Log => {
                        if a.re() <= 0.0 {
                            return Err(ExprError::Domain(format!("log of non-positive value {}", a.re())));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a.re() < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {}", a.re())));
                        }
                        a.sqrt()
                    }
                }
            }
        })
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Node::Num(_) | Node::Var(_) => {}
            Node::Param(p) => {
                out.insert(p.clone());
            }
            Node::Neg(a) | Node::Call(_, a) => a.collect_params(out),
            Node::Bin(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    fn uses_func(&self, f: Func) -> bool {
        match self {
            Node::Num(_) | Node::Var(_) | Node::Param(_) => false,
            Node::Neg(a) => a.uses_func(f),
            Node::Call(g, a) => *g == f || a.uses_func(f),
            Node::Bin(_, a, b) => a.uses_func(f) || b.uses_func(f),
        }
    }

    fn substitute(&self, params: &Params) -> Result<Node, ExprError> {
        Ok(match self {
            Node::Param(name) => Node::Num(*params.get(name).ok_or_else(|| ExprError::UnboundParameter(name.clone()))?),
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(params)?)),
            Node::Call(f, a) => Node::Call(*f, Box::new(a.substitute(params)?)),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.substitute(params)?), Box::new(b.substitute(params)?)),
        })
    }
}

fn pow<S: Scalar>(base: S, exp: S) -> Result<S, ExprError> {
    if exp.is_real() {
        let p = exp.re();
        if p.fract() == 0.0 && p.abs() < f64::from(i32::MAX) {
            let n = p as i32;
            if n < 0 && base.re() == 0.0 {
                return Err(ExprError::Domain("zero raised to a negative power".into()));
            }
            return Ok(base.powi(n));
        }
        if base.re() < 0.0 {
            return Err(ExprError::Domain(format!("negative base {} with non-integer exponent {p}", base.re())));
        }
        return Ok(base.powf(p));
    }
    if base.re() <= 0.0 {
        return Err(ExprError::Domain(format!("non-positive base {} with variable exponent", base.re())));
    }
    Ok((exp * base.ln()).exp())
}

/// Canonical, fully parenthesized printer. Re-parsing the output yields an
/// identical tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{})", -v),
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Param(p) => write!(f, "{p}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed expression. Immutable; evaluation is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    dim: usize,
    params: BTreeSet<String>,
}

/// Parse `source` into an expression; the dimension is the largest variable
/// index referenced.
pub fn parse(source: &str) -> Result<Expr, ExprError> {
    let mut p = parse::Parser::new(source)?;
    let root = p.parse_all()?;
    let mut params = BTreeSet::new();
    root.collect_params(&mut params);
    Ok(Expr { root, dim: p.max_var, params })
}

impl Expr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Largest variable index used (`x3` → 3).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Names of free parameters, sorted.
    pub fn params(&self) -> &BTreeSet<String> {
        &self.params
    }

    pub fn uses_abs(&self) -> bool {
        self.root.uses_func(Func::Abs)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() < self.dim {
            return Err(ExprError::Dimension { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], params: &Params) -> Result<f64, ExprError> {
        self.check_dim(x)?;
        self.root.eval(x, &|n| params.get(n).copied())
    }

    pub fn grad(&self, x: &[f64], params: &Params) -> Result<Vec<f64>, ExprError> {
        self.check_dim(x)?;
        gradient_of(&self.root, x, &|n| params.get(n).copied())
    }

    pub fn hessian(&self, x: &[f64], params: &Params) -> Result<SymMatrix, ExprError> {
        self.check_dim(x)?;
        hessian_of(&self.root, x, &|n| params.get(n).copied())
    }

    /// Resolve every parameter to a constant, producing a faster evaluator.
    pub fn bind(&self, params: &Params) -> Result<BoundExpr, ExprError> {
        Ok(BoundExpr { root: self.root.substitute(params)?, dim: self.dim })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// An expression whose parameters have been substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpr {
    root: Node,
    dim: usize,
}

fn no_params(_: &str) -> Option<f64> {
    None
}

impl BoundExpr {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn uses_abs(&self) -> bool {
        self.root.uses_func(Func::Abs)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.root.eval(x, &no_params)
    }

    pub fn eval_scalar<S: Scalar>(&self, x: &[S]) -> Result<S, ExprError> {
        self.root.eval(x, &no_params)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        gradient_of(&self.root, x, &no_params)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix, ExprError> {
        hessian_of(&self.root, x, &no_params)
    }
}

fn gradient_of(root: &Node, x: &[f64], params: &dyn Fn(&str) -> Option<f64>) -> Result<Vec<f64>, ExprError> {
    let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        seeded[i].du = 1.0;
        g.push(root.eval(&seeded, params)?.du);
        seeded[i].du = 0.0;
    }
    Ok(g)
}

fn hessian_of(root: &Node, x: &[f64], params: &dyn Fn(&str) -> Option<f64>) -> Result<SymMatrix, ExprError> {
    let n = x.len();
    let mut h = SymMatrix::zeros(n);
    let mut seeded: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    for i in 0..n {
        for j in i..n {
            seeded[i].e1 = 1.0;
            seeded[j].e2 = 1.0;
            let v = root.eval(&seeded, params)?.e12;
            seeded[i].e1 = 0.0;
            seeded[j].e2 = 0.0;
            h.set(i, j, v);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX2: &str = "0.5*(1-x1^2)^2 + 0.5*(1-4*x2^2)^2";

    fn none() -> Params {
        Params::new()
    }

    #[test]
    fn parses_dimension() {
        assert_eq!(parse("x1^2 + x2^2").unwrap().dim(), 2);
        assert_eq!(parse(EX2).unwrap().dim(), 2);
        assert_eq!(parse("x3").unwrap().dim(), 3);
        assert_eq!(parse("0.5").unwrap().dim(), 0);
    }

    #[test]
    fn syntax_error_position() {
        match parse("x1^") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse("(x1"), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse("x1 $ 2"), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse("x1 x2"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers_and_arity() {
        assert!(matches!(parse("foo(x1)"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x0 + 1"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("sin(x1, x2)"), Err(ExprError::Arity { expected: 1, found: 2, .. })));
        assert!(matches!(parse("sin()"), Err(ExprError::Arity { found: 0, .. })));
        assert!(matches!(parse("sin x1"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-x1^2").unwrap();
        assert_eq!(e.eval(&[3.0], &none()).unwrap(), -9.0);
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval(&[], &none()).unwrap(), 512.0);
        let e = parse("2^-1").unwrap();
        assert_eq!(e.eval(&[], &none()).unwrap(), 0.5);
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(e.eval(&[], &none()).unwrap(), -4.0);
        let e = parse("8 / 4 / 2").unwrap();
        assert_eq!(e.eval(&[], &none()).unwrap(), 1.0);
        let e = parse("1.5e1 * 2E-1").unwrap();
        assert!((e.eval(&[], &none()).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let e = parse("x1^2+x2^2").unwrap();
        assert_eq!(e.eval(&[1.0, 2.0], &none()).unwrap(), 5.0);
        let e = parse(EX2).unwrap();
        assert_eq!(e.eval(&[1.0, 0.0], &none()).unwrap(), 0.5);
        assert_eq!(e.eval(&[0.0, 0.5], &none()).unwrap(), 0.5);
        assert_eq!(e.eval(&[0.0, 0.0], &none()).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        let p = none();
        assert!(matches!(parse("log(x1)").unwrap().eval(&[-1.0], &p), Err(ExprError::Domain(_))));
        assert!(matches!(parse("sqrt(x1)").unwrap().eval(&[-1.0], &p), Err(ExprError::Domain(_))));
        assert!(matches!(parse("x1^0.5").unwrap().eval(&[-2.0], &p), Err(ExprError::Domain(_))));
        assert!(matches!(parse("1/x1").unwrap().eval(&[0.0], &p), Err(ExprError::Domain(_))));
        // integer exponents on negative bases are fine
        assert_eq!(parse("x1^3").unwrap().eval(&[-2.0], &p).unwrap(), -8.0);
        assert!(matches!(
            parse("x1 + lambda").unwrap().eval(&[1.0], &p),
            Err(ExprError::UnboundParameter(n)) if n == "lambda"
        ));
        assert!(matches!(parse("x1 + x2").unwrap().eval(&[1.0], &p), Err(ExprError::Dimension { expected: 2, found: 1 })));
    }

    #[test]
    fn parameters_are_late_bound() {
        let e = parse("lambda*x1^2 + alpha").unwrap();
        assert_eq!(e.params().iter().cloned().collect::<Vec<_>>(), vec!["alpha", "lambda"]);
        let mut p = Params::new();
        p.insert("lambda".into(), 2.0);
        p.insert("alpha".into(), 1.0);
        assert_eq!(e.eval(&[3.0], &p).unwrap(), 19.0);
        p.insert("lambda".into(), 0.5);
        assert_eq!(e.eval(&[3.0], &p).unwrap(), 5.5);
        let b = e.bind(&p).unwrap();
        assert_eq!(b.eval(&[3.0]).unwrap(), 5.5);
    }

    #[test]
    fn gradient_examples() {
        let p = none();
        assert_eq!(parse("x1*x2").unwrap().grad(&[2.0, 3.0], &p).unwrap(), vec![3.0, 2.0]);
        assert_eq!(parse("x1^2").unwrap().grad(&[3.0], &p).unwrap(), vec![6.0]);
        let g = parse(EX2).unwrap().grad(&[1.0, 0.0], &p).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn hessian_examples() {
        let p = none();
        let h = parse("x1^2+x2^2").unwrap().hessian(&[0.0, 0.0], &p).unwrap();
        assert_eq!(h.to_rows(), vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let h = parse("x1*x2").unwrap().hessian(&[5.0, 7.0], &p).unwrap();
        assert_eq!(h.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let h = parse(EX2).unwrap().hessian(&[1.0, 0.0], &p).unwrap();
        assert_eq!(h.to_rows(), vec![vec![4.0, 0.0], vec![0.0, -8.0]]);
    }

    #[test]
    fn canonical_printer_round_trips() {
        for src in [EX2, "-x1^2", "2^3^2", "sin(x1)*exp(-x2/3) - lambda", "x1 - (-2)", "sqrt(abs(x1))"] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let again = parse(&printed).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
            assert_eq!(printed, again.to_string());
        }
    }

    #[test]
    fn variable_exponent_uses_exp_log() {
        let e = parse("x1^x2").unwrap();
        let g = e.grad(&[2.0, 3.0], &none()).unwrap();
        assert!((g[0] - 12.0).abs() < 1e-12);
        assert!((g[1] - 8.0 * 2f64.ln()).abs() < 1e-12);
    }
}
