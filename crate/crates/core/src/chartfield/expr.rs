//! Scalar coefficient expressions over the coordinates of a chart.
//!
//! An [`Expr`] is an immutable, reference-counted DAG. The arithmetic
//! operators build nodes through folding constructors (constant folding,
//! neutral-element removal, flattening of sums and products); the parser
//! builds raw nodes so that its output mirrors the source text.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

// Nested sums/products are inlined only while the node stays this small, so
// repeated squaring of a shared product does not explode the child lists.
const FLATTEN_LIMIT: usize = 12;

/// Denominators smaller than this abort evaluation at the point.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by {denominator:e} at point {point:?}")]
    Singular { denominator: f64, point: Vec<f64> },
    #[error("non-finite value at point {point:?}")]
    NonFinite { point: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Expr),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
}

#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl Expr {
    pub fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(i: usize) -> Expr {
        Expr::raw(Node::Var(i))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut flat = Vec::new();
        let mut c = 0.0;
        for t in terms {
            match t.node() {
                Node::Const(v) => c += v,
                Node::Add(inner) if inner.len() + flat.len() <= FLATTEN_LIMIT => {
                    for u in inner {
                        match u.as_const() {
                            Some(v) => c += v,
                            None => flat.push(u.clone()),
                        }
                    }
                }
                _ => flat.push(t),
            }
        }
        if c != 0.0 {
            flat.push(Expr::constant(c));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::raw(Node::Add(flat)),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut flat = Vec::new();
        let mut c = 1.0;
        for t in factors {
            match t.node() {
                Node::Const(v) => c *= v,
                Node::Mul(inner) if inner.len() + flat.len() <= FLATTEN_LIMIT => {
                    for u in inner {
                        match u.as_const() {
                            Some(v) => c *= v,
                            None => flat.push(u.clone()),
                        }
                    }
                }
                Node::Neg(inner) => {
                    c = -c;
                    match inner.as_const() {
                        Some(v) => c *= v,
                        None => flat.push(inner.clone()),
                    }
                }
                _ => flat.push(t),
            }
            if c == 0.0 {
                return Expr::zero();
            }
        }
        if flat.is_empty() {
            return Expr::constant(c);
        }
        if c != 1.0 {
            flat.insert(0, Expr::constant(c));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Expr::raw(Node::Mul(flat))
        }
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::product([Expr::constant(c), self.clone()])
    }

    pub fn powi(&self, n: i32) -> Expr {
        match (n, self.node()) {
            (0, _) => Expr::one(),
            (1, _) => self.clone(),
            (_, Node::Const(c)) if n > 0 || *c != 0.0 => Expr::constant(c.powi(n)),
            (_, Node::Pow(b, k)) => b.powi(k * n),
            _ => Expr::raw(Node::Pow(self.clone(), n)),
        }
    }

    pub fn sin(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => Expr::raw(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => Expr::raw(Node::Cos(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Expr::raw(Node::Exp(self.clone())),
        }
    }

    fn quotient(a: &Expr, b: &Expr) -> Expr {
        if a.is_zero() {
            return Expr::zero();
        }
        match b.as_const() {
            Some(c) if c != 0.0 => a.scale(1.0 / c),
            _ => Expr::raw(Node::Div(a.clone(), b.clone())),
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn size(&self) -> usize {
        fn walk(e: &Expr, seen: &mut HashMap<usize, ()>) {
            if seen.insert(e.ptr(), ()).is_some() {
                return;
            }
            e.for_each_child(|c| walk(c, seen));
        }
        let mut seen = HashMap::new();
        walk(self, &mut seen);
        seen.len()
    }

    fn for_each_child(&self, mut f: impl FnMut(&Expr)) {
        match self.node() {
            Node::Const(_) | Node::Var(_) => {}
            Node::Neg(a) | Node::Pow(a, _) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => f(a),
            Node::Add(v) | Node::Mul(v) => v.iter().for_each(f),
            Node::Div(a, b) => {
                f(a);
                f(b)
            }
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        fn walk(e: &Expr, seen: &mut HashMap<usize, ()>, best: &mut Option<usize>) {
            if seen.insert(e.ptr(), ()).is_some() {
                return;
            }
            if let Node::Var(i) = e.node() {
                *best = (*best).max(Some(*i));
            }
            e.for_each_child(|c| walk(c, seen, best));
        }
        let mut best = None;
        walk(self, &mut HashMap::new(), &mut best);
        best
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        Evaluator::new(point).eval(self)
    }

    /// Symbolic partial derivative with respect to coordinate `i`.
    pub fn diff(&self, i: usize) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(i, &mut memo)
    }

    /// Differentiates several expressions at once, sharing common subtrees.
    pub fn diff_many(exprs: &[Expr], i: usize) -> Vec<Expr> {
        let mut memo = HashMap::new();
        exprs.iter().map(|e| e.diff_memo(i, &mut memo)).collect()
    }

    fn diff_memo(&self, i: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.ptr()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(j) => {
                if *j == i {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => -a.diff_memo(i, memo),
            Node::Add(v) => Expr::sum(v.iter().map(|t| t.diff_memo(i, memo))),
            Node::Mul(v) => {
                let mut terms = Vec::new();
                for k in 0..v.len() {
                    let dk = v[k].diff_memo(i, memo);
                    if dk.is_zero() {
                        continue;
                    }
                    let mut f: Vec<Expr> = Vec::with_capacity(v.len());
                    for (l, c) in v.iter().enumerate() {
                        f.push(if l == k { dk.clone() } else { c.clone() });
                    }
                    terms.push(Expr::product(f));
                }
                Expr::sum(terms)
            }
            Node::Div(a, b) => {
                let da = a.diff_memo(i, memo);
                let db = b.diff_memo(i, memo);
                let first = &da / b;
                if db.is_zero() {
                    first
                } else {
                    first - &(a * &db) / &b.powi(2)
                }
            }
            Node::Pow(a, n) => {
                let da = a.diff_memo(i, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product([Expr::constant(*n as f64), a.powi(n - 1), da])
                }
            }
            Node::Sin(a) => {
                let da = a.diff_memo(i, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    a.cos() * da
                }
            }
            Node::Cos(a) => {
                let da = a.diff_memo(i, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    -(a.sin() * da)
                }
            }
            Node::Exp(a) => {
                let da = a.diff_memo(i, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    self.clone() * da
                }
            }
        };
        memo.insert(self.ptr(), d.clone());
        d
    }

    /// Re-evaluates constant subtrees; raw parser output becomes folded.
    pub fn fold(&self) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Neg(a) => -a.fold(),
            Node::Add(v) => Expr::sum(v.iter().map(Expr::fold)),
            Node::Mul(v) => Expr::product(v.iter().map(Expr::fold)),
            Node::Div(a, b) => Expr::quotient(&a.fold(), &b.fold()),
            Node::Pow(a, n) => a.fold().powi(*n),
            Node::Sin(a) => a.fold().sin(),
            Node::Cos(a) => a.fold().cos(),
            Node::Exp(a) => a.fold().exp(),
        }
    }

    /// Pretty printer using the given coordinate names; output re-parses
    /// to an expression with the same value everywhere.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

/// Evaluates many expressions at one point with a shared memo table.
///
/// Every memoized node is retained, so the pointer keys stay valid for the
/// evaluator's lifetime even if callers drop their temporaries.
pub struct Evaluator<'p> {
    point: &'p [f64],
    memo: HashMap<usize, (Expr, f64)>,
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p [f64]) -> Self {
        Evaluator {
            point,
            memo: HashMap::new(),
        }
    }

    pub fn point(&self) -> &[f64] {
        self.point
    }

    pub fn eval(&mut self, e: &Expr) -> Result<f64, EvalError> {
        let v = self.walk(e)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                point: self.point.to_vec(),
            })
        }
    }

    pub fn eval_all(&mut self, es: &[Expr]) -> Result<Vec<f64>, EvalError> {
        es.iter().map(|e| self.eval(e)).collect()
    }

    fn walk(&mut self, e: &Expr) -> Result<f64, EvalError> {
        let shared = Arc::strong_count(&e.0) > 1;
        if shared {
            if let Some((_, v)) = self.memo.get(&e.ptr()) {
                return Ok(*v);
            }
        }
        let p = self.point;
        let v = match e.node() {
            Node::Const(c) => *c,
            Node::Var(i) => p[*i],
            Node::Neg(a) => -self.walk(a)?,
            Node::Add(v) => {
                let mut s = 0.0;
                for t in v {
                    s += self.walk(t)?;
                }
                s
            }
            Node::Mul(v) => {
                let mut s = 1.0;
                for t in v {
                    s *= self.walk(t)?;
                }
                s
            }
            Node::Div(a, b) => {
                let den = self.walk(b)?;
                if den.abs() < SINGULAR_DENOMINATOR {
                    return Err(EvalError::Singular {
                        denominator: den,
                        point: p.to_vec(),
                    });
                }
                self.walk(a)? / den
            }
            Node::Pow(a, n) => {
                let base = self.walk(a)?;
                if *n < 0 && base.abs() < SINGULAR_DENOMINATOR {
                    return Err(EvalError::Singular {
                        denominator: base,
                        point: p.to_vec(),
                    });
                }
                base.powi(*n)
            }
            Node::Sin(a) => self.walk(a)?.sin(),
            Node::Cos(a) => self.walk(a)?.cos(),
            Node::Exp(a) => self.walk(a)?.exp(),
        };
        if shared {
            self.memo.insert(e.ptr(), (e.clone(), v));
        }
        Ok(v)
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    let body = if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c.abs() as i64)
    } else {
        format!("{:?}", c.abs())
    };
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{body})")
    } else {
        f.write_str(&body)
    }
}

impl ExprDisplay<'_> {
    // precedence: 0 sum, 1 product, 2 power operand
    fn write(&self, e: &Expr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &Expr, p: u8, f: &mut fmt::Formatter<'_>| self.write(e, p, f);
        match e.node() {
            Node::Const(c) => write_const(f, *c),
            Node::Var(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n),
                None => write!(f, "x{i}"),
            },
            Node::Neg(a) => {
                f.write_str("(-")?;
                sub(a, 2, f)?;
                f.write_str(")")
            }
            Node::Add(v) => {
                if prec > 0 {
                    f.write_str("(")?;
                }
                for (k, t) in v.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    sub(t, 1, f)?;
                }
                if prec > 0 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Node::Mul(v) => {
                if prec > 1 {
                    f.write_str("(")?;
                }
                for (k, t) in v.iter().enumerate() {
                    if k > 0 {
                        f.write_str("*")?;
                    }
                    sub(t, 2, f)?;
                }
                if prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Node::Div(a, b) => {
                if prec > 1 {
                    f.write_str("(")?;
                }
                sub(a, 2, f)?;
                f.write_str("/")?;
                sub(b, 2, f)?;
                if prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Node::Pow(a, n) => {
                f.write_str("(")?;
                sub(a, 2, f)?;
                write!(f, "^{n})")
            }
            Node::Sin(a) => {
                f.write_str("sin(")?;
                sub(a, 0, f)?;
                f.write_str(")")
            }
            Node::Cos(a) => {
                f.write_str("cos(")?;
                sub(a, 0, f)?;
                f.write_str(")")
            }
            Node::Exp(a) => {
                f.write_str("exp(")?;
                sub(a, 0, f)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, 0, f)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                (&self).$m(rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::sum([a.clone(), -b]));
binop!(Mul, mul, |a, b| Expr::product([a.clone(), b.clone()]));
binop!(Div, div, Expr::quotient);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Expr::product([Expr::constant(-1.0), self.clone()]),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }
    fn y() -> Expr {
        Expr::var(1)
    }

    #[test]
    fn folding_removes_neutral_elements() {
        let e = (x() * Expr::one()) + Expr::zero();
        assert_eq!(e, x());
        assert!((x() * Expr::zero()).is_zero());
        assert_eq!((Expr::constant(2.0) * Expr::constant(3.0)).as_const(), Some(6.0));
    }

    #[test]
    fn product_rule() {
        let e = x() * y();
        assert_eq!(e.diff(0), y());
        assert!(x().powi(2).diff(1).is_zero());
    }

    #[test]
    fn sin_derivative_matches_central_difference() {
        let e = x().sin();
        let d = e.diff(0).eval(&[0.7]).unwrap();
        let h = 1e-5;
        let fd = (e.eval(&[0.7 + h]).unwrap() - e.eval(&[0.7 - h]).unwrap()) / (2.0 * h);
        assert!((d - 0.7f64.cos()).abs() < 1e-15);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn quotient_rule_and_singular_point() {
        let e = Expr::one() / x();
        assert!((e.diff(0).eval(&[2.0]).unwrap() + 0.25).abs() < 1e-15);
        assert!(matches!(e.eval(&[0.0]), Err(EvalError::Singular { .. })));
    }

    #[test]
    fn shared_subtrees_are_memoized() {
        let mut e = x() + Expr::one();
        for _ in 0..40 {
            e = &e * &e;
        }
        // 2^40 tree leaves without sharing; the DAG stays tiny
        assert!(e.size() < 100);
        assert!(e.eval(&[0.0]).unwrap() == 1.0);
        let d = e.diff(0);
        assert!(d.size() < 1000);
    }
}
