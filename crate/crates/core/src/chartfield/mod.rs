//! Coordinate charts, the coefficient DSL, and classical tensor calculus.

pub mod expr;
pub mod linalg;
pub mod parser;
pub mod tensor;

pub use expr::{EvalError, Evaluator, Expr};
pub use linalg::Mat;
pub use parser::{parse_scalar_expr, ParseError};
pub use tensor::{Kind, TensorError, TensorField};

use thiserror::Error;

/// A closed-form coefficient function; fields are plain expressions.
pub type ScalarField = Expr;

/// A sample point: one real per coordinate.
pub type Point = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("chart must have at least one coordinate")]
    Empty,
    #[error("duplicate coordinate name `{0}`")]
    DuplicateName(String),
    #[error("invalid coordinate name `{0}`")]
    BadName(String),
    #[error("degenerate interval [{lo}, {hi}] for coordinate `{name}`")]
    Degenerate { name: String, lo: f64, hi: f64 },
    #[error("expected {expected} intervals, got {got}")]
    Shape { expected: usize, got: usize },
}

/// A single coordinate chart with an axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    domain: Vec<(f64, f64)>,
}

const RESERVED: [&str; 3] = ["sin", "cos", "exp"];

impl Chart {
    pub fn new<S: AsRef<str>>(names: &[S], domain: &[(f64, f64)]) -> Result<Chart, ChartError> {
        if names.is_empty() {
            return Err(ChartError::Empty);
        }
        if names.len() != domain.len() {
            return Err(ChartError::Shape {
                expected: names.len(),
                got: domain.len(),
            });
        }
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let ok = n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_alphanumeric() || c == '_')
                && !RESERVED.contains(&n);
            if !ok {
                return Err(ChartError::BadName(n.to_string()));
            }
            if out.iter().any(|o| o == n) {
                return Err(ChartError::DuplicateName(n.to_string()));
            }
            out.push(n.to_string());
        }
        for (name, &(lo, hi)) in out.iter().zip(domain) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ChartError::Degenerate {
                    name: name.clone(),
                    lo,
                    hi,
                });
            }
        }
        Ok(Chart {
            names: out,
            domain: domain.to_vec(),
        })
    }

    /// Chart whose box is `[lo, hi]` on every axis.
    pub fn cube<S: AsRef<str>>(names: &[S], lo: f64, hi: f64) -> Result<Chart, ChartError> {
        Chart::new(names, &vec![(lo, hi); names.len()])
    }

    /// `x1..xm` on `[-1, 1]^m`.
    pub fn euclidean(m: usize) -> Chart {
        let names: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        Chart::cube(&names, -1.0, 1.0).expect("valid default chart")
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coord(&self, i: usize) -> Expr {
        assert!(i < self.dim());
        Expr::var(i)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.domain).all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn center(&self) -> Point {
        self.domain.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn parse(&self, text: &str) -> Result<Expr, ParseError> {
        parse_scalar_expr(text, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_charts() {
        assert_eq!(Chart::cube::<&str>(&[], 0.0, 1.0), Err(ChartError::Empty));
        assert!(matches!(Chart::cube(&["x", "x"], 0.0, 1.0), Err(ChartError::DuplicateName(_))));
        assert!(matches!(Chart::cube(&["x"], 1.0, 1.0), Err(ChartError::Degenerate { .. })));
        assert!(matches!(Chart::cube(&["sin"], 0.0, 1.0), Err(ChartError::BadName(_))));
    }

    #[test]
    fn coordinates_resolve() {
        let c = Chart::cube(&["x", "y"], -1.0, 2.0).unwrap();
        assert_eq!(c.coord_index("y"), Some(1));
        assert_eq!(c.center(), vec![0.5, 0.5]);
        assert!(c.contains(&[2.0, -1.0]));
        assert!(!c.contains(&[2.1, 0.0]));
    }
}
