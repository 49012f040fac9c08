//! Parser for the coefficient DSL.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := number | ident | '(' expr ')' | ('sin'|'cos'|'exp') '(' expr ')' | '-' base
//! ```
//!
//! Note that `-x^2` reads as `(-x)^2` under this grammar.

use thiserror::Error;

use super::expr::{Expr, Node};
use super::Chart;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_int = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                is_int = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_int = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            column += i - start;
            let tok = match (is_int, s.parse::<i64>()) {
                (true, Ok(n)) => Tok::Int(n),
                _ => Tok::Num(s.parse::<f64>().map_err(|_| ParseError::Syntax {
                    line: l0,
                    column: c0,
                    message: format!("malformed number `{s}`"),
                })?),
            };
            out.push(Token {
                tok,
                line: l0,
                column: c0,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                column: c0,
            });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                line: l0,
                column: c0,
            });
            i += 1;
            column += 1;
            continue;
        }
        return Err(ParseError::Syntax {
            line: l0,
            column: c0,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    chart: &'a Chart,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, t: &Token, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok == Tok::Sym(c) {
            Ok(())
        } else {
            Err(self.error(&t, format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::raw(Node::Add(vec![lhs, rhs]));
                }
                Tok::Sym('-') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::raw(Node::Add(vec![lhs, Expr::raw(Node::Neg(rhs))]));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::raw(Node::Mul(vec![lhs, rhs]));
                }
                Tok::Sym('/') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::raw(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek().tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let mut sign = 1;
        if self.peek().tok == Tok::Sym('-') {
            self.bump();
            sign = -1;
        }
        let t = self.bump();
        match t.tok {
            Tok::Int(n) if n <= i32::MAX as i64 => Ok(Expr::raw(Node::Pow(base, sign * n as i32))),
            _ => Err(self.error(&t, "exponent must be an integer")),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Int(n) => Ok(Expr::constant(n as f64)),
            Tok::Sym('-') => Ok(Expr::raw(Node::Neg(self.base()?))),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(ref name) if matches!(name.as_str(), "sin" | "cos" | "exp") => {
                self.expect('(')?;
                let a = self.expr()?;
                self.expect(')')?;
                Ok(Expr::raw(match name.as_str() {
                    "sin" => Node::Sin(a),
                    "cos" => Node::Cos(a),
                    _ => Node::Exp(a),
                }))
            }
            Tok::Ident(name) => match self.chart.coord_index(&name) {
                Some(i) => Ok(Expr::var(i)),
                None => Err(ParseError::UnknownIdentifier {
                    name,
                    line: t.line,
                    column: t.column,
                }),
            },
            Tok::End => Err(self.error(&t, "unexpected end of input")),
            _ => Err(self.error(&t, "unexpected token")),
        }
    }
}

/// Parses DSL text into an unsimplified AST over the chart's coordinates.
pub fn parse_scalar_expr(text: &str, chart: &Chart) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        chart,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return Err(p.error(&t, "trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r3() -> Chart {
        Chart::cube(&["x", "y", "z"], -1.0, 1.0).unwrap()
    }

    fn v(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn sum_of_product_and_sine() {
        let e = parse_scalar_expr("x*y + sin(z)", &r3()).unwrap();
        let want = Expr::raw(Node::Add(vec![
            Expr::raw(Node::Mul(vec![v(0), v(1)])),
            Expr::raw(Node::Sin(v(2))),
        ]));
        assert_eq!(e, want);
    }

    #[test]
    fn quotient_with_powers() {
        let e = parse_scalar_expr("x^2/ (1+y^2)", &r3()).unwrap();
        let want = Expr::raw(Node::Div(
            Expr::raw(Node::Pow(v(0), 2)),
            Expr::raw(Node::Add(vec![Expr::constant(1.0), Expr::raw(Node::Pow(v(1), 2))])),
        ));
        assert_eq!(e, want);
    }

    #[test]
    fn unknown_identifier_is_named() {
        let chart = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let err = parse_scalar_expr("x + w", &chart).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "w".into(),
                line: 1,
                column: 5
            }
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_scalar_expr("x +\n  * y", &r3()).unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(parse_scalar_expr("x^1.5", &r3()).is_err());
        assert!(parse_scalar_expr("(x", &r3()).is_err());
        assert!(parse_scalar_expr("x y", &r3()).is_err());
    }

    #[test]
    fn unary_minus_binds_to_base() {
        let c = r3();
        let e = parse_scalar_expr("-x^2", &c).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0, 0.0]).unwrap(), 9.0);
        let e = parse_scalar_expr("2 - -(x)*y^-1", &c).unwrap();
        assert_eq!(e.eval(&[3.0, 2.0, 0.0]).unwrap(), 3.5);
        let e = parse_scalar_expr("1.5e-1 * exp(0)", &c).unwrap();
        assert_eq!(e.eval(&[0.0; 3]).unwrap(), 0.15);
    }
}
