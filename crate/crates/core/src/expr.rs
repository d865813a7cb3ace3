//! Scalar expression language for objectives and constraints.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-'? power
//! power  := atom ('^' factor)?
//! atom   := number | 'x'<k> | func '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative, so `2^3^2` is `2^(3^2) = 512`. Unary functions
//! are `abs sqrt sin cos exp log`, binary ones are `max min`. Variables are
//! `x1 .. x<dim>`. There is no implicit multiplication.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable x{index} at byte {offset} is out of range for dimension {dim}")]
    VariableOutOfRange {
        index: usize,
        dim: usize,
        offset: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point has dimension {got}, expression expects {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Max,
    Min,
}

/// Expression tree. `Var` holds a zero-based index; it prints as `x{index+1}`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => UnaryOp::Abs,
            "sqrt" => UnaryOp::Sqrt,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Abs => "abs",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Max => "max",
            BinaryOp::Min => "min",
        }
    }
}

/// Parses `text` as an expression over variables `x1..x<dim>`.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        dim,
        end: text.len(),
    };
    if parser.tokens.is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let expr = parser.expr()?;
    match parser.peek() {
        None => Ok(expr),
        Some(tok) => Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind),
        }),
    }
}

impl Expr {
    /// Evaluates the expression at `x`.
    ///
    /// Every intermediate value must be a finite real; anything else
    /// (NaN, overflow, `sqrt` or `log` outside their domain, division by zero,
    /// a negative base raised to a fractional power) is an [`EvalError::Domain`].
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => match x.get(*i) {
                Some(v) => *v,
                None => {
                    return Err(EvalError::Dimension {
                        expected: i + 1,
                        got: x.len(),
                    })
                }
            },
            Expr::Unary(op, a) => {
                let a = a.eval(x)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Abs => a.abs(),
                    UnaryOp::Sqrt if a < 0.0 => {
                        return Err(EvalError::Domain(format!("sqrt of negative {a}")))
                    }
                    UnaryOp::Sqrt => a.sqrt(),
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log if a <= 0.0 => {
                        return Err(EvalError::Domain(format!("log of nonpositive {a}")))
                    }
                    UnaryOp::Log => a.ln(),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(x)?;
                let b = b.eval(x)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div if b == 0.0 => {
                        return Err(EvalError::Domain(format!("division of {a} by zero")))
                    }
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow if a < 0.0 && b.fract() != 0.0 => {
                        return Err(EvalError::Domain(format!(
                            "negative base {a} with fractional exponent {b}"
                        )))
                    }
                    BinaryOp::Pow => a.powf(b),
                    BinaryOp::Max => a.max(b),
                    BinaryOp::Min => a.min(b),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain(format!("non-finite value {v} in {self}")))
        }
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }
}

/// Canonical, fully parenthesised form. Re-parsing it yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:e}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op @ (BinaryOp::Max | BinaryOp::Min), a, b) => {
                write!(f, "{}({a}, {b})", op.symbol())
            }
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Caret => f.write_str("`^`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'^' => TokenKind::Caret,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v = lit.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Number(v),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        match self.peek() {
            Some(tok) if tok.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(tok) => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("expected {kind}, found {}", tok.kind),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                message: format!("expected {kind}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinaryOp::Add,
                Some(TokenKind::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek_kind() == Some(&TokenKind::Minus) {
            self.pos += 1;
            let inner = self.power()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek_kind() == Some(&TokenKind::Caret) {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Expr::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        let Some(tok) = self.next() else {
            return Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Expr::Const(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.identifier(name, tok.offset),
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {other}"),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(ParseError::VariableOutOfRange {
                        index,
                        dim: self.dim,
                        offset,
                    });
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        let binary = match name.as_str() {
            "max" => Some(BinaryOp::Max),
            "min" => Some(BinaryOp::Min),
            _ => None,
        };
        let unary = UnaryOp::from_name(&name);
        if binary.is_none() && unary.is_none() {
            return Err(ParseError::UnknownIdentifier { name, offset });
        }
        self.expect(TokenKind::LParen)?;
        let first = self.expr()?;
        let node = if let Some(op) = binary {
            self.expect(TokenKind::Comma)?;
            let second = self.expr()?;
            Expr::Binary(op, Box::new(first), Box::new(second))
        } else {
            Expr::Unary(unary.unwrap_or(UnaryOp::Abs), Box::new(first))
        };
        self.expect(TokenKind::RParen)?;
        Ok(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(text: &str, x: &[f64]) -> Result<f64, EvalError> {
        parse(text, x.len()).unwrap().eval(x)
    }

    #[test]
    fn parses_functions_and_max() {
        let e = parse("abs(x1)+max(x2,0)", 2).unwrap();
        let expected = Expr::Binary(
            BinaryOp::Add,
            Box::new(Expr::Unary(UnaryOp::Abs, Box::new(Expr::Var(0)))),
            Box::new(Expr::Binary(
                BinaryOp::Max,
                Box::new(Expr::Var(1)),
                Box::new(Expr::Const(0.0)),
            )),
        );
        assert_eq!(e, expected);
        assert_eq!(e.eval(&[-1.0, 2.0]).unwrap(), 3.0);
    }

    #[test]
    fn variable_out_of_range() {
        assert_eq!(
            parse("x3", 2),
            Err(ParseError::VariableOutOfRange {
                index: 3,
                dim: 2,
                offset: 0
            })
        );
        assert!(matches!(
            parse("x0", 2),
            Err(ParseError::VariableOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", &[0.0]).unwrap(), 512.0);
        assert_eq!(eval("-x1^2", &[3.0]).unwrap(), -9.0);
        assert_eq!(eval("2^-1", &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1+2*3-4/2", &[0.0]).unwrap(), 5.0);
        assert_eq!(eval("(1+2)*3", &[0.0]).unwrap(), 9.0);
        assert_eq!(eval("1-2-3", &[0.0]).unwrap(), -4.0);
        assert_eq!(eval("8/4/2", &[0.0]).unwrap(), 1.0);
        assert_eq!(eval("1.5e1 + .5", &[0.0]).unwrap(), 15.5);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(eval("1/x1", &[0.0]), Err(EvalError::Domain(_))));
        assert!(matches!(
            eval("sqrt(x1)", &[-1.0]),
            Err(EvalError::Domain(_))
        ));
        assert!(matches!(eval("log(x1)", &[0.0]), Err(EvalError::Domain(_))));
        assert!(matches!(eval("x1^0.5", &[-4.0]), Err(EvalError::Domain(_))));
        assert!(matches!(eval("exp(x1)", &[1e4]), Err(EvalError::Domain(_))));
        assert_eq!(eval("x1^2", &[-3.0]).unwrap(), 9.0);
        assert_eq!(eval("sqrt(abs(x1))", &[0.25]).unwrap(), 0.5);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert!(matches!(
            parse("2x1", 1),
            Err(ParseError::Syntax { offset: 1, .. })
        ));
        assert!(matches!(
            parse("foo(x1)", 1),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(parse("", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("(x1", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse("max(x1)", 1),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse("x1 # 2", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(parse("abs", 1), Err(ParseError::Syntax { .. })));
    }

    fn arb_expr(dim: usize) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Const),
            (0..dim).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            let unary = prop_oneof![
                Just(UnaryOp::Neg),
                Just(UnaryOp::Abs),
                Just(UnaryOp::Sqrt),
                Just(UnaryOp::Sin),
                Just(UnaryOp::Cos),
                Just(UnaryOp::Exp),
                Just(UnaryOp::Log),
            ];
            let binary = prop_oneof![
                Just(BinaryOp::Add),
                Just(BinaryOp::Sub),
                Just(BinaryOp::Mul),
                Just(BinaryOp::Div),
                Just(BinaryOp::Pow),
                Just(BinaryOp::Max),
                Just(BinaryOp::Min),
            ];
            prop_oneof![
                (unary, inner.clone()).prop_map(|(op, a)| Expr::Unary(op, Box::new(a))),
                (binary, inner.clone(), inner).prop_map(|(op, a, b)| Expr::Binary(
                    op,
                    Box::new(a),
                    Box::new(b)
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr(3)) {
            let printed = e.to_string();
            let reparsed = parse(&printed, 3).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }

        #[test]
        fn eval_is_deterministic(e in arb_expr(2), a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let first = e.eval(&[a, b]);
            let second = e.eval(&[a, b]);
            match (first, second) {
                (Ok(u), Ok(v)) => prop_assert_eq!(u.to_bits(), v.to_bits()),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "evaluation not deterministic"),
            }
        }
    }
}
