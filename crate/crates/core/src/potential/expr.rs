//! Expression language for user-defined wells.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`. Identifiers are `x`, declared parameter names, and the
//! functions `sqrt exp abs cosh tanh pow`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: found {found}, expected {expected}")]
    Syntax {
        pos: usize,
        found: String,
        expected: String,
    },
    #[error("unknown function '{name}' at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("unknown parameter '{name}' at position {pos}")]
    UnknownParameter { name: String, pos: usize },
    #[error("function '{name}' at position {pos} takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        pos: usize,
        expected: usize,
        got: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::UnknownFunction { pos, .. }
            | ParseError::UnknownParameter { pos, .. }
            | ParseError::Arity { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} is undefined for argument {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("parameter '{0}' has no value")]
    Unbound(String),
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
    Sqrt,
    Exp,
    Abs,
    Cosh,
    Tanh,
    Pow,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sqrt, Func::Exp, Func::Abs, Func::Cosh, Func::Tanh, Func::Pow];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Parsed potential expression.
///
/// Numeric literals produced by the parser are always non-negative; a
/// leading minus becomes [`Expr::Neg`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Param(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Comma => write!(f, "','"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
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
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                found: format!("'{text}'"),
                expected: "a number".into(),
            })?;
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                // report the character, not the byte, for non-ASCII input
                let ch = src[start..].chars().next().unwrap_or(c);
                return Err(ParseError::Syntax {
                    pos: start,
                    found: format!("'{ch}'"),
                    expected: "a number, identifier, operator or parenthesis".into(),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    params: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            found: self.peek().to_string(),
            expected: expected.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        name: name.clone(),
                        pos,
                    })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if *self.peek() != Tok::RParen {
                        return Err(self.unexpected("',' or ')'"));
                    }
                    self.bump();
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            name,
                            pos,
                            expected: func.arity(),
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else if name == "x" {
                    Ok(Expr::X)
                } else if self.params.contains(&name) {
                    Ok(Expr::Param(name))
                } else if Func::from_name(&name).is_some() {
                    Err(self.unexpected("'(' after function name"))
                } else {
                    Err(ParseError::UnknownParameter { name, pos })
                }
            }
            _ => Err(self.unexpected("a number, identifier or '('")),
        }
    }
}

/// Parses `source` against the declared parameter names.
pub fn parse_potential(source: &str, params: &[String]) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, at: 0, params };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

fn checked(op: &'static str, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

impl Expr {
    /// Evaluates with parameters looked up in `params`.
    pub fn eval(&self, x: f64, params: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::X => Ok(x),
            Expr::Param(name) => params
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Neg(e) => Ok(-e.eval(x, params)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, params)?;
                let b = b.eval(x, params)?;
                match op {
                    BinOp::Add => checked("+", a + b),
                    BinOp::Sub => checked("-", a - b),
                    BinOp::Mul => checked("*", a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::Domain { op: "/", arg: b })
                        } else {
                            checked("/", a / b)
                        }
                    }
                    BinOp::Pow => power(a, b),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(x, params)?;
                match func {
                    Func::Sqrt => {
                        if a < 0.0 {
                            Err(EvalError::Domain { op: "sqrt", arg: a })
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    Func::Exp => checked("exp", a.exp()),
                    Func::Abs => Ok(a.abs()),
                    Func::Cosh => checked("cosh", a.cosh()),
                    Func::Tanh => Ok(a.tanh()),
                    Func::Pow => power(a, args[1].eval(x, params)?),
                }
            }
        }
    }

    /// Replaces every parameter by its numeric value.
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<Expr, EvalError> {
        Ok(match self {
            Expr::Param(name) => Expr::Num(
                params
                    .get(name)
                    .copied()
                    .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            ),
            Expr::Num(_) | Expr::X => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.bind(params)?)),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.bind(params)?), Box::new(b.bind(params)?)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.bind(params)).collect::<Result<_, _>>()?),
        })
    }

    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(n) => out.push(n.clone()),
            Expr::Num(_) | Expr::X => {}
            Expr::Neg(e) => e.collect_params(out),
            Expr::Binary(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_params(out)),
        }
    }
}

fn power(a: f64, b: f64) -> Result<f64, EvalError> {
    if a < 0.0 && b.fract() != 0.0 {
        return Err(EvalError::Domain { op: "^", arg: a });
    }
    if a == 0.0 && b < 0.0 {
        return Err(EvalError::Domain { op: "^", arg: a });
    }
    checked("^", a.powf(b))
}

/// Prints a form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => write!(f, "x"),
            Expr::Param(n) => write!(f, "{n}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn eval_with(src: &str, x: f64, params: &[(&str, f64)]) -> f64 {
        let decl = names(&params.iter().map(|p| p.0).collect::<Vec<_>>());
        let e = parse_potential(src, &decl).unwrap();
        let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        e.eval(x, &map).unwrap()
    }

    #[test]
    fn soft_core_at_origin() {
        let v = eval_with("-1/sqrt(x^2+2)", 0.0, &[]);
        assert!((v + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn harmonic_half_x_squared() {
        assert_eq!(eval_with("x^2/2", 3.0, &[]), 4.5);
    }

    #[test]
    fn double_well_expression() {
        // -1/sqrt(3^2... ) hand value: -sqrt(2)/2 - 1/sqrt(38)
        let v = eval_with(
            "-1/sqrt((x-R/2)^2+a^2) - 1/sqrt((x+R/2)^2+a^2)",
            3.0,
            &[("R", 6.0), ("a", 2f64.sqrt())],
        );
        let want = -(2f64.sqrt()) / 2.0 - 1.0 / 38f64.sqrt();
        assert!((v - want).abs() < 1e-14);
        assert!((v + 0.869_328_2).abs() < 1e-7);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_with("-x^2", 3.0, &[]), -9.0);
        assert_eq!(eval_with("2^3^2", 0.0, &[]), 512.0);
        assert_eq!(eval_with("2^-1", 0.0, &[]), 0.5);
        assert_eq!(eval_with("8/4/2", 0.0, &[]), 1.0);
        assert_eq!(eval_with("1-2-3", 0.0, &[]), -4.0);
        assert_eq!(eval_with("2*-x", 3.0, &[]), -6.0);
        assert_eq!(eval_with("pow(x, 3)", 2.0, &[]), 8.0);
        assert_eq!(eval_with("1.5e1 + 2E-1", 0.0, &[]), 15.2);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_potential("x^2 + $", &[]).unwrap_err();
        assert_eq!(err.position(), 6);
        let err = parse_potential("(x+1", &[]).unwrap_err();
        assert_eq!(err.position(), 4);
        assert!(matches!(err, ParseError::Syntax { .. }));
        let err = parse_potential("x x", &[]).unwrap_err();
        assert_eq!(err.position(), 2);
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(
            parse_potential("sin(x)", &[]),
            Err(ParseError::UnknownFunction { pos: 0, .. })
        ));
        assert!(matches!(
            parse_potential("x + q", &names(&["a"])),
            Err(ParseError::UnknownParameter { pos: 4, .. })
        ));
        assert!(matches!(parse_potential("pow(x)", &[]), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse_potential("sqrt(x)", &[]).unwrap();
        assert!(matches!(
            e.eval(-1.0, &BTreeMap::new()),
            Err(EvalError::Domain { op: "sqrt", .. })
        ));
        let e = parse_potential("1/x", &[]).unwrap();
        assert!(e.eval(0.0, &BTreeMap::new()).is_err());
        let e = parse_potential("exp(x)", &[]).unwrap();
        assert!(matches!(
            e.eval(1e4, &BTreeMap::new()),
            Err(EvalError::NonFinite { .. })
        ));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Num),
            Just(Expr::X),
            prop_oneof![Just("a"), Just("R")].prop_map(|s| Expr::Param(s.to_string())),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            let op = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
                Just(BinOp::Pow)
            ];
            let unary = prop_oneof![
                Just(Func::Sqrt),
                Just(Func::Exp),
                Just(Func::Abs),
                Just(Func::Cosh),
                Just(Func::Tanh)
            ];
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Binary(o, Box::new(a), Box::new(b))),
                (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Pow, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_round_trips(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_potential(&printed, &names(&["a", "R"])).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
