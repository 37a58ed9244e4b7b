//! A small arithmetic language for time-dependent coefficients.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 's' | '(' expr ')' | func '(' expr ')'
//! func   := exp | sin | cos | sqrt
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-s^2`
//! is `-(s^2)`. The only variable is `s`.

use std::fmt;

use crate::error::{ExprError, TokenDesc};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }
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

/// Parsed expression tree over the single variable `s`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => s,
            Expr::Neg(e) => -e.eval(s),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(s), r.eval(s));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(s)),
        }
    }

    /// True when the tree does not mention `s`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    /// Canonical, fully parenthesised text. Parsing it yields an identical tree.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Display for f64 is the shortest string that round-trips.
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var => write!(f, "s"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            let len = number_len(rest);
            let text = &rest[..len];
            self.pos += len;
            return match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok((Tok::Num(v), start)),
                _ => Err(ExprError::BadNumber {
                    offset: start,
                    text: text.to_string(),
                }),
            };
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            self.pos += len;
            return Ok((Tok::Ident(rest[..len].to_string()), start));
        }
        self.pos += c.len_utf8();
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            other => {
                return Err(ExprError::UnexpectedToken {
                    offset: start,
                    found: TokenDesc::Char(other),
                    expected: "a number, `s`, a function call or `(`",
                })
            }
        };
        Ok((tok, start))
    }
}

fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

fn describe(tok: &Tok) -> TokenDesc {
    match tok {
        Tok::Num(v) => TokenDesc::Text(v.to_string()),
        Tok::Ident(s) => TokenDesc::Text(s.clone()),
        Tok::Op(c) => TokenDesc::Char(*c),
        Tok::LParen => TokenDesc::Char('('),
        Tok::RParen => TokenDesc::Char(')'),
        Tok::End => TokenDesc::End,
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ExprError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, at) = lexer.next()?;
        Ok(Parser { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn unexpected(&self, expected: &'static str) -> ExprError {
        ExprError::UnexpectedToken {
            offset: self.at,
            found: describe(&self.tok),
            expected,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.tok != Tok::RParen {
            return Err(self.unexpected("`)`"));
        }
        self.bump()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if name == "s" {
                    return Ok(Expr::Var);
                }
                if self.tok != Tok::LParen {
                    return Err(ExprError::UnknownIdentifier { offset: at, name });
                }
                let func = Func::from_name(&name)
                    .ok_or(ExprError::UnknownFunction { offset: at, name })?;
                self.bump()?;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.unexpected("a number, `s`, a function call or `(`")),
        }
    }
}

/// Parses `text` as an expression in `s`.
pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(text: &str, s: f64) -> f64 {
        parse_expression(text).unwrap().eval(s)
    }

    #[test]
    fn evaluates_basic_forms() {
        assert!((eval("1 - s", 0.8) - 0.2).abs() < 1e-15);
        assert_eq!(eval("exp(-s)", 0.0), 1.0);
        assert_eq!(eval("2^3^2", 0.0), 512.0);
        assert_eq!(eval("-s^2", 3.0), -9.0);
        assert_eq!(eval("2*s+1", 2.0), 5.0);
        assert_eq!(eval("8/2/2", 0.0), 2.0);
        assert_eq!(eval("sqrt(4*s)", 4.0), 4.0);
        assert_eq!(eval("1.5e1", 0.0), 15.0);
    }

    #[test]
    fn unclosed_paren_reports_end_offset() {
        let err = parse_expression("sin(s").unwrap_err();
        assert_eq!(err.offset(), 5);
        assert!(matches!(
            err,
            ExprError::UnexpectedToken {
                found: TokenDesc::End,
                ..
            }
        ));
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(matches!(
            parse_expression("log(s)"),
            Err(ExprError::UnknownFunction { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("1 + t"),
            Err(ExprError::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(parse_expression("1 +").is_err());
        assert!(parse_expression("s s").is_err());
        assert!(parse_expression("").is_err());
        assert!(parse_expression("1 $ 2").is_err());
        assert!(parse_expression("1e999").is_err());
    }

    #[test]
    fn constant_detection() {
        assert!(parse_expression("2*(3-1)").unwrap().is_constant());
        assert!(!parse_expression("cos(s)").unwrap().is_constant());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![(0.0f64..10.0).prop_map(Expr::Num), Just(Expr::Var),];
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary(
                        op,
                        Box::new(l),
                        Box::new(r)
                    )),
                (
                    prop_oneof![
                        Just(Func::Exp),
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Sqrt)
                    ],
                    inner
                )
                    .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_round_trips(e in arb_expr(), xs in prop::collection::vec(0.0f64..2.0, 100)) {
            let reparsed = parse_expression(&e.render()).unwrap();
            prop_assert_eq!(&reparsed, &e);
            for s in xs {
                let (a, b) = (e.eval(s), reparsed.eval(s));
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
