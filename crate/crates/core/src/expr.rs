//! Scenario expression language: parser, printer and evaluation.
//!
//! Grammar (EBNF, no implicit multiplication):
//!
//! ```text
//! expr    := term { ("+" | "-") term }
//! term    := unary { ("*" | "/") unary }
//! unary   := "-" unary | power
//! power   := atom [ "^" unary ]            (right-associative)
//! atom    := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//! NUMBER  := digits ["." digits] [("e"|"E") ["+"|"-"] digits]
//! IDENT   := letter { letter | digit | "_" }
//! ```
//!
//! Identifiers are the chart variables (`q1..qn`, `y1..ym` on the
//! Lagrangian side, `p1..pm` on the Hamiltonian side, `s`), declared
//! parameter names, or the functions `sin cos tan exp log sqrt abs`.
//! `^` with a non-integer exponent requires a positive base at
//! evaluation time; exponents built from constants are recognized
//! structurally, so the same expression never flips between the two
//! power rules depending on the derivative request.

use crate::dual::Scalar;
use crate::error::{DomainErrorKind, EvalError, ParseError};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarRef {
    /// Base coordinate q^{i+1}.
    Q(usize),
    /// Fiber coordinate: velocity y^{a+1} or momentum p_{a+1} depending on side.
    W(usize),
    /// The contact variable s.
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(VarRef),
    /// A named parameter, replaced by its bound value before evaluation.
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Which fiber-variable prefix is legal in an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberVar {
    /// Lagrangian side: `y1..ym`.
    Velocity,
    /// Hamiltonian side: `p1..pm`.
    Momentum,
    /// No fiber variables (fields on the base manifold).
    None,
}

/// Name-resolution context for [`parse`].
#[derive(Clone, Debug)]
pub struct ExprContext {
    pub n: usize,
    pub m: usize,
    pub fiber: FiberVar,
    pub allow_s: bool,
    pub parameters: Vec<String>,
}

impl ExprContext {
    pub fn lagrangian(n: usize, m: usize, parameters: &[&str]) -> Self {
        Self {
            n,
            m,
            fiber: FiberVar::Velocity,
            allow_s: true,
            parameters: parameters.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn hamiltonian(n: usize, m: usize, parameters: &[&str]) -> Self {
        Self {
            n,
            m,
            fiber: FiberVar::Momentum,
            allow_s: true,
            parameters: parameters.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Functions of the base coordinates only.
    pub fn base_only(n: usize, parameters: &[&str]) -> Self {
        Self {
            n,
            m: 0,
            fiber: FiberVar::None,
            allow_s: false,
            parameters: parameters.iter().map(|s| s.to_string()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Construction helpers (canonical form: no negative literals).
// ---------------------------------------------------------------------------

impl Expr {
    pub fn num(x: f64) -> Expr {
        if x < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-x)))
        } else {
            Expr::Num(x)
        }
    }

    pub fn var(v: VarRef) -> Expr {
        Expr::Var(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    /// True when the subtree references no chart variable (parameters
    /// count as constants).
    pub fn is_constant_subtree(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant_subtree(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_constant_subtree() && b.is_constant_subtree(),
        }
    }

    /// Substitute parameters by value, producing a closed expression.
    pub fn bind_parameters(&self, bindings: &[(String, f64)]) -> Result<Expr, String> {
        Ok(match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(v) => Expr::Var(*v),
            Expr::Param(name) => {
                let value = bindings
                    .iter()
                    .find(|(k, _)| k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| name.clone())?;
                Expr::num(value)
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.bind_parameters(bindings)?)),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.bind_parameters(bindings)?),
                Box::new(b.bind_parameters(bindings)?),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(a.bind_parameters(bindings)?),
                Box::new(b.bind_parameters(bindings)?),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(a.bind_parameters(bindings)?),
                Box::new(b.bind_parameters(bindings)?),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(a.bind_parameters(bindings)?),
                Box::new(b.bind_parameters(bindings)?),
            ),
            Expr::Pow(a, b) => Expr::Pow(
                Box::new(a.bind_parameters(bindings)?),
                Box::new(b.bind_parameters(bindings)?),
            ),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.bind_parameters(bindings)?)),
        })
    }
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

// Precedence levels: additive 1, multiplicative 2, unary 3, power 4, atom 5.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(_) | Expr::Var(_) | Expr::Param(_) | Expr::Call(..) => 5,
    }
}

fn write_prec(e: &Expr, min: u8, out: &mut String) {
    let p = precedence(e);
    let parens = p < min;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Num(x) => out.push_str(&format!("{:?}", x)),
        Expr::Var(VarRef::Q(i)) => out.push_str(&format!("q{}", i + 1)),
        Expr::Var(VarRef::W(a)) => out.push_str(&format!("w{}", a + 1)),
        Expr::Var(VarRef::S) => out.push('s'),
        Expr::Param(name) => out.push_str(name),
        Expr::Neg(a) => {
            out.push('-');
            write_prec(a, 3, out);
        }
        Expr::Add(a, b) => {
            write_prec(a, 1, out);
            out.push_str(" + ");
            write_prec(b, 2, out);
        }
        Expr::Sub(a, b) => {
            write_prec(a, 1, out);
            out.push_str(" - ");
            write_prec(b, 2, out);
        }
        Expr::Mul(a, b) => {
            write_prec(a, 2, out);
            out.push('*');
            write_prec(b, 3, out);
        }
        Expr::Div(a, b) => {
            write_prec(a, 2, out);
            out.push('/');
            write_prec(b, 3, out);
        }
        Expr::Pow(a, b) => {
            write_prec(a, 5, out);
            out.push('^');
            write_prec(b, 3, out);
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_prec(a, 1, out);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

/// Pretty-print with minimal parentheses. The `w` fiber variables print
/// as `w1..wm`, a spelling both sides accept on re-parse.
pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    write_prec(e, 0, &mut out);
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    ctx: &'a ExprContext,
}

pub fn parse(text: &str, ctx: &ExprContext) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text,
        bytes: text.as_bytes(),
        pos: 0,
        ctx,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(ParseError::new(
            p.pos,
            format!("unexpected trailing input `{}`", &p.src[p.pos..]),
        ));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(ParseError::new(
                self.pos,
                format!(
                    "expected a number, identifier or `(`, found `{}`",
                    c as char
                ),
            )),
            None => Err(ParseError::new(self.pos, "unexpected end of input")),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else if self.pos >= self.bytes.len() {
            Err(ParseError::new(
                self.pos,
                format!("expected `{}` before end of input", c as char),
            ))
        } else {
            Err(ParseError::new(
                self.pos,
                format!("expected `{}`", c as char),
            ))
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // `e` belonged to something else (e.g. an identifier start).
                self.pos = mark;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ParseError::new(start, format!("invalid number `{}`", text)))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];

        if self.peek() == Some(b'(') {
            let func = Func::from_name(name)
                .ok_or_else(|| ParseError::new(start, format!("unknown function `{}`", name)))?;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }

        self.resolve_name(name, start)
    }

    fn resolve_name(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        if name == "s" {
            if !self.ctx.allow_s {
                return Err(ParseError::new(
                    offset,
                    "`s` is not available in this context",
                ));
            }
            return Ok(Expr::Var(VarRef::S));
        }
        for (prefix, fiber) in [("y", FiberVar::Velocity), ("p", FiberVar::Momentum)] {
            if let Some(rest) = name.strip_prefix(prefix) {
                if let Ok(idx) = rest.parse::<usize>() {
                    if self.ctx.fiber != fiber {
                        return Err(ParseError::new(
                            offset,
                            format!("variable `{}` is not available in this context", name),
                        ));
                    }
                    if idx == 0 || idx > self.ctx.m {
                        return Err(ParseError::new(
                            offset,
                            format!("{} out of range (m = {})", name, self.ctx.m),
                        ));
                    }
                    return Ok(Expr::Var(VarRef::W(idx - 1)));
                }
            }
        }
        // `w` is accepted regardless of side so printed trees re-parse.
        if let Some(rest) = name.strip_prefix('w') {
            if let Ok(idx) = rest.parse::<usize>() {
                if self.ctx.fiber == FiberVar::None {
                    return Err(ParseError::new(
                        offset,
                        format!("variable `{}` is not available in this context", name),
                    ));
                }
                if idx == 0 || idx > self.ctx.m {
                    return Err(ParseError::new(
                        offset,
                        format!("{} out of range (m = {})", name, self.ctx.m),
                    ));
                }
                return Ok(Expr::Var(VarRef::W(idx - 1)));
            }
        }
        if let Some(rest) = name.strip_prefix('q') {
            if let Ok(idx) = rest.parse::<usize>() {
                if idx == 0 || idx > self.ctx.n {
                    return Err(ParseError::new(
                        offset,
                        format!("{} out of range (n = {})", name, self.ctx.n),
                    ));
                }
                return Ok(Expr::Var(VarRef::Q(idx - 1)));
            }
        }
        if self.ctx.parameters.iter().any(|p| p == name) {
            return Ok(Expr::Param(name.to_string()));
        }
        Err(ParseError::new(
            offset,
            format!("unknown identifier `{}`", name),
        ))
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn domain_error(kind: DomainErrorKind, node: &Expr) -> EvalError {
    let mut at = print(node);
    if at.len() > 80 {
        at.truncate(77);
        at.push_str("...");
    }
    EvalError { kind, at }
}

/// Evaluate a closed expression (no parameters) over any scalar type.
///
/// Domain violations and non-finite intermediates are hard errors carrying
/// the offending sub-expression.
pub fn eval<T: Scalar>(e: &Expr, q: &[T], w: &[T], s: T) -> Result<T, EvalError> {
    let out = match e {
        Expr::Num(x) => T::from_f64(*x),
        Expr::Var(VarRef::Q(i)) => q[*i],
        Expr::Var(VarRef::W(a)) => w[*a],
        Expr::Var(VarRef::S) => s,
        Expr::Param(name) => {
            return Err(EvalError {
                kind: DomainErrorKind::NonFinite,
                at: format!("unbound parameter `{}`", name),
            })
        }
        Expr::Neg(a) => -eval(a, q, w, s)?,
        Expr::Add(a, b) => eval(a, q, w, s)? + eval(b, q, w, s)?,
        Expr::Sub(a, b) => eval(a, q, w, s)? - eval(b, q, w, s)?,
        Expr::Mul(a, b) => eval(a, q, w, s)? * eval(b, q, w, s)?,
        Expr::Div(a, b) => {
            let num = eval(a, q, w, s)?;
            let den = eval(b, q, w, s)?;
            if den.value() == 0.0 {
                return Err(domain_error(DomainErrorKind::DivisionByZero, e));
            }
            num / den
        }
        Expr::Pow(a, b) => {
            let base = eval(a, q, w, s)?;
            let exp = eval(b, q, w, s)?;
            let ev = exp.value();
            if b.is_constant_subtree() && ev.fract() == 0.0 && ev.abs() <= i32::MAX as f64 {
                if ev < 0.0 && base.value() == 0.0 {
                    return Err(domain_error(DomainErrorKind::DivisionByZero, e));
                }
                base.powi(ev as i32)
            } else {
                if base.value() <= 0.0 {
                    return Err(domain_error(DomainErrorKind::PowNonPositiveBase, e));
                }
                (exp * base.ln()).exp()
            }
        }
        Expr::Call(f, a) => {
            let x = eval(a, q, w, s)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    let c = x.cos();
                    if c.value() == 0.0 {
                        return Err(domain_error(DomainErrorKind::TanPole, e));
                    }
                    x.sin() / c
                }
                Func::Exp => x.exp(),
                Func::Log => {
                    if x.value() <= 0.0 {
                        return Err(domain_error(DomainErrorKind::LogNonPositive, e));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x.value() < 0.0 {
                        return Err(domain_error(DomainErrorKind::SqrtNegative, e));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
    };
    if !out.all_finite() {
        return Err(domain_error(DomainErrorKind::NonFinite, e));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{Dual1, Dual2};

    fn lctx(n: usize, m: usize, params: &[&str]) -> ExprContext {
        ExprContext::lagrangian(n, m, params)
    }

    #[test]
    fn parses_typical_lagrangian() {
        let ctx = lctx(0, 1, &["lambda"]);
        let e = parse("0.5*y1^2 - lambda*s", &ctx).unwrap();
        let bound = e.bind_parameters(&[("lambda".into(), 0.5)]).unwrap();
        let v = eval(&bound, &[], &[3.0_f64], 2.0).unwrap();
        assert!((v - (0.5 * 9.0 - 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_variable_is_rejected() {
        let ctx = ExprContext::hamiltonian(1, 1, &[]);
        let err = parse("p1*q2", &ctx).unwrap_err();
        assert!(err.message.contains("q2 out of range"), "{}", err.message);
        assert_eq!(err.offset, 3);
    }

    #[test]
    fn syntax_error_at_end_of_input() {
        let ctx = lctx(1, 1, &[]);
        let err = parse("sin(q1", &ctx).unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(err.message.contains("end of input"));
    }

    #[test]
    fn unknown_identifier_and_wrong_side() {
        let ctx = lctx(1, 1, &[]);
        assert!(parse("frob*q1", &ctx)
            .unwrap_err()
            .message
            .contains("unknown identifier"));
        assert!(parse("p1", &ctx)
            .unwrap_err()
            .message
            .contains("not available"));
        let base = ExprContext::base_only(2, &[]);
        assert!(parse("s", &base)
            .unwrap_err()
            .message
            .contains("not available"));
    }

    #[test]
    fn function_calls_take_one_argument() {
        let ctx = lctx(2, 0, &[]);
        let err = parse("sin(q1, q2)", &ctx).unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(err.message.contains("expected `)`"), "{}", err.message);
        assert!(parse("foo(q1)", &ctx)
            .unwrap_err()
            .message
            .contains("unknown function"));
    }

    #[test]
    fn precedence_and_associativity() {
        let ctx = lctx(1, 1, &[]);
        let v = |src: &str, x: f64| {
            let e = parse(src, &ctx).unwrap();
            eval(&e, &[x], &[0.0_f64], 0.0).unwrap()
        };
        assert_eq!(v("2+3*4", 0.0), 14.0);
        assert_eq!(v("2*3^2", 0.0), 18.0);
        assert_eq!(v("-2^2", 0.0), -4.0);
        assert_eq!(v("2^3^2", 0.0), 512.0);
        assert_eq!(v("2^-2", 0.0), 0.25);
        assert_eq!(v("6/3/2", 0.0), 1.0);
        assert_eq!(v("1-2-3", 0.0), -4.0);
    }

    #[test]
    fn power_domain_rules() {
        let ctx = lctx(1, 0, &[]);
        let int_pow = parse("q1^3", &ctx).unwrap();
        assert_eq!(eval(&int_pow, &[-2.0_f64], &[], 0.0).unwrap(), -8.0);

        let frac_pow = parse("q1^0.5", &ctx).unwrap();
        assert!(eval(&frac_pow, &[-2.0_f64], &[], 0.0).is_err());
        assert!((eval(&frac_pow, &[4.0_f64], &[], 0.0).unwrap() - 2.0).abs() < 1e-15);

        // Variable exponent needs a positive base even at integer values.
        let var_exp = ExprContext::lagrangian(1, 0, &[]);
        let e = parse("q1^s", &var_exp).unwrap();
        assert!(eval(&e, &[-2.0_f64], &[], 2.0).is_err());
    }

    #[test]
    fn division_by_zero_reports_subexpression() {
        let ctx = lctx(1, 0, &[]);
        let e = parse("1/(q1-1)", &ctx).unwrap();
        let err = eval(&e, &[1.0_f64], &[], 0.0).unwrap_err();
        assert_eq!(err.kind, DomainErrorKind::DivisionByZero);
        assert!(err.at.contains("q1 - 1"));
    }

    #[test]
    fn dual_evaluation_matches_plain_value() {
        let ctx = lctx(2, 2, &[]);
        let e = parse("sin(q1)*y1 + exp(q2)*y2^2 - 0.3*s", &ctx).unwrap();
        let q = [0.4, -0.2];
        let w = [1.1, 0.7];
        let s = 0.25;
        let plain = eval(&e, &q, &w, s).unwrap();
        let qd: Vec<Dual1> = q.iter().map(|&x| Dual1::variable(x)).collect();
        let wd: Vec<Dual1> = w.iter().map(|&x| Dual1::constant(x)).collect();
        let v = eval(&e, &qd, &wd, Dual1::constant(s)).unwrap();
        assert_eq!(v.re, plain);
        let q2: Vec<Dual2> = q.iter().map(|&x| Dual2::from_f64(x)).collect();
        let w2: Vec<Dual2> = w.iter().map(|&x| Dual2::from_f64(x)).collect();
        let v2 = eval(&e, &q2, &w2, Dual2::from_f64(s)).unwrap();
        assert_eq!(v2.re.re, plain);
    }

    #[test]
    fn unbound_parameter_is_an_error() {
        let ctx = lctx(0, 1, &["kappa"]);
        let e = parse("kappa*y1", &ctx).unwrap();
        assert!(e.bind_parameters(&[]).is_err());
        assert!(e.bind_parameters(&[("kappa".into(), 2.0)]).is_ok());
    }

    #[test]
    fn print_examples() {
        let ctx = lctx(2, 2, &[]);
        for src in [
            "q1 + q2*w1",
            "(q1 + q2)*w1",
            "q1 - (q2 - w1)",
            "-(q1*q2)",
            "-q1^2",
            "(-q1)^2",
            "(q1^q2)^w1",
            "q1^-2",
            "sin(q1 + s)",
            "q1/(q2*w2)",
        ] {
            let e = parse(src, &ctx).unwrap();
            let printed = print(&e);
            let back = parse(&printed, &ctx).unwrap();
            assert_eq!(e, back, "round-trip failed for `{}` -> `{}`", src, printed);
        }
    }
}
