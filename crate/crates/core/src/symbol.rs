//! Closed-form holomorphic functions on right half-planes.
//!
//! Expressions are built from constants, `z`, `e^{-τz}`, `(z-λ)^{-α}`,
//! shifts `z -> z+ε`, sums, products and integer powers. They parse from a
//! prefix grammar:
//!
//! ```text
//! expr  := number | cplx(re, im) | i | z
//!        | exp(-τ z)                     e^{-τz}, τ >= 0
//!        | rpow(base, exponent)          base^exponent, base = z | add(z, c) | sub(z, c)
//!        | add(expr, ...) | mul(expr, ...) | sub(expr, expr) | neg(expr)
//!        | pow(expr, n)                  n a nonnegative integer
//!        | shift(expr, ε)                expr evaluated at z + ε
//! ```
//!
//! For example `mul(exp(-1 z), rpow(add(z,1), -0.5))` is `e^{-z} (z+1)^{-1/2}`.

use std::fmt;
use std::sync::OnceLock;

use rustfft::FftPlanner;

use crate::measure::{ExpPoly, GridDensity, WeightedMeasure};
use crate::operator::ScalarFunction;
use crate::special;
use crate::{quad, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Var,
    /// `e^{-τz}`.
    Exp(f64),
    /// `(z - lambda)^{-alpha}`.
    RPow {
        lambda: C64,
        alpha: C64,
    },
    /// The inner expression evaluated at `z + ε`.
    Shift(Box<Expr>, f64),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, u32),
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn is_nonpositive_integer(a: C64) -> bool {
    a.im == 0.0 && a.re <= 0.0 && a.re.fract() == 0.0
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(c(v))
    }

    /// `(z + a)^{-1}`.
    pub fn resolvent(a: C64) -> Self {
        Expr::RPow {
            lambda: -a,
            alpha: c(1.0),
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var => z,
            Expr::Exp(tau) => (-z * *tau).exp(),
            Expr::RPow { lambda, alpha } => {
                if alpha.im == 0.0 && alpha.re.fract() == 0.0 && alpha.re.abs() < 64.0 {
                    (z - lambda).powi(-(alpha.re as i32))
                } else {
                    (z - lambda).powc(-alpha)
                }
            }
            Expr::Shift(e, eps) => e.eval(z + *eps),
            Expr::Add(xs) => xs.iter().map(|x| x.eval(z)).sum(),
            Expr::Mul(xs) => xs.iter().map(|x| x.eval(z)).product(),
            Expr::Pow(e, n) => e.eval(z).powu(*n),
        }
    }

    /// Symbolic derivative, simplified.
    pub fn derivative(&self) -> Expr {
        let d = match self {
            Expr::Const(_) => Expr::Const(c(0.0)),
            Expr::Var => Expr::Const(c(1.0)),
            Expr::Exp(tau) => Expr::Mul(vec![Expr::constant(-tau), Expr::Exp(*tau)]),
            Expr::RPow { lambda, alpha } => Expr::Mul(vec![
                Expr::Const(-alpha),
                Expr::RPow {
                    lambda: *lambda,
                    alpha: alpha + 1.0,
                },
            ]),
            Expr::Shift(e, eps) => Expr::Shift(Box::new(e.derivative()), *eps),
            Expr::Add(xs) => Expr::Add(xs.iter().map(Expr::derivative).collect()),
            Expr::Mul(xs) => Expr::Add(
                (0..xs.len())
                    .map(|i| {
                        let mut f = xs.clone();
                        f[i] = xs[i].derivative();
                        Expr::Mul(f)
                    })
                    .collect(),
            ),
            Expr::Pow(e, n) => Expr::Mul(vec![
                Expr::constant(*n as f64),
                Expr::Pow(e.clone(), n - 1),
                e.derivative(),
            ]),
        };
        d.simplify()
    }

    /// Constant folding, flattening, merging of exponentials and equal-base
    /// powers, and elimination of shifts.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var | Expr::Exp(_) | Expr::RPow { .. } => {
                if let Expr::Exp(t) = self {
                    if *t == 0.0 {
                        return Expr::Const(c(1.0));
                    }
                }
                if let Expr::RPow { alpha, .. } = self {
                    if *alpha == c(0.0) {
                        return Expr::Const(c(1.0));
                    }
                }
                self.clone()
            }
            Expr::Shift(e, eps) => push_shift(&e.simplify(), *eps).simplify_shallow(),
            Expr::Add(xs) => Expr::Add(xs.iter().map(Expr::simplify).collect()).simplify_shallow(),
            Expr::Mul(xs) => Expr::Mul(xs.iter().map(Expr::simplify).collect()).simplify_shallow(),
            Expr::Pow(e, n) => Expr::Pow(Box::new(e.simplify()), *n).simplify_shallow(),
        }
    }

    fn simplify_shallow(self) -> Expr {
        match self {
            Expr::Add(xs) => {
                let mut constant = c(0.0);
                let mut rest = Vec::new();
                for x in xs {
                    match x {
                        Expr::Const(v) => constant += v,
                        Expr::Add(inner) => {
                            for y in inner {
                                match y {
                                    Expr::Const(v) => constant += v,
                                    y => rest.push(y),
                                }
                            }
                        }
                        x => rest.push(x),
                    }
                }
                if constant != c(0.0) || rest.is_empty() {
                    rest.insert(0, Expr::Const(constant));
                }
                if rest.len() == 1 {
                    rest.pop().unwrap()
                } else {
                    Expr::Add(rest)
                }
            }
            Expr::Mul(xs) => {
                let mut constant = c(1.0);
                let mut tau = 0.0;
                let mut powers: Vec<(C64, C64)> = Vec::new();
                let mut rest = Vec::new();
                let mut stack = xs;
                while let Some(x) = stack.pop() {
                    match x {
                        Expr::Const(v) => constant *= v,
                        Expr::Exp(t) => tau += t,
                        Expr::RPow { lambda, alpha } => match powers.iter_mut().find(|p| p.0 == lambda) {
                            Some(p) => p.1 += alpha,
                            None => powers.push((lambda, alpha)),
                        },
                        Expr::Mul(inner) => stack.extend(inner),
                        x => rest.push(x),
                    }
                }
                if constant == c(0.0) {
                    return Expr::Const(c(0.0));
                }
                rest.reverse();
                let mut out = Vec::new();
                if constant != c(1.0) {
                    out.push(Expr::Const(constant));
                }
                if tau != 0.0 {
                    out.push(Expr::Exp(tau));
                }
                powers.reverse();
                for (lambda, alpha) in powers {
                    if alpha != c(0.0) {
                        out.push(Expr::RPow { lambda, alpha });
                    }
                }
                out.extend(rest);
                match out.len() {
                    0 => Expr::Const(c(1.0)),
                    1 => out.pop().unwrap(),
                    _ => Expr::Mul(out),
                }
            }
            Expr::Pow(e, n) => match (*e, n) {
                (_, 0) => Expr::Const(c(1.0)),
                (e, 1) => e,
                (Expr::Const(v), n) => Expr::Const(v.powu(n)),
                (Expr::Exp(t), n) => Expr::Exp(t * n as f64),
                (Expr::RPow { lambda, alpha }, n) => Expr::RPow {
                    lambda,
                    alpha: alpha * n as f64,
                },
                (e, n) => Expr::Pow(Box::new(e), n),
            },
            other => other,
        }
    }

    /// Polynomial growth order along vertical lines; `-inf` for zero.
    pub fn growth(&self) -> f64 {
        match self {
            Expr::Const(v) => {
                if *v == c(0.0) {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            Expr::Var => 1.0,
            Expr::Exp(_) => 0.0,
            Expr::RPow { alpha, .. } => -alpha.re,
            Expr::Shift(e, _) => e.growth(),
            Expr::Add(xs) => xs.iter().map(Expr::growth).fold(f64::NEG_INFINITY, f64::max),
            Expr::Mul(xs) => xs.iter().map(Expr::growth).sum(),
            Expr::Pow(e, n) => {
                if *n == 0 {
                    0.0
                } else {
                    e.growth() * *n as f64
                }
            }
        }
    }

    /// Total delay `τ` of exponential factors, i.e. the oscillation frequency
    /// along vertical lines.
    pub fn frequency(&self) -> f64 {
        match self {
            Expr::Exp(t) => *t,
            Expr::Shift(e, _) => e.frequency(),
            Expr::Add(xs) => xs.iter().map(Expr::frequency).fold(0.0, f64::max),
            Expr::Mul(xs) => xs.iter().map(Expr::frequency).sum(),
            Expr::Pow(e, n) => e.frequency() * *n as f64,
            _ => 0.0,
        }
    }

    /// Branch points `λ` (after shifts) of the `(z-λ)^{-α}` factors that are
    /// genuinely singular.
    pub fn singular_points(&self) -> Vec<C64> {
        fn walk(e: &Expr, shift: f64, out: &mut Vec<C64>) {
            match e {
                Expr::RPow { lambda, alpha } if !is_nonpositive_integer(*alpha) => out.push(lambda - shift),
                Expr::Shift(inner, eps) => walk(inner, shift + eps, out),
                Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| walk(x, shift, out)),
                Expr::Pow(inner, n) if *n > 0 => walk(inner, shift, out),
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(self, 0.0, &mut out);
        out
    }

    pub fn natural_abscissa(&self) -> f64 {
        self.singular_points()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(e)
    }
}

fn push_shift(e: &Expr, eps: f64) -> Expr {
    if eps == 0.0 {
        return e.clone();
    }
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Var => Expr::Add(vec![Expr::Var, Expr::constant(eps)]),
        Expr::Exp(t) => Expr::Mul(vec![Expr::constant((-t * eps).exp()), Expr::Exp(*t)]),
        Expr::RPow { lambda, alpha } => Expr::RPow {
            lambda: lambda - eps,
            alpha: *alpha,
        },
        Expr::Shift(inner, e2) => push_shift(inner, e2 + eps),
        Expr::Add(xs) => Expr::Add(xs.iter().map(|x| push_shift(x, eps)).collect()).simplify_shallow(),
        Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| push_shift(x, eps)).collect()).simplify_shallow(),
        Expr::Pow(inner, n) => Expr::Pow(Box::new(push_shift(inner, eps)), *n).simplify_shallow(),
    }
}

fn fmt_const(v: C64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.im == 0.0 {
        write!(f, "{}", v.re)
    } else {
        write!(f, "cplx({},{})", v.re, v.im)
    }
}

fn fmt_list(name: &str, xs: &[Expr], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => fmt_const(*v, f),
            Expr::Var => write!(f, "z"),
            Expr::Exp(t) => write!(f, "exp(-{t} z)"),
            Expr::RPow { lambda, alpha } => {
                write!(f, "rpow(")?;
                if *lambda == c(0.0) {
                    write!(f, "z")?;
                } else {
                    write!(f, "add(z,")?;
                    fmt_const(-lambda, f)?;
                    write!(f, ")")?;
                }
                write!(f, ",")?;
                fmt_const(-alpha, f)?;
                write!(f, ")")
            }
            Expr::Shift(e, eps) => write!(f, "shift({e},{eps})"),
            Expr::Add(xs) => fmt_list("add", xs, f),
            Expr::Mul(xs) => fmt_list("mul", xs, f),
            Expr::Pow(e, n) => write!(f, "pow({e},{n})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::parse(1, format!("{msg} at column {}", self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", ch as char)))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphabetic() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                i = j;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
        let text = std::str::from_utf8(&bytes[start..i]).unwrap_or("");
        let v = text.parse::<f64>().map_err(|_| self.error("expected a number"))?;
        self.pos = i;
        Ok(v)
    }

    fn starts_number(&mut self) -> bool {
        matches!(self.peek(), Some(b) if b.is_ascii_digit() || b == b'-' || b == b'+' || b == b'.')
    }

    /// A constant: a real number, `i` or `cplx(re, im)`.
    fn constant(&mut self) -> Result<C64> {
        if self.starts_number() {
            return Ok(c(self.number()?));
        }
        let save = self.pos;
        match self.ident().as_deref() {
            Some("i") => Ok(C64::new(0.0, 1.0)),
            Some("cplx") => {
                self.expect(b'(')?;
                let re = self.number()?;
                self.expect(b',')?;
                let im = self.number()?;
                self.expect(b')')?;
                Ok(C64::new(re, im))
            }
            _ => {
                self.pos = save;
                Err(self.error("expected a constant"))
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect(b'(')?;
        let mut out = vec![self.expr()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            out.push(self.expr()?);
        }
        self.expect(b')')?;
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr> {
        if self.starts_number() {
            return Ok(Expr::Const(c(self.number()?)));
        }
        let save = self.pos;
        let name = self.ident().ok_or_else(|| self.error("expected an expression"))?;
        match name.as_str() {
            "z" => Ok(Expr::Var),
            "i" | "cplx" => {
                self.pos = save;
                Ok(Expr::Const(self.constant()?))
            }
            "exp" => {
                self.expect(b'(')?;
                let coeff = if self.starts_number() {
                    // a bare `-` or `+` before z means -1 or +1
                    self.skip_ws();
                    let b = self.src[self.pos];
                    let next = self.src.get(self.pos + 1).copied();
                    if (b == b'-' || b == b'+') && !matches!(next, Some(d) if d.is_ascii_digit() || d == b'.') {
                        self.pos += 1;
                        if b == b'-' {
                            -1.0
                        } else {
                            1.0
                        }
                    } else {
                        self.number()?
                    }
                } else {
                    1.0
                };
                if self.peek() == Some(b'*') {
                    self.pos += 1;
                }
                if self.ident().as_deref() != Some("z") {
                    return Err(self.error("exp takes a linear argument `-τ z`"));
                }
                self.expect(b')')?;
                if coeff > 0.0 {
                    return Err(self.error("exp(τ z) with τ > 0 is unbounded on half-planes"));
                }
                Ok(Expr::Exp(-coeff + 0.0))
            }
            "rpow" => {
                self.expect(b'(')?;
                let lambda = self.rpow_base()?;
                self.expect(b',')?;
                let exponent = self.constant()?;
                self.expect(b')')?;
                Ok(Expr::RPow {
                    lambda,
                    alpha: -exponent,
                })
            }
            "add" => Ok(Expr::Add(self.args()?)),
            "mul" => Ok(Expr::Mul(self.args()?)),
            "sub" => {
                let a = self.args()?;
                if a.len() != 2 {
                    return Err(self.error("sub takes two arguments"));
                }
                let mut it = a.into_iter();
                let x = it.next().unwrap();
                let y = it.next().unwrap();
                Ok(Expr::Add(vec![x, Expr::Mul(vec![Expr::constant(-1.0), y])]))
            }
            "neg" => {
                let a = self.args()?;
                if a.len() != 1 {
                    return Err(self.error("neg takes one argument"));
                }
                Ok(Expr::Mul(vec![Expr::constant(-1.0), a.into_iter().next().unwrap()]))
            }
            "pow" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b',')?;
                let n = self.number()?;
                self.expect(b')')?;
                if n < 0.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
                    return Err(self.error("pow exponent must be a nonnegative integer"));
                }
                Ok(Expr::Pow(Box::new(e), n as u32))
            }
            "shift" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b',')?;
                let eps = self.number()?;
                self.expect(b')')?;
                Ok(Expr::Shift(Box::new(e), eps))
            }
            other => {
                self.pos = save;
                Err(self.error(&format!("unknown function `{other}`")))
            }
        }
    }

    /// `z`, `add(z, c)`, `add(c, z)` or `sub(z, c)`; returns `λ` with base `z - λ`.
    fn rpow_base(&mut self) -> Result<C64> {
        let save = self.pos;
        match self.ident().as_deref() {
            Some("z") => Ok(c(0.0)),
            Some(op @ ("add" | "sub")) => {
                self.expect(b'(')?;
                let z_first = {
                    let s = self.pos;
                    let id = self.ident();
                    if id.as_deref() == Some("z") {
                        true
                    } else {
                        self.pos = s;
                        false
                    }
                };
                let k = if z_first {
                    self.expect(b',')?;
                    self.constant()?
                } else {
                    let k = self.constant()?;
                    self.expect(b',')?;
                    if self.ident().as_deref() != Some("z") || op == "sub" {
                        return Err(self.error("rpow base must be z plus a constant"));
                    }
                    k
                };
                self.expect(b')')?;
                Ok(if op == "add" { -k } else { k })
            }
            _ => {
                self.pos = save;
                Err(self.error("rpow base must be z, add(z, c) or sub(z, c)"))
            }
        }
    }
}

/// A bounded holomorphic function on the half-plane `Re z > abscissa`.
#[derive(Debug, Clone)]
pub struct HalfPlaneFunction {
    expr: Expr,
    abscissa: f64,
    sup_cache: OnceLock<f64>,
}

impl PartialEq for HalfPlaneFunction {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr && self.abscissa == other.abscissa
    }
}

impl fmt::Display for HalfPlaneFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// Boundary maximum of a function on a vertical line.
#[derive(Debug, Clone, Copy)]
pub struct LineMax {
    pub value: f64,
    pub at: f64,
}

/// `‖f‖_∞ + ‖(z-ω) f'‖_∞` with both parts.
#[derive(Debug, Clone, Copy)]
pub struct MikhlinNorm {
    pub value: f64,
    pub sup_f: f64,
    pub sup_deriv_term: f64,
    pub argmax_f: f64,
    pub argmax_deriv_term: f64,
    pub interior_checks: usize,
}

impl HalfPlaneFunction {
    /// Uses the natural abscissa of the expression (right of every branch point).
    pub fn new(expr: Expr) -> Self {
        let abscissa = expr.natural_abscissa();
        Self {
            expr,
            abscissa,
            sup_cache: OnceLock::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self::new(Expr::parse(text)?))
    }

    pub fn with_abscissa(self, omega: f64) -> Result<Self> {
        let natural = self.expr.natural_abscissa();
        if omega < natural {
            return Err(Error::Domain(format!(
                "declared abscissa {omega} is left of a branch point at Re z = {natural}"
            )));
        }
        Ok(Self {
            expr: self.expr,
            abscissa: omega,
            sup_cache: OnceLock::new(),
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn evaluate(&self, z: C64) -> Result<C64> {
        if z.re < self.abscissa - 1e-12 * (1.0 + self.abscissa.abs()) {
            return Err(Error::Domain(format!(
                "Re z = {} is left of the abscissa {}",
                z.re, self.abscissa
            )));
        }
        let v = self.expr.eval(z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Domain(format!("no finite value at z = {z}")));
        }
        Ok(v)
    }

    pub fn derivative(&self, m: u32) -> Self {
        let mut e = self.expr.clone();
        for _ in 0..m {
            e = e.derivative();
        }
        Self {
            expr: e,
            abscissa: self.abscissa,
            sup_cache: OnceLock::new(),
        }
    }

    /// `self · other` on the intersection of their domains.
    pub fn product(&self, other: &Self) -> Self {
        Self {
            expr: Expr::Mul(vec![self.expr.clone(), other.expr.clone()]),
            abscissa: self.abscissa.max(other.abscissa),
            sup_cache: OnceLock::new(),
        }
    }

    /// `z -> f(z + eps)`.
    pub fn shifted(&self, eps: f64) -> Self {
        Self {
            expr: Expr::Shift(Box::new(self.expr.clone()), eps),
            abscissa: self.abscissa - eps,
            sup_cache: OnceLock::new(),
        }
    }

    /// Conservative boundedness test on `Re z >= omega`: no branch point on
    /// or right of the line and no polynomial growth.
    pub fn check_bounded(&self, omega: f64) -> Result<()> {
        if omega < self.abscissa {
            return Err(Error::Domain(format!(
                "line Re z = {omega} is left of the abscissa {}",
                self.abscissa
            )));
        }
        if let Some(p) = self.expr.singular_points().iter().find(|p| p.re >= omega) {
            return Err(Error::Unbounded(format!(
                "branch point {p} on or right of Re z = {omega}"
            )));
        }
        let g = self.expr.growth();
        if g > 0.0 {
            return Err(Error::Unbounded(format!("grows like |z|^{g} along Re z = {omega}")));
        }
        Ok(())
    }

    fn sampling(&self, omega: f64) -> (f64, Vec<(f64, f64)>) {
        let freq = self.expr.frequency();
        let mut spacing = 0.05f64;
        if freq > 0.0 {
            spacing = spacing.min(0.25 / freq);
        }
        let patches = self
            .expr
            .singular_points()
            .iter()
            .map(|p| {
                let d = (omega - p.re).max(1e-9);
                (p.im, 20.0 * d)
            })
            .collect();
        (spacing, patches)
    }

    /// Maximizes `|f(ω + is)|` over `s`.
    pub fn boundary_max(&self, omega: f64) -> Result<LineMax> {
        self.check_bounded(omega)?;
        let (spacing, patches) = self.sampling(omega);
        let e = &self.expr;
        let (at, value) = quad::line_max(|s| e.eval(C64::new(omega, s)).norm(), spacing, 1e8, &patches);
        Ok(LineMax { value, at })
    }

    /// `sup_{Re z > ω} |f(z)|`, attained on the boundary line.
    pub fn sup_norm(&self, omega: f64) -> Result<f64> {
        if omega == self.abscissa {
            if let Some(v) = self.sup_cache.get() {
                return Ok(*v);
            }
        }
        let v = self.boundary_max(omega)?.value;
        if omega == self.abscissa {
            let _ = self.sup_cache.set(v);
        }
        Ok(v)
    }

    pub fn mikhlin_norm(&self, omega: f64) -> Result<MikhlinNorm> {
        let f = self.boundary_max(omega)?;
        let deriv_term = Self {
            expr: Expr::Mul(vec![
                Expr::Add(vec![Expr::Var, Expr::constant(-omega)]),
                self.expr.derivative(),
            ])
            .simplify(),
            abscissa: self.abscissa,
            sup_cache: OnceLock::new(),
        };
        let d = deriv_term.boundary_max(omega)?;
        // interior spot checks: the maximum principle should leave the boundary values on top
        let mut sup_f = f.value;
        let mut sup_d = d.value;
        let mut checks = 0;
        for x in [1e-2, 1e-1, 1.0, 10.0] {
            for k in -20..=20 {
                for centre in [f.at, d.at] {
                    let z = C64::new(omega + x, centre + 0.5 * k as f64);
                    sup_f = sup_f.max(self.expr.eval(z).norm());
                    sup_d = sup_d.max(deriv_term.expr.eval(z).norm());
                    checks += 1;
                }
            }
        }
        Ok(MikhlinNorm {
            value: sup_f + sup_d,
            sup_f,
            sup_deriv_term: sup_d,
            argmax_f: f.at,
            argmax_deriv_term: d.at,
            interior_checks: checks,
        })
    }

    /// `f^{(n)}(β + is)` from boundary values on `Re z = alpha` through
    /// `-n!/(2π) ∫ f(α+ir) / (α+ir-w)^{n+1} dr`.
    pub fn cauchy_derivative_line(&self, alpha: f64, beta: f64, n: u32, s: f64) -> Result<C64> {
        if n == 0 {
            return Err(Error::Precondition("derivative order must be positive".into()));
        }
        if beta <= alpha {
            return Err(Error::Precondition("beta must exceed alpha".into()));
        }
        let sup = self.sup_norm(alpha)?;
        let d = beta - alpha;
        let freq = self.expr.frequency();
        let nf = n as f64;
        let pre = special::factorial(n) / (2.0 * std::f64::consts::PI);
        // constants integrate to zero against (ζ-w)^{-n-1}; dropping the
        // limit at infinity speeds up the tail
        let limit = self.expr.eval(C64::new(1e12, 0.0));
        let g = |z: C64| self.expr.eval(z) - limit;
        let tol = 1e-10 * pre * sup.max(1e-300) / d.powi(n as i32);
        // tail beyond |r - s| = R, with the envelope of |f| sampled outward;
        // oscillating integrands gain one power of R by parts
        let envelope = |r: f64| {
            (0..=12)
                .flat_map(|k| [-1.0, 1.0].map(|side| C64::new(alpha, s + side * r * 2f64.powi(k))))
                .map(|z| g(z).norm())
                .fold(0.0, f64::max)
        };
        let tail = |r: f64| {
            let m = envelope(r);
            let plain = 2.0 * pre * m / (nf * r.powi(n as i32));
            if freq > 0.0 {
                plain.min(2.0 * pre * (nf + 2.0) * m / (freq * r.powi(n as i32 + 1)))
            } else {
                plain
            }
        };
        let mut reach = 10.0 * d;
        while tail(reach) > tol {
            reach *= 2.0;
            if reach > 1e9 {
                return Err(Error::Truncation(format!(
                    "line integral tail {:e} exceeds {tol:e} at |r| = 1e9",
                    tail(reach)
                )));
            }
        }
        let w = C64::new(beta, s);
        let mut nodes = Vec::new();
        let osc = if freq > 0.0 { 8.0 / freq } else { f64::INFINITY };
        for side in [-1.0, 1.0] {
            let mut lo = 0.0;
            let mut width = d.min(osc);
            while lo < reach {
                let hi = (lo + (4.0 * width).max(d)).min(reach);
                let panels = (((hi - lo) / width.min(osc)).ceil() as usize).max(1);
                let mut seg = Vec::new();
                quad::push_panels(lo, hi, panels, &mut seg);
                nodes.extend(seg.into_iter().map(|(u, q)| (s + side * u, q)));
                lo = hi;
                width = (lo / 2.0).max(d);
            }
        }
        let sum: C64 = nodes
            .iter()
            .map(|&(r, q)| {
                let zeta = C64::new(alpha, r);
                g(zeta) / (zeta - w).powu(n + 1) * q
            })
            .sum();
        Ok(-sum * pre)
    }
}

impl ScalarFunction for HalfPlaneFunction {
    fn value(&self, z: C64) -> Result<C64> {
        self.evaluate(z)
    }

    fn taylor(&self, z: C64, order: usize) -> Result<Vec<C64>> {
        let mut e = self.expr.clone();
        let mut out = Vec::with_capacity(order + 1);
        for k in 0..=order {
            if k > 0 {
                e = e.derivative();
            }
            let v = e.eval(z) / special::factorial(k as u32);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Domain(format!("derivative {k} not finite at {z}")));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn abscissa(&self) -> f64 {
        self.abscissa
    }
}

/// A function sampled on `ω + i[s0, s0 + (n-1) ds]`, piecewise linear.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub omega: f64,
    pub s0: f64,
    pub ds: f64,
    pub values: Vec<C64>,
}

/// Poisson extension value with the truncation estimate it was accepted with.
#[derive(Debug, Clone, Copy)]
pub struct PoissonValue {
    pub value: C64,
    pub truncation: f64,
}

impl BoundaryTrace {
    /// Samples `f(ω + is)` for `|s| <= half_width` at step `ds`.
    pub fn sample(f: &HalfPlaneFunction, omega: f64, half_width: f64, ds: f64) -> Result<Self> {
        f.check_bounded(omega)?;
        let n = (2.0 * half_width / ds).round() as usize + 1;
        let values = (0..n)
            .map(|k| f.expr.eval(C64::new(omega, -half_width + k as f64 * ds)))
            .collect();
        Ok(Self {
            omega,
            s0: -half_width,
            ds,
            values,
        })
    }

    /// Kernel-weighted integral over nodes `lo..=hi`, with the trace continued
    /// beyond them by the mean of its outer tenth on each side.
    fn poisson_sum(&self, lo: usize, hi: usize, delta: f64, s: f64) -> C64 {
        let pi = std::f64::consts::PI;
        let node = |k: usize| self.s0 + k as f64 * self.ds;
        let mut acc = C64::new(0.0, 0.0);
        for k in lo..hi {
            let (u0, u1) = (node(k) - s, node(k + 1) - s);
            let (v0, v1) = (self.values[k], self.values[k + 1]);
            let slope = (v1 - v0) / (u1 - u0);
            let den = delta * delta + u0 * u1;
            let dtheta = if den > 0.0 {
                (delta * (u1 - u0) / den).atan()
            } else {
                (u1 / delta).atan() - (u0 / delta).atan()
            };
            let dlog = ((u1 * u1 - u0 * u0) / (u0 * u0 + delta * delta)).ln_1p();
            // ∫ (v0 + slope (u - u0)) δ / (π (u² + δ²)) du
            acc += (v0 - slope * u0) * (dtheta / pi) + slope * (delta * dlog / (2.0 * pi));
        }
        let span = ((hi - lo) / 10).max(1);
        // Hann-weighted, so oscillating traces average out quickly
        let mean = |a: usize, b: usize| {
            let m = (b - a + 2) as f64;
            let (mut acc, mut wsum) = (C64::new(0.0, 0.0), 0.0);
            for (j, v) in self.values[a..=b].iter().enumerate() {
                let w = (std::f64::consts::PI * (j + 1) as f64 / m).sin().powi(2);
                acc += v * w;
                wsum += w;
            }
            acc / wsum
        };
        let left = mean(lo, lo + span);
        let right = mean(hi - span, hi);
        let left_mass = ((node(lo) - s) / delta).atan() / pi + 0.5;
        let right_mass = 0.5 - ((node(hi) - s) / delta).atan() / pi;
        acc + left * left_mass + right * right_mass
    }

    /// Value at `ω' + is` of the harmonic extension. The truncation estimate
    /// compares the full grid with its inner half.
    pub fn poisson_extend(&self, omega_prime: f64, s: f64, tol: f64) -> Result<PoissonValue> {
        let delta = omega_prime - self.omega;
        if delta <= 0.0 {
            return Err(Error::Precondition("omega' must exceed the trace abscissa".into()));
        }
        let n = self.values.len();
        if n < 40 {
            return Err(Error::Precondition("trace too short".into()));
        }
        let full = self.poisson_sum(0, n - 1, delta, s);
        let inner = self.poisson_sum(n / 4, 3 * n / 4, delta, s);
        let truncation = (full - inner).norm();
        if truncation > tol {
            return Err(Error::Truncation(format!(
                "Poisson tail estimate {truncation:e} exceeds {tol:e}; widen the trace"
            )));
        }
        Ok(PoissonValue {
            value: full,
            truncation,
        })
    }
}

/// Density recovered from a transform, with its diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveredDensity {
    pub measure: WeightedMeasure,
    pub negative_mass: f64,
    pub total_mass: f64,
    pub laplace_error: f64,
}

/// Step and length of the Fourier grid used for density recovery.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryGrid {
    pub dt: f64,
    pub log2_len: u32,
}

impl Default for RecoveryGrid {
    fn default() -> Self {
        Self { dt: 5e-4, log2_len: 18 }
    }
}

/// Recovers `ν` with `ν̂(z) = h(z + sigma)` from samples of `h` on
/// `Re z = sigma` by one inverse FFT. The first cell's node is corrected so
/// that `ν̂(1)` is exact; other transform values are then checked.
pub(crate) fn recover_density(
    h: &dyn Fn(C64) -> C64,
    sigma: f64,
    grid: RecoveryGrid,
    causality_tol: f64,
    laplace_tol: f64,
) -> Result<RecoveredDensity> {
    let n = 1usize << grid.log2_len;
    let dt = grid.dt;
    let ds = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let mut buf: Vec<C64> = (0..n)
        .map(|j| {
            let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            h(C64::new(sigma, k * ds))
        })
        .collect();
    if buf.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Domain("transform not finite on the sampling line".into()));
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = ds / (2.0 * std::f64::consts::PI);
    buf.iter_mut().for_each(|v| *v *= scale);
    let negative_mass: f64 = buf[n / 2..].iter().map(|v| v.norm()).sum::<f64>() * dt;
    let total_mass: f64 = buf.iter().map(|v| v.norm()).sum::<f64>() * dt;
    if negative_mass > causality_tol * total_mass.max(1e-300) {
        return Err(Error::Causality(format!(
            "mass {negative_mass:e} of {total_mass:e} recovered on negative times"
        )));
    }
    let mut values: Vec<C64> = buf[..n / 2].to_vec();
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let keep = values
        .iter()
        .rposition(|v| v.norm() > 1e-15 * peak)
        .map_or(2, |k| (k + 2).min(n / 2));
    values.truncate(keep.max(2));
    let mut density = GridDensity::new(0.0, dt, values)?;
    let probe = WeightedMeasure::from_grid(density.clone());
    let one = C64::new(1.0, 0.0);
    let miss = h(one + sigma) - probe.laplace_transform(one)?;
    density.values[0] += miss * (2.0 / dt);
    let measure = WeightedMeasure::from_grid(density);
    let mut laplace_error: f64 = 0.0;
    for z in [
        C64::new(0.25, 0.0),
        C64::new(3.0, 0.0),
        C64::new(1.0, 2.0),
        C64::new(0.5, -1.5),
    ] {
        laplace_error = laplace_error.max((measure.laplace_transform(z)? - h(z + sigma)).norm());
    }
    if laplace_error > laplace_tol {
        return Err(Error::Convergence(format!(
            "recovered density reproduces its transform only to {laplace_error:e}"
        )));
    }
    Ok(RecoveredDensity {
        measure,
        negative_mass,
        total_mass,
        laplace_error,
    })
}

/// Recovers the density of `h(z) = f(z)(z-λ)^{-α}`, reweighted by
/// `e^{-ω₀ t}`, so that the returned measure has transform `h(· + ω₀)`.
pub fn paley_wiener_factor(f: &HalfPlaneFunction, alpha: f64, lambda: C64, omega0: f64) -> Result<RecoveredDensity> {
    if alpha < 0.5 {
        return Err(Error::Precondition(format!("alpha = {alpha} must be at least 1/2")));
    }
    if lambda.re >= 0.0 {
        return Err(Error::Precondition("Re lambda must be negative".into()));
    }
    if omega0 <= 0.0 {
        return Err(Error::Precondition("omega0 must be positive".into()));
    }
    f.check_bounded(0.0)?;
    factor_density(&f.expr, c(alpha), lambda, omega0)
}

/// Density `ν` with `ν̂(z) = h(z + sigma)` for `h = f (z-λ)^{-α}`. The singular
/// part `f(∞) (z-λ)^{-α}` is taken in closed form; the FFT only sees the
/// smoother remainder.
pub(crate) fn factor_density(f: &Expr, alpha: C64, lambda: C64, sigma: f64) -> Result<RecoveredDensity> {
    let factor = Expr::RPow { lambda, alpha };
    let limit = f.eval(C64::new(1e12, 0.0));
    let limit = if limit.re.is_finite() && limit.im.is_finite() {
        limit
    } else {
        c(0.0)
    };
    let h = |z: C64| (f.eval(z) - limit) * factor.eval(z);
    let mut out = recover_density(&h, sigma, RecoveryGrid::default(), 0.1, 1e-5)?;
    if limit != c(0.0) {
        let singular = ExpPoly::new(limit / special::gamma(alpha), 0.0, alpha - 1.0, lambda - sigma)?;
        out.measure = out.measure.plus(&WeightedMeasure::from_term(singular));
    }
    Ok(out)
}

/// Named functions used by tests and experiments.
pub mod catalog {
    use super::*;

    /// `(name, expression)` pairs covering every primitive.
    pub const ENTRIES: &[(&str, &str)] = &[
        ("one", "1"),
        ("delay", "exp(-1 z)"),
        ("resolvent", "rpow(add(z,1),-1)"),
        ("double_pole", "rpow(add(z,2),-2)"),
        ("sqrt_resolvent", "rpow(add(z,1),-0.5)"),
        ("delayed_resolvent", "mul(exp(-1 z),rpow(add(z,1),-1))"),
        ("rational_mix", "mul(z,rpow(add(z,1),-1),rpow(add(z,3),-1))"),
        ("complex_pole", "rpow(add(z,cplx(1,2)),-1)"),
        ("two_roots", "mul(rpow(add(z,1),-0.5),rpow(add(z,2),-0.5))"),
        ("delayed_root", "mul(exp(-0.5 z),rpow(add(z,1),-0.5),rpow(add(z,3),-1))"),
        ("shifted_root", "shift(rpow(add(z,0.5),-0.75),0.25)"),
        ("crank_nicolson", "mul(sub(2,z),rpow(add(z,2),-1))"),
    ];

    pub fn get(name: &str) -> Option<HalfPlaneFunction> {
        ENTRIES
            .iter()
            .find(|e| e.0 == name)
            .map(|e| HalfPlaneFunction::parse(e.1).expect("catalog entries parse"))
    }

    /// The regularizer `g_k(z) = k / (z - ω + k)`.
    pub fn regularizer(k: f64, omega: f64) -> HalfPlaneFunction {
        HalfPlaneFunction::new(Expr::Mul(vec![
            Expr::constant(k),
            Expr::RPow {
                lambda: C64::new(omega - k, 0.0),
                alpha: c(1.0),
            },
        ]))
    }

    /// `f_{k,ε}(z) = f(z+ε) g_k(z+ε)`.
    pub fn approximant(f: &HalfPlaneFunction, k: f64, eps: f64, omega: f64) -> HalfPlaneFunction {
        f.product(&regularizer(k, omega)).shifted(eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> HalfPlaneFunction {
        HalfPlaneFunction::parse(s).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(f("exp(-1 z)").evaluate(c(0.0)).unwrap(), c(1.0));
        let r = f("rpow(add(z,1),-1)").evaluate(C64::new(0.0, 1.0)).unwrap();
        assert!((r - C64::new(0.5, -0.5)).norm() < 1e-16);
        assert_eq!(f("rpow(add(z,1),-0.5)").evaluate(c(0.0)).unwrap(), c(1.0));
        assert!(matches!(
            f("rpow(add(z,1),-0.5)").evaluate(c(-2.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn derivative_examples() {
        let tau = 1.7;
        let d = HalfPlaneFunction::new(Expr::Exp(tau)).derivative(1);
        assert_eq!(d.expr(), &Expr::Mul(vec![Expr::constant(-tau), Expr::Exp(tau)]));
        let d2 = f("rpow(add(z,1),-1)").derivative(2);
        let z = C64::new(0.3, 0.8);
        assert!((d2.evaluate(z).unwrap() - 2.0 / (1.0 + z).powu(3)).norm() < 1e-15);
        assert_eq!(f("cplx(2,3)").derivative(1).expr(), &Expr::Const(c(0.0)));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let z = C64::new(0.7, -1.3);
        for (name, _) in catalog::ENTRIES {
            let g = catalog::get(name).unwrap();
            let d = g.derivative(1).evaluate(z).unwrap();
            let h = 1e-4;
            let fd = (g.evaluate(z + h).unwrap() - g.evaluate(z - h).unwrap()) / (2.0 * h);
            assert!((d - fd).norm() <= 1e-6 * (1.0 + d.norm()), "{name}: {d} vs {fd}");
        }
    }

    #[test]
    fn sup_norm_examples() {
        let tau = 0.8;
        let omega = 0.3;
        let v = f("exp(-0.8 z)").sup_norm(omega).unwrap();
        assert!((v - (-tau * omega).exp()).abs() < 1e-15);
        assert!((f("rpow(add(z,1),-1)").sup_norm(0.0).unwrap() - 1.0).abs() < 1e-15);
        let g = f("mul(exp(-1 z),rpow(add(z,1),-1))");
        let m = g.boundary_max(0.0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-15 && m.at.abs() < 1e-6);
        assert!(matches!(f("z").sup_norm(0.0), Err(Error::Unbounded(_))));
    }

    #[test]
    fn mikhlin_examples() {
        let m = f("cplx(3,4)").mikhlin_norm(0.0).unwrap();
        assert!((m.value - 5.0).abs() < 1e-15);
        let m = f("rpow(add(z,1),-1)").mikhlin_norm(0.0).unwrap();
        assert!((m.value - 1.5).abs() < 1e-12, "{}", m.value);
        assert!((m.argmax_deriv_term.abs() - 1.0).abs() < 1e-6);
        assert!(matches!(f("exp(-1 z)").mikhlin_norm(0.0), Err(Error::Unbounded(_))));
    }

    #[test]
    fn maximum_principle_on_catalog() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (name, _) in catalog::ENTRIES {
            let g = catalog::get(name).unwrap();
            let omega = g.abscissa().max(0.0) + 0.1;
            let sup = g.sup_norm(omega).unwrap();
            for _ in 0..200 {
                let z = C64::new(omega + rng.gen_range(0.0..10.0), rng.gen_range(-50.0..50.0));
                assert!(g.evaluate(z).unwrap().norm() <= sup + 1e-8, "{name}");
            }
        }
    }

    #[test]
    fn shift_identity_on_sup_norm() {
        let omega = 0.5;
        for name in ["resolvent", "sqrt_resolvent", "rational_mix"] {
            let g = catalog::get(name).unwrap();
            for tau in [0.5, 2.0] {
                let shifted = g.product(&HalfPlaneFunction::new(Expr::Exp(tau)));
                let lhs = shifted.sup_norm(omega).unwrap();
                let rhs = (-tau * omega).exp() * g.sup_norm(omega).unwrap();
                assert!((lhs - rhs).abs() < 1e-12 * rhs, "{name} {tau}: {lhs} {rhs}");
            }
        }
    }

    #[test]
    fn regularizer_normalization() {
        for k in [1.0, 10.0, 100.0] {
            // k ∫ e^{-ks} ds over [0, 60/k]
            let v = k * quad::integrate(|s| (-k * s).exp(), 0.0, 60.0 / k, 200);
            assert!((v - 1.0).abs() < 1e-13);
            let g = catalog::regularizer(k, 0.0);
            assert!((g.sup_norm(0.0).unwrap() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn poisson_examples() {
        let one = BoundaryTrace::sample(&f("1"), 0.0, 50.0, 0.1).unwrap();
        for (wp, s) in [(0.5, 0.0), (2.0, 3.0)] {
            assert!((one.poisson_extend(wp, s, 1e-6).unwrap().value - c(1.0)).norm() < 1e-13);
        }
        let r = BoundaryTrace::sample(&f("rpow(add(z,1),-1)"), 0.0, 2000.0, 2e-3).unwrap();
        let v = r.poisson_extend(1.0, 0.0, 1e-5).unwrap().value;
        assert!((v - c(0.5)).norm() < 1e-6, "{v}");
        let e = BoundaryTrace::sample(&f("exp(-1 z)"), 0.0, 2000.0, 2e-3).unwrap();
        let v = e.poisson_extend(1.0, 0.0, 1e-5).unwrap().value;
        assert!((v - c((-1f64).exp())).norm() < 1e-6, "{v}");
        let short = BoundaryTrace::sample(&f("exp(-1 z)"), 0.0, 20.0, 1e-2).unwrap();
        assert!(matches!(
            short.poisson_extend(1.0, 0.0, 1e-6),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn cauchy_examples() {
        assert!(f("1").cauchy_derivative_line(0.0, 1.0, 2, 0.3).unwrap().norm() < 1e-12);
        let v = f("rpow(add(z,1),-1)").cauchy_derivative_line(0.0, 1.0, 1, 0.0).unwrap();
        assert!((v - c(-0.25)).norm() < 1e-6, "{v}");
        let v = f("exp(-1 z)").cauchy_derivative_line(0.0, 1.0, 2, 0.0).unwrap();
        assert!((v - c((-1f64).exp())).norm() < 1e-6, "{v}");
    }

    #[test]
    fn cauchy_agrees_with_symbolic_on_catalog() {
        for (name, _) in catalog::ENTRIES {
            let g = catalog::get(name).unwrap();
            let alpha = g.abscissa().max(-0.2) + 0.1;
            let (beta, s) = (alpha + 0.7, 0.4);
            for n in [1, 2] {
                let line = g.cauchy_derivative_line(alpha, beta, n, s).unwrap();
                let exact = g.derivative(n).evaluate(C64::new(beta, s)).unwrap();
                assert!(
                    (line - exact).norm() <= 1e-6 * (1.0 + exact.norm()),
                    "{name} n={n}: {line} {exact}"
                );
            }
        }
    }

    #[test]
    fn paley_wiener_examples() {
        let one = f("1");
        let r = paley_wiener_factor(&one, 1.0, c(-1.0), 0.5).unwrap();
        for t in [0.1f64, 1.0, 4.0] {
            let expected = (-t).exp() * (-0.5 * t).exp();
            assert!((r.measure.density(t) - c(expected)).norm() < 1e-10, "{t}");
        }
        assert!(r.laplace_error < 1e-5);

        let r = paley_wiener_factor(&one, 0.5, c(-1.0), 0.5).unwrap();
        // forward quadrature oracle of the known pair t^{-1/2} e^{-t} / Γ(1/2)
        let z = C64::new(0.7, 0.0);
        let oracle =
            2.0 * quad::integrate(|u| (-(1.0 + 0.5 + z.re) * u * u).exp(), 0.0, 10.0, 100) / special::gamma_real(0.5);
        assert!((r.measure.laplace_transform(z).unwrap() - c(oracle)).norm() < 1e-5);
        for t in [0.5f64, 2.0] {
            let g = t.powf(-0.5) * (-t).exp() / special::gamma_real(0.5) * (-0.5 * t).exp();
            assert!((r.measure.density(t) - c(g)).norm() < 1e-10);
        }

        let r = paley_wiener_factor(&f("exp(-1 z)"), 1.0, c(-1.0), 0.5).unwrap();
        for t in [0.5f64, 1.5, 3.0] {
            let g = if t >= 1.0 {
                (-(t - 1.0)).exp() * (-0.5 * t).exp()
            } else {
                0.0
            };
            assert!((r.measure.density(t) - c(g)).norm() < 1e-3, "{t}");
        }
        assert!(matches!(
            paley_wiener_factor(&f("mul(z,rpow(add(z,1),-2))"), 0.5, c(-1.0), 0.5).map(|_| ()),
            Ok(())
        ));
    }

    #[test]
    fn text_round_trip() {
        for (_, text) in catalog::ENTRIES {
            let e = Expr::parse(text).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            assert_eq!(back, e, "{text}");
        }
        let e = Expr::parse("exp(-z)").unwrap();
        assert_eq!(e, Expr::Exp(1.0));
        assert!(matches!(Expr::parse("exp(2 z)"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("add(z,"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("rpow(mul(z,z),1)"), Err(Error::Parse { .. })));
    }

    #[test]
    fn shift_elimination_preserves_values() {
        let g = f("shift(mul(z,exp(-2 z),rpow(add(z,1),-1.5)),0.3)");
        let s = HalfPlaneFunction::new(g.expr().simplify());
        assert!(!s.to_string().contains("shift"));
        let z = C64::new(0.2, 1.1);
        assert!((g.evaluate(z).unwrap() - s.evaluate(z).unwrap()).norm() < 1e-14);
    }
}
