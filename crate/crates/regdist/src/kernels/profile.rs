//! One-dimensional radial profiles t ↦ K(t): closed-form expressions, log-grid
//! cubic tables and compactly supported cubic B-spline sums in log t.

use crate::error::{Error, Result};
use crate::num::Num;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval<T: Num>(&self, t: &T) -> T {
        match self {
            Expr::Num(v) => t.cst(*v),
            Expr::T => t.clone(),
            Expr::Add(a, b) => a.eval(t).add(&b.eval(t)),
            Expr::Sub(a, b) => a.eval(t).sub(&b.eval(t)),
            Expr::Mul(a, b) => a.eval(t).mul(&b.eval(t)),
            Expr::Div(a, b) => a.eval(t).div(&b.eval(t)),
            Expr::Neg(a) => a.eval(t).neg(),
            Expr::Pow(a, p) => {
                let b = a.eval(t);
                if p.fract() == 0.0 && (0.0..=16.0).contains(p) {
                    b.powi(*p as u32)
                } else {
                    b.powf(*p)
                }
            }
            Expr::Exp(a) => a.eval(t).exp(),
            Expr::Log(a) => a.eval(t).ln(),
            Expr::Sin(a) => a.eval(t).sin(),
            Expr::Cos(a) => a.eval(t).cos(),
            Expr::Sqrt(a) => a.eval(t).sqrt(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::T => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.is_constant() && b.is_constant(),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Sqrt(a) => {
                a.is_constant()
            }
        }
    }

    /// Parses expressions in `t` with `+ - * / ^`, parentheses, numbers, `pi`,
    /// and the functions `exp log ln sin cos sqrt`.
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.toks.len() {
            return Err(Error::Config(format!("unexpected trailing input in expression '{src}'")));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::T => write!(f, "t"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, p) => write!(f, "({a})^{p}"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let save = i;
                i += 1;
                if i < cs.len() && (cs[i] == '+' || cs[i] == '-') {
                    i += 1;
                }
                if i < cs.len() && cs[i].is_ascii_digit() {
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let txt: String = cs[st..i].iter().collect();
            out.push(Tok::Num(txt.parse().map_err(|_| Error::Config(format!("bad number '{txt}'")))?));
        } else if c.is_alphabetic() {
            let st = i;
            while i < cs.len() && cs[i].is_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Config(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }
    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        loop {
            if self.eat('+') {
                e = Expr::Add(Box::new(e), Box::new(self.product()?));
            } else if self.eat('-') {
                e = Expr::Sub(Box::new(e), Box::new(self.product()?));
            } else {
                return Ok(e);
            }
        }
    }
    fn product(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            if self.eat('*') {
                e = Expr::Mul(Box::new(e), Box::new(self.unary()?));
            } else if self.eat('/') {
                e = Expr::Div(Box::new(e), Box::new(self.unary()?));
            } else {
                return Ok(e);
            }
        }
    }
    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let neg = self.eat('-');
            let p = match self.toks.get(self.pos) {
                Some(Tok::Num(v)) => *v,
                _ => return Err(Error::Config("exponent must be a number".into())),
            };
            self.pos += 1;
            return Ok(Expr::Pow(Box::new(base), if neg { -p } else { p }));
        }
        Ok(base)
    }
    fn atom(&mut self) -> Result<Expr> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(Error::Config("missing ')'".into()));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "t" => Ok(Expr::T),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    f => {
                        if !self.eat('(') {
                            return Err(Error::Config(format!("expected '(' after {f}")));
                        }
                        let a = Box::new(self.sum()?);
                        if !self.eat(')') {
                            return Err(Error::Config("missing ')'".into()));
                        }
                        match f {
                            "exp" => Ok(Expr::Exp(a)),
                            "log" | "ln" => Ok(Expr::Log(a)),
                            "sin" => Ok(Expr::Sin(a)),
                            "cos" => Ok(Expr::Cos(a)),
                            "sqrt" => Ok(Expr::Sqrt(a)),
                            _ => Err(Error::Config(format!("unknown function '{f}'"))),
                        }
                    }
                }
            }
            other => Err(Error::Config(format!("unexpected token {other:?}"))),
        }
    }
}

/// Natural cubic spline in `u = log t` through tabulated values. Constant
/// extrapolation beyond the end nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTable {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Second derivatives in `u` at the nodes.
    m: Vec<f64>,
}

impl LogTable {
    pub const MIN_NODES_PER_DECADE: f64 = 64.0;

    /// Builds from `(t, K(t))` pairs; rejects tables coarser than 64 nodes per decade.
    pub fn new(t: &[f64], y: &[f64]) -> Result<Self> {
        if t.len() != y.len() || t.len() < 4 {
            return Err(Error::BadSpec("radial table needs at least 4 (t, K) rows".into()));
        }
        if t.iter().any(|&x| !(x > 0.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadSpec("radial table radii must be positive and increasing".into()));
        }
        let u: Vec<f64> = t.iter().map(|x| x.ln()).collect();
        let decades = (u[u.len() - 1] - u[0]) / std::f64::consts::LN_10;
        let density = (u.len() - 1) as f64 / decades;
        if density < Self::MIN_NODES_PER_DECADE - 1e-9 {
            return Err(Error::BadSpec(format!(
                "radial table has {density:.1} nodes per decade; at least 64 required"
            )));
        }
        let m = natural_spline_second_derivs(&u, y);
        Ok(LogTable { u, y: y.to_vec(), m })
    }

    /// Samples `f` on `per_decade` log-spaced nodes over `[t_lo, t_hi]`.
    pub fn sample(f: impl Fn(f64) -> f64, t_lo: f64, t_hi: f64, per_decade: usize) -> Result<Self> {
        let decades = (t_hi / t_lo).log10();
        let count = (decades * per_decade as f64).ceil() as usize + 1;
        let t: Vec<f64> = (0..count)
            .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (count - 1) as f64))
            .collect();
        let y: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        Self::new(&t, &y)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.u[0].exp(), self.u[self.u.len() - 1].exp())
    }

    pub fn eval<T: Num>(&self, t: &T) -> T {
        let uv = t.val().ln();
        let n = self.u.len();
        if uv <= self.u[0] {
            return t.cst(self.y[0]);
        }
        if uv >= self.u[n - 1] {
            return t.cst(self.y[n - 1]);
        }
        let k = match self.u.binary_search_by(|p| p.total_cmp(&uv)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.u[k + 1] - self.u[k];
        // cubic in s = u - u_k: y_k + b s + c s^2 + d s^3
        let c = 0.5 * self.m[k];
        let d = (self.m[k + 1] - self.m[k]) / (6.0 * h);
        let b = (self.y[k + 1] - self.y[k]) / h - h * (2.0 * self.m[k] + self.m[k + 1]) / 6.0;
        let s = t.ln().add_c(-self.u[k]);
        s.scale(d).add_c(c).mul(&s).add_c(b).mul(&s).add_c(self.y[k])
    }
}

pub(crate) fn natural_spline_second_derivs(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        a[i] = h0;
        b[i] = 2.0 * (h0 + h1);
        c[i] = h1;
        r[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 2..n - 1 {
        let w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        r[i] -= w * r[i - 1];
    }
    for i in (1..n - 1).rev() {
        m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
    }
    m
}

/// Sum of uniform cubic B-splines in `u = log t`; each spline is C² and
/// vanishes with two derivatives at the ends of its support.
#[derive(Clone, Debug, PartialEq)]
pub struct BSplineSum {
    pub u0: f64,
    pub du: f64,
    pub coeffs: Vec<f64>,
}

impl BSplineSum {
    /// Basis of `count` splines whose supports exactly tile `[log r_min, log r_max]`.
    pub fn uniform(r_min: f64, r_max: f64, count: usize) -> (f64, f64) {
        let u0 = r_min.ln();
        let du = (r_max.ln() - u0) / (count as f64 + 3.0);
        (u0, du)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.u0.exp(), (self.u0 + self.du * (self.coeffs.len() as f64 + 3.0)).exp())
    }

    /// Value of the single basis spline `k` (support `[u0+k du, u0+(k+4) du]`).
    pub fn basis<T: Num>(u0: f64, du: f64, k: usize, t: &T) -> T {
        let s = t.ln().add_c(-(u0 + k as f64 * du)).scale(1.0 / du);
        cubic_bspline(&s)
    }

    pub fn eval<T: Num>(&self, t: &T) -> T {
        let uv = t.val().ln();
        let pos = (uv - self.u0) / self.du;
        let mut acc = t.cst(0.0);
        if !(pos > 0.0) || pos >= self.coeffs.len() as f64 + 3.0 {
            return acc;
        }
        let hi = (pos.floor() as usize).min(self.coeffs.len() - 1);
        let lo = hi.saturating_sub(3);
        for k in lo..=hi {
            let c = self.coeffs[k];
            if c != 0.0 {
                acc = acc.add(&Self::basis(self.u0, self.du, k, t).scale(c));
            }
        }
        acc
    }
}

/// Uniform cubic B-spline with support [0, 4].
pub fn cubic_bspline<T: Num>(s: &T) -> T {
    let v = s.val();
    if !(v > 0.0) || v >= 4.0 {
        return s.cst(0.0);
    }
    if v < 1.0 {
        s.powi(3).scale(1.0 / 6.0)
    } else if v < 2.0 {
        let x = s.add_c(-1.0);
        // (1 + 3x + 3x^2 - 3x^3)/6
        x.scale(-3.0).add_c(3.0).mul(&x).add_c(3.0).mul(&x).add_c(1.0).scale(1.0 / 6.0)
    } else if v < 3.0 {
        let x = s.add_c(-2.0);
        // (4 - 6x^2 + 3x^3)/6
        x.scale(3.0).add_c(-6.0).mul(&x).mul(&x).add_c(4.0).scale(1.0 / 6.0)
    } else {
        let x = s.neg().add_c(4.0);
        x.powi(3).scale(1.0 / 6.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Expr(Arc<Expr>),
    Table(Arc<LogTable>),
    Spline(Arc<BSplineSum>),
}

impl Profile {
    pub fn parse(src: &str) -> Result<Profile> {
        Ok(Profile::Expr(Arc::new(Expr::parse(src)?)))
    }

    pub fn eval<T: Num>(&self, t: &T) -> T {
        match self {
            Profile::Expr(e) => e.eval(t),
            Profile::Table(tb) => tb.eval(t),
            Profile::Spline(s) => s.eval(t),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(&t)
    }

    /// Highest derivative order available analytically.
    pub fn derivative_order(&self) -> usize {
        match self {
            Profile::Expr(_) => crate::num::MAX_ORDER,
            Profile::Table(_) | Profile::Spline(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Dual2;

    #[test]
    fn parse_and_eval() {
        let e = Expr::parse("1 + exp(-log(t)^2)").unwrap();
        assert!((e.eval(&1.0) - 2.0).abs() < 1e-15);
        assert!((e.eval(&std::f64::consts::E) - (1.0 + (-1f64).exp())).abs() < 1e-15);
        let e = Expr::parse("2*t/(1+t^2)").unwrap();
        assert!((e.eval(&1.0) - 1.0).abs() < 1e-15);
        let e = Expr::parse("1+0.5*sin(log(t))").unwrap();
        let d = e.eval(&Dual2::var(1.0));
        assert!((d.d1 - 0.5).abs() < 1e-15);
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(t)").is_err());
        assert!(Expr::parse("2.5e-1").unwrap().is_constant());
    }

    #[test]
    fn table_hits_nodes_and_matches_smooth_function() {
        let f = |t: f64| 1.0 + (-(t.ln()).powi(2)).exp();
        let tb = LogTable::sample(f, 1e-3, 1e3, 64).unwrap();
        for (u, y) in tb.u.iter().zip(&tb.y) {
            assert_eq!(tb.eval(&u.exp()), *y);
        }
        for &t in &[0.013, 0.5, 1.7, 123.0] {
            assert!((tb.eval(&t) - f(t)).abs() < 1e-6);
        }
        assert!(LogTable::sample(f, 1e-3, 1e3, 10).is_err());
    }

    #[test]
    fn bspline_partition_of_unity_inside() {
        let (u0, du) = BSplineSum::uniform(0.5, 2.0, 20);
        let s = BSplineSum {
            u0,
            du,
            coeffs: vec![1.0; 20],
        };
        // interior (away from the 3 boundary cells) the sum is 1
        let t = (u0 + 10.3 * du).exp();
        assert!((s.eval(&t) - 1.0).abs() < 1e-14);
        assert_eq!(s.eval(&0.49), 0.0);
        assert_eq!(s.eval(&2.01), 0.0);
    }

    #[test]
    fn bspline_is_c2() {
        for knot in [1.0f64, 2.0, 3.0] {
            let l = cubic_bspline(&Dual2 { v: knot - 1e-9, d1: 1.0, d2: 0.0 });
            let r = cubic_bspline(&Dual2 { v: knot + 1e-9, d1: 1.0, d2: 0.0 });
            assert!((l.v - r.v).abs() < 1e-8 && (l.d1 - r.d1).abs() < 1e-8 && (l.d2 - r.d2).abs() < 1e-7);
        }
    }
}
