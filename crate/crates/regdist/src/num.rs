//! Scalar abstraction shared by plain `f64` evaluation, univariate second-order
//! duals and multivariate truncated Taylor series ([`Jet`]). Kernels are written
//! once against [`Num`] and get derivatives of any supported order for free.

use std::collections::HashMap;
use std::sync::OnceLock;

pub trait Num: Clone {
    fn val(&self) -> f64;
    /// Constant with the same shape as `self`.
    fn cst(&self, v: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn add_c(&self, c: f64) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;

    fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn recip(&self) -> Self {
        self.powf(-1.0)
    }
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
    /// Integer power by repeated multiplication (valid for negative bases).
    fn powi(&self, k: u32) -> Self {
        let mut r = self.cst(1.0);
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }
}

impl Num for f64 {
    fn val(&self) -> f64 {
        *self
    }
    fn cst(&self, v: f64) -> Self {
        v
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn add_c(&self, c: f64) -> Self {
        self + c
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, k: u32) -> Self {
        f64::powi(*self, k as i32)
    }
}

/// Univariate value with first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Dual2 {
    pub fn var(t: f64) -> Self {
        Dual2 { v: t, d1: 1.0, d2: 0.0 }
    }
    fn chain(&self, f: f64, f1: f64, f2: f64) -> Self {
        Dual2 {
            v: f,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }
}

impl Num for Dual2 {
    fn val(&self) -> f64 {
        self.v
    }
    fn cst(&self, v: f64) -> Self {
        Dual2 { v, d1: 0.0, d2: 0.0 }
    }
    fn add(&self, o: &Self) -> Self {
        Dual2 {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
    fn sub(&self, o: &Self) -> Self {
        Dual2 {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
        }
    }
    fn mul(&self, o: &Self) -> Self {
        Dual2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
    fn add_c(&self, c: f64) -> Self {
        Dual2 { v: self.v + c, ..*self }
    }
    fn scale(&self, c: f64) -> Self {
        Dual2 {
            v: self.v * c,
            d1: self.d1 * c,
            d2: self.d2 * c,
        }
    }
    fn powf(&self, p: f64) -> Self {
        let f = self.v.powf(p);
        let f1 = p * self.v.powf(p - 1.0);
        let f2 = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.chain(f, f1, f2)
    }
    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(&self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }
    fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
}

pub const MAX_VARS: usize = 3;
pub const MAX_ORDER: usize = 8;

/// Monomial layout of truncated Taylor series in `nvars` variables up to `order`.
#[derive(Debug)]
pub struct Space {
    pub nvars: usize,
    pub order: usize,
    pub len: usize,
    pub exps: Vec<[u8; MAX_VARS]>,
    pub degree: Vec<usize>,
    /// `shift[j][i]`: index of monomial `exps[i] + e_j`, or `usize::MAX` past the order.
    pub shift: [Vec<usize>; MAX_VARS],
    triples: Vec<(u16, u16, u16)>,
    factorial: Vec<f64>,
}

impl Space {
    fn build(nvars: usize, order: usize) -> Space {
        let mut exps = Vec::new();
        for deg in 0..=order {
            let mut block = Vec::new();
            gen_exps(nvars, deg, &mut [0u8; MAX_VARS], 0, &mut block);
            exps.extend(block);
        }
        let len = exps.len();
        let index: HashMap<[u8; MAX_VARS], usize> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let shift = std::array::from_fn(|j| {
            exps.iter()
                .map(|e| {
                    if j >= nvars {
                        return usize::MAX;
                    }
                    let mut f = *e;
                    f[j] += 1;
                    *index.get(&f).unwrap_or(&usize::MAX)
                })
                .collect()
        });
        let mut triples = Vec::new();
        for i in 0..len {
            for j in 0..len {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let mut e = exps[i];
                for v in 0..MAX_VARS {
                    e[v] += exps[j][v];
                }
                triples.push((i as u16, j as u16, index[&e] as u16));
            }
        }
        let factorial = exps
            .iter()
            .map(|e| e.iter().map(|&k| (1..=k as u64).product::<u64>() as f64).product())
            .collect();
        Space {
            nvars,
            order,
            len,
            exps,
            degree,
            shift,
            triples,
            factorial,
        }
    }

    pub fn index_of(&self, e: [u8; MAX_VARS]) -> Option<usize> {
        self.exps.iter().position(|x| *x == e)
    }

    /// `k!` for the monomial at `i` (multi-index factorial).
    pub fn factorial(&self, i: usize) -> f64 {
        self.factorial[i]
    }
}

fn gen_exps(nvars: usize, deg: usize, cur: &mut [u8; MAX_VARS], pos: usize, out: &mut Vec<[u8; MAX_VARS]>) {
    if pos + 1 == nvars {
        cur[pos] = deg as u8;
        out.push(*cur);
        cur[pos] = 0;
        return;
    }
    for k in (0..=deg).rev() {
        cur[pos] = k as u8;
        gen_exps(nvars, deg - k, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

pub fn space(nvars: usize, order: usize) -> &'static Space {
    static SPACES: OnceLock<Vec<Space>> = OnceLock::new();
    assert!((1..=MAX_VARS).contains(&nvars) && order <= MAX_ORDER, "jet space out of range");
    let all = SPACES.get_or_init(|| {
        let mut v = Vec::new();
        for n in 1..=MAX_VARS {
            for o in 0..=MAX_ORDER {
                v.push(Space::build(n, o));
            }
        }
        v
    });
    &all[(nvars - 1) * (MAX_ORDER + 1) + order]
}

/// Number of coefficients for `nvars` variables up to `order`.
pub const fn jet_len(nvars: usize, order: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    let mut i = 1;
    while i <= nvars {
        num *= order + i;
        den *= i;
        i += 1;
    }
    num / den
}

/// Truncated multivariate Taylor series with inline storage of capacity `N`.
/// Coefficient `i` equals `D^k f / k!` for the monomial `k = space.exps[i]`.
#[derive(Clone)]
pub struct Jet<const N: usize> {
    pub sp: &'static Space,
    pub c: [f64; N],
}

impl<const N: usize> std::fmt::Debug for Jet<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Jet{:?}", &self.c[..self.sp.len])
    }
}

impl<const N: usize> Jet<N> {
    pub fn constant(sp: &'static Space, v: f64) -> Self {
        assert!(sp.len <= N, "jet capacity too small");
        let mut c = [0.0; N];
        c[0] = v;
        Jet { sp, c }
    }

    /// The coordinate function `x_i` expanded about `v`.
    pub fn variable(sp: &'static Space, i: usize, v: f64) -> Self {
        let mut j = Self::constant(sp, v);
        if sp.order > 0 {
            j.c[sp.shift[i][0]] = 1.0;
        }
        j
    }

    /// Jets of all coordinates expanded about `x`.
    pub fn point(sp: &'static Space, x: &[f64]) -> Vec<Self> {
        (0..sp.nvars).map(|i| Self::variable(sp, i, x[i])).collect()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.sp.len]
    }

    /// Partial derivative `D^k f` for the monomial at index `i`.
    pub fn derivative(&self, i: usize) -> f64 {
        self.c[i] * self.sp.factorial(i)
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.sp.nvars).map(|j| self.c[self.sp.shift[j][0]]).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        let n = self.sp.nvars;
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let k = self.sp.shift[j][self.sp.shift[i][0]];
                h[i][j] = self.derivative(k);
            }
        }
        h
    }

    /// Third derivative tensor `T[i][j][k]`.
    pub fn third(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.sp.nvars;
        let mut t = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let m = self.sp.shift[k][self.sp.shift[j][self.sp.shift[i][0]]];
                    t[i][j][k] = self.derivative(m);
                }
            }
        }
        t
    }

    fn zip(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut r = self.clone();
        for i in 0..self.sp.len {
            r.c[i] = f(self.c[i], o.c[i]);
        }
        r
    }

    /// Evaluates `f(self)` from the Taylor coefficients `a_k = f^(k)(u0)/k!`.
    pub fn compose(&self, a: &[f64]) -> Self {
        let order = self.sp.order;
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Self::constant(self.sp, a[order]);
        for k in (0..order).rev() {
            r = r.mul(&h);
            r.c[0] += a[k];
        }
        r
    }
}

impl<const N: usize> Num for Jet<N> {
    fn val(&self) -> f64 {
        self.c[0]
    }
    fn cst(&self, v: f64) -> Self {
        Self::constant(self.sp, v)
    }
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
    fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
    fn mul(&self, o: &Self) -> Self {
        let mut c = [0.0; N];
        for &(i, j, k) in &self.sp.triples {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { sp: self.sp, c }
    }
    fn add_c(&self, v: f64) -> Self {
        let mut r = self.clone();
        r.c[0] += v;
        r
    }
    fn scale(&self, v: f64) -> Self {
        let mut r = self.clone();
        for x in r.c[..self.sp.len].iter_mut() {
            *x *= v;
        }
        r
    }
    fn powf(&self, p: f64) -> Self {
        let u = self.c[0];
        let mut a = vec![0.0; self.sp.order + 1];
        let mut binom = 1.0;
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = binom * u.powf(p - k as f64);
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&a)
    }
    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let mut a = vec![0.0; self.sp.order + 1];
        let mut f = 1.0;
        for (k, ak) in a.iter_mut().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            *ak = e / f;
        }
        self.compose(&a)
    }
    fn ln(&self) -> Self {
        let u = self.c[0];
        let mut a = vec![0.0; self.sp.order + 1];
        a[0] = u.ln();
        for (k, ak) in a.iter_mut().enumerate().skip(1) {
            let s = if k % 2 == 1 { 1.0 } else { -1.0 };
            *ak = s / (k as f64 * u.powi(k as i32));
        }
        self.compose(&a)
    }
    fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        let mut a = vec![0.0; self.sp.order + 1];
        let mut f = 1.0;
        for (k, ak) in a.iter_mut().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            *ak = cyc[k % 4] / f;
        }
        self.compose(&a)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        let mut a = vec![0.0; self.sp.order + 1];
        let mut f = 1.0;
        for (k, ak) in a.iter_mut().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            *ak = cyc[k % 4] / f;
        }
        self.compose(&a)
    }
    fn recip(&self) -> Self {
        let u = self.c[0];
        let a: Vec<f64> = (0..=self.sp.order)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / u.powi(k as i32 + 1))
            .collect();
        self.compose(&a)
    }
}

/// Euclidean norm of a vector of scalars.
pub fn norm<T: Num>(z: &[T]) -> T {
    let mut s = z[0].mul(&z[0]);
    for zi in &z[1..] {
        s = s.add(&zi.mul(zi));
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_sizes() {
        assert_eq!(space(2, 2).len, 6);
        assert_eq!(space(3, 8).len, 165);
        assert_eq!(jet_len(3, 8), 165);
        assert_eq!(jet_len(2, 6), 28);
    }

    #[test]
    fn product_rule_matches_hand_derivative() {
        let sp = space(2, 3);
        let x = Jet::<10>::point(sp, &[0.7, -0.3]);
        // f = x^2 y + sin(x y)
        let f = x[0].mul(&x[0]).mul(&x[1]).add(&x[0].mul(&x[1]).sin());
        let (a, b) = (0.7f64, -0.3f64);
        assert!((f.val() - (a * a * b + (a * b).sin())).abs() < 1e-15);
        let g = f.gradient();
        assert!((g[0] - (2.0 * a * b + b * (a * b).cos())).abs() < 1e-14);
        assert!((g[1] - (a * a + a * (a * b).cos())).abs() < 1e-14);
        let h = f.hessian();
        let hxy = 2.0 * a + (a * b).cos() - a * b * (a * b).sin();
        assert!((h[0][1] - hxy).abs() < 1e-14 && (h[1][0] - hxy).abs() < 1e-14);
        let t = f.third();
        // d^3/dx^3 = -b^3 cos(ab)
        assert!((t[0][0][0] + b.powi(3) * (a * b).cos()).abs() < 1e-14);
    }

    #[test]
    fn elementary_functions_roundtrip() {
        let sp = space(1, 6);
        let x = Jet::<7>::variable(sp, 0, 1.3);
        let y = x.ln().exp();
        for i in 0..sp.len {
            assert!((y.c[i] - x.c[i]).abs() < 1e-13, "{i}");
        }
        let z = x.powf(2.5).powf(0.4);
        for i in 0..sp.len {
            assert!((z.c[i] - x.c[i]).abs() < 1e-12);
        }
        let w = x.sin().mul(&x.sin()).add(&x.cos().mul(&x.cos()));
        assert!((w.c[0] - 1.0).abs() < 1e-15 && w.c[1..].iter().all(|c| c.abs() < 1e-13));
        let r = x.recip().mul(&x);
        assert!((r.c[0] - 1.0).abs() < 1e-15 && r.c[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn dual_matches_jet() {
        let d = Dual2::var(0.8).powf(1.7).sin().mul(&Dual2::var(0.8).exp());
        let sp = space(1, 2);
        let j = Jet::<3>::variable(sp, 0, 0.8).powf(1.7).sin().mul(&Jet::<3>::variable(sp, 0, 0.8).exp());
        assert!((d.v - j.c[0]).abs() < 1e-15);
        assert!((d.d1 - j.c[1]).abs() < 1e-14);
        assert!((d.d2 - 2.0 * j.c[2]).abs() < 1e-13);
    }
}
