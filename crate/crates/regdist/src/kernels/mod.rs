//! Kernels `K: ℝⁿ∖{0} → ℝ` with structured variants and derivative access.
//!
//! Every variant is evaluated through one generic routine over [`Num`], so the
//! same code yields plain values, radial second-order duals, and multivariate
//! jets up to third order. Constant and radial kernels have dedicated fast
//! paths for the summation engine.

mod glue;
mod profile;
mod report;
mod smooth;
mod sphere;
mod table;

pub use glue::{default_scales, Glued};
pub use profile::{cubic_bspline, BSplineSum, Expr, LogTable, Profile};
pub use report::{
    dini_functional, dini_verdict, distance_standard_report, dyadic_lambdas, limit_profile, profile_gap, DiniVerdict,
    DistanceStandardReport, End, LimitReport, ReportGrid,
};
pub use smooth::{radial_mollify, rotational_average, MollifierSpec, Mollified, RotAverage, RotationWeight};
pub use sphere::SphereFn;
pub use table::{mode_name, parse_mode, read_table, write_modal_table};
pub(crate) use profile::natural_spline_second_derivs;

use crate::error::{Error, Result};
use crate::num::{self, space, Dual2, Jet, Num};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub enum Variant {
    Constant(f64),
    Radial(Profile),
    ZeroHomogeneous(SphereFn),
    Product(Profile, SphereFn),
    /// `Σ_j f_j(|x|)·g_j(x/|x|)`: synthesized and tabulated multi-mode kernels.
    Modal(Arc<Vec<(Profile, SphereFn)>>),
    Glued(Arc<Glued>),
    Mollified(Arc<Mollified>),
    Averaged(Arc<RotAverage>),
    /// `x ↦ K(λx)`.
    Dilated(Arc<Kernel>, f64),
    /// `Σ_j c_j K_j`.
    Combination(Arc<Vec<(f64, Kernel)>>),
}

#[derive(Clone, Debug)]
pub struct Kernel {
    n: usize,
    variant: Variant,
}

/// Value, gradient and Hessian in a fixed-size layout (first `n` entries used).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Deriv2 {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

/// Result of [`eval_kernel`]; entries beyond the requested order are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDerivs {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub third: Vec<Vec<Vec<f64>>>,
}

type Jet20 = Jet<20>;
type Jet10 = Jet<10>;

fn unit<T: Num>(z: &[T], r: &T) -> Vec<T> {
    let inv = r.recip();
    z.iter().map(|c| c.mul(&inv)).collect()
}

impl Kernel {
    pub fn new(n: usize, variant: Variant) -> Self {
        Kernel { n, variant }
    }
    pub fn constant(n: usize, c: f64) -> Self {
        Kernel::new(n, Variant::Constant(c))
    }
    pub fn radial(n: usize, profile: Profile) -> Self {
        Kernel::new(n, Variant::Radial(profile))
    }
    /// Radial kernel from an expression in `t`, e.g. `"1 + exp(-log(t)^2)"`.
    pub fn radial_expr(n: usize, expr: &str) -> Result<Self> {
        Ok(Kernel::radial(n, Profile::parse(expr)?))
    }
    pub fn zero_homogeneous(n: usize, f: SphereFn) -> Self {
        Kernel::new(n, Variant::ZeroHomogeneous(f))
    }
    pub fn product(n: usize, p: Profile, f: SphereFn) -> Self {
        Kernel::new(n, Variant::Product(p, f))
    }
    pub fn modal(n: usize, terms: Vec<(Profile, SphereFn)>) -> Self {
        Kernel::new(n, Variant::Modal(Arc::new(terms)))
    }
    pub fn combination(n: usize, terms: Vec<(f64, Kernel)>) -> Self {
        Kernel::new(n, Variant::Combination(Arc::new(terms)))
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }
    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn constant_value(&self) -> Option<f64> {
        match &self.variant {
            Variant::Constant(c) => Some(*c),
            Variant::Radial(Profile::Expr(e)) if e.is_constant() => Some(e.eval(&1.0)),
            Variant::ZeroHomogeneous(f) if f.is_constant() => Some(f.eval(&vec![1.0, 0.0, 0.0][..self.n])),
            Variant::Dilated(k, _) => k.constant_value(),
            _ => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        match &self.variant {
            Variant::Constant(_) | Variant::Radial(_) => true,
            Variant::ZeroHomogeneous(f) => f.is_constant(),
            Variant::Product(_, f) => f.is_constant(),
            Variant::Modal(t) => t.iter().all(|(_, f)| f.is_constant()),
            Variant::Glued(g) => g.base.is_radial(),
            Variant::Mollified(m) => m.inner.is_radial(),
            Variant::Averaged(a) => a.inner.is_radial() || a.is_full_average(),
            Variant::Dilated(k, _) => k.is_radial(),
            Variant::Combination(t) => t.iter().all(|(_, k)| k.is_radial()),
        }
    }

    /// True when `K(λx) = K(x)` for all λ > 0.
    pub fn is_zero_homogeneous(&self) -> bool {
        match &self.variant {
            Variant::Constant(_) | Variant::ZeroHomogeneous(_) => true,
            Variant::Dilated(k, _) => k.is_zero_homogeneous(),
            Variant::Averaged(a) => a.inner.is_zero_homogeneous(),
            Variant::Combination(t) => t.iter().all(|(_, k)| k.is_zero_homogeneous()),
            _ => false,
        }
    }

    /// Highest derivative order available analytically.
    pub fn derivative_order(&self) -> usize {
        match &self.variant {
            Variant::Constant(_) | Variant::ZeroHomogeneous(_) => num::MAX_ORDER,
            Variant::Radial(p) => p.derivative_order(),
            Variant::Product(p, _) => p.derivative_order(),
            Variant::Modal(t) => t.iter().map(|(p, _)| p.derivative_order()).min().unwrap_or(num::MAX_ORDER),
            Variant::Glued(g) => g.base.derivative_order(),
            Variant::Mollified(m) => m.inner.derivative_order(),
            Variant::Averaged(a) => a.inner.derivative_order(),
            Variant::Dilated(k, _) => k.derivative_order(),
            Variant::Combination(t) => t.iter().map(|(_, k)| k.derivative_order()).min().unwrap_or(num::MAX_ORDER),
        }
    }

    /// Generic evaluation at `z ≠ 0`.
    pub fn eval_num<T: Num>(&self, z: &[T]) -> T {
        match &self.variant {
            Variant::Constant(c) => z[0].cst(*c),
            Variant::Radial(p) => p.eval(&num::norm(z)),
            Variant::ZeroHomogeneous(f) => f.eval(&unit(z, &num::norm(z))),
            Variant::Product(p, f) => {
                let r = num::norm(z);
                p.eval(&r).mul(&f.eval(&unit(z, &r)))
            }
            Variant::Modal(terms) => {
                let r = num::norm(z);
                let w = unit(z, &r);
                let mut acc = z[0].cst(0.0);
                for (p, f) in terms.iter() {
                    acc = acc.add(&p.eval(&r).mul(&f.eval(&w)));
                }
                acc
            }
            Variant::Glued(g) => g.eval(z),
            Variant::Mollified(m) => m.eval(z),
            Variant::Averaged(a) => a.eval(z),
            Variant::Dilated(k, l) => {
                let zz: Vec<T> = z.iter().map(|c| c.scale(*l)).collect();
                k.eval_num(&zz)
            }
            Variant::Combination(terms) => {
                let mut acc = z[0].cst(0.0);
                for (c, k) in terms.iter() {
                    acc = acc.add(&k.eval_num(z).scale(*c));
                }
                acc
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval_num(x)
    }

    /// Value along the first coordinate axis, `K(t e₁)`.
    pub fn profile_value(&self, t: f64) -> f64 {
        let mut x = vec![0.0; self.n];
        x[0] = t;
        self.value(&x)
    }

    /// Radial profile with first and second `t`-derivatives along `e₁`.
    pub fn profile_dual(&self, t: f64) -> Dual2 {
        let zero = Dual2 { v: 0.0, d1: 0.0, d2: 0.0 };
        let mut z = vec![zero; self.n];
        z[0] = Dual2::var(t);
        self.eval_num(&z)
    }

    /// Value, gradient and Hessian; the hot path of the summation engine.
    pub fn eval2(&self, x: &[f64]) -> Deriv2 {
        let n = x.len();
        let mut out = Deriv2::default();
        match &self.variant {
            Variant::Constant(c) => {
                out.v = *c;
            }
            Variant::Radial(p) => {
                let r = crate::geom::norm(x);
                let f = p.eval(&Dual2::var(r));
                out.v = f.v;
                let a = f.d1 / r;
                let b = (f.d2 - a) / (r * r);
                for i in 0..n {
                    out.g[i] = a * x[i];
                    for j in 0..n {
                        out.h[i][j] = b * x[i] * x[j] + if i == j { a } else { 0.0 };
                    }
                }
            }
            _ => {
                let sp = space(n, 2);
                let z = Jet10::point(sp, x);
                let j = self.eval_num(&z);
                out.v = j.val();
                let g = j.gradient();
                let h = j.hessian();
                for i in 0..n {
                    out.g[i] = g[i];
                    for k in 0..n {
                        out.h[i][k] = h[i][k];
                    }
                }
            }
        }
        out
    }

    /// Full jet of order ≤ 3 at `x` (n ≤ 3).
    pub fn jet3(&self, x: &[f64], order: usize) -> Jet20 {
        let sp = space(x.len(), order);
        let z = Jet20::point(sp, x);
        self.eval_num(&z)
    }
}

/// `K(x)` and derivatives up to `order` (0..=3).
pub fn eval_kernel(k: &Kernel, x: &[f64], order: usize) -> Result<KernelDerivs> {
    if x.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroPoint);
    }
    let available = k.derivative_order().min(3);
    if order > available {
        return Err(Error::OrderUnavailable {
            requested: order,
            available,
        });
    }
    if x.len() > num::MAX_VARS {
        return Err(Error::UnsupportedDimension(x.len()));
    }
    let j = k.jet3(x, order);
    Ok(KernelDerivs {
        value: j.val(),
        gradient: if order >= 1 { j.gradient() } else { vec![] },
        hessian: if order >= 2 { j.hessian() } else { vec![] },
        third: if order >= 3 { j.third() } else { vec![] },
    })
}

/// `K_λ(x) = K(λx)`.
pub fn rescale_kernel(k: &Kernel, lambda: f64) -> Kernel {
    match &k.variant {
        Variant::Constant(_) | Variant::ZeroHomogeneous(_) => k.clone(),
        Variant::Dilated(inner, mu) => Kernel::new(k.n, Variant::Dilated(inner.clone(), lambda * mu)),
        _ if lambda == 1.0 => k.clone(),
        _ => Kernel::new(k.n, Variant::Dilated(Arc::new(k.clone()), lambda)),
    }
}

/// Sampled `sup |K|` over radii `[r_lo, r_hi]` (log grid) and standard directions.
pub fn sampled_sup(k: &Kernel, r_lo: f64, r_hi: f64, radii: usize, dirs: usize) -> f64 {
    let directions = crate::geom::sphere_directions(k.n, dirs);
    let vals = crate::par::map_range(radii, |i| {
        let r = r_lo * (r_hi / r_lo).powf(i as f64 / (radii.max(2) - 1) as f64);
        directions
            .iter()
            .map(|d| k.value(&crate::geom::scaled(d, r)).abs())
            .fold(0.0, f64::max)
    });
    vals.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(k: &Kernel, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (k.value(&a) - k.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn constant_kernel_has_zero_gradient() {
        let k = Kernel::constant(2, 2.0);
        let d = eval_kernel(&k, &[1.0, 0.0], 1).unwrap();
        assert_eq!(d.value, 2.0);
        assert_eq!(d.gradient, vec![0.0, 0.0]);
        assert_eq!(eval_kernel(&k, &[0.0, 0.0], 0), Err(Error::ZeroPoint));
    }

    #[test]
    fn zero_homogeneous_direct_values() {
        let k = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.0, 0.5]));
        assert!((k.value(&[1.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((k.value(&[0.0, 1.0]) - 0.5).abs() < 1e-15);
        assert!((k.value(&[0.0, 7.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radial_gradient_matches_chain_rule_and_differences() {
        let k = Kernel::radial_expr(3, "1 + exp(-log(t)^2)").unwrap();
        let d = eval_kernel(&k, &[1.0, 0.0, 0.0], 1).unwrap();
        assert!(d.gradient.iter().all(|g| g.abs() < 1e-14));
        let x = [0.3, -0.7, 1.1];
        let d = eval_kernel(&k, &x, 2).unwrap();
        let fd = fd_grad(&k, &x, 1e-6);
        for i in 0..3 {
            assert!((d.gradient[i] - fd[i]).abs() < 1e-8);
        }
        let e = k.eval2(&x);
        for i in 0..3 {
            assert!((e.g[i] - d.gradient[i]).abs() < 1e-14);
            for j in 0..3 {
                assert!((e.h[i][j] - d.hessian[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn table_profile_order_limit() {
        let tb = LogTable::sample(|t| 1.0 + 1.0 / (1.0 + t * t), 1e-3, 1e3, 64).unwrap();
        let k = Kernel::radial(2, Profile::Table(Arc::new(tb)));
        assert!(eval_kernel(&k, &[0.5, 0.5], 3).is_ok());
        let err = Error::OrderUnavailable {
            requested: 4,
            available: 3,
        };
        assert_eq!(eval_kernel(&k, &[0.5, 0.5], 4), Err(err));
    }

    #[test]
    fn rescale_unwinds_definition() {
        let k = Kernel::radial_expr(2, "1 + exp(-log(t)^2)").unwrap();
        let k10 = rescale_kernel(&k, 10.0);
        assert!((k10.value(&[0.1, 0.0]) - 2.0).abs() < 1e-15);
        let c = Kernel::constant(2, 3.0);
        assert!(matches!(rescale_kernel(&c, 5.0).variant(), Variant::Constant(v) if *v == 3.0));
        let zh = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.2]));
        assert!(matches!(rescale_kernel(&zh, 5.0).variant(), Variant::ZeroHomogeneous(_)));
    }

    #[test]
    fn product_and_modal_agree() {
        let p = Profile::parse("1/(1+t^2)").unwrap();
        let f = SphereFn::cosine(vec![1.0, 0.3]);
        let a = Kernel::product(2, p.clone(), f.clone());
        let b = Kernel::modal(2, vec![(p, f)]);
        let x = [0.4, -1.3];
        assert!((a.value(&x) - b.value(&x)).abs() < 1e-15);
        let ja = a.eval2(&x);
        let jb = b.eval2(&x);
        assert!((ja.h[0][1] - jb.h[0][1]).abs() < 1e-14);
    }
}
