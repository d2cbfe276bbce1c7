//! Gluing rescaled copies of a kernel at a lacunary sequence of scales:
//! `K(x) = M + Σ_{i≤j} φ_i(|x|)·K̃(x/√(a_i a_{i+1}))`.

use super::{Kernel, Variant};
use crate::error::{Error, Result};
use crate::num::Num;
use std::sync::Arc;

/// Smooth monotone step in `log t`: 0 below `lo`, 1 above `hi`.
pub fn log_step<T: Num>(t: &T, lo: f64, hi: f64) -> T {
    let tv = t.val();
    if tv <= lo {
        return t.cst(0.0);
    }
    if tv >= hi {
        return t.cst(1.0);
    }
    let s = t.ln().add_c(-lo.ln()).scale(1.0 / (hi / lo).ln());
    let psi = |x: &T| x.recip().neg().exp();
    let a = psi(&s);
    let b = psi(&s.neg().add_c(1.0));
    a.div(&a.add(&b))
}

#[derive(Clone, Debug)]
pub struct Glued {
    pub base: Kernel,
    pub m: f64,
    /// `a_1 > a_2 > … > a_{j+1}`; the depth is `scales.len() - 1`.
    pub scales: Vec<f64>,
}

/// Scales with `a_1 = 1` and `a_{i+1} = min(a_i²/b_i, a_i/16)`, `b_i = 2^i`.
pub fn default_scales(depth: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    for i in 1..=depth {
        let prev = a[i - 1];
        a.push((prev * prev / 2f64.powi(i as i32)).min(prev / 16.0));
    }
    a
}

impl Glued {
    /// `b(i)` is the constant in `a_{i+1} ≤ a_i²/b_i` (1-based `i`).
    pub fn new(base: Kernel, m: f64, scales: Vec<f64>, b: impl Fn(usize) -> f64) -> Result<Self> {
        if scales.len() < 2 {
            return Err(Error::ScaleViolation {
                index: 0,
                detail: "need at least two scales".into(),
            });
        }
        for (i, w) in scales.windows(2).enumerate() {
            let (a, next) = (w[0], w[1]);
            if !(a > 0.0 && next > 0.0) {
                return Err(Error::ScaleViolation {
                    index: i + 1,
                    detail: "scales must be positive".into(),
                });
            }
            let bi = b(i + 1);
            if next > a * a / bi {
                return Err(Error::ScaleViolation {
                    index: i + 1,
                    detail: format!("a_{} = {next:e} > a_{}^2/b = {:e}", i + 2, i + 1, a * a / bi),
                });
            }
            if next > a / 4.0 {
                return Err(Error::ScaleViolation {
                    index: i + 1,
                    detail: format!("a_{} = {next:e} > a_{}/4; bump supports would overlap", i + 2, i + 1),
                });
            }
        }
        Ok(Glued { base, m, scales })
    }

    pub fn depth(&self) -> usize {
        self.scales.len() - 1
    }

    /// Rising transition `T_i` (0-based `i`): over `(a_1, 2a_1)` for the first
    /// scale, over `(a_i/2, 2a_i)` otherwise.
    fn transition<T: Num>(&self, i: usize, t: &T) -> T {
        let a = self.scales[i];
        if i == 0 {
            log_step(t, a, 2.0 * a)
        } else {
            log_step(t, a / 2.0, 2.0 * a)
        }
    }

    /// Partition function `φ_i = T_{i+1}(1 - T_i)`, supported in `(a_{i+1}/2, 2a_i)`.
    pub fn bump<T: Num>(&self, i: usize, t: &T) -> T {
        let tv = t.val();
        if tv <= self.scales[i + 1] / 2.0 || tv >= 2.0 * self.scales[i] {
            return t.cst(0.0);
        }
        self.transition(i + 1, t).mul(&self.transition(i, t).neg().add_c(1.0))
    }

    /// The designated probe radius of copy `i`: `√(a_i a_{i+1})`.
    pub fn center(&self, i: usize) -> f64 {
        (self.scales[i] * self.scales[i + 1]).sqrt()
    }

    pub fn eval<T: Num>(&self, z: &[T]) -> T {
        let t = crate::num::norm(z);
        let mut acc = z[0].cst(self.m);
        let mut zz = z.to_vec();
        for i in 0..self.depth() {
            if t.val() <= self.scales[i + 1] / 2.0 || t.val() >= 2.0 * self.scales[i] {
                continue;
            }
            let phi = self.bump(i, &t);
            let s = 1.0 / self.center(i);
            for (a, b) in zz.iter_mut().zip(z) {
                *a = b.scale(s);
            }
            acc = acc.add(&phi.mul(&self.base.eval_num(&zz)));
        }
        acc
    }
}

impl Kernel {
    /// Glued kernel `M + Σ φ_i(|x|) K̃(x/√(a_i a_{i+1}))` with `b_i = 2^i`.
    /// Requires `M` above the sampled sup of `|K̃|` over the radii each copy sees.
    pub fn glued(base: &Kernel, m: f64, scales: Vec<f64>) -> Result<Kernel> {
        Self::glued_with(base, m, scales, |i| 2f64.powi(i as i32))
    }

    pub fn glued_with(base: &Kernel, m: f64, scales: Vec<f64>, b: impl Fn(usize) -> f64) -> Result<Kernel> {
        let n = base.ambient_dim();
        let g = Glued::new(base.clone(), m, scales, b)?;
        if let Some(0.0) = base.constant_value() {
            return Ok(Kernel::constant(n, m));
        }
        let mut sup: f64 = 0.0;
        for i in 0..g.depth() {
            let ratio = (g.scales[i] / g.scales[i + 1]).sqrt();
            sup = sup.max(super::sampled_sup(base, 0.5 / ratio, 2.0 * ratio, 96, 64));
        }
        if m <= sup {
            return Err(Error::BadSpec(format!("offset M = {m} must exceed sup|K̃| ≈ {sup}")));
        }
        Ok(Kernel::new(n, Variant::Glued(Arc::new(g))))
    }

    pub fn as_glued(&self) -> Option<&Glued> {
        match self.variant() {
            Variant::Glued(g) => Some(g),
            _ => None,
        }
    }
}
