//! Per-atom summands and the brute-force sum.

use crate::kernels::Kernel;

/// Value, gradient and Hessian accumulator (first `n` entries used).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Acc {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Acc {
    #[inline]
    pub fn add(&mut self, o: &Acc) {
        self.v += o.v;
        for i in 0..3 {
            self.g[i] += o.g[i];
            for j in 0..3 {
                self.h[i][j] += o.h[i][j];
            }
        }
    }

    #[inline]
    pub fn add_scaled(&mut self, w: f64, o: &Acc) {
        self.v += w * o.v;
        for i in 0..3 {
            self.g[i] += w * o.g[i];
            for j in 0..3 {
                self.h[i][j] += w * o.h[i][j];
            }
        }
    }
}

/// Number of packed components: value, gradient and Hessian in three dimensions.
pub(crate) const COMPONENTS: usize = 13;

/// Flattens `a` with derivatives scaled by powers of the length `l`.
pub(crate) fn pack(a: &Acc, l: f64, out: &mut [f64]) {
    out[0] = a.v;
    for i in 0..3 {
        out[1 + i] = l * a.g[i];
        for j in 0..3 {
            out[4 + 3 * i + j] = l * l * a.h[i][j];
        }
    }
}

pub(crate) fn unpack(v: &[f64], l: f64) -> Acc {
    let mut a = Acc {
        v: v[0],
        ..Acc::default()
    };
    for i in 0..3 {
        a.g[i] = v[1 + i] / l;
        for j in 0..3 {
            a.h[i][j] = v[4 + 3 * i + j] / (l * l);
        }
    }
    a
}

/// Kernel dispatch with a fast path for constants.
#[derive(Clone, Copy, Debug)]
pub enum KernelRef<'a> {
    Const(f64),
    General(&'a Kernel),
}

impl<'a> KernelRef<'a> {
    pub fn new(k: &'a Kernel) -> Self {
        match k.constant_value() {
            Some(c) => KernelRef::Const(c),
            None => KernelRef::General(k),
        }
    }
}

/// `K(z)|z|^{-β}` with its gradient and Hessian in `z`.
#[inline]
pub fn summand(k: KernelRef, beta: f64, z: &[f64; 3], n: usize) -> Acc {
    let mut q = 0.0;
    for c in z.iter().take(n) {
        q += c * c;
    }
    let s = q.powf(-0.5 * beta - 1.0);
    let rho = s * q;
    let a = -beta * s;
    let b = -(beta + 2.0) / q;
    let mut out = Acc {
        v: rho,
        ..Acc::default()
    };
    for i in 0..n {
        out.g[i] = a * z[i];
        for j in 0..n {
            out.h[i][j] = a * (b * z[i] * z[j] + if i == j { 1.0 } else { 0.0 });
        }
    }
    match k {
        KernelRef::Const(c) => {
            if c != 1.0 {
                let mut r = Acc::default();
                r.add_scaled(c, &out);
                out = r;
            }
            out
        }
        KernelRef::General(kern) => {
            let kd = kern.eval2(&z[..n]);
            let mut r = Acc {
                v: kd.v * rho,
                ..Acc::default()
            };
            for i in 0..n {
                r.g[i] = kd.v * out.g[i] + rho * kd.g[i];
                for j in 0..n {
                    r.h[i][j] = kd.v * out.h[i][j] + rho * kd.h[i][j] + kd.g[i] * out.g[j] + out.g[i] * kd.g[j];
                }
            }
            r
        }
    }
}

const BLOCK: usize = 128;

/// `Σ w_i summand(x - y_i)` over `lo..hi`, blocked pairwise in index order.
pub fn sum_range(k: KernelRef, beta: f64, n: usize, x: &[f64], pts: &[f64], w: &[f64], lo: usize, hi: usize) -> Acc {
    if hi - lo <= BLOCK {
        let mut acc = Acc::default();
        let mut z = [0.0; 3];
        for i in lo..hi {
            for c in 0..n {
                z[c] = x[c] - pts[i * n + c];
            }
            acc.add_scaled(w[i], &summand(k, beta, &z, n));
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let mut a = sum_range(k, beta, n, x, pts, w, lo, mid);
    a.add(&sum_range(k, beta, n, x, pts, w, mid, hi));
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summand_matches_finite_differences() {
        let k = Kernel::radial_expr(2, "1 + 0.5*exp(-t^2)").unwrap();
        let kr = KernelRef::new(&k);
        let z = [0.7, -0.4, 0.0];
        let s = summand(kr, 1.7, &z, 2);
        let h = 1e-6;
        for i in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let (p, m) = (summand(kr, 1.7, &zp, 2), summand(kr, 1.7, &zm, 2));
            assert!(((p.v - m.v) / (2.0 * h) - s.g[i]).abs() < 1e-7 * s.g[i].abs().max(1.0));
            for j in 0..2 {
                assert!(((p.g[j] - m.g[j]) / (2.0 * h) - s.h[i][j]).abs() < 1e-6 * s.h[i][j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_atom_one_term() {
        let z = [0.0, 2.0, 0.0];
        let s = summand(KernelRef::Const(1.0), 2.0, &z, 2);
        assert_eq!(s.v, 0.25);
        assert_eq!(s.g[1], -0.25);
    }
}
