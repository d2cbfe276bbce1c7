//! Functions on the unit sphere used by zero-homogeneous and product kernels.

use crate::num::Num;

#[derive(Clone, Debug, PartialEq)]
pub enum SphereFn {
    /// On S¹: `Σ_m cos[m]·cos(mθ) + sin[m]·sin(mθ)`; `cos[0]` is the mean.
    Fourier { cos: Vec<f64>, sin: Vec<f64> },
    /// On S^{n-1}: polynomial `Σ c·w^k` in the coordinates of the unit vector.
    Poly { terms: Vec<(f64, [u8; 3])> },
}

impl SphereFn {
    pub fn cosine(cos: Vec<f64>) -> Self {
        SphereFn::Fourier { cos, sin: vec![] }
    }

    pub fn ambient_dim(&self) -> Option<usize> {
        match self {
            SphereFn::Fourier { .. } => Some(2),
            SphereFn::Poly { .. } => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            SphereFn::Fourier { cos, sin } => cos.iter().skip(1).all(|&c| c == 0.0) && sin.iter().all(|&s| s == 0.0),
            SphereFn::Poly { terms } => terms.iter().all(|(c, k)| *c == 0.0 || k.iter().all(|&e| e == 0)),
        }
    }

    /// Evaluates at a unit vector `w` (any scalar type).
    pub fn eval<T: Num>(&self, w: &[T]) -> T {
        match self {
            SphereFn::Fourier { cos, sin } => {
                let zero = w[0].cst(0.0);
                let mut acc = w[0].cst(cos.first().copied().unwrap_or(0.0));
                let top = cos.len().max(sin.len());
                // (c_m, s_m) = Re/Im of (w0 + i w1)^m
                let mut c = w[0].cst(1.0);
                let mut s = zero.clone();
                for m in 1..top {
                    let nc = c.mul(&w[0]).sub(&s.mul(&w[1]));
                    let ns = c.mul(&w[1]).add(&s.mul(&w[0]));
                    c = nc;
                    s = ns;
                    if let Some(&a) = cos.get(m) {
                        if a != 0.0 {
                            acc = acc.add(&c.scale(a));
                        }
                    }
                    if let Some(&b) = sin.get(m) {
                        if b != 0.0 {
                            acc = acc.add(&s.scale(b));
                        }
                    }
                }
                acc
            }
            SphereFn::Poly { terms } => {
                let mut acc = w[0].cst(0.0);
                for (coef, k) in terms {
                    let mut t = w[0].cst(*coef);
                    for (i, &e) in k.iter().enumerate().take(w.len()) {
                        if e > 0 {
                            t = t.mul(&w[i].powi(e as u32));
                        }
                    }
                    acc = acc.add(&t);
                }
                acc
            }
        }
    }
}
