//! Closed-form field of a constant kernel over a flat d-plane.

use crate::special::flat_constant;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatField {
    pub r: f64,
    pub d: f64,
    pub grad_d_norm: f64,
}

/// `R = c·(σ_{d-1}/2)·B(d/2, α/2)·δ^{-α}`, `D = R^{-1/α}`, `|∇D| = D/δ`.
pub fn flat_oracle(d: f64, alpha: f64, c: f64, delta: f64) -> FlatField {
    let r = c * flat_constant(d, alpha) * delta.powf(-alpha);
    let dd = r.powf(-1.0 / alpha);
    FlatField {
        r,
        d: dd,
        grad_d_norm: dd / delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tol};

    #[test]
    fn matches_direct_quadrature() {
        // Tail beyond |s| = L contributes 2/L up to O(L^-3).
        let l = 1e4;
        let line = integrate(|s: f64| 1.0 / (1.0 + s * s), -l, l, Tol::rel(1e-13), "line").unwrap().0 + 2.0 / l;
        assert!((flat_oracle(1.0, 1.0, 1.0, 1.0).r - line).abs() < 1e-10);
        let plane = integrate(|s: f64| 2.0 * std::f64::consts::PI * s / (1.0 + s * s).powi(2), 0.0, 1e4, Tol::rel(1e-12), "p")
            .unwrap()
            .0;
        assert!((flat_oracle(2.0, 2.0, 1.0, 1.0).r - plane).abs() < 1e-7);
    }

    #[test]
    fn homogeneity() {
        let a = flat_oracle(1.5, 0.7, 2.0, 0.3);
        let b = flat_oracle(1.5, 0.7, 2.0, 0.6);
        assert!((b.r / a.r - 2f64.powf(-0.7)).abs() < 1e-14);
        assert!((b.d / a.d - 2.0).abs() < 1e-13);
        assert!((b.grad_d_norm - a.grad_d_norm).abs() < 1e-14 * a.grad_d_norm);
    }
}
