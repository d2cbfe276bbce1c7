//! Closed-form constants: sphere areas, ball volumes and the flat-plane constant.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Surface area of the unit sphere S^{k-1} in R^k (real k > 0): 2π^{k/2}/Γ(k/2).
pub fn sphere_area(k: f64) -> f64 {
    2.0 * (0.5 * k * PI.ln() - ln_gamma(0.5 * k)).exp()
}

/// Volume of the unit ball in R^k.
pub fn ball_volume(k: f64) -> f64 {
    (0.5 * k * PI.ln() - ln_gamma(0.5 * k + 1.0)).exp()
}

pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// `∫_{R^d} (1+|s|^2)^{-(d+α)/2} ds = (σ_{d-1}/2)·B(d/2, α/2)`: the value of
/// `R_{1,plane}·δ^α` for the unit constant kernel.
pub fn flat_constant(d: f64, alpha: f64) -> f64 {
    0.5 * sphere_area(d) * beta(0.5 * d, 0.5 * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((sphere_area(1.0) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2.0) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3.0) - 4.0 * PI).abs() < 1e-13);
        assert!((ball_volume(2.0) - PI).abs() < 1e-13);
        assert!((flat_constant(1.0, 1.0) - PI).abs() < 1e-13);
        assert!((flat_constant(2.0, 2.0) - PI).abs() < 1e-13);
    }
}
