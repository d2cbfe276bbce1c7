//! Regularity diagnostics of `D` and `F`: Carleson sums, cone oscillation,
//! the γ and θ functionals, α-numbers, blow-ups and rescaled plane profiles.

mod alpha;
mod blowup;
mod carleson;
mod cones;
mod gamma;

pub use alpha::{alpha_number, AlphaNumber, FlatCandidate};
pub use blowup::{blowup_sequence, plane_blowup_sequence, rescaled_profile, BlowupSequence, RescaledProfile};
pub use carleson::{
    carleson_sum, dyadic_grid, superlevel_content, usfe_scan, weighted_volume, CarlesonEntry, CarlesonOptions,
    CarlesonReport,
};
pub use cones::{cone_oscillation, dyadic_scales, ConeOscillation, ConeScale};
pub use gamma::{
    gamma_dyadic_sum, gamma_functional, gamma_dini_bound, gamma_theta_bound, poincare_probe, theta_functional,
    GammaBound, GammaEstimate, PlaneGamma, PoincareProbe, ThetaBound, ThetaEstimate,
};

use crate::error::{Error, Result};
use crate::geom;
use crate::measures::DiscreteMeasure;

/// Orthonormal basis of the orthogonal complement of `basis` in `R^n`.
pub fn normal_basis(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for b in basis.iter().chain(out.iter()) {
            e = geom::axpy(-geom::dot(&e, b), b, &e);
        }
        let l = geom::norm(&e);
        if l > 1e-8 {
            out.push(geom::scaled(&e, 1.0 / l));
        }
        if out.len() + basis.len() == n {
            break;
        }
    }
    out
}

/// Sampled linear `d`-planes in `R^n`, as orthonormal bases. Lines in the
/// plane are equally spaced in angle; in `R^3` the coordinate plane is
/// rotated by quasi-uniform rotations.
pub fn plane_samples(n: usize, d: usize, count: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if d == 0 || d >= n || n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let count = count.max(1);
    if n == 2 {
        return Ok((0..count)
            .map(|j| {
                let a = std::f64::consts::PI * j as f64 / count as f64;
                vec![vec![a.cos(), a.sin()]]
            })
            .collect());
    }
    let base: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut out = vec![base.clone()];
    for q in geom::super_fibonacci(count.saturating_sub(1)) {
        let m = geom::quat_to_matrix(q);
        out.push(base.iter().map(|b| geom::mat_vec(&m, b)).collect());
    }
    Ok(out)
}

/// Trusted scale window `[2·spacing, reach]`, with `reach/4` for truncated sets.
pub fn trusted_scales(mu: &DiscreteMeasure) -> (f64, f64) {
    let (h, reach) = mu.valid_scale_range();
    let hi = if mu.truncation_radius().is_some() { reach / 4.0 } else { reach };
    (2.0 * h, hi)
}

fn check_scale(mu: &DiscreteMeasure, r: f64) -> Result<()> {
    let (lo, hi) = trusted_scales(mu);
    if !(r >= lo && r <= hi) {
        return Err(Error::ScaleOutOfRange { scale: r, lo, hi });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_basis_completes() {
        let b = vec![vec![0.6, 0.8, 0.0]];
        let nb = normal_basis(&b, 3);
        assert_eq!(nb.len(), 2);
        for v in &nb {
            assert!(geom::dot(v, &b[0]).abs() < 1e-14);
            assert!((geom::norm(v) - 1.0).abs() < 1e-14);
        }
        assert!(geom::dot(&nb[0], &nb[1]).abs() < 1e-14);
    }

    #[test]
    fn plane_samples_are_orthonormal() {
        for (n, d) in [(2, 1), (3, 1), (3, 2)] {
            for p in plane_samples(n, d, 16).unwrap() {
                for (i, a) in p.iter().enumerate() {
                    assert!((geom::norm(a) - 1.0).abs() < 1e-12);
                    for b in &p[i + 1..] {
                        assert!(geom::dot(a, b).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
