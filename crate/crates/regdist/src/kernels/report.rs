//! Sampled kernel diagnostics: distance-standard constants, the log-scale
//! Dini functional, and limits of `K(λ·)` as λ → 0 or ∞.

use super::Kernel;
use crate::error::{Error, Result};
use crate::geom;
use crate::num::Num;
use crate::quad::{self, Tol};

#[derive(Clone, Debug, PartialEq)]
pub struct ReportGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    pub directions: usize,
}

impl ReportGrid {
    /// Radii 1e-6..1e6 with 8 per decade; 64 directions (n = 2) or 256 (n = 3).
    pub fn standard(n: usize) -> Self {
        ReportGrid {
            r_min: 1e-6,
            r_max: 1e6,
            per_decade: 8,
            directions: if n == 2 { 64 } else { 256 },
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        let decades = (self.r_max / self.r_min).log10();
        let count = (decades * self.per_decade as f64).round() as usize + 1;
        (0..count)
            .map(|i| self.r_min * (self.r_max / self.r_min).powf(i as f64 / (count - 1) as f64))
            .collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "radii {:e}..{:e} log-spaced {}/decade x {} directions",
            self.r_min, self.r_max, self.per_decade, self.directions
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceStandardReport {
    pub sup_k: f64,
    pub sup_grad_k_x: f64,
    pub sup_hess_k_x2: f64,
    pub sup_inv_k: f64,
    /// `None` when the kernel has fewer than three derivatives.
    pub sup_d3k_x3: Option<f64>,
    pub grid: String,
    pub verdict: bool,
}

impl DistanceStandardReport {
    /// Rows `quantity,value,grid` in report order.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut r = vec![
            ("sup_K".to_string(), self.sup_k),
            ("sup_gradK_x".to_string(), self.sup_grad_k_x),
            ("sup_hessK_x2".to_string(), self.sup_hess_k_x2),
            ("sup_inv_K".to_string(), self.sup_inv_k),
        ];
        if let Some(v) = self.sup_d3k_x3 {
            r.push(("sup_d3K_x3".to_string(), v));
        }
        r
    }
}

/// Sampled `sup |∇^m K(x)||x|^m` (Frobenius norms) and `sup 1/K`.
pub fn distance_standard_report(k: &Kernel, grid: &ReportGrid) -> Result<DistanceStandardReport> {
    let n = k.ambient_dim();
    if n > crate::num::MAX_VARS {
        return Err(Error::UnsupportedDimension(n));
    }
    let order = k.derivative_order().min(3);
    let dirs = geom::sphere_directions(n, grid.directions);
    let radii = grid.radii();
    let rows = crate::par::map(&radii, |&r| {
        let mut acc = [0.0f64; 5];
        for d in &dirs {
            let x = geom::scaled(d, r);
            let j = k.jet3(&x, order);
            let v = j.val();
            if !(v > 0.0) {
                return Err(Error::NonpositiveKernel { point: x, value: v });
            }
            acc[0] = acc[0].max(v.abs());
            acc[1] = acc[1].max(geom::norm(&j.gradient()) * r);
            if order >= 2 {
                acc[2] = acc[2].max(geom::frobenius(&j.hessian()) * r * r);
            }
            acc[3] = acc[3].max(1.0 / v);
            if order >= 3 {
                let t: f64 = j.third().iter().flatten().flatten().map(|x| x * x).sum();
                acc[4] = acc[4].max(t.sqrt() * r * r * r);
            }
        }
        Ok(acc)
    });
    let mut sup = [0.0f64; 5];
    for row in rows {
        let row = row?;
        for i in 0..5 {
            sup[i] = sup[i].max(row[i]);
        }
    }
    let verdict = sup.iter().all(|v| v.is_finite()) && order >= 2;
    Ok(DistanceStandardReport {
        sup_k: sup[0],
        sup_grad_k_x: sup[1],
        sup_hess_k_x2: sup[2],
        sup_inv_k: sup[3],
        sup_d3k_x3: if order >= 3 { Some(sup[4]) } else { None },
        grid: grid.describe(),
        verdict,
    })
}

fn profile_derivative(k: &Kernel, t: f64, m: usize) -> f64 {
    let d = k.profile_dual(t);
    match m {
        0 => d.v,
        1 => t * d.d1,
        _ => t * t * d.d2,
    }
}

/// `∫_{t_lo}^1 (t^m ∂_t^m(K−K₀))² dt/t + ∫_1^{t_hi} (t^m ∂_t^m(K−K_∞))² dt/t`,
/// integrated in `u = log t` with unit-length panels.
pub fn dini_functional(k: &Kernel, k0: f64, k_inf: f64, m: usize, range: (f64, f64)) -> Result<f64> {
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    if m > 2 {
        return Err(Error::OrderUnavailable {
            requested: m,
            available: 2,
        });
    }
    let (t_lo, t_hi) = range;
    if !(t_lo > 0.0 && t_lo < 1.0 && t_hi > 1.0) {
        return Err(Error::BadSpec("Dini range must satisfy 0 < t_lo < 1 < t_hi".into()));
    }
    let piece = |c: f64, u0: f64, u1: f64| -> Result<f64> {
        let steps = (u1 - u0).abs().ceil().max(1.0) as usize;
        let mut breaks: Vec<f64> = (0..=steps).map(|i| u0 + (u1 - u0) * i as f64 / steps as f64).collect();
        breaks.dedup();
        let f = |u: f64| {
            let t = u.exp();
            let shift = if m == 0 { c } else { 0.0 };
            let v = profile_derivative(k, t, m) - shift;
            v * v
        };
        quad::integrate_pieces(f, &breaks, Tol::rel(1e-11).with_abs(1e-300), "dini functional")
    };
    Ok(piece(k0, t_lo.ln(), 0.0)? + piece(k_inf, 0.0, t_hi.ln())?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiniVerdict {
    pub m: usize,
    pub value: f64,
    /// Value over the range doubled in log scale, `(t_lo², t_hi²)`.
    pub value_doubled: f64,
    pub convergent: bool,
}

/// Compares the functional on `(t_lo, t_hi)` with `(t_lo², t_hi²)`: a
/// convergent integral barely changes, a divergent one scales with the range.
pub fn dini_verdict(k: &Kernel, k0: f64, k_inf: f64, m: usize, range: (f64, f64)) -> Result<DiniVerdict> {
    let value = dini_functional(k, k0, k_inf, m, range)?;
    let value_doubled = dini_functional(k, k0, k_inf, m, (range.0 * range.0, range.1 * range.1))?;
    let convergent = value_doubled <= 1.25 * value + 1e-12;
    Ok(DiniVerdict {
        m,
        value,
        value_doubled,
        convergent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    Zero,
    Infinity,
}

/// `λ_j = 2^{∓j}`, `j = 1..=count`.
pub fn dyadic_lambdas(end: End, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|j| match end {
            End::Zero => 2f64.powi(-(j as i32)),
            End::Infinity => 2f64.powi(j as i32),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitReport {
    pub lambdas: Vec<f64>,
    /// Annulus sample points `1 ≤ |x| ≤ 2`.
    pub points: Vec<Vec<f64>>,
    /// `K(λ_j x)` at the sample points, one row per λ.
    pub profiles: Vec<Vec<f64>>,
    /// Sup-norm differences between consecutive rows.
    pub diffs: Vec<f64>,
    pub cauchy: bool,
    /// Mean of the last row, for radial kernels.
    pub constant_estimate: Option<f64>,
}

impl LimitReport {
    pub fn limit(&self) -> &[f64] {
        self.profiles.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

pub fn annulus_points(n: usize) -> Vec<Vec<f64>> {
    let dirs = geom::sphere_directions(n, if n == 2 { 32 } else { 64 });
    let mut pts = Vec::new();
    for i in 0..8 {
        let r = 2f64.powf(i as f64 / 7.0);
        for d in &dirs {
            pts.push(geom::scaled(d, r));
        }
    }
    pts
}

/// Evaluates `K(λ_j ·)` on the annulus and reports sup-norm Cauchy differences.
/// The sequence counts as Cauchy when the differences reach numerical zero or
/// decrease monotonically to at most half of the first one.
pub fn limit_profile(k: &Kernel, lambdas: &[f64]) -> LimitReport {
    let points = annulus_points(k.ambient_dim());
    let profiles: Vec<Vec<f64>> = crate::par::map(lambdas, |&l| {
        points.iter().map(|p| k.value(&geom::scaled(p, l))).collect()
    });
    let diffs: Vec<f64> = profiles
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        .collect();
    let scale = profiles.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let cauchy = match (diffs.first(), diffs.last()) {
        (Some(&first), Some(&last)) => {
            last <= 1e-10 * scale
                || (diffs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14 * scale) && last <= 0.5 * first)
        }
        _ => true,
    };
    let constant_estimate = if k.is_radial() {
        profiles.last().map(|row| row.iter().sum::<f64>() / row.len() as f64)
    } else {
        None
    };
    LimitReport {
        lambdas: lambdas.to_vec(),
        points,
        profiles,
        diffs,
        cauchy,
        constant_estimate,
    }
}

/// Sup-norm gap between the final profiles of two limit reports.
pub fn profile_gap(a: &LimitReport, b: &LimitReport) -> f64 {
    a.limit().iter().zip(b.limit()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SphereFn;

    #[test]
    fn constant_report_is_trivial() {
        let r = distance_standard_report(&Kernel::constant(2, 1.0), &ReportGrid::standard(2)).unwrap();
        assert_eq!(r.sup_k, 1.0);
        assert_eq!(r.sup_inv_k, 1.0);
        assert_eq!(r.sup_grad_k_x, 0.0);
        assert_eq!(r.sup_hess_k_x2, 0.0);
        assert!(r.verdict);
    }

    #[test]
    fn oscillating_radial_report() {
        let k = Kernel::radial_expr(2, "1 + 0.5*sin(log(t))").unwrap();
        let g = ReportGrid {
            per_decade: 64,
            directions: 8,
            ..ReportGrid::standard(2)
        };
        let r = distance_standard_report(&k, &g).unwrap();
        assert!((r.sup_k - 1.5).abs() < 1e-3);
        assert!((r.sup_inv_k - 2.0).abs() < 1e-2);
        assert!((r.sup_grad_k_x - 0.5).abs() < 1e-3);
        assert!(r.sup_k * r.sup_inv_k >= 1.0);
    }

    #[test]
    fn sign_changing_kernel_rejected() {
        let k = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![0.0, 0.0, 1.0]));
        let r = distance_standard_report(&k, &ReportGrid::standard(2));
        assert!(matches!(r, Err(Error::NonpositiveKernel { .. })));
        let ok = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.0, 0.9]));
        assert!(distance_standard_report(&ok, &ReportGrid::standard(2)).unwrap().verdict);
    }

    #[test]
    fn dini_of_constant_is_zero() {
        let k = Kernel::constant(2, 2.0);
        for m in 0..3 {
            assert_eq!(dini_functional(&k, 2.0, 2.0, m, (1e-3, 1e3)).unwrap(), 0.0);
        }
        let z = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.3]));
        assert_eq!(dini_functional(&z, 1.0, 1.0, 0, (0.1, 10.0)), Err(Error::NotRadial));
    }

    #[test]
    fn limit_of_log_gaussian() {
        let k = Kernel::radial_expr(2, "1 + exp(-log(t)^2)").unwrap();
        let rep = limit_profile(&k, &dyadic_lambdas(End::Infinity, 12));
        assert!(rep.cauchy);
        assert!((rep.constant_estimate.unwrap() - 1.0).abs() < 1e-10);
        let osc = Kernel::radial_expr(2, "1 + 0.5*sin(log(t))").unwrap();
        assert!(!limit_profile(&osc, &dyadic_lambdas(End::Infinity, 12)).cauchy);
    }
}
