//! Fields of the unit-density d-plane, integrated in the continuum.
//!
//! With `u = ρ sinh t` along the plane, `|x - y| = ρ cosh t` and
//! `R(ρ) = ρ^{-α} σ_{d-1} ∫_0^∞ K(ρ cosh t) cosh^{1-β} t sinh^{d-1} t dt`
//! for radial kernels, which also makes sense for real `d`.

use super::sum::{pack, summand, unpack, Acc, KernelRef, COMPONENTS};
use super::{assemble, FieldEval, RDerivs};
use crate::error::{Error, Result};
use crate::geom;
use crate::kernels::Kernel;
use crate::num::Dual2;
use crate::quad::{self, Tol};
use crate::special::sphere_area;

const ANGLES: usize = 64;

/// `g = ρ^α R`, `g1 = ρ g'` and `g2 = ρ² g''` of a radial kernel's plane field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneProfile {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
}

impl PlaneProfile {
    /// `R(ρ)` with its first two `ρ`-derivatives.
    pub fn to_r(&self, rho: f64, alpha: f64) -> Dual2 {
        let p = rho.powf(-alpha);
        let g = Dual2 {
            v: self.g,
            d1: self.g1 / rho,
            d2: self.g2 / (rho * rho),
        };
        let pw = Dual2 {
            v: p,
            d1: -alpha * p / rho,
            d2: alpha * (alpha + 1.0) * p / (rho * rho),
        };
        Dual2 {
            v: g.v * pw.v,
            d1: g.d1 * pw.v + g.v * pw.d1,
            d2: g.d2 * pw.v + 2.0 * g.d1 * pw.d1 + g.v * pw.d2,
        }
    }
}

fn t_breaks(alpha: f64, symmetric: bool) -> Vec<f64> {
    let tmax = (45.0 / alpha).clamp(8.0, 600.0).ceil();
    let steps = tmax as usize;
    let lo = if symmetric { -(steps as i64) } else { 0 };
    (lo..=steps as i64).map(|i| i as f64).collect()
}

pub fn radial_plane_profile(k: &Kernel, d: f64, alpha: f64, rho: f64) -> Result<PlaneProfile> {
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    if !(d > 0.0 && alpha > 0.0 && rho > 0.0) {
        return Err(Error::BadSpec(format!("plane profile needs d, α, ρ > 0 (d={d}, α={alpha}, ρ={rho})")));
    }
    let beta = d + alpha;
    let body = |t: f64, jac: f64, out: &mut [f64]| {
        let c = t.cosh();
        let w = jac * c.powf(1.0 - beta) * t.sinh().powf(d - 1.0);
        let tau = rho * c;
        let kd = k.profile_dual(tau);
        out[0] = w * kd.v;
        out[1] = w * tau * kd.d1;
        out[2] = w * tau * tau * kd.d2;
    };
    let breaks = t_breaks(alpha, false);
    let tol = Tol::rel(1e-12);
    let mut v = if d < 1.0 {
        // t = s^{1/d} removes the sinh^{d-1} endpoint singularity on [0, 1].
        let mut first = quad::integrate_vec(
            |s, out| {
                let t = s.powf(1.0 / d);
                body(t, t / (d * s), out);
            },
            3,
            0.0,
            1.0,
            tol,
            "plane profile",
        )?
        .value;
        let rest = quad::integrate_vec_pieces(|t, out| body(t, 1.0, out), 3, &breaks[1..], tol, "plane profile")?;
        for i in 0..3 {
            first[i] += rest[i];
        }
        first
    } else {
        quad::integrate_vec_pieces(|t, out| body(t, 1.0, out), 3, &breaks, tol, "plane profile")?
    };
    let s = sphere_area(d);
    v.iter_mut().for_each(|x| *x *= s);
    Ok(PlaneProfile {
        g: v[0],
        g1: v[1],
        g2: v[2],
    })
}

/// Component of `x` orthogonal to the span of an orthonormal `basis`.
pub fn split_normal(basis: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut nu = x.to_vec();
    for b in basis {
        nu = geom::axpy(-geom::dot(x, b), b, &nu);
    }
    nu
}

/// `R`, `∇R` and `∇²R` at `x` for the plane spanned by `basis` through the origin.
pub fn plane_field(k: &Kernel, alpha: f64, basis: &[Vec<f64>], x: &[f64]) -> Result<Acc> {
    let n = x.len();
    let d = basis.len();
    if n > 3 || n != k.ambient_dim() {
        return Err(Error::UnsupportedDimension(n));
    }
    let z = split_normal(basis, x);
    let rho = geom::norm(&z);
    if !(rho > 0.0) {
        return Err(Error::TooCloseToSupport { delta: rho, guard: 0.0 });
    }
    let beta = d as f64 + alpha;
    let kr = KernelRef::new(k);
    let tol = Tol::rel(1e-12);
    let at = |u: &[f64]| -> [f64; 3] {
        let mut p = [0.0; 3];
        for c in 0..n {
            p[c] = z[c] - u.iter().zip(basis).map(|(ui, b)| ui * b[c]).sum::<f64>();
        }
        p
    };
    let v = match d {
        1 => quad::integrate_vec_pieces(
            |t, out| {
                let a = summand(kr, beta, &at(&[rho * t.sinh()]), n);
                pack(&a, rho, out);
                let jac = rho * t.cosh();
                out.iter_mut().for_each(|o| *o *= jac);
            },
            COMPONENTS,
            &t_breaks(alpha, true),
            tol,
            "line field",
        )?,
        2 => {
            let dirs: Vec<(f64, f64)> = (0..ANGLES)
                .map(|j| (2.0 * std::f64::consts::PI * j as f64 / ANGLES as f64).sin_cos())
                .collect();
            let dpsi = 2.0 * std::f64::consts::PI / ANGLES as f64;
            quad::integrate_vec_pieces(
                |t, out| {
                    let s = rho * t.sinh();
                    let mut acc = Acc::default();
                    for (sn, cs) in &dirs {
                        acc.add(&summand(kr, beta, &at(&[s * cs, s * sn]), n));
                    }
                    pack(&acc, rho, out);
                    let jac = dpsi * rho * rho * t.sinh() * t.cosh();
                    out.iter_mut().for_each(|o| *o *= jac);
                },
                COMPONENTS,
                &t_breaks(alpha, false),
                tol,
                "plane field",
            )?
        }
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(unpack(&v, rho))
}

/// `R` along the normal ray through `x`, differentiated in the distance.
pub fn plane_ray(k: &Kernel, alpha: f64, basis: &[Vec<f64>], x: &[f64]) -> Result<Dual2> {
    let z = split_normal(basis, x);
    let rho = geom::norm(&z);
    if k.is_radial() {
        return Ok(radial_plane_profile(k, basis.len() as f64, alpha, rho)?.to_r(rho, alpha));
    }
    let a = plane_field(k, alpha, basis, x)?;
    let n = x.len();
    let u: Vec<f64> = z.iter().map(|c| c / rho).collect();
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for i in 0..n {
        d1 += a.g[i] * u[i];
        for j in 0..n {
            d2 += u[i] * a.h[i][j] * u[j];
        }
    }
    Ok(Dual2 { v: a.v, d1, d2 })
}

/// Full field evaluation at `x` for the plane through `origin` spanned by `basis`.
pub fn plane_eval(k: &Kernel, alpha: f64, origin: &[f64], basis: &[Vec<f64>], x: &[f64]) -> Result<FieldEval> {
    let n = x.len();
    let rel = geom::sub(x, origin);
    let z = split_normal(basis, &rel);
    let rho = geom::norm(&z);
    let rd = if k.is_radial() {
        let r = radial_plane_profile(k, basis.len() as f64, alpha, rho)?.to_r(rho, alpha);
        let u: Vec<f64> = z.iter().map(|c| c / rho).collect();
        // Radial in the normal space: R'' along u, R'/ρ across it.
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut p = if i == j { 1.0 } else { 0.0 };
                for b in basis {
                    p -= b[i] * b[j];
                }
                hess[i][j] = r.d2 * u[i] * u[j] + r.d1 / rho * (p - u[i] * u[j]);
            }
        }
        RDerivs {
            r: r.v,
            grad: u.iter().map(|c| r.d1 * c).collect(),
            hess,
            tail: 0.0,
        }
    } else {
        let a = plane_field(k, alpha, basis, &rel)?;
        RDerivs {
            r: a.v,
            grad: a.g[..n].to_vec(),
            hess: (0..n).map(|i| a.h[i][..n].to_vec()).collect(),
            tail: 0.0,
        }
    };
    Ok(assemble(x, rho, alpha, &rd))
}
