//! Contribution of the flat continuation beyond the truncation, integrated
//! with the actual kernel. Lines use `t = ±ρe^v`; planes use polar
//! coordinates about the projected query, `r = ρ_b(φ)e^v`.

use super::sum::{pack, summand, unpack, Acc, KernelRef, COMPONENTS};
use crate::error::{Error, Result};
use crate::geom;
use crate::measures::FlatTail;
use crate::quad::{self, Tol};

const ANGLE_NODES: usize = 24;

/// Plane coordinates `s` and normal part `ν` of `x - origin`.
fn split(tail: &FlatTail, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u = geom::sub(x, &tail.origin);
    let s: Vec<f64> = tail.basis.iter().map(|b| geom::dot(&u, b)).collect();
    let mut nu = u.clone();
    for (b, si) in tail.basis.iter().zip(&s) {
        nu = geom::axpy(-si, b, &nu);
    }
    (s, nu)
}

pub fn tail_sum(k: KernelRef, beta: f64, alpha: f64, tail: &FlatTail, x: &[f64]) -> Result<Acc> {
    let n = x.len();
    let (s, nu) = split(tail, x);
    let hw = tail.half_width;
    let vmax = 37.0 / alpha;
    let tol = Tol::rel(1e-12);
    let normal = geom::norm(&nu);
    let point = |plane: &[f64]| -> [f64; 3] {
        let mut z = [0.0; 3];
        for c in 0..n {
            let mut v = nu[c];
            for (b, (si, ti)) in tail.basis.iter().zip(s.iter().zip(plane)) {
                v += (si - ti) * b[c];
            }
            z[c] = v;
        }
        z
    };
    let mut total = Acc::default();
    match tail.basis.len() {
        1 => {
            let gap = (hw - s[0].abs()).max(0.0);
            let l = (gap * gap + normal * normal).sqrt().max(1e-300);
            for sign in [1.0, -1.0] {
                let mut breaks = vec![0.0];
                let over = sign * s[0];
                if over > hw {
                    breaks.push((over / hw).ln().min(vmax));
                }
                breaks.push(vmax);
                for w in breaks.windows(2) {
                    let r = quad::integrate_vec(
                        |v, out| {
                            let t = sign * hw * v.exp();
                            let a = summand(k, beta, &point(&[t]), n);
                            pack(&a, l, out);
                            let jac = hw * v.exp();
                            out.iter_mut().for_each(|o| *o *= jac);
                        },
                        COMPONENTS,
                        w[0],
                        w[1],
                        tol,
                        "line tail",
                    )?;
                    total.add(&unpack(&r.value, l));
                }
            }
        }
        2 => {
            if s[0].abs() >= hw || s[1].abs() >= hw {
                return Err(Error::TailUnavailable);
            }
            let gap = (hw - s[0].abs()).min(hw - s[1].abs());
            let l = (gap * gap + normal * normal).sqrt();
            let corners = [(hw, hw), (-hw, hw), (-hw, -hw), (hw, -hw)];
            let mut angles: Vec<f64> = corners.iter().map(|(a, b)| (b - s[1]).atan2(a - s[0])).collect();
            // Corner angles are increasing modulo 2π; unwrap from the first.
            for i in 1..4 {
                while angles[i] <= angles[i - 1] {
                    angles[i] += 2.0 * std::f64::consts::PI;
                }
            }
            angles.push(angles[0] + 2.0 * std::f64::consts::PI);
            let (gx, gw) = quad::gauss_legendre(ANGLE_NODES);
            for piece in angles.windows(2) {
                let half = 0.5 * (piece[1] - piece[0]);
                let mid = 0.5 * (piece[1] + piece[0]);
                // Sub-panels keep the angular integrand well resolved near corners.
                for sub in 0..2 {
                    let c = mid + half * (sub as f64 - 0.5);
                    let h = 0.5 * half;
                    for (xi, wi) in gx.iter().zip(&gw) {
                        let phi = c + h * xi;
                        let (sn, cs) = phi.sin_cos();
                        let rb = boundary_distance(&s, hw, cs, sn);
                        let r = quad::integrate_vec(
                            |v, out| {
                                let rad = rb * v.exp();
                                let a = summand(k, beta, &point(&[s[0] + rad * cs, s[1] + rad * sn]), n);
                                pack(&a, l, out);
                                let jac = rad * rad;
                                out.iter_mut().for_each(|o| *o *= jac);
                            },
                            COMPONENTS,
                            0.0,
                            vmax,
                            tol,
                            "plane tail",
                        )?;
                        total.add_scaled(h * wi, &unpack(&r.value, l));
                    }
                }
            }
        }
        _ => return Err(Error::TailUnavailable),
    }
    let mut out = Acc::default();
    out.add_scaled(tail.density, &total);
    Ok(out)
}

/// Distance from `s` (inside the square `|·|∞ < hw`) to its boundary along `(cs, sn)`.
fn boundary_distance(s: &[f64], hw: f64, cs: f64, sn: f64) -> f64 {
    let mut t = f64::INFINITY;
    if cs > 0.0 {
        t = t.min((hw - s[0]) / cs);
    } else if cs < 0.0 {
        t = t.min((-hw - s[0]) / cs);
    }
    if sn > 0.0 {
        t = t.min((hw - s[1]) / sn);
    } else if sn < 0.0 {
        t = t.min((-hw - s[1]) / sn);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::flat_constant;

    #[test]
    fn line_tail_matches_arctangent() {
        let tail = FlatTail {
            origin: vec![0.0, 0.0],
            basis: vec![vec![1.0, 0.0]],
            half_width: 1000.0,
            density: 1.0,
            analytic: true,
        };
        let a = tail_sum(KernelRef::Const(1.0), 2.0, 1.0, &tail, &[0.0, 1.0]).unwrap();
        let expect = 2.0 * 1e-3f64.atan();
        assert!((a.v - expect).abs() < 1e-12 * expect, "{} {}", a.v, expect);
        assert!(a.g[0].abs() < 1e-18);
    }

    #[test]
    fn plane_tail_plus_square_is_full_plane() {
        let hw = 3.0;
        let tail = FlatTail {
            origin: vec![0.0; 3],
            basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            half_width: hw,
            density: 1.0,
            analytic: true,
        };
        let x = [0.4, -0.2, 0.7];
        let alpha = 1.0;
        let beta = 3.0;
        let t = tail_sum(KernelRef::Const(1.0), beta, alpha, &tail, &x).unwrap();
        let (gx, gw) = quad::composite_gl(-hw, hw, 60, 20);
        let mut inner = 0.0;
        for (a, wa) in gx.iter().zip(&gw) {
            for (b, wb) in gx.iter().zip(&gw) {
                let q = (x[0] - a).powi(2) + (x[1] - b).powi(2) + x[2] * x[2];
                inner += wa * wb * q.powf(-0.5 * beta);
            }
        }
        let full = flat_constant(2.0, alpha) * x[2].powf(-alpha);
        assert!((t.v + inner - full).abs() < 1e-10 * full, "{} {}", t.v + inner, full);
    }
}
