//! Distance-exactness and orthogonality of kernels against planes: direct
//! plane residuals, the radial orthogonality integral, and the half-arc
//! transform with its rotation-invariance test.

use crate::diagnostics::normal_basis;
use crate::engine::plane_field;
use crate::error::{Error, Result};
use crate::geom::{self, Mat3};
use crate::kernels::Kernel;
use crate::par;
use crate::quad::{self, Tol};
use crate::special::{flat_constant, sphere_area};

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneExactness {
    pub basis: Vec<Vec<f64>>,
    /// Unit normals at which `R` was sampled (`δ_E = 1`).
    pub normals: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Mean of `D/δ`; NaN when some sampled `R ≤ 0`.
    pub c_e: f64,
    pub residual_exact: f64,
    pub residual_orth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactnessReport {
    pub planes: Vec<PlaneExactness>,
    pub residual_exact: f64,
    pub residual_orth: f64,
    pub plane_dependence: f64,
    /// Constant `c̃` whose plane field best matches `K`'s on the samples.
    pub fitted_constant: f64,
    /// `sup |R_{K - c̃}|`: the orthogonality residual of `K - c̃`.
    pub residual_shifted: f64,
}

fn level_set_normals(basis: &[Vec<f64>], n: usize, count: usize) -> Vec<Vec<f64>> {
    let nb = normal_basis(basis, n);
    match nb.len() {
        1 => vec![nb[0].clone(), geom::scaled(&nb[0], -1.0)],
        _ => (0..count.max(2))
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * j as f64 / count.max(2) as f64;
                geom::axpy(a.sin(), &nb[1], &geom::scaled(&nb[0], a.cos()))
            })
            .collect(),
    }
}

/// Samples `R_{K,E}` on `δ_E = 1` for the linear plane spanned by `basis`.
/// In codimension one the level set is two points; otherwise `sample_count`
/// directions around the normal circle.
pub fn exactness_residual(k: &Kernel, basis: &[Vec<f64>], alpha: f64, sample_count: usize) -> Result<PlaneExactness> {
    let n = k.ambient_dim();
    let normals = level_set_normals(basis, n, sample_count);
    let values = par::map(&normals, |x| plane_field(k, alpha, basis, x).map(|a| a.v))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let residual_orth = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (c_e, residual_exact) = if values.iter().all(|v| *v > 0.0) {
        let c = values.iter().map(|v| v.powf(-1.0 / alpha)).sum::<f64>() / values.len() as f64;
        let target = c.powf(-alpha);
        (c, values.iter().fold(0.0f64, |m, v| m.max((v - target).abs() / target)))
    } else {
        (f64::NAN, f64::INFINITY)
    };
    Ok(PlaneExactness {
        basis: basis.to_vec(),
        normals,
        values,
        c_e,
        residual_exact,
        residual_orth,
    })
}

pub fn exactness_report(k: &Kernel, planes: &[Vec<Vec<f64>>], alpha: f64, sample_count: usize) -> Result<ExactnessReport> {
    let mut out = Vec::with_capacity(planes.len());
    for b in planes {
        out.push(exactness_residual(k, b, alpha, sample_count)?);
    }
    let residual_exact = out.iter().map(|p| p.residual_exact).fold(0.0, f64::max);
    let residual_orth = out.iter().map(|p| p.residual_orth).fold(0.0, f64::max);
    let lo = out.iter().map(|p| p.c_e).fold(f64::INFINITY, f64::min);
    let hi = out.iter().map(|p| p.c_e).fold(f64::NEG_INFINITY, f64::max);
    let plane_dependence = if out.iter().any(|p| p.c_e.is_nan()) { f64::NAN } else { hi - lo };
    let all: Vec<f64> = out.iter().flat_map(|p| p.values.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let d = planes.first().map_or(1, |b| b.len()) as f64;
    let residual_shifted = all.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    Ok(ExactnessReport {
        planes: out,
        residual_exact,
        residual_orth,
        plane_dependence,
        fitted_constant: mean / flat_constant(d, alpha),
        residual_shifted,
    })
}

/// `∫_r^∞ K(t) t^{-(d+α-1)} (t² - r²)^{(d-2)/2} dt` for a radial kernel.
pub fn radial_orthogonality_integral(k: &Kernel, d: f64, alpha: f64, r: f64) -> Result<f64> {
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    if !(d > 0.0 && alpha > 0.0 && r > 0.0) {
        return Err(Error::BadSpec(format!("need d, α, r > 0 (d={d}, α={alpha}, r={r})")));
    }
    check_tail(k, r, alpha)?;
    let tmax = (45.0 / alpha).clamp(8.0, 600.0).ceil() as usize;
    let breaks: Vec<f64> = (0..=tmax).map(|i| i as f64).collect();
    let tol = Tol::rel(1e-12);
    if d < 2.0 {
        // t = r cosh u
        let v = quad::integrate_pieces(
            |u| {
                if u == 0.0 && d < 1.0 {
                    return 0.0;
                }
                k.profile_value(r * u.cosh()) * u.cosh().powf(1.0 - d - alpha) * u.sinh().powf(d - 1.0)
            },
            &breaks,
            tol,
            "radial orthogonality integral",
        )?;
        Ok(r.powf(-alpha) * v)
    } else {
        // t = r e^s
        let v = quad::integrate_pieces(
            |s| {
                let t = r * s.exp();
                k.profile_value(t) * t.powf(2.0 - d - alpha) * (t * t - r * r).powf(0.5 * (d - 2.0))
            },
            &breaks,
            tol,
            "radial orthogonality integral",
        )?;
        Ok(v)
    }
}

/// Rejects kernels for which `|K(t)| t^{-α}` does not decay over 2^{200}.
fn check_tail(k: &Kernel, r: f64, alpha: f64) -> Result<()> {
    let block = |j: i32| -> f64 {
        (0..8)
            .map(|i| {
                let t = r * 2f64.powf(j as f64 + i as f64 / 8.0);
                k.profile_value(t).abs() * t.powf(-alpha)
            })
            .fold(0.0, f64::max)
    };
    let head = (0..8).map(block).fold(0.0, f64::max);
    let tail = (192..200).map(block).fold(0.0, f64::max);
    if !tail.is_finite() || tail > 0.5 * head && tail > 0.0 {
        return Err(Error::DivergentTail);
    }
    Ok(())
}

/// Affine `d`-plane `offset + span(basis)` with `offset ⊥ basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePlane {
    pub offset: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl AffinePlane {
    pub fn new(offset: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let z = crate::engine::split_normal(&basis, &offset);
        if !(geom::norm(&z) > 0.0) {
            return Err(Error::BadSpec("plane passes through the origin".into()));
        }
        Ok(AffinePlane { offset: z, basis })
    }
    pub fn distance(&self) -> f64 {
        geom::norm(&self.offset)
    }
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

const PLANE_ANGLES: usize = 64;

/// `∫_E K(z)|z|^{-d-α} dH^d(z)` for a plane avoiding the origin, with
/// `z = ρν + ρ sinh u·e`.
pub fn plane_integral(k: &Kernel, alpha: f64, plane: &AffinePlane) -> Result<f64> {
    let rho = plane.distance();
    let nu = geom::scaled(&plane.offset, 1.0 / rho);
    let d = plane.dim();
    let tmax = (45.0 / alpha).clamp(8.0, 600.0).ceil() as i64;
    let tol = Tol::rel(1e-11);
    let v = match d {
        1 => {
            let e = &plane.basis[0];
            let breaks: Vec<f64> = (-tmax..=tmax).map(|i| i as f64).collect();
            quad::integrate_vec_pieces(
                |u, out| {
                    let z = geom::axpy(rho * u.sinh(), e, &geom::scaled(&nu, rho));
                    let w = u.cosh().powf(-alpha);
                    let kv = k.value(&z);
                    out[0] = kv * w;
                    out[1] = kv.abs() * w;
                },
                2,
                &breaks,
                tol,
                "plane integral",
            )?
        }
        2 => {
            let dirs: Vec<Vec<f64>> = (0..PLANE_ANGLES)
                .map(|j| {
                    let a = 2.0 * std::f64::consts::PI * j as f64 / PLANE_ANGLES as f64;
                    geom::axpy(a.sin(), &plane.basis[1], &geom::scaled(&plane.basis[0], a.cos()))
                })
                .collect();
            let dpsi = 2.0 * std::f64::consts::PI / PLANE_ANGLES as f64;
            let breaks: Vec<f64> = (0..=tmax).map(|i| i as f64).collect();
            quad::integrate_vec_pieces(
                |u, out| {
                    let w = dpsi * u.sinh() * u.cosh().powf(-1.0 - alpha);
                    out[0] = 0.0;
                    out[1] = 0.0;
                    for e in &dirs {
                        let kv = k.value(&geom::axpy(rho * u.sinh(), e, &geom::scaled(&nu, rho)));
                        out[0] += kv * w;
                        out[1] += kv.abs() * w;
                    }
                },
                2,
                &breaks,
                tol,
                "plane integral",
            )?
        }
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(rho.powf(-alpha) * v[0])
}

/// Plane integrals over `planes` relative to `scale·∫_E |z|^{-d-α}`, the
/// integral of the constant kernel `scale`.
pub fn orthogonality_residuals(k: &Kernel, alpha: f64, planes: &[AffinePlane], scale: f64) -> Result<Vec<f64>> {
    par::map(planes, |p| {
        let flat = flat_constant(p.dim() as f64, alpha) * p.distance().powf(-alpha);
        plane_integral(k, alpha, p).map(|v| v.abs() / (scale * flat))
    })
    .into_iter()
    .collect()
}

/// Quadrature of the half `d`-arc `H^d(E, x₀)`, `w = sin ψ·w₀ + cos ψ·e`
/// with `e` a unit vector of `E`, graded dyadically toward `ψ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfArc {
    pub basis: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub w0: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    /// `dH^d` weight of each node.
    pub measure: Vec<f64>,
    /// `(w·w₀)^{α-1}`.
    pub weights: Vec<f64>,
}

const ARC_LEVELS: i32 = 50;
const ARC_ORDER: usize = 12;
const ARC_ANGLES: usize = 96;

impl HalfArc {
    pub fn new(basis: &[Vec<f64>], x0: &[f64], alpha: f64) -> Result<Self> {
        let n = x0.len();
        let d = basis.len();
        if n > 3 || d == 0 || d >= n {
            return Err(Error::UnsupportedDimension(n));
        }
        let z = crate::engine::split_normal(basis, x0);
        let delta = geom::norm(&z);
        if (delta - 1.0).abs() > 1e-9 {
            return Err(Error::BadSpec(format!("half-arc base point has δ_E = {delta}, expected 1")));
        }
        let w0 = geom::scaled(&z, -1.0 / delta);
        let (es, de): (Vec<Vec<f64>>, f64) = match d {
            1 => (vec![basis[0].clone(), geom::scaled(&basis[0], -1.0)], 1.0),
            _ => (
                (0..ARC_ANGLES)
                    .map(|j| {
                        let a = 2.0 * std::f64::consts::PI * j as f64 / ARC_ANGLES as f64;
                        geom::axpy(a.sin(), &basis[1], &geom::scaled(&basis[0], a.cos()))
                    })
                    .collect(),
                2.0 * std::f64::consts::PI / ARC_ANGLES as f64,
            ),
        };
        let (gx, gw) = quad::gauss_legendre(ARC_ORDER);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut psi = Vec::new();
        let mut dpsi = Vec::new();
        for lev in 0..ARC_LEVELS {
            let (hi, lo) = (half_pi * 2f64.powi(-lev), half_pi * 2f64.powi(-lev - 1));
            for (x, w) in gx.iter().zip(&gw) {
                psi.push(lo + 0.5 * (hi - lo) * (x + 1.0));
                dpsi.push(0.5 * (hi - lo) * w);
            }
        }
        let mut nodes = Vec::with_capacity(psi.len() * es.len());
        let mut measure = Vec::with_capacity(nodes.capacity());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (p, dp) in psi.iter().zip(&dpsi) {
            let (s, c) = p.sin_cos();
            for e in &es {
                nodes.push(geom::axpy(s, &w0, &geom::scaled(e, c)));
                measure.push(dp * c.powi(d as i32 - 1) * de);
                weights.push(s.powf(alpha - 1.0));
            }
        }
        Ok(HalfArc {
            basis: basis.to_vec(),
            x0: x0.to_vec(),
            w0,
            nodes,
            measure,
            weights,
        })
    }

    /// `∫_H K(-A w / (w·w₀)) (w·w₀)^{α-1} dH^d(w)`; for 0-homogeneous `K`
    /// the dilation is invisible.
    pub fn integrate(&self, k: &Kernel, a: Option<&Mat3>) -> f64 {
        let terms = par::map_range(self.nodes.len(), |i| {
            let w = &self.nodes[i];
            let s = geom::dot(w, &self.w0);
            let aw = match a {
                Some(m) => geom::mat_vec(m, w),
                None => w.clone(),
            };
            k.value(&geom::scaled(&aw, -1.0 / s)) * self.weights[i] * self.measure[i]
        });
        terms.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfArcValue {
    pub transform: f64,
    /// `R_{K,E}(x₀)` by direct plane quadrature.
    pub direct: f64,
}

impl HalfArcValue {
    pub fn rel_diff(&self) -> f64 {
        (self.transform - self.direct).abs() / self.direct.abs().max(1e-300)
    }
}

pub fn halfarc_transform(k: &Kernel, basis: &[Vec<f64>], x0: &[f64], alpha: f64) -> Result<HalfArcValue> {
    let arc = HalfArc::new(basis, x0, alpha)?;
    Ok(HalfArcValue {
        transform: arc.integrate(k, None),
        direct: plane_field(k, alpha, basis, x0)?.v,
    })
}

/// Orthogonal maps fixing the plane: rotations (or reflections) inside `E`
/// composed with rotations (or reflections) of its normal space.
pub fn plane_fixing_rotations(basis: &[Vec<f64>], n: usize, count: usize) -> Vec<Mat3> {
    let nb = normal_basis(basis, n);
    let block = |frame: &[Vec<f64>], j: usize| -> Vec<(Vec<f64>, Vec<f64>)> {
        // images of each frame vector under the j-th element of the block group
        match frame.len() {
            1 => {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                vec![(frame[0].clone(), geom::scaled(&frame[0], s))]
            }
            _ => {
                let a = 2.0 * std::f64::consts::PI * j as f64 / count.max(1) as f64 + 0.3 * j as f64;
                let (s, c) = a.sin_cos();
                vec![
                    (frame[0].clone(), geom::axpy(s, &frame[1], &geom::scaled(&frame[0], c))),
                    (frame[1].clone(), geom::axpy(c, &frame[1], &geom::scaled(&frame[0], -s))),
                ]
            }
        }
    };
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let mut m = [[0.0; 3]; 3];
        let pairs = block(basis, j).into_iter().chain(block(&nb, j / 2 + j % 2 * 7));
        for (from, to) in pairs {
            for r in 0..n {
                for c in 0..n {
                    m[r][c] += to[r] * from[c];
                }
            }
        }
        out.push(m);
    }
    out
}

/// `max_A |∫_H K(-Aw)(w·w₀)^{α-1} - ∫_H K(-w)(w·w₀)^{α-1}|` over the given maps.
pub fn rotation_invariance_check(k: &Kernel, arc: &HalfArc, rotations: &[Mat3]) -> f64 {
    let base = arc.integrate(k, None);
    rotations
        .iter()
        .map(|a| (arc.integrate(k, Some(a)) - base).abs())
        .fold(0.0, f64::max)
}

/// `σ_{d-1} ∫ K(ρ cosh t) cosh^{1-β} t sinh^{d-1} t dt`: the radial integral
/// times `σ_{d-1}`, which is `R·δ^α` of the plane.
pub fn radial_plane_value(k: &Kernel, d: f64, alpha: f64, r: f64) -> Result<f64> {
    Ok(sphere_area(d) * radial_orthogonality_integral(k, d, alpha, r)? * r.powf(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::plane_samples;
    use crate::kernels::SphereFn;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_exact() {
        let k = Kernel::constant(2, 1.0);
        let r = exactness_report(&k, &plane_samples(2, 1, 6).unwrap(), 1.0, 4).unwrap();
        assert!(r.residual_exact <= 1e-10);
        assert!(r.plane_dependence <= 1e-10);
        assert!((r.planes[0].c_e - 1.0 / PI).abs() < 1e-10);
        assert!(r.residual_shifted <= 1e-10);
        assert!((r.fitted_constant - 1.0).abs() < 1e-10);
    }

    #[test]
    fn odd_kernel_is_not_exact() {
        let k = Kernel::zero_homogeneous(
            2,
            SphereFn::Fourier {
                cos: vec![1.0],
                sin: vec![0.0, 0.5],
            },
        );
        let r = exactness_report(&k, &plane_samples(2, 1, 4).unwrap(), 1.0, 2).unwrap();
        assert!(r.residual_exact > 1e-2);
    }

    #[test]
    fn closed_forms_of_radial_integral() {
        let one = Kernel::constant(2, 1.0);
        assert!((radial_orthogonality_integral(&one, 2.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let c = Kernel::constant(2, 3.0);
        for r in [0.5, 1.0, 2.0] {
            for alpha in [0.5, 1.0, 2.5] {
                let v = radial_orthogonality_integral(&c, 2.0, alpha, r).unwrap();
                let want = 3.0 * r.powf(-alpha) / alpha;
                assert!((v - want).abs() < 1e-10 * want, "{r} {alpha} {v} {want}");
            }
        }
        let zero = Kernel::constant(2, 0.0);
        assert_eq!(radial_orthogonality_integral(&zero, 1.5, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn radial_integral_matches_flat_constant() {
        let one = Kernel::constant(3, 1.0);
        for (d, alpha) in [(1.0, 1.0), (1.5, 0.7), (2.0, 2.0), (2.5, 1.0)] {
            let v = radial_plane_value(&one, d, alpha, 1.3).unwrap();
            assert!((v - flat_constant(d, alpha)).abs() < 1e-10, "{d} {alpha}");
        }
    }

    #[test]
    fn growing_kernel_is_divergent() {
        let k = Kernel::radial_expr(2, "t^2").unwrap();
        assert_eq!(radial_orthogonality_integral(&k, 2.0, 1.0, 1.0), Err(Error::DivergentTail));
    }

    #[test]
    fn half_arc_of_constant_is_pi() {
        let k = Kernel::constant(2, 1.0);
        let v = halfarc_transform(&k, &[vec![1.0, 0.0]], &[0.0, 1.0], 1.0).unwrap();
        assert!((v.transform - PI).abs() < 1e-10);
        assert!((v.direct - PI).abs() < 1e-10);
        let arc = HalfArc::new(&[vec![1.0, 0.0]], &[0.0, 1.0], 1.0).unwrap();
        assert!(arc.weights.iter().all(|w| *w == 1.0));
        assert!(arc.nodes.iter().all(|w| (geom::norm(w) - 1.0).abs() < 1e-14 && geom::dot(w, &arc.w0) > 0.0));
    }

    #[test]
    fn half_arc_matches_direct_in_three_dimensions() {
        let k = Kernel::zero_homogeneous(
            3,
            SphereFn::Poly {
                terms: vec![(1.0, [0, 0, 0]), (0.3, [1, 0, 1]), (0.2, [0, 2, 0])],
            },
        );
        for (basis, x0) in [
            (vec![vec![1.0, 0.0, 0.0]], vec![0.0, 0.6, 0.8]),
            (vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![0.2, 0.0, -1.0]),
        ] {
            let v = halfarc_transform(&k, &basis, &x0, 1.5).unwrap();
            assert!(v.rel_diff() < 1e-6, "{v:?}");
        }
    }

    #[test]
    fn plane_integral_of_constant() {
        let k = Kernel::constant(2, 2.0);
        let p = AffinePlane::new(vec![0.0, -0.5], vec![vec![1.0, 0.0]]).unwrap();
        assert!((plane_integral(&k, 1.0, &p).unwrap() - 4.0 * PI).abs() < 1e-9);
        let k3 = Kernel::constant(3, 1.0);
        let p3 = AffinePlane::new(vec![0.0, 0.0, 2.0], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let want = flat_constant(2.0, 0.5) * 2f64.powf(-0.5);
        assert!((plane_integral(&k3, 0.5, &p3).unwrap() - want).abs() < 1e-9 * want);
        let even = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![0.0, 0.0, 1.0]));
        let r = orthogonality_residuals(&even, 1.0, &[p], 1.0).unwrap();
        assert!(r[0] < 1e-10, "{r:?}");
    }

    #[test]
    fn radial_kernels_are_rotation_invariant() {
        let k = Kernel::radial_expr(3, "1 + exp(-log(t)^2)").unwrap();
        let basis = vec![vec![0.0, 0.0, 1.0]];
        let arc = HalfArc::new(&basis, &[1.0, 0.0, 0.5], 1.0).unwrap();
        let rots = plane_fixing_rotations(&basis, 3, 6);
        for m in &rots {
            let e = geom::mat_vec(m, &basis[0]);
            assert!((geom::dot(&e, &basis[0]).abs() - 1.0).abs() < 1e-14);
        }
        assert!(rotation_invariance_check(&k, &arc, &rots) < 1e-10);
    }
}
