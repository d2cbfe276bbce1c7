//! The γ functional (distance from the flat-plane field to an exact power
//! law on dyadic shells), the kernel-side θ functional, explicit upper
//! bounds for both, and the Poincaré probe on `|∇D|`.
//!
//! Shells are integrated in `u = log ρ`, where the weight `δ^{d-n} dH^{n-d}`
//! becomes `σ_{k-1} du` for codimension `k`.

use super::normal_basis;
use crate::engine::{plane_field, radial_plane_profile};
use crate::error::{Error, Result};
use crate::geom;
use crate::kernels::{dini_functional, eval_kernel, Kernel};
use crate::par;
use crate::quad::{self, Tol};
use crate::special::{flat_constant, sphere_area};
use std::f64::consts::PI;

const NORMAL_ANGLES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneGamma {
    pub basis: Vec<Vec<f64>>,
    pub value_sq: f64,
    /// Minimizing constant in `R ≈ c·δ^{-α}`.
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaEstimate {
    pub r: f64,
    pub lambda: f64,
    pub planes: Vec<PlaneGamma>,
    /// Sup over the sampled planes; a lower bound of the sup over all planes.
    pub value_sq: f64,
}

impl GammaEstimate {
    pub fn value(&self) -> f64 {
        self.value_sq.sqrt()
    }
}

/// Log-radius quadrature on `[r/λ, r]`, two Gauss panels per octave.
fn log_nodes(r: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let panels = (2.0 * lambda.log2()).ceil().max(1.0) as usize;
    quad::composite_gl((r / lambda).ln(), r.ln(), panels, 8)
}

/// Unit directions of the normal space with quadrature weights summing to `σ_{k-1}`.
fn normal_directions(basis: &[Vec<f64>], n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let nb = normal_basis(basis, n);
    match nb.len() {
        1 => Ok(vec![(nb[0].clone(), 1.0), (geom::scaled(&nb[0], -1.0), 1.0)]),
        2 => Ok((0..NORMAL_ANGLES)
            .map(|j| {
                let (s, c) = (2.0 * PI * j as f64 / NORMAL_ANGLES as f64).sin_cos();
                let v = geom::axpy(s, &nb[1], &geom::scaled(&nb[0], c));
                (v, 2.0 * PI / NORMAL_ANGLES as f64)
            })
            .collect()),
        k => Err(Error::UnsupportedDimension(k)),
    }
}

/// Terms `(T, S, weight)`: the residual is `Σ weight·|T - cS|²`.
type Terms = Vec<(f64, f64, f64)>;

fn minimize(terms: &Terms) -> (f64, f64) {
    let a: f64 = terms.iter().map(|(_, s, w)| w * s * s).sum();
    let b: f64 = terms.iter().map(|(t, s, w)| w * t * s).sum();
    let c = if a > 0.0 { b / a } else { 0.0 };
    let j: f64 = terms.iter().map(|(t, s, w)| w * (t - c * s).powi(2)).sum();
    (j.max(0.0), c)
}

fn radial_terms(k: &Kernel, d: usize, codim: usize, alpha: f64, r: f64, lambda: f64) -> Result<Terms> {
    let (us, ws) = log_nodes(r, lambda);
    let sigma = sphere_area(codim as f64);
    let profiles = par::map(&us, |u| radial_plane_profile(k, d as f64, alpha, u.exp()));
    let mut terms = Vec::new();
    for (p, w) in profiles.into_iter().zip(&ws) {
        let p = p?;
        let w = w * sigma;
        let a1 = p.g1 - alpha * p.g;
        let a2 = p.g2 - 2.0 * alpha * p.g1 + alpha * (alpha + 1.0) * p.g;
        terms.push((p.g, 1.0, w));
        // The gradient is radial; the Hessian has the radial eigenvalue and
        // k-1 tangential copies of h'/ρ.
        terms.push((a1, -alpha, w * codim as f64));
        terms.push((a2, alpha * (alpha + 1.0), w));
    }
    Ok(terms)
}

fn general_terms(k: &Kernel, basis: &[Vec<f64>], alpha: f64, r: f64, lambda: f64) -> Result<Terms> {
    let n = k.ambient_dim();
    let (us, ws) = log_nodes(r, lambda);
    let dirs = normal_directions(basis, n)?;
    let nb = normal_basis(basis, n);
    let mut jobs = Vec::new();
    for (u, w) in us.iter().zip(&ws) {
        for (z, dw) in &dirs {
            jobs.push((u.exp(), geom::scaled(z, u.exp()), z.clone(), w * dw));
        }
    }
    let fields = par::map(&jobs, |(_, x, _, _)| plane_field(k, alpha, basis, x));
    let mut terms = Vec::new();
    for ((rho, _, z, w), f) in jobs.iter().zip(fields) {
        let f = f?;
        terms.push((rho.powf(alpha) * f.v, 1.0, *w));
        let s1 = rho.powf(alpha + 1.0);
        for i in 0..n {
            terms.push((s1 * f.g[i], -alpha * z[i], *w));
        }
        let s2 = rho.powf(alpha + 2.0);
        for i in 0..n {
            for j in 0..n {
                let p: f64 = nb.iter().map(|e| e[i] * e[j]).sum();
                let s = alpha * (alpha + 1.0) * z[i] * z[j] - alpha * (p - z[i] * z[j]);
                terms.push((s2 * f.h[i][j], s, *w));
            }
        }
    }
    Ok(terms)
}

/// `γ_{K,λ,α}(r)²`: for each plane, the least-squares residual of
/// `δ^{α+m}∇^m(R - cδ^{-α})`, m = 0, 1, 2, over `W_λ(r)` in the normal space.
/// Radial kernels use only the first plane.
pub fn gamma_functional(k: &Kernel, lambda: f64, alpha: f64, r: f64, planes: &[Vec<Vec<f64>>]) -> Result<GammaEstimate> {
    if !(lambda > 1.0 && alpha > 0.0 && r > 0.0) {
        return Err(Error::BadSpec(format!("gamma needs λ > 1, α > 0, r > 0 (λ={lambda}, α={alpha}, r={r})")));
    }
    let n = k.ambient_dim();
    let used = if k.is_radial() { &planes[..planes.len().min(1)] } else { planes };
    if used.is_empty() {
        return Err(Error::BadSpec("no plane samples".into()));
    }
    let mut out = Vec::with_capacity(used.len());
    for basis in used {
        let d = basis.len();
        if d == 0 || d >= n {
            return Err(Error::UnsupportedDimension(d));
        }
        let terms = if k.is_radial() {
            radial_terms(k, d, n - d, alpha, r, lambda)?
        } else {
            general_terms(k, basis, alpha, r, lambda)?
        };
        let (value_sq, c) = minimize(&terms);
        out.push(PlaneGamma {
            basis: basis.clone(),
            value_sq,
            c,
        });
    }
    let value_sq = out.iter().map(|p| p.value_sq).fold(0.0, f64::max);
    Ok(GammaEstimate {
        r,
        lambda,
        planes: out,
        value_sq,
    })
}

/// `γ(2^j)²` for `j ∈ js` and their sum.
pub fn gamma_dyadic_sum(
    k: &Kernel,
    lambda: f64,
    alpha: f64,
    js: std::ops::RangeInclusive<i32>,
    planes: &[Vec<Vec<f64>>],
) -> Result<(Vec<GammaEstimate>, f64)> {
    let mut est = Vec::new();
    for j in js {
        est.push(gamma_functional(k, lambda, alpha, 2f64.powi(j), planes)?);
    }
    let total = est.iter().map(|e| e.value_sq).sum();
    Ok((est, total))
}

/// Coefficients of `I_0, I_1, I_2` after expanding the m = 1, 2 residuals
/// with `(a+b)² ≤ 2a²+2b²` and `(a+b+c)² ≤ 3(a²+b²+c²)`.
fn expansion(alpha: f64, codim: usize) -> [f64; 3] {
    let k = codim as f64;
    let a2 = alpha * alpha;
    [1.0 + 2.0 * k * a2 + 3.0 * a2 * (alpha + 1.0).powi(2), 2.0 * k + 12.0 * a2, 3.0]
}

fn radial_derivative(k: &Kernel, t: f64, m: usize) -> f64 {
    let p = k.profile_dual(t);
    match m {
        0 => p.v,
        1 => t * p.d1,
        _ => t * t * p.d2,
    }
}

/// `σ_{d-1} ∫_0^∞ cosh^{1-β} t sinh^{d-1} t · log cosh t dt`.
fn log_moment(d: f64, alpha: f64) -> Result<f64> {
    let beta = d + alpha;
    let tmax = (45.0 / alpha).clamp(8.0, 600.0).ceil() as usize;
    let breaks: Vec<f64> = (0..=tmax).map(|i| i as f64).collect();
    let v = quad::integrate_pieces(
        |t| {
            let c = t.cosh();
            c.powf(1.0 - beta) * t.sinh().powf(d - 1.0) * c.ln()
        },
        &breaks,
        Tol::rel(1e-10).with_abs(1e-300),
        "log moment",
    )?;
    Ok(sphere_area(d) * v)
}

/// Explicit right-hand side for the dyadic γ² sum of a radial kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaBound {
    /// Dini integrals `M_m`.
    pub dini: [f64; 3],
    /// `sup_{t ≥ 1} |t^m ∂^m (K - K₀)|`.
    pub sup_outer: [f64; 3],
    /// Flat constant `c_1(d, α)`.
    pub c1: f64,
    pub log_moment: f64,
    pub rhs: f64,
}

/// With `c = K₀c₁` on shells inside the unit ball and `K_∞c₁` outside,
/// Jensen's inequality in the profile integral gives
/// `∫ G_m² dρ/ρ ≤ c₁² M_m + c₁ S_m² L`, and the γ² sum is at most
/// `σ_{k-1} Σ_m a_m (c₁² M_m + c₁ S_m² L)`.
pub fn gamma_dini_bound(k: &Kernel, d: usize, alpha: f64, k0: f64, k_inf: f64, range: (f64, f64)) -> Result<GammaBound> {
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    let n = k.ambient_dim();
    let codim = n.checked_sub(d).filter(|c| *c > 0).ok_or(Error::UnsupportedDimension(d))?;
    let mut dini = [0.0; 3];
    let mut sup_outer = [0.0; 3];
    let samples = 4000;
    for m in 0..3 {
        dini[m] = dini_functional(k, k0, k_inf, m, range)?;
        let shift = if m == 0 { k0 } else { 0.0 };
        sup_outer[m] = (0..=samples)
            .map(|i| {
                let t = range.1.powf(i as f64 / samples as f64);
                (radial_derivative(k, t, m) - shift).abs()
            })
            .fold(0.0, f64::max);
    }
    let c1 = flat_constant(d as f64, alpha);
    let lm = log_moment(d as f64, alpha)?;
    let a = expansion(alpha, codim);
    let sigma = sphere_area(codim as f64);
    let rhs = sigma * (0..3).map(|m| a[m] * (c1 * c1 * dini[m] + c1 * sup_outer[m].powi(2) * lm)).sum::<f64>();
    Ok(GammaBound {
        dini,
        sup_outer,
        c1,
        log_moment: lm,
        rhs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaEstimate {
    pub r: f64,
    pub per_plane: Vec<f64>,
    pub value_sq: f64,
}

/// `Σ_m | |x|^m ∇^m (K - K_ref)(x) |²` with Frobenius norms.
fn kernel_gap(diff: &Kernel, x: &[f64]) -> Result<f64> {
    let kd = eval_kernel(diff, x, 2)?;
    let r2 = geom::dot(x, x);
    let g2: f64 = kd.gradient.iter().map(|v| v * v).sum();
    let h2: f64 = kd.hessian.iter().flatten().map(|v| v * v).sum();
    Ok(kd.value * kd.value + r2 * g2 + r2 * r2 * h2)
}

fn plane_directions(basis: &[Vec<f64>]) -> Vec<(Vec<f64>, f64)> {
    match basis.len() {
        1 => vec![(basis[0].clone(), 1.0), (geom::scaled(&basis[0], -1.0), 1.0)],
        _ => (0..NORMAL_ANGLES)
            .map(|j| {
                let (s, c) = (2.0 * PI * j as f64 / NORMAL_ANGLES as f64).sin_cos();
                (geom::axpy(s, &basis[1], &geom::scaled(&basis[0], c)), 2.0 * PI / NORMAL_ANGLES as f64)
            })
            .collect(),
    }
}

/// `θ_{K,K_ref}(r)²`: the kernel gap weighted by `|x|^{-d-α} δ^{-n+d+α}` over
/// `(V^⊥ ∩ W_2(r)) × V`, with the plane factor cut to the unit ball for
/// `r ≤ 1`. With `s = ρ sinh t` along the plane the weight becomes
/// `cosh^{1-β} t sinh^{d-1} t dt dρ/ρ`.
pub fn theta_functional(k: &Kernel, k_ref: &Kernel, alpha: f64, r: f64, planes: &[Vec<Vec<f64>>]) -> Result<ThetaEstimate> {
    let n = k.ambient_dim();
    if k_ref.ambient_dim() != n {
        return Err(Error::BadSpec("reference kernel dimension differs".into()));
    }
    if !(r > 0.0 && alpha > 0.0) {
        return Err(Error::BadSpec(format!("theta needs r > 0 and α > 0 (r={r}, α={alpha})")));
    }
    let diff = Kernel::combination(n, vec![(1.0, k.clone()), (-1.0, k_ref.clone())]);
    let radial = k.is_radial() && k_ref.is_radial();
    let used = if radial { &planes[..planes.len().min(1)] } else { planes };
    if used.is_empty() {
        return Err(Error::BadSpec("no plane samples".into()));
    }
    let (us, ws) = log_nodes(r, 2.0);
    let tmax = (45.0 / alpha).clamp(8.0, 600.0);
    let mut per_plane = Vec::with_capacity(used.len());
    for basis in used {
        let d = basis.len();
        let beta = d as f64 + alpha;
        let zdirs = normal_directions(basis, n)?;
        let ydirs = plane_directions(basis);
        let shell = par::map(&us, |u| -> Result<f64> {
            let rho = u.exp();
            let t_hi = if r <= 1.0 { (1.0 / rho).asinh().min(tmax) } else { tmax };
            let mut breaks: Vec<f64> = (0..t_hi.ceil() as usize).map(|i| i as f64).collect();
            breaks.push(t_hi);
            breaks.dedup();
            let mut err = None;
            let v = quad::integrate_pieces(
                |t| {
                    let (sh, ch) = (t.sinh(), t.cosh());
                    let w = ch.powf(1.0 - beta) * sh.powf(d as f64 - 1.0);
                    let mut acc = 0.0;
                    for (z, wz) in &zdirs {
                        for (y, wy) in &ydirs {
                            let x: Vec<f64> = (0..n).map(|c| rho * (z[c] + sh * y[c])).collect();
                            match kernel_gap(&diff, &x) {
                                Ok(g) => acc += wz * wy * g,
                                Err(e) => err = Some(e),
                            }
                        }
                    }
                    acc * w
                },
                &breaks,
                Tol::rel(1e-9).with_abs(1e-300),
                "theta functional",
            )?;
            match err {
                Some(e) => Err(e),
                None => Ok(v),
            }
        });
        let mut total = 0.0;
        for (v, w) in shell.into_iter().zip(&ws) {
            total += w * v?;
        }
        per_plane.push(total);
    }
    let value_sq = per_plane.iter().cloned().fold(0.0, f64::max);
    Ok(ThetaEstimate { r, per_plane, value_sq })
}

/// Explicit comparison of the γ² sum with dyadic θ² sums for a radial kernel
/// and constant references `K₀` (shells with `r ≤ 1`) and `K_∞` (`r > 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaBound {
    pub theta_sum: f64,
    /// Bound for the part of the plane outside the unit ball on small shells.
    pub outer: f64,
    pub constant: f64,
    pub rhs: f64,
}

/// Jensen's inequality with the probability weight `ρ^α|x|^{-β}dy/c₁` gives
/// `σ_{k-1}∫G_m² dρ/ρ ≤ c₁ (T_m + outer_m)`, so the γ² sum over the same
/// shells is at most `c₁·max_m a_m·(Σθ² + outer)`.
pub fn gamma_theta_bound(
    k: &Kernel,
    d: usize,
    alpha: f64,
    k0: f64,
    k_inf: f64,
    js: std::ops::RangeInclusive<i32>,
    sup_radius: f64,
) -> Result<ThetaBound> {
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    let n = k.ambient_dim();
    let codim = n.checked_sub(d).filter(|c| *c > 0).ok_or(Error::UnsupportedDimension(d))?;
    let mut basis = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        basis.push(e);
    }
    let planes = vec![basis];
    let ref0 = Kernel::constant(n, k0);
    let ref_inf = Kernel::constant(n, k_inf);
    let mut theta_sum = 0.0;
    for j in js {
        let r = 2f64.powi(j);
        let kr = if r <= 1.0 { &ref0 } else { &ref_inf };
        theta_sum += theta_functional(k, kr, alpha, r, &planes)?.value_sq;
    }
    let diff = Kernel::combination(n, vec![(1.0, k.clone()), (-1.0, ref0)]);
    let samples = 2000;
    let mut sup = 0.0f64;
    for i in 0..=samples {
        let t = sup_radius.powf(i as f64 / samples as f64);
        let mut x = vec![0.0; n];
        x[0] = t;
        sup = sup.max(kernel_gap(&diff, &x)?);
    }
    let outer = sphere_area(codim as f64) * sphere_area(d as f64) * sup / (alpha * alpha);
    let a = expansion(alpha, codim);
    let constant = flat_constant(d as f64, alpha) * a.iter().cloned().fold(0.0, f64::max);
    Ok(ThetaBound {
        theta_sum,
        outer,
        constant,
        rhs: constant * (theta_sum + outer),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoincareProbe {
    /// `(R_k, Σ-part of the left side, Σ-part of the right side)` per annulus.
    pub per_annulus: Vec<(f64, f64, f64)>,
    pub lhs: f64,
    pub rhs_sum: f64,
    /// `(log 2)²/(4π² min|∇D|²)`.
    pub constant: f64,
}

/// On each annulus `2^{k-1} ≤ ρ ≤ 2^k` of the normal space, Wirtinger's
/// inequality in `u = log ρ` and `ρ|f'| = F/(2f)` for `f = |∇D|` give
/// `∫|f - c_k|² ≤ (log 2)²/(4π² min f²) ∫F²` with the same weight on both sides.
pub fn poincare_probe(k: &Kernel, d: usize, alpha: f64, ks: std::ops::RangeInclusive<i32>) -> Result<PoincareProbe> {
    if !k.is_radial() {
        return Err(Error::NotRadial);
    }
    let n = k.ambient_dim();
    let codim = n.checked_sub(d).filter(|c| *c > 0).ok_or(Error::UnsupportedDimension(d))?;
    let sigma = sphere_area(codim as f64);
    let mut per = Vec::new();
    let mut fmin = f64::INFINITY;
    for kk in ks {
        let r = 2f64.powi(kk);
        let (us, ws) = log_nodes(r, 2.0);
        let vals = par::map(&us, |u| -> Result<(f64, f64)> {
            let rho = u.exp();
            let rr = radial_plane_profile(k, d as f64, alpha, rho)?.to_r(rho, alpha);
            let f = rr.v.powf(-1.0 / alpha - 1.0) * rr.d1.abs() / alpha;
            let df2 = ((-2.0 / alpha - 2.0) * rr.v.powf(-2.0 / alpha - 3.0) * rr.d1.powi(3)
                + 2.0 * rr.v.powf(-2.0 / alpha - 2.0) * rr.d1 * rr.d2)
                / (alpha * alpha);
            Ok((f, rho * df2.abs()))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let span: f64 = ws.iter().sum();
        let mean = vals.iter().zip(&ws).map(|((f, _), w)| w * f).sum::<f64>() / span;
        let lhs: f64 = sigma * vals.iter().zip(&ws).map(|((f, _), w)| w * (f - mean).powi(2)).sum::<f64>();
        let rhs: f64 = sigma * vals.iter().zip(&ws).map(|((_, g), w)| w * g * g).sum::<f64>();
        fmin = vals.iter().map(|v| v.0).fold(fmin, f64::min);
        per.push((r, lhs, rhs));
    }
    let lhs = per.iter().map(|p| p.1).sum();
    let rhs_sum = per.iter().map(|p| p.2).sum();
    Ok(PoincareProbe {
        per_annulus: per,
        lhs,
        rhs_sum,
        constant: 2f64.ln().powi(2) / (4.0 * PI * PI * fmin * fmin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::plane_samples;
    use crate::kernels::SphereFn;

    fn test_kernel() -> Kernel {
        Kernel::radial_expr(2, "1 + exp(-(log(t))^2)").unwrap()
    }

    #[test]
    fn constant_kernel_has_zero_gamma() {
        let planes = plane_samples(2, 1, 4).unwrap();
        for k in [Kernel::constant(2, 1.0), Kernel::constant(2, 3.5)] {
            for r in [1e-3, 1.0, 40.0] {
                let g = gamma_functional(&k, 2.0, 0.7, r, &planes).unwrap();
                assert!(g.value_sq <= 1e-20, "{g:?}");
            }
        }
    }

    #[test]
    fn even_zero_homogeneous_gamma_vanishes() {
        let k = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.0, 0.5]));
        let planes = plane_samples(2, 1, 3).unwrap();
        let g = gamma_functional(&k, 2.0, 1.0, 0.5, &planes).unwrap();
        assert!(g.value_sq < 1e-16, "{}", g.value_sq);
        assert!(g.planes[1].c > 0.0);
    }

    #[test]
    fn radial_and_general_paths_agree() {
        let k = test_kernel();
        let basis = vec![vec![1.0, 0.0]];
        let a = minimize(&radial_terms(&k, 1, 1, 1.0, 0.8, 2.0).unwrap());
        let b = minimize(&general_terms(&k, &basis, 1.0, 0.8, 2.0).unwrap());
        assert!((a.0 - b.0).abs() < 1e-8 * a.0, "{a:?} {b:?}");
        assert!((a.1 - b.1).abs() < 1e-9 * a.1);
    }

    #[test]
    fn theta_of_identical_kernels_is_zero() {
        let k = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.2]));
        let planes = plane_samples(2, 1, 2).unwrap();
        let t = theta_functional(&k, &k, 1.0, 0.5, &planes).unwrap();
        assert_eq!(t.value_sq, 0.0);
    }

    #[test]
    fn poincare_probe_holds() {
        let p = poincare_probe(&test_kernel(), 1, 1.0, -6..=6).unwrap();
        assert!(p.lhs <= p.constant * p.rhs_sum, "{p:?}");
        assert!(p.lhs > 0.0);
    }
}
