//! Smoothing operators: radial mollification `∫K(tx)φ(t)dt` and weighted
//! averages over rotations `Σ_j w_j K(A_j x)`. Both store a fixed quadrature
//! built from the weight alone, so they are exactly linear in `K`.

use super::{Kernel, Variant};
use crate::error::{Error, Result};
use crate::geom::{self, Mat3};
use crate::num::Num;
use crate::quad;
use std::f64::consts::PI;
use std::sync::Arc;

/// Standard bump `exp(-1/(1-s²))` on `(-1, 1)`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Radial weight φ on `(lo, hi)`: the normalized standard bump, or a custom
/// expression in `t` used as given.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierSpec {
    pub lo: f64,
    pub hi: f64,
    pub weight: Option<super::Expr>,
    pub tol: f64,
}

impl MollifierSpec {
    pub fn bump(lo: f64, hi: f64) -> Self {
        MollifierSpec {
            lo,
            hi,
            weight: None,
            tol: 1e-8,
        }
    }

    fn phi(&self, t: f64) -> f64 {
        match &self.weight {
            Some(e) => e.eval(&t),
            None => bump((2.0 * t - self.lo - self.hi) / (self.hi - self.lo)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mollified {
    pub inner: Kernel,
    pub spec: MollifierSpec,
    /// `(t_q, W_q)` with `W_q = w_q φ(t_q)`.
    pub nodes: Vec<(f64, f64)>,
}

const GL_ORDER: usize = 16;

fn mollifier_nodes(spec: &MollifierSpec, panels: usize) -> Vec<(f64, f64)> {
    let (t, w) = quad::composite_gl(spec.lo, spec.hi, panels, GL_ORDER);
    let mut nodes: Vec<(f64, f64)> = t.iter().zip(&w).map(|(&t, &w)| (t, w * spec.phi(t))).collect();
    if spec.weight.is_none() {
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        for n in nodes.iter_mut() {
            n.1 /= total;
        }
    }
    nodes.retain(|n| n.1 != 0.0);
    nodes
}

fn test_moments(nodes: &[(f64, f64)]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for &(t, w) in nodes {
        let u = t.ln();
        m[0] += w;
        m[1] += w * u;
        m[2] += w * (6.0 * u).cos();
        m[3] += w * t.powi(-3);
    }
    m
}

impl Mollified {
    /// Picks the panel count by doubling until a fixed set of test moments of
    /// φ stops changing, so the rule depends on φ only.
    pub fn build(inner: Kernel, spec: MollifierSpec) -> Result<Self> {
        if !(spec.lo > 0.0 && spec.hi > spec.lo) {
            return Err(Error::BadSpec("mollifier support must satisfy 0 < lo < hi".into()));
        }
        let mut panels = 1;
        let mut prev = test_moments(&mollifier_nodes(&spec, panels));
        loop {
            panels *= 2;
            let nodes = mollifier_nodes(&spec, panels);
            let cur = test_moments(&nodes);
            let scale = cur.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
            let diff = cur.iter().zip(&prev).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            if diff <= 1e-3 * spec.tol * scale {
                return Ok(Mollified { inner, spec, nodes });
            }
            if panels >= 4096 {
                return Err(Error::QuadratureFailure {
                    context: "radial mollifier".into(),
                    estimate: diff / scale,
                    tolerance: spec.tol,
                });
            }
            prev = cur;
        }
    }

    pub fn eval<T: Num>(&self, z: &[T]) -> T {
        let mut acc = z[0].cst(0.0);
        let mut zz = z.to_vec();
        for &(t, w) in &self.nodes {
            for (a, b) in zz.iter_mut().zip(z) {
                *a = b.scale(t);
            }
            acc = acc.add(&self.inner.eval_num(&zz).scale(w));
        }
        acc
    }

    /// `∫φ`, as realized by the stored rule.
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }
}

/// `K̃(x) = ∫₀^∞ K(tx)φ(t)dt`.
pub fn radial_mollify(k: &Kernel, spec: MollifierSpec) -> Result<Kernel> {
    let m = Mollified::build(k.clone(), spec)?;
    if let Variant::Constant(c) = k.variant() {
        return Ok(Kernel::constant(k.ambient_dim(), c * m.mass()));
    }
    Ok(Kernel::new(k.ambient_dim(), Variant::Mollified(Arc::new(m))))
}

#[derive(Clone, Debug, PartialEq)]
pub enum RotationWeight {
    /// Normalized Haar measure on the full rotation group.
    Uniform { nodes: usize },
    /// Normalized bump in the rotation angle, supported on angles `< max_angle`.
    Bump { max_angle: f64, nodes: usize },
}

impl RotationWeight {
    fn nodes(&self) -> usize {
        match self {
            RotationWeight::Uniform { nodes } | RotationWeight::Bump { nodes, .. } => *nodes,
        }
    }
    fn refined(&self, factor: usize) -> Self {
        match self {
            RotationWeight::Uniform { nodes } => RotationWeight::Uniform { nodes: nodes * factor },
            RotationWeight::Bump { max_angle, nodes } => RotationWeight::Bump {
                max_angle: *max_angle,
                nodes: nodes * factor,
            },
        }
    }
}

pub const MIN_NODES_2D: usize = 256;
pub const MIN_NODES_3D: usize = 10_000;

#[derive(Clone, Debug)]
pub struct RotAverage {
    pub inner: Kernel,
    pub weight: RotationWeight,
    pub rotations: Vec<(Mat3, f64)>,
}

/// Rotation grid for the weight. In the plane: equispaced angles (uniform) or
/// composite Gauss–Legendre in the angle (bump). In ℝ³: the super-Fibonacci
/// spiral (uniform) or an axis–angle product grid with Haar density
/// `(1 - cos ω)` (bump).
pub fn rotation_grid(n: usize, weight: &RotationWeight) -> Result<Vec<(Mat3, f64)>> {
    let count = weight.nodes();
    let mut out = Vec::new();
    match (n, weight) {
        (2, RotationWeight::Uniform { .. }) => {
            let count = count.max(MIN_NODES_2D);
            for j in 0..count {
                out.push((geom::rot2(2.0 * PI * j as f64 / count as f64), 1.0 / count as f64));
            }
        }
        (2, RotationWeight::Bump { max_angle, .. }) => {
            let count = count.max(MIN_NODES_2D);
            let panels = count.div_ceil(GL_ORDER);
            let (th, w) = quad::composite_gl(-max_angle, *max_angle, panels, GL_ORDER);
            for (t, w) in th.iter().zip(&w) {
                out.push((geom::rot2(*t), w * bump(t / max_angle)));
            }
        }
        (3, RotationWeight::Uniform { .. }) => {
            let count = count.max(MIN_NODES_3D);
            for q in geom::super_fibonacci(count) {
                out.push((geom::quat_to_matrix(q), 1.0 / count as f64));
            }
        }
        (3, RotationWeight::Bump { max_angle, .. }) => {
            let count = count.max(MIN_NODES_3D);
            let n_axes = count.div_ceil(GL_ORDER);
            let (om, w) = quad::composite_gl(0.0, *max_angle, 1, GL_ORDER);
            let axes = geom::fibonacci_sphere(n_axes);
            for (o, wo) in om.iter().zip(&w) {
                let dens = wo * (1.0 - o.cos()) * bump(o / max_angle);
                for a in &axes {
                    out.push((geom::axis_angle(a, *o), dens));
                }
            }
        }
        (n, _) => return Err(Error::UnsupportedDimension(n)),
    }
    let total: f64 = out.iter().map(|r| r.1).sum();
    for r in out.iter_mut() {
        r.1 /= total;
    }
    out.retain(|r| r.1 != 0.0);
    Ok(out)
}

impl RotAverage {
    pub fn build(inner: Kernel, weight: RotationWeight) -> Result<Self> {
        let rotations = rotation_grid(inner.ambient_dim(), &weight)?;
        Ok(RotAverage {
            inner,
            weight,
            rotations,
        })
    }

    pub fn is_full_average(&self) -> bool {
        matches!(self.weight, RotationWeight::Uniform { .. })
    }

    /// Same average on a grid `factor` times finer (used as a refinement oracle).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::build(self.inner.clone(), self.weight.refined(factor))
    }

    pub fn eval<T: Num>(&self, z: &[T]) -> T {
        let n = z.len();
        let mut acc = z[0].cst(0.0);
        let mut az = z.to_vec();
        for (a, w) in &self.rotations {
            for i in 0..n {
                let mut s = z[0].scale(a[i][0]);
                for k in 1..n {
                    s = s.add(&z[k].scale(a[i][k]));
                }
                az[i] = s;
            }
            acc = acc.add(&self.inner.eval_num(&az).scale(*w));
        }
        acc
    }
}

/// `K̃(x) = Σ_j w_j K(A_j x)` over the rotation grid of `weight`.
pub fn rotational_average(k: &Kernel, weight: RotationWeight) -> Result<Kernel> {
    let n = k.ambient_dim();
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if let Variant::Constant(_) = k.variant() {
        return Ok(k.clone());
    }
    let r = RotAverage::build(k.clone(), weight)?;
    Ok(Kernel::new(n, Variant::Averaged(Arc::new(r))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SphereFn;

    #[test]
    fn constants_are_fixed_points() {
        let c = Kernel::constant(2, 3.0);
        let m = radial_mollify(&c, MollifierSpec::bump(1.0, 2.0)).unwrap();
        match m.variant() {
            Variant::Constant(v) => assert!((v - 3.0).abs() < 1e-14),
            _ => panic!("expected constant"),
        }
        let r = rotational_average(&c, RotationWeight::Uniform { nodes: 256 }).unwrap();
        assert!(matches!(r.variant(), Variant::Constant(_)));
    }

    #[test]
    fn mollified_value_matches_adaptive_quadrature() {
        let k = Kernel::radial_expr(2, "2*t/(1+t^2)").unwrap();
        let spec = MollifierSpec::bump(1.0, 2.0);
        let m = radial_mollify(&k, spec.clone()).unwrap();
        let (z, _) = quad::integrate(|t| bump(2.0 * t - 3.0), 1.0, 2.0, quad::Tol::rel(1e-14), "z").unwrap();
        let (num, _) = quad::integrate(
            |t| 2.0 * t / (1.0 + t * t) * bump(2.0 * t - 3.0),
            1.0,
            2.0,
            quad::Tol::rel(1e-14),
            "n",
        )
        .unwrap();
        let v = m.value(&[1.0, 0.0]);
        assert!(((v - num / z) / v).abs() < 1e-8, "{v} {}", num / z);
    }

    #[test]
    fn full_average_of_cos2_is_its_mean() {
        let k = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.0, 0.5]));
        let r = rotational_average(&k, RotationWeight::Uniform { nodes: 256 }).unwrap();
        for th in [0.0, 0.4, 1.3, 2.9] {
            assert!((r.value(&[th.cos(), th.sin()]) - 1.0).abs() < 1e-14);
        }
        assert!(r.is_radial());
    }

    #[test]
    fn uniform_so3_average_is_radial() {
        let k = Kernel::zero_homogeneous(
            3,
            SphereFn::Poly {
                terms: vec![(1.0, [0, 0, 0]), (0.5, [0, 0, 2])],
            },
        );
        let r = rotational_average(&k, RotationWeight::Uniform { nodes: 10_000 }).unwrap();
        // mean of w_z^2 over S^2 is 1/3
        for x in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.3, -0.4, 0.5]] {
            assert!((r.value(&x) - (1.0 + 0.5 / 3.0)).abs() < 2e-3);
        }
    }

    #[test]
    fn small_rotation_average_agrees_with_refined_grid() {
        let k = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![1.0, 0.0, 0.5]));
        let w = RotationWeight::Bump {
            max_angle: PI / 8.0,
            nodes: 256,
        };
        let r = RotAverage::build(k.clone(), w).unwrap();
        let fine = r.refined(10).unwrap();
        for th in [0.1, 0.7, 2.0] {
            let x = [th.cos(), th.sin()];
            let a = r.eval(&x[..]);
            let b = fine.eval(&x[..]);
            assert!(((a - b) / b).abs() < 1e-6);
        }
    }
}
