//! Discrete approximations of d-Ahlfors-regular measures: weighted atoms with
//! a spatial index, optional closed-form distance to the underlying set, and an
//! optional flat tail model for truncated unbounded sets.

mod cone;
mod graph;
mod index;
mod whitney;

pub use cone::{cone_shell, nt_cone, ConeSamples, Stratum};
pub use graph::{GraphCurve, GraphProfile};
pub use index::KdTree;
pub use whitney::{coverage_fraction, pairwise_disjoint, whitney_decompose, WhitneyCube, WhitneyResult};

use crate::error::{Error, Result};
use crate::geom;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Closed-form shape of the underlying set.
#[derive(Clone, Debug)]
pub enum Shape {
    Plane { origin: Vec<f64>, basis: Vec<Vec<f64>> },
    Sphere { center: Vec<f64>, radius: f64 },
    Graph(Arc<GraphCurve>),
}

impl Shape {
    fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Plane { origin, basis } => {
                let mut v = geom::sub(x, origin);
                for b in basis {
                    let p = geom::dot(&v, b);
                    v = geom::axpy(-p, b, &v);
                }
                geom::norm(&v)
            }
            Shape::Sphere { center, radius } => (geom::norm(&geom::sub(x, center)) - radius).abs(),
            Shape::Graph(g) => g.distance(x),
        }
    }
}

/// `δ(x) = shape.distance(scale·x + shift)/scale`; rescaling composes affinely.
#[derive(Clone, Debug)]
pub struct ExactDistance {
    pub shape: Shape,
    pub shift: Vec<f64>,
    pub scale: f64,
}

impl ExactDistance {
    fn new(shape: Shape, n: usize) -> Self {
        ExactDistance {
            shape,
            shift: vec![0.0; n],
            scale: 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| self.scale * a + b).collect();
        self.shape.distance(&y) / self.scale
    }
}

/// Flat continuation beyond the truncation: the plane through `origin`
/// spanned by `basis`, minus the cube `|s_i| ≤ half_width` in plane
/// coordinates, carrying `density`·Hᵈ.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatTail {
    pub origin: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub half_width: f64,
    pub density: f64,
    /// True when the continuation is the set itself (planes); false when it
    /// is a flat model of a curved tail (graphs).
    pub analytic: bool,
}

#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    n: usize,
    d: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
    /// Upper end of the trusted scale range.
    reach: f64,
    exact: Option<ExactDistance>,
    tail: Option<FlatTail>,
    index: Arc<KdTree>,
}

#[derive(Clone, Debug)]
pub enum SetGenerator {
    Plane {
        n: usize,
        d: usize,
        half_extent: f64,
        spacing: f64,
    },
    /// Circle (n = 2, Fibonacci-free equispaced nodes) or sphere (n = 3, Fibonacci nodes).
    Sphere { n: usize, radius: f64, nodes: usize },
    LipschitzGraph {
        profile: GraphProfile,
        lipschitz_bound: Option<f64>,
        half_extent: f64,
        spacing: f64,
    },
    FourCornerCantor { generation: u32 },
    CustomPointCloud { path: PathBuf, d: f64 },
}

pub const MAX_CANTOR_GENERATION: u32 = 12;

impl DiscreteMeasure {
    /// Builds a measure from raw atoms; `spacing` is the discretization length.
    pub fn from_atoms(n: usize, d: f64, points: Vec<f64>, weights: Vec<f64>, spacing: f64) -> Result<Self> {
        if points.len() != n * weights.len() {
            return Err(Error::BadSpec("point and weight counts disagree".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::BadSpec("weights must be positive and finite".into()));
        }
        if !(spacing > 0.0) || !(d > 0.0) {
            return Err(Error::BadSpec("spacing and dimension must be positive".into()));
        }
        let index = Arc::new(KdTree::build(n, &points));
        let mut m = DiscreteMeasure {
            n,
            d,
            points,
            weights,
            spacing,
            reach: 0.0,
            exact: None,
            tail: None,
            index,
        };
        m.reach = m.diameter();
        Ok(m)
    }

    fn diameter(&self) -> f64 {
        let mut lo = vec![f64::INFINITY; self.n];
        let mut hi = vec![f64::NEG_INFINITY; self.n];
        for p in self.points.chunks(self.n) {
            for k in 0..self.n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        geom::norm(&geom::sub(&hi, &lo))
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }
    pub fn hausdorff_dim(&self) -> f64 {
        self.d
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }
    pub fn points(&self) -> &[f64] {
        &self.points
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
    pub fn exact(&self) -> Option<&ExactDistance> {
        self.exact.as_ref()
    }
    pub fn tail(&self) -> Option<&FlatTail> {
        self.tail.as_ref()
    }
    pub fn index(&self) -> &KdTree {
        &self.index
    }
    /// Half-width of the discretized region for truncated sets.
    pub fn truncation_radius(&self) -> Option<f64> {
        self.tail.as_ref().map(|t| t.half_width)
    }
    /// `(spacing, reach)`: truncation radius for truncated sets, diameter otherwise.
    pub fn valid_scale_range(&self) -> (f64, f64) {
        (self.spacing, self.reach)
    }

    pub fn nearest_atom_distance(&self, x: &[f64]) -> f64 {
        self.index.nearest(x).map(|p| p.1).unwrap_or(f64::INFINITY)
    }

    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        self.index.ball_mass(x, r, &self.weights)
    }

    /// Drops the tail model (for tests that need a plain truncated set).
    pub fn without_tail(mut self) -> Self {
        self.tail = None;
        self
    }
}

/// Closed-form distance when known, otherwise the nearest-atom distance.
pub fn dist_to_support(mu: &DiscreteMeasure, x: &[f64]) -> f64 {
    match &mu.exact {
        Some(e) => e.eval(x),
        None => mu.nearest_atom_distance(x),
    }
}

fn unit_basis(n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Centers of the generation-`g` squares of the four-corner Cantor set in [0,1]².
pub fn cantor_centers(g: u32) -> Vec<[f64; 2]> {
    let mut corners = vec![[0.0f64, 0.0f64]];
    let mut side = 1.0;
    for _ in 0..g {
        let child = side / 4.0;
        let mut next = Vec::with_capacity(corners.len() * 4);
        for c in &corners {
            for (dx, dy) in [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (3.0, 3.0)] {
                next.push([c[0] + dx * child, c[1] + dy * child]);
            }
        }
        corners = next;
        side = child;
    }
    corners.iter().map(|c| [c[0] + side / 2.0, c[1] + side / 2.0]).collect()
}

pub fn generate(spec: &SetGenerator) -> Result<DiscreteMeasure> {
    match spec {
        SetGenerator::Plane {
            n,
            d,
            half_extent,
            spacing,
        } => {
            let (n, d) = (*n, *d);
            if !(*spacing > 0.0 && *half_extent > 0.0) || d == 0 || d >= n || n > 3 {
                return Err(Error::BadSpec(format!(
                    "plane needs 0 < d < n <= 3 and positive spacing/extent (n={n}, d={d}, h={spacing})"
                )));
            }
            let k = (half_extent / spacing).round() as i64;
            let side = (2 * k + 1) as usize;
            let count = side.pow(d as u32);
            let mut points = Vec::with_capacity(count * n);
            for idx in 0..count {
                let mut p = vec![0.0; n];
                let mut rest = idx;
                for c in p.iter_mut().take(d) {
                    *c = ((rest % side) as i64 - k) as f64 * spacing;
                    rest /= side;
                }
                points.extend(p);
            }
            let weights = vec![spacing.powi(d as i32); count];
            let mut m = DiscreteMeasure::from_atoms(n, d as f64, points, weights, *spacing)?;
            let basis = unit_basis(n, d);
            let half_width = k as f64 * spacing + spacing / 2.0;
            m.exact = Some(ExactDistance::new(
                Shape::Plane {
                    origin: vec![0.0; n],
                    basis: basis.clone(),
                },
                n,
            ));
            m.tail = Some(FlatTail {
                origin: vec![0.0; n],
                basis,
                half_width,
                density: 1.0,
                analytic: true,
            });
            m.reach = half_width;
            Ok(m)
        }
        SetGenerator::Sphere { n, radius, nodes } => {
            if !(*radius > 0.0) || *nodes < 3 {
                return Err(Error::BadSpec("sphere needs positive radius and at least 3 nodes".into()));
            }
            let dirs = match n {
                2 => geom::circle_directions(*nodes, 0.0),
                3 => geom::fibonacci_sphere(*nodes),
                _ => return Err(Error::BadSpec(format!("sphere generator supports n = 2, 3 (got {n})"))),
            };
            let d = (*n - 1) as f64;
            let area = crate::special::sphere_area(*n as f64) * radius.powi(*n as i32 - 1);
            let w = area / *nodes as f64;
            let points: Vec<f64> = dirs.iter().flat_map(|u| geom::scaled(u, *radius)).collect();
            let spacing = w.powf(1.0 / d);
            let mut m = DiscreteMeasure::from_atoms(*n, d, points, vec![w; *nodes], spacing)?;
            m.exact = Some(ExactDistance::new(
                Shape::Sphere {
                    center: vec![0.0; *n],
                    radius: *radius,
                },
                *n,
            ));
            Ok(m)
        }
        SetGenerator::LipschitzGraph {
            profile,
            lipschitz_bound,
            half_extent,
            spacing,
        } => {
            if !(*spacing > 0.0 && *half_extent > 0.0) {
                return Err(Error::BadSpec("graph needs positive spacing and extent".into()));
            }
            let curve = Arc::new(GraphCurve::new(profile.clone())?);
            if let Some(b) = lipschitz_bound {
                let lip = curve.lipschitz_constant(*half_extent);
                if lip > *b {
                    return Err(Error::BadSpec(format!("graph Lipschitz constant {lip} exceeds bound {b}")));
                }
            }
            let k = (half_extent / spacing).round() as i64;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            let mut max_cell: f64 = 0.0;
            for i in -k..=k {
                let x = i as f64 * spacing;
                points.push(x);
                points.push(curve.f(x));
                let w = curve.arc_length(x - spacing / 2.0, x + spacing / 2.0);
                max_cell = max_cell.max(w);
                weights.push(w);
            }
            let mut m = DiscreteMeasure::from_atoms(2, 1.0, points, weights, max_cell)?;
            let half_width = k as f64 * spacing + spacing / 2.0;
            m.exact = Some(ExactDistance::new(Shape::Graph(curve.clone()), 2));
            m.tail = Some(FlatTail {
                origin: vec![0.0, curve.mean_height()],
                basis: vec![vec![1.0, 0.0]],
                half_width,
                density: curve.mean_arc_density(),
                analytic: false,
            });
            m.reach = half_width;
            Ok(m)
        }
        SetGenerator::FourCornerCantor { generation } => {
            if *generation > MAX_CANTOR_GENERATION {
                return Err(Error::BadSpec(format!(
                    "Cantor generation {generation} above guard {MAX_CANTOR_GENERATION}"
                )));
            }
            let side = 0.25f64.powi(*generation as i32);
            let centers = cantor_centers(*generation);
            let points: Vec<f64> = centers.iter().flat_map(|c| c.iter().copied()).collect();
            let count = centers.len();
            DiscreteMeasure::from_atoms(2, 1.0, points, vec![side; count], side)
        }
        SetGenerator::CustomPointCloud { path, d } => read_point_cloud(path, *d),
    }
}

/// Reads `x1 .. xn weight` rows (`#` comments); spacing is the median
/// nearest-neighbour distance.
pub fn read_point_cloud(path: &Path, d: f64) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut n = 0;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if vals.len() < 2 {
            return Err(Error::Config(format!("{}:{}: need coordinates and a weight", path.display(), lineno + 1)));
        }
        if n == 0 {
            n = vals.len() - 1;
        } else if vals.len() - 1 != n {
            return Err(Error::Config(format!("{}:{}: inconsistent dimension", path.display(), lineno + 1)));
        }
        points.extend_from_slice(&vals[..n]);
        weights.push(vals[n]);
    }
    if weights.is_empty() {
        return Err(Error::Config(format!("{}: no atoms", path.display())));
    }
    let tree = KdTree::build(n, &points);
    let mut nn: Vec<f64> = (0..weights.len())
        .filter_map(|i| tree.nearest_other(&points[i * n..(i + 1) * n], i).map(|p| p.1))
        .collect();
    nn.sort_by(f64::total_cmp);
    let spacing = nn.get(nn.len() / 2).copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    DiscreteMeasure::from_atoms(n, d, points, weights, spacing)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArDiagnostics {
    /// `(Q, R, μ(B(Q,R))/R^d)`.
    pub samples: Vec<(Vec<f64>, f64, f64)>,
    pub c_min: f64,
    pub c_max: f64,
    pub valid_scale_range: (f64, f64),
}

pub fn ahlfors_check(mu: &DiscreteMeasure, samples: &[(Vec<f64>, f64)]) -> Result<ArDiagnostics> {
    let (lo, hi) = mu.valid_scale_range();
    let mut out = Vec::with_capacity(samples.len());
    for (q, r) in samples {
        if *r < lo || *r > hi {
            return Err(Error::ScaleOutOfRange { scale: *r, lo, hi });
        }
        let ratio = mu.ball_mass(q, *r) / r.powf(mu.d);
        out.push((q.clone(), *r, ratio));
    }
    let c_min = out.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let c_max = out.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    Ok(ArDiagnostics {
        samples: out,
        c_min,
        c_max,
        valid_scale_range: (lo, hi),
    })
}

/// `μ_{Q,r}(A) = μ(rA + Q)/r^d`: atoms `(y - Q)/r`, weights `w/r^d`.
pub fn rescale_measure(mu: &DiscreteMeasure, q: &[f64], r: f64) -> DiscreteMeasure {
    let n = mu.n;
    let points: Vec<f64> = mu.points.chunks(n).flat_map(|p| p.iter().zip(q).map(|(y, c)| (y - c) / r)).collect();
    let scale_w = r.powf(mu.d);
    let weights: Vec<f64> = mu.weights.iter().map(|w| w / scale_w).collect();
    let index = Arc::new(KdTree::build(n, &points));
    let exact = mu.exact.as_ref().map(|e| ExactDistance {
        shape: e.shape.clone(),
        shift: e.shift.iter().zip(q).map(|(s, c)| e.scale * c + s).collect(),
        scale: e.scale * r,
    });
    let tail = mu.tail.as_ref().map(|t| FlatTail {
        origin: t.origin.iter().zip(q).map(|(o, c)| (o - c) / r).collect(),
        basis: t.basis.clone(),
        half_width: t.half_width / r,
        density: t.density,
        analytic: t.analytic,
    });
    DiscreteMeasure {
        n,
        d: mu.d,
        points,
        weights,
        spacing: mu.spacing / r,
        reach: mu.reach / r,
        exact,
        tail,
        index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(l: f64, h: f64) -> DiscreteMeasure {
        generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: l,
            spacing: h,
        })
        .unwrap()
    }

    #[test]
    fn plane_grid_arithmetic() {
        let m = line(1.0, 0.01);
        assert_eq!(m.len(), 201);
        assert!(m.weights().iter().all(|&w| w == 0.01));
        assert!((m.total_mass() - 2.01).abs() < 1e-12);
        assert_eq!(dist_to_support(&m, &[0.3, 0.7]), 0.7);
    }

    #[test]
    fn cantor_counts() {
        let m = generate(&SetGenerator::FourCornerCantor { generation: 3 }).unwrap();
        assert_eq!(m.len(), 64);
        assert!((m.total_mass() - 1.0).abs() < 1e-14);
        assert!(generate(&SetGenerator::FourCornerCantor { generation: 13 }).is_err());
    }

    #[test]
    fn circle_ahlfors_ratios() {
        let m = generate(&SetGenerator::Sphere {
            n: 2,
            radius: 1.0,
            nodes: 360,
        })
        .unwrap();
        assert!((m.weights()[0] - 2.0 * std::f64::consts::PI / 360.0).abs() < 1e-15);
        assert_eq!(dist_to_support(&m, &[2.0, 0.0]), 1.0);
        let samples: Vec<(Vec<f64>, f64)> = (0..8)
            .flat_map(|k| {
                let q = m.point(k * 45).to_vec();
                [0.1, 0.25, 0.5].map(move |r| (q.clone(), r))
            })
            .collect();
        let ar = ahlfors_check(&m, &samples).unwrap();
        assert!(ar.c_min >= 1.9 && ar.c_max <= 2.1, "{} {}", ar.c_min, ar.c_max);
    }

    #[test]
    fn single_atom_scale_guard() {
        let m = DiscreteMeasure::from_atoms(2, 1.0, vec![0.0, 0.0], vec![1.0], 0.1).unwrap();
        assert!(matches!(
            ahlfors_check(&m, &[(vec![0.0, 0.0], 0.01)]),
            Err(Error::ScaleOutOfRange { .. })
        ));
    }

    #[test]
    fn rescaled_distance_identity() {
        let m = line(2.0, 0.01);
        let q = [0.37, 0.0];
        let r = 0.125;
        let s = rescale_measure(&m, &q, r);
        let x = [0.4, 0.9];
        let y = [r * x[0] + q[0], r * x[1] + q[1]];
        assert_eq!(dist_to_support(&s, &x), dist_to_support(&m, &y) / r);
        let id = rescale_measure(&m, &[0.0, 0.0], 1.0);
        assert_eq!(id.points(), m.points());
    }
}
