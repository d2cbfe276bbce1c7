//! Planar graphs `y = f(x)` of Lipschitz functions.

use crate::error::{Error, Result};
use crate::quad;

#[derive(Clone, Debug, PartialEq)]
pub enum GraphProfile {
    Sine { amplitude: f64, omega: f64 },
    /// Natural cubic spline through `(x, y)`; constant beyond the ends.
    Table { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct GraphCurve {
    profile: GraphProfile,
    m: Vec<f64>,
}

impl GraphCurve {
    pub fn new(profile: GraphProfile) -> Result<Self> {
        let m = match &profile {
            GraphProfile::Sine { omega, .. } => {
                if !(*omega > 0.0) {
                    return Err(Error::BadSpec("graph frequency must be positive".into()));
                }
                vec![]
            }
            GraphProfile::Table { x, y } => {
                if x.len() != y.len() || x.len() < 3 || x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::BadSpec("graph table needs >= 3 rows with increasing x".into()));
                }
                crate::kernels::natural_spline_second_derivs(x, y)
            }
        };
        Ok(GraphCurve { profile, m })
    }

    /// `(f(x), f'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match &self.profile {
            GraphProfile::Sine { amplitude, omega } => {
                let (s, c) = (omega * x).sin_cos();
                (amplitude * s, amplitude * omega * c)
            }
            GraphProfile::Table { x: xs, y } => {
                let n = xs.len();
                if x <= xs[0] {
                    return (y[0], 0.0);
                }
                if x >= xs[n - 1] {
                    return (y[n - 1], 0.0);
                }
                let k = xs.partition_point(|&p| p <= x).saturating_sub(1).min(n - 2);
                let h = xs[k + 1] - xs[k];
                let a = (xs[k + 1] - x) / h;
                let b = (x - xs[k]) / h;
                let v = a * y[k] + b * y[k + 1] + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0;
                let d = (y[k + 1] - y[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.m[k]
                    + (3.0 * b * b - 1.0) / 6.0 * h * self.m[k + 1];
                (v, d)
            }
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Natural length scale of the profile: a period or the node spacing.
    fn feature(&self) -> f64 {
        match &self.profile {
            GraphProfile::Sine { omega, .. } => 2.0 * std::f64::consts::PI / omega,
            GraphProfile::Table { x, .. } => x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        let panels = (((b - a) / self.feature()) * 8.0).ceil().max(1.0) as usize;
        let (xs, ws) = quad::composite_gl(a, b, panels, 8);
        xs.iter().zip(&ws).map(|(&x, w)| w * (1.0 + self.eval(x).1.powi(2)).sqrt()).sum()
    }

    pub fn lipschitz_constant(&self, half_extent: f64) -> f64 {
        match &self.profile {
            GraphProfile::Sine { amplitude, omega } => (amplitude * omega).abs(),
            GraphProfile::Table { .. } => {
                let steps = 4096;
                (0..=steps)
                    .map(|i| self.eval(-half_extent + 2.0 * half_extent * i as f64 / steps as f64).1.abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Mean arc length per unit `x`, the density of the flat tail model.
    pub fn mean_arc_density(&self) -> f64 {
        match &self.profile {
            GraphProfile::Sine { .. } => self.arc_length(0.0, self.feature()) / self.feature(),
            GraphProfile::Table { .. } => 1.0,
        }
    }

    pub fn mean_height(&self) -> f64 {
        match &self.profile {
            GraphProfile::Sine { .. } => 0.0,
            GraphProfile::Table { y, .. } => 0.5 * (y[0] + y[y.len() - 1]),
        }
    }

    /// Euclidean distance from `p` to the full graph. The foot point lies
    /// within the vertical distance of `p₀`; local minima of a sampled squared
    /// distance are refined by golden-section search.
    pub fn distance(&self, p: &[f64]) -> f64 {
        let vert = (p[1] - self.f(p[0])).abs();
        if vert == 0.0 {
            return 0.0;
        }
        let g = |x: f64| (x - p[0]).powi(2) + (self.f(x) - p[1]).powi(2);
        let step = (self.feature() / 32.0).min(vert / 16.0);
        let count = ((2.0 * vert / step).ceil() as usize).max(2);
        let a = p[0] - vert;
        let xs: Vec<f64> = (0..=count).map(|i| a + 2.0 * vert * i as f64 / count as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let mut best = vert * vert;
        for i in 0..=count {
            let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
            let right = if i < count { vals[i + 1] } else { f64::INFINITY };
            if vals[i] <= left && vals[i] <= right {
                let lo = if i > 0 { xs[i - 1] } else { xs[i] };
                let hi = if i < count { xs[i + 1] } else { xs[i] };
                best = best.min(golden_min(&g, lo, hi));
            }
        }
        best.sqrt()
    }
}

fn golden_min(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    fc.min(fd).min(g(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_distance_matches_dense_scan() {
        let c = GraphCurve::new(GraphProfile::Sine {
            amplitude: 0.3,
            omega: 1.0,
        })
        .unwrap();
        for p in [[0.2, 0.9], [1.5, -0.4], [-3.0, 0.05], [0.0, 3.0]] {
            let scan = (0..200_001)
                .map(|i| {
                    let x = p[0] - 4.0 + 8.0 * i as f64 / 200_000.0;
                    ((x - p[0]).powi(2) + (c.f(x) - p[1]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            let d = c.distance(&p);
            assert!(d <= scan + 1e-12 && scan - d < 1e-8, "{d} {scan}");
        }
    }

    #[test]
    fn table_profile_interpolates() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let c = GraphCurve::new(GraphProfile::Table { x, y }).unwrap();
        assert!((c.f(1.23) - 1.23f64.sin()).abs() < 1e-4);
        assert!((c.eval(2.0).1 - 2f64.cos()).abs() < 1e-3);
    }
}
