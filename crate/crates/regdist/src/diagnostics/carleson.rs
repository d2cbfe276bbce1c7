//! Normalized Carleson integrals `r^{-d} ∫_{B(Q,r)∖E} F² δ^{d-n} dx` on Whitney cubes.

use super::check_scale;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::geom;
use crate::measures::whitney_decompose;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlesonOptions {
    /// Evaluate `2^n` child midpoints per cube instead of the center.
    pub refine: bool,
    /// Finest Whitney generation; default follows the atom spacing.
    pub j_max: Option<i32>,
}

impl Default for CarlesonOptions {
    fn default() -> Self {
        CarlesonOptions { refine: false, j_max: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlesonEntry {
    pub q: Vec<f64>,
    pub r: f64,
    pub value: f64,
    /// Cubes with their center in the ball.
    pub cubes: usize,
    /// Quadrature points skipped for lying in the guard band.
    pub skipped: usize,
    /// Cubes dropped at the finest generation.
    pub truncated: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlesonReport {
    pub entries: Vec<CarlesonEntry>,
    pub sup: f64,
}

/// Per quadrature point: `(vol·δ^{d-n}, F)`, or `None` inside the guard band.
struct Terms {
    points: Vec<Option<(f64, f64)>>,
    cubes: usize,
    truncated: usize,
}

fn terms(engine: &Engine, q: &[f64], r: f64, opts: &CarlesonOptions) -> Result<Terms> {
    let mu = engine.measure();
    check_scale(mu, r)?;
    let n = mu.ambient_dim();
    let d = mu.hausdorff_dim();
    let w = whitney_decompose(mu, q, r, opts.j_max);
    let cubes: Vec<_> = w
        .cubes
        .iter()
        .filter(|c| geom::norm(&geom::sub(&c.center, q)) < r)
        .collect();
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &cubes {
        if opts.refine {
            let sub = 1usize << n;
            for child in 0..sub {
                let x: Vec<f64> = (0..n)
                    .map(|k| c.center[k] + 0.25 * c.side * if child >> k & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                pts.push((x, c.volume() / sub as f64));
            }
        } else {
            pts.push((c.center.clone(), c.volume()));
        }
    }
    let evals = par::map(&pts, |(x, vol)| match engine.eval_field(x) {
        Ok(f) => Ok(Some((vol * f.delta.powf(d - n as f64), f.f))),
        Err(Error::TooCloseToSupport { .. }) => Ok(None),
        Err(e) => Err(e),
    });
    let points = evals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Terms {
        points,
        cubes: cubes.len(),
        truncated: w.truncated,
    })
}

fn entry(q: &[f64], r: f64, t: &Terms, value: f64) -> CarlesonEntry {
    CarlesonEntry {
        q: q.to_vec(),
        r,
        value,
        cubes: t.cubes,
        skipped: t.points.iter().filter(|p| p.is_none()).count(),
        truncated: t.truncated,
    }
}

/// `I(Q, r) = r^{-d} Σ vol·F(x_c)²·δ(x_c)^{d-n}` over Whitney cubes centered in `B(Q, r)`.
pub fn carleson_sum(engine: &Engine, q: &[f64], r: f64, opts: &CarlesonOptions) -> Result<CarlesonEntry> {
    let t = terms(engine, q, r, opts)?;
    let d = engine.measure().hausdorff_dim();
    let s: f64 = t.points.iter().flatten().map(|(wt, f)| wt * f * f).sum();
    Ok(entry(q, r, &t, s / r.powf(d)))
}

/// Content `r^{-d} Σ_{F > ε} vol·δ^{d-n}` of the superlevel set `{F > ε}`.
pub fn superlevel_content(engine: &Engine, eps: f64, q: &[f64], r: f64, opts: &CarlesonOptions) -> Result<CarlesonEntry> {
    let t = terms(engine, q, r, opts)?;
    let d = engine.measure().hausdorff_dim();
    let s: f64 = t.points.iter().flatten().filter(|(_, f)| *f > eps).map(|(wt, _)| wt).sum();
    Ok(entry(q, r, &t, s / r.powf(d)))
}

/// `r^{-d} Σ vol·δ^{d-n}` over all evaluated cubes: the content at `ε = -∞`.
pub fn weighted_volume(engine: &Engine, q: &[f64], r: f64, opts: &CarlesonOptions) -> Result<f64> {
    let t = terms(engine, q, r, opts)?;
    let d = engine.measure().hausdorff_dim();
    Ok(t.points.iter().flatten().map(|(wt, _)| wt).sum::<f64>() / r.powf(d))
}

/// Carleson sums over a list of `(Q, r)`; the sup is over all entries.
pub fn usfe_scan(engine: &Engine, grid: &[(Vec<f64>, f64)], opts: &CarlesonOptions) -> Result<CarlesonReport> {
    let mut entries = Vec::with_capacity(grid.len());
    for (q, r) in grid {
        entries.push(carleson_sum(engine, q, *r, opts)?);
    }
    let sup = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    Ok(CarlesonReport { entries, sup })
}

/// Every base point paired with every scale `2^{-j}`, `j ∈ js`.
pub fn dyadic_grid(base: &[Vec<f64>], js: std::ops::RangeInclusive<i32>) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    for q in base {
        for j in js.clone() {
            out.push((q.clone(), 2f64.powi(-j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SummationConfig;
    use crate::kernels::Kernel;
    use crate::measures::{generate, SetGenerator};

    #[test]
    fn plane_sum_vanishes() {
        let mu = generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: 50.0,
            spacing: 0.01,
        })
        .unwrap();
        let k = Kernel::constant(2, 1.0);
        let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute().with_tail(true)).unwrap();
        let opts = CarlesonOptions {
            j_max: Some(4),
            ..Default::default()
        };
        let c = carleson_sum(&e, &[0.0, 0.0], 1.0, &opts).unwrap();
        assert!(c.value <= 1e-8, "{}", c.value);
        assert!(c.cubes > 0);
        let z = superlevel_content(&e, 1e-6, &[0.0, 0.0], 1.0, &opts).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn scale_window_enforced() {
        let mu = generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: 4.0,
            spacing: 0.01,
        })
        .unwrap();
        let k = Kernel::constant(2, 1.0);
        let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
        let r = carleson_sum(&e, &[0.0, 0.0], 2.0, &CarlesonOptions::default());
        assert!(matches!(r, Err(Error::ScaleOutOfRange { .. })));
    }
}
