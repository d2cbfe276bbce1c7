//! Whitney decomposition of `B(Q, r) ∖ E` into dyadic cubes anchored at `Q`.

use super::DiscreteMeasure;
use crate::geom;

#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyCube {
    pub center: Vec<f64>,
    /// `2^{-generation}`.
    pub side: f64,
    pub generation: i32,
    /// Distance from the cube to the atoms.
    pub dist: f64,
}

impl WhitneyCube {
    pub fn diam(&self) -> f64 {
        self.side * (self.center.len() as f64).sqrt()
    }
    pub fn volume(&self) -> f64 {
        self.side.powi(self.center.len() as i32)
    }
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= 0.5 * self.side)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyResult {
    pub cubes: Vec<WhitneyCube>,
    /// Cubes at the finest generation that still touched the support.
    pub truncated: usize,
    pub max_generation: i32,
}

/// Dyadic cubes meeting `B(Q, r)` with `side ≤ dist(cube, atoms)`, refined
/// until accepted or down to generation `j_max` (default: the finest
/// generation with side ≥ atom spacing). Children of a rejected cube satisfy
/// `dist ≤ 4·diam` automatically, so the accepted cubes obey the convention
/// `side ≤ dist ≤ 4·diam`.
pub fn whitney_decompose(mu: &DiscreteMeasure, q: &[f64], r: f64, j_max: Option<i32>) -> WhitneyResult {
    let n = mu.ambient_dim();
    let j0 = -(r.log2().ceil() as i32);
    let j_max = j_max.unwrap_or_else(|| (-mu.spacing().log2()).floor() as i32).max(j0);
    let side0 = 2f64.powi(-j0);
    let mut stack: Vec<(Vec<f64>, i32)> = Vec::new();
    for corner in 0..(1usize << n) {
        let lo: Vec<f64> = (0..n)
            .map(|k| q[k] + if corner >> k & 1 == 1 { 0.0 } else { -side0 })
            .collect();
        stack.push((lo, j0));
    }
    // Depth-first in a fixed child order so output order is deterministic.
    stack.reverse();
    let mut cubes = Vec::new();
    let mut truncated = 0;
    while let Some((lo, j)) = stack.pop() {
        let side = 2f64.powi(-j);
        let hi: Vec<f64> = lo.iter().map(|v| v + side).collect();
        let center: Vec<f64> = lo.iter().map(|v| v + 0.5 * side).collect();
        let mut gap = 0.0;
        for k in 0..n {
            let d = (lo[k] - q[k]).max(q[k] - hi[k]).max(0.0);
            gap += d * d;
        }
        if gap.sqrt() >= r {
            continue;
        }
        let dist = mu.index().box_distance(&lo, &hi);
        if dist >= side {
            cubes.push(WhitneyCube {
                center,
                side,
                generation: j,
                dist,
            });
            continue;
        }
        if j >= j_max {
            truncated += 1;
            continue;
        }
        let half = 0.5 * side;
        for child in (0..(1usize << n)).rev() {
            let clo: Vec<f64> = (0..n).map(|k| lo[k] + if child >> k & 1 == 1 { half } else { 0.0 }).collect();
            stack.push((clo, j + 1));
        }
    }
    WhitneyResult {
        cubes,
        truncated,
        max_generation: j_max,
    }
}

/// True when no two cubes overlap in their interiors.
pub fn pairwise_disjoint(cubes: &[WhitneyCube]) -> bool {
    for (i, a) in cubes.iter().enumerate() {
        for b in &cubes[i + 1..] {
            let overlap = a
                .center
                .iter()
                .zip(&b.center)
                .all(|(x, y)| (x - y).abs() < 0.5 * (a.side + b.side) - 1e-15 * (a.side + b.side));
            if overlap {
                return false;
            }
        }
    }
    true
}

/// Monte-Carlo fraction of `{x ∈ B(Q,r): δ(x) ≥ spacing}` covered by the cubes.
pub fn coverage_fraction(mu: &DiscreteMeasure, q: &[f64], r: f64, cubes: &[WhitneyCube], samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = q.len();
    let (mut hit, mut total) = (0usize, 0usize);
    while total < samples {
        let x: Vec<f64> = (0..n).map(|k| q[k] + rng.gen_range(-r..r)).collect();
        if geom::norm(&geom::sub(&x, q)) >= r || mu.nearest_atom_distance(&x) < mu.spacing() {
            continue;
        }
        total += 1;
        if cubes.iter().any(|c| c.contains(&x)) {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, SetGenerator};

    #[test]
    fn line_cubes_satisfy_convention() {
        let m = generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: 4.0,
            spacing: 1.0 / 64.0,
        })
        .unwrap();
        let w = whitney_decompose(&m, &[0.0, 0.0], 1.0, None);
        assert!(!w.cubes.is_empty());
        for c in &w.cubes {
            assert!(c.side <= c.dist && c.dist <= 4.0 * c.diam(), "{c:?}");
        }
        assert!(pairwise_disjoint(&w.cubes));
    }

    #[test]
    fn circle_coverage() {
        let m = generate(&SetGenerator::Sphere {
            n: 2,
            radius: 1.0,
            nodes: 2048,
        })
        .unwrap();
        let q = [1.0, 0.0];
        let w = whitney_decompose(&m, &q, 0.5, None);
        let f = coverage_fraction(&m, &q, 0.5, &w.cubes, 20_000, 3);
        assert!(f >= 0.99, "{f}");
    }
}
