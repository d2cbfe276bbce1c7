//! Rejection sampling of non-tangential cones `{x : |x-Q| ≤ R, δ(x) ≥ η|x-Q|}`.

use super::{dist_to_support, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::geom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug, PartialEq)]
pub struct Stratum {
    pub r_lo: f64,
    pub r_hi: f64,
    pub requested: usize,
    pub found: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeSamples {
    pub points: Vec<Vec<f64>>,
    pub strata: Vec<Stratum>,
}

impl ConeSamples {
    pub fn empty_strata(&self) -> usize {
        self.strata.iter().filter(|s| s.found == 0).count()
    }
}

/// Up to `count` cone points in the shell `r_lo ≤ |x-Q| ≤ r_hi`, honouring
/// the guard band `δ ≥ 2·spacing`.
pub fn cone_shell(
    mu: &DiscreteMeasure,
    q: &[f64],
    r_lo: f64,
    r_hi: f64,
    eta: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = q.len();
    let guard = 2.0 * mu.spacing();
    let mut out = Vec::with_capacity(count);
    let max_attempts = 400 * count.max(1);
    let (a, b) = (r_lo.powi(n as i32), r_hi.powi(n as i32));
    for _ in 0..max_attempts {
        if out.len() >= count {
            break;
        }
        let mut u: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let un = geom::norm(&u);
        if un == 0.0 {
            continue;
        }
        let rad = (a + rng.gen::<f64>() * (b - a)).powf(1.0 / n as f64);
        for (c, qc) in u.iter_mut().zip(q) {
            *c = qc + *c * rad / un;
        }
        let delta = dist_to_support(mu, &u);
        if delta >= eta * rad && delta >= guard {
            out.push(u);
        }
    }
    out
}

/// Samples `count` points of `Γ_{R,η}(Q)` stratified over dyadic shells
/// `[R/2^{k+1}, R/2^k]` down to the guard band.
pub fn nt_cone(mu: &DiscreteMeasure, q: &[f64], r: f64, eta: f64, count: usize, seed: u64) -> Result<ConeSamples> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::BadSpec(format!("cone aperture eta must lie in (0,1), got {eta}")));
    }
    if mu.nearest_atom_distance(q) > mu.spacing() {
        return Err(Error::BadSpec("cone vertex is not within one spacing of the support".into()));
    }
    let guard = 2.0 * mu.spacing();
    let mut shells = Vec::new();
    let mut hi = r;
    while hi / 2.0 >= guard / eta && shells.len() < 60 {
        shells.push((hi / 2.0, hi));
        hi /= 2.0;
    }
    if shells.is_empty() {
        return Err(Error::EmptyCone);
    }
    let per = count.div_ceil(shells.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut strata = Vec::new();
    for (lo, hi) in shells {
        let pts = cone_shell(mu, q, lo, hi, eta, per, &mut rng);
        strata.push(Stratum {
            r_lo: lo,
            r_hi: hi,
            requested: per,
            found: pts.len(),
        });
        points.extend(pts);
    }
    if points.is_empty() {
        return Err(Error::EmptyCone);
    }
    Ok(ConeSamples { points, strata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, SetGenerator};

    #[test]
    fn plane_cone_points_satisfy_definition() {
        let m = generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: 4.0,
            spacing: 1e-3,
        })
        .unwrap();
        let c = nt_cone(&m, &[0.0, 0.0], 1.0, 0.5, 200, 1).unwrap();
        assert!(!c.points.is_empty());
        for x in &c.points {
            assert!(x[1].abs() >= 0.5 * geom::norm(x) && geom::norm(x) <= 1.0);
        }
    }

    #[test]
    fn small_circle_cone_nonempty() {
        let m = generate(&SetGenerator::Sphere {
            n: 2,
            radius: 1.0,
            nodes: 100_000,
        })
        .unwrap();
        let c = nt_cone(&m, &[1.0, 0.0], 0.01, 0.9, 50, 2).unwrap();
        assert!(!c.points.is_empty());
    }
}
