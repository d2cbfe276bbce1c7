//! Oscillation of `|∇D|` over non-tangential cones, one dyadic shell per scale.

use super::trusted_scales;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::measures::cone_shell;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ConeScale {
    /// Outer radius `R_k`; samples lie in `R_k/2 ≤ |x-Q| ≤ R_k`.
    pub r: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub osc: f64,
    pub samples: usize,
    /// True when the shell held no admissible sample or lies outside the trusted window.
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeOscillation {
    pub q: Vec<f64>,
    pub eta: f64,
    pub scales: Vec<ConeScale>,
    /// Mean of `|∇D|` at the finest non-skipped scale.
    pub limit: Option<f64>,
}

impl ConeOscillation {
    pub fn trusted(&self) -> impl Iterator<Item = &ConeScale> {
        self.scales.iter().filter(|s| !s.skipped)
    }
    /// Smallest oscillation over the trusted scales.
    pub fn floor(&self) -> f64 {
        self.trusted().map(|s| s.osc).fold(f64::INFINITY, f64::min)
    }
}

/// `2^{-k}` for `k` in `ks`, strictly decreasing.
pub fn dyadic_scales(ks: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    ks.map(|k| 2f64.powi(-k)).collect()
}

pub fn cone_oscillation(
    engine: &Engine,
    q: &[f64],
    eta: f64,
    scales: &[f64],
    samples_per_scale: usize,
    seed: u64,
) -> Result<ConeOscillation> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::BadSpec(format!("cone aperture eta must lie in (0,1), got {eta}")));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadSpec("cone scales must be strictly decreasing".into()));
    }
    let mu = engine.measure();
    let (lo, hi) = trusted_scales(mu);
    let mut out = Vec::with_capacity(scales.len());
    for (k, &r) in scales.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let pts = if r / 2.0 >= lo && r <= hi {
            cone_shell(mu, q, r / 2.0, r, eta, samples_per_scale, &mut rng)
        } else {
            Vec::new()
        };
        let vals = engine
            .eval_batch(&pts)
            .into_iter()
            .map(|f| f.map(|f| f.grad_d_norm()))
            .collect::<Result<Vec<f64>>>()?;
        let skipped = vals.is_empty();
        let (min, max, mean) = if skipped {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (min, max, vals.iter().sum::<f64>() / vals.len() as f64)
        };
        out.push(ConeScale {
            r,
            min,
            max,
            mean,
            osc: if skipped { f64::NAN } else { max - min },
            samples: vals.len(),
            skipped,
        });
    }
    if out.iter().all(|s| s.skipped) {
        return Err(Error::EmptyCone);
    }
    let limit = out.iter().rev().find(|s| !s.skipped).map(|s| s.mean);
    Ok(ConeOscillation {
        q: q.to_vec(),
        eta,
        scales: out,
        limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SummationConfig;
    use crate::kernels::Kernel;
    use crate::measures::{generate, SetGenerator};

    #[test]
    fn plane_oscillation_is_tiny() {
        let mu = generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: 100.0,
            spacing: 0.01,
        })
        .unwrap();
        let k = Kernel::constant(2, 1.0);
        let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute().with_tail(true)).unwrap();
        let c = cone_oscillation(&e, &[0.0, 0.0], 0.5, &dyadic_scales(-2..=2), 8, 1).unwrap();
        assert_eq!(c.trusted().count(), 5);
        for s in c.trusted() {
            assert!(s.osc <= 1e-6, "{s:?}");
        }
        assert!((c.limit.unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn rejects_increasing_scales() {
        let mu = generate(&SetGenerator::Sphere {
            n: 2,
            radius: 1.0,
            nodes: 1000,
        })
        .unwrap();
        let k = Kernel::constant(2, 1.0);
        let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
        assert!(cone_oscillation(&e, &[1.0, 0.0], 0.5, &[0.1, 0.2], 4, 0).is_err());
    }
}
