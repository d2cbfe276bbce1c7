//! Blow-up sequences `|∇D_{K_r, μ_{Q,r}}(X)|` and rescaled plane profiles
//! `f_N(z) = 2^N D_K(2^{-N} z)`.

use crate::engine::{plane_eval, Engine, SummationConfig};
use crate::error::{Error, Result};
use crate::geom;
use crate::kernels::{rescale_kernel, Kernel};
use crate::measures::{rescale_measure, DiscreteMeasure};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupSequence {
    pub radii: Vec<f64>,
    /// `|∇D|` of the rescaled pair at `X`; `None` inside the guard band.
    pub values: Vec<Option<f64>>,
    /// `|∇D_{K,μ}(r X + Q)|` from the unscaled pair.
    pub direct: Vec<Option<f64>>,
    /// Largest relative gap between `values` and `direct`.
    pub identity_error: f64,
    /// `|v_{i+1} - v_i|` over consecutive available entries.
    pub diffs: Vec<f64>,
    /// Geometric mean of successive ratios of `diffs`.
    pub rate: Option<f64>,
}

impl BlowupSequence {
    pub fn last(&self) -> Option<f64> {
        self.values.iter().rev().flatten().next().copied()
    }
    pub fn skipped(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

fn finish(radii: &[f64], values: Vec<Option<f64>>, direct: Vec<Option<f64>>) -> BlowupSequence {
    let identity_error = values
        .iter()
        .zip(&direct)
        .filter_map(|(a, b)| Some((a.as_ref()?, b.as_ref()?)))
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .fold(0.0, f64::max);
    let avail: Vec<f64> = values.iter().flatten().copied().collect();
    let diffs: Vec<f64> = avail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let ratios: Vec<f64> = diffs
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let rate = if ratios.is_empty() {
        None
    } else {
        Some((ratios.iter().sum::<f64>() / ratios.len() as f64).exp())
    };
    BlowupSequence {
        radii: radii.to_vec(),
        values,
        direct,
        identity_error,
        diffs,
        rate,
    }
}

fn guarded(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::TooCloseToSupport { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn blowup_sequence(
    k: &Kernel,
    mu: &DiscreteMeasure,
    alpha: f64,
    q: &[f64],
    radii: &[f64],
    x: &[f64],
    config: SummationConfig,
) -> Result<BlowupSequence> {
    let base = Engine::new(k, mu, alpha, config)?;
    let mut values = Vec::with_capacity(radii.len());
    let mut direct = Vec::with_capacity(radii.len());
    for &r in radii {
        let kr = rescale_kernel(k, r);
        let mr = rescale_measure(mu, q, r);
        let e = Engine::new(&kr, &mr, alpha, config)?;
        values.push(guarded(e.eval_field(x).map(|f| f.grad_d_norm()))?);
        let y: Vec<f64> = x.iter().zip(q).map(|(a, b)| r * a + b).collect();
        direct.push(guarded(base.eval_field(&y).map(|f| f.grad_d_norm()))?);
    }
    Ok(finish(radii, values, direct))
}

/// Blow-up of the full plane through the origin spanned by `basis`, which is
/// invariant under `μ ↦ μ_{0,r}`; only the kernel is rescaled.
pub fn plane_blowup_sequence(k: &Kernel, alpha: f64, basis: &[Vec<f64>], radii: &[f64], x: &[f64]) -> Result<BlowupSequence> {
    let origin = vec![0.0; x.len()];
    let pairs = par::map(radii, |&r| -> Result<(f64, f64)> {
        let kr = rescale_kernel(k, r);
        let a = plane_eval(&kr, alpha, &origin, basis, x)?.grad_d_norm();
        let b = plane_eval(k, alpha, &origin, basis, &geom::scaled(x, r))?.grad_d_norm();
        Ok((a, b))
    });
    let mut values = Vec::new();
    let mut direct = Vec::new();
    for p in pairs {
        let (a, b) = p?;
        values.push(Some(a));
        direct.push(Some(b));
    }
    Ok(finish(radii, values, direct))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RescaledProfile {
    pub ns: Vec<i32>,
    pub points: Vec<Vec<f64>>,
    /// `f_N` at the points, one row per `N`.
    pub values: Vec<Vec<f64>>,
    /// Sup-norm differences between consecutive rows.
    pub diffs: Vec<f64>,
    /// Mean of `f_N(z)/|z|` over the last row.
    pub slope: f64,
}

/// `f_N(z) = 2^N D_K(2^{-N} z)` for the plane spanned by `basis`, at normal
/// points `z` with `1 ≤ |z| ≤ 2`.
pub fn rescaled_profile(
    k: &Kernel,
    alpha: f64,
    basis: &[Vec<f64>],
    ns: std::ops::RangeInclusive<i32>,
    points: &[Vec<f64>],
) -> Result<RescaledProfile> {
    for z in points {
        let nz = geom::norm(z);
        let tangential: f64 = basis.iter().map(|b| geom::dot(z, b).abs()).sum();
        if !(1.0..=2.0).contains(&nz) || tangential > 1e-12 * nz {
            return Err(Error::BadSpec(format!("profile point {z:?} is not in the normal annulus 1 ≤ |z| ≤ 2")));
        }
    }
    let origin = vec![0.0; k.ambient_dim()];
    let ns: Vec<i32> = ns.collect();
    let mut values = Vec::with_capacity(ns.len());
    for &nn in &ns {
        let s = 2f64.powi(-nn);
        let row = par::map(points, |z| -> Result<f64> {
            Ok(plane_eval(k, alpha, &origin, basis, &geom::scaled(z, s))?.d / s)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    let diffs = values
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        .collect();
    let slope = values
        .last()
        .map(|row| row.iter().zip(points).map(|(f, z)| f / geom::norm(z)).sum::<f64>() / points.len().max(1) as f64)
        .unwrap_or(f64::NAN);
    Ok(RescaledProfile {
        ns,
        points: points.to_vec(),
        values,
        diffs,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::flat_oracle;

    #[test]
    fn constant_profile_is_linear() {
        let k = Kernel::constant(2, 1.0);
        let basis = vec![vec![1.0, 0.0]];
        let pts = vec![vec![0.0, 1.0], vec![0.0, -1.5], vec![0.0, 2.0]];
        let p = rescaled_profile(&k, 1.0, &basis, 0..=4, &pts).unwrap();
        assert!(p.diffs.iter().all(|d| *d <= 1e-6));
        let a = flat_oracle(1.0, 1.0, 1.0, 1.0).grad_d_norm;
        assert!((p.slope - a).abs() < 1e-10);
    }

    #[test]
    fn plane_blowup_identity() {
        let k = Kernel::radial_expr(2, "1 + 0.5*exp(-t)").unwrap();
        let s = plane_blowup_sequence(&k, 1.0, &[vec![1.0, 0.0]], &[1.0, 0.5, 0.25], &[0.3, 1.0]).unwrap();
        assert!(s.identity_error < 1e-12, "{}", s.identity_error);
    }
}
