//! α-numbers: normalized Wasserstein-type distance from `μ` to flat measures
//! in a ball, via the dual linear program over grid Lipschitz functions.

use crate::error::{Error, Result};
use crate::geom;
use crate::measures::DiscreteMeasure;
use crate::special::ball_volume;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, SymmetricEigen};

/// The flat measure `density·H^d` on the plane through `origin` spanned by `basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatCandidate {
    pub origin: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaNumber {
    pub x: Vec<f64>,
    pub r: f64,
    /// `min` over candidates of `r^{-d-1} sup_f |∫f d(μ-ν)|`, grid version.
    pub value: f64,
    pub flat: FlatCandidate,
    /// Interpolation bound `(h√n/2)(μ(B)+ν(B))·r^{-d-1}` on how far the grid
    /// optimum can sit below the continuum sup.
    pub gap: f64,
    pub candidates: usize,
}

fn weighted_pca(pts: &[Vec<f64>], w: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = pts[0].len();
    let total: f64 = w.iter().map(|v| v.abs()).sum();
    let mut c = vec![0.0; n];
    for (p, wi) in pts.iter().zip(w) {
        for k in 0..n {
            c[k] += wi.abs() * p[k] / total;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for (p, wi) in pts.iter().zip(w) {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += wi.abs() * (p[i] - c[i]) * (p[j] - c[j]);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let basis = order[..d]
        .iter()
        .map(|&k| (0..n).map(|i| eig.eigenvectors[(i, k)]).collect())
        .collect();
    (c, basis)
}

/// The fitted plane and eight small rotations of it.
fn candidate_planes(center: &[f64], basis: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    let n = center.len();
    let mut out = vec![basis.to_vec()];
    let step = std::f64::consts::PI / 64.0;
    let angles = [step, -step, 2.0 * step, -2.0 * step];
    if n == 2 {
        for k in 1..=4 {
            for s in [1.0, -1.0] {
                let m = geom::rot2(s * k as f64 * step);
                out.push(basis.iter().map(|b| geom::mat_vec(&m, b)).collect());
            }
        }
        return out;
    }
    // Rotation axes that tilt the plane: in-plane directions for d = 2, normals for d = 1.
    let axes = if basis.len() == 2 {
        basis.to_vec()
    } else {
        super::normal_basis(basis, n)
    };
    for axis in axes.iter().take(2) {
        for a in angles {
            let m = geom::axis_angle(axis, a);
            out.push(basis.iter().map(|b| geom::mat_vec(&m, b)).collect());
        }
    }
    out
}

/// Grid LP for `sup_f ∫f d(μ-ν)` over `f` 1-Lipschitz between neighbouring
/// nodes and zero outside `B(x, r)`; returns the optimum (unnormalized).
pub fn lp_distance(atoms: &[(Vec<f64>, f64)], nu: &[(Vec<f64>, f64)], x: &[f64], r: f64, grid_res: usize) -> Result<f64> {
    let n = x.len();
    let g = grid_res.max(2);
    let h = 2.0 * r / g as f64;
    let side = g + 1;
    let total = side.pow(n as u32);
    let coord = |id: usize| -> Vec<f64> {
        let mut rem = id;
        (0..n)
            .map(|k| {
                let i = rem % side;
                rem /= side;
                x[k] - r + i as f64 * h
            })
            .collect()
    };
    let mut coeff = vec![0.0; total];
    let mut inside = vec![false; total];
    for (id, flag) in inside.iter_mut().enumerate() {
        *flag = geom::norm(&geom::sub(&coord(id), x)) < r;
    }
    let mut deposit = |y: &[f64], w: f64| {
        let mut base = 0usize;
        let mut stride = 1usize;
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let t = ((y[k] - (x[k] - r)) / h).clamp(0.0, g as f64 - 1e-12);
            let i = t.floor() as usize;
            frac[k] = t - i as f64;
            base += i * stride;
            stride *= side;
        }
        for corner in 0..(1usize << n) {
            let mut id = base;
            let mut wt = w;
            let mut stride = 1usize;
            for (k, fk) in frac.iter().enumerate() {
                if corner >> k & 1 == 1 {
                    id += stride;
                    wt *= fk;
                } else {
                    wt *= 1.0 - fk;
                }
                stride *= side;
            }
            coeff[id] += wt;
        }
    };
    for (y, w) in atoms {
        deposit(y, *w);
    }
    for (y, w) in nu {
        deposit(y, -*w);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut vars = vec![None; total];
    for id in 0..total {
        if inside[id] {
            let bound = r - geom::norm(&geom::sub(&coord(id), x));
            vars[id] = Some(lp.add_var(coeff[id], (-bound, bound)));
        }
    }
    // Half of the 3^n - 1 neighbour offsets, so each pair appears once.
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|m| (0..n).map(|k| (m / 3usize.pow(k as u32) % 3) as i64 - 1).collect::<Vec<i64>>())
        .filter(|o: &Vec<i64>| o.iter().rev().find(|&&v| v != 0).map_or(false, |&v| v > 0))
        .collect();
    for id in 0..total {
        let Some(vi) = vars[id] else { continue };
        let idx: Vec<i64> = (0..n).map(|k| (id / side.pow(k as u32) % side) as i64).collect();
        for o in &offsets {
            let nb: Vec<i64> = idx.iter().zip(o).map(|(a, b)| a + b).collect();
            if nb.iter().any(|&v| v < 0 || v >= side as i64) {
                continue;
            }
            let jd: usize = nb.iter().enumerate().map(|(k, &v)| v as usize * side.pow(k as u32)).sum();
            if let Some(vj) = vars[jd] {
                let len = h * (o.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
                lp.add_constraint(&[(vi, 1.0), (vj, -1.0)], ComparisonOp::Le, len);
                lp.add_constraint(&[(vi, -1.0), (vj, 1.0)], ComparisonOp::Le, len);
            }
        }
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::BadSpec(format!("transport linear program failed: {e}")))?;
    Ok(sol.objective().max(0.0))
}

/// Quadrature points of `ν` inside `B(x, r)` at spacing `step`.
pub fn flat_samples(flat: &FlatCandidate, x: &[f64], r: f64, step: f64) -> Vec<(Vec<f64>, f64)> {
    let d = flat.basis.len();
    let rel = geom::sub(x, &flat.origin);
    let mut p0 = flat.origin.clone();
    for b in &flat.basis {
        p0 = geom::axpy(geom::dot(&rel, b), b, &p0);
    }
    let dist = geom::norm(&geom::sub(x, &p0));
    if dist >= r || flat.density == 0.0 {
        return Vec::new();
    }
    let rad = (r * r - dist * dist).sqrt();
    let m = (rad / step).ceil() as i64;
    let w = flat.density * step.powi(d as i32);
    let mut out = Vec::new();
    let mut idx = vec![-m; d];
    loop {
        let s: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * step).collect();
        if s.iter().map(|v| v * v).sum::<f64>().sqrt() < rad {
            let mut y = p0.clone();
            for (si, b) in s.iter().zip(&flat.basis) {
                y = geom::axpy(*si, b, &y);
            }
            out.push((y, w));
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = -m;
            k += 1;
        }
    }
}

fn disk_measure(flat: &FlatCandidate, x: &[f64], r: f64) -> f64 {
    let d = flat.basis.len();
    let rel = geom::sub(x, &flat.origin);
    let tangential: f64 = flat.basis.iter().map(|b| geom::dot(&rel, b).powi(2)).sum();
    let dist2 = (geom::dot(&rel, &rel) - tangential).max(0.0);
    if dist2 >= r * r {
        return 0.0;
    }
    ball_volume(d as f64) * (r * r - dist2).powf(0.5 * d as f64)
}

pub fn alpha_number(mu: &DiscreteMeasure, x: &[f64], r: f64, grid_res: usize) -> Result<AlphaNumber> {
    let n = mu.ambient_dim();
    let d = mu.hausdorff_dim().round() as usize;
    if x.len() != n || d == 0 || d >= n {
        return Err(Error::UnsupportedDimension(n));
    }
    let ids = mu.index().within(x, r);
    let atoms: Vec<(Vec<f64>, f64)> = ids.iter().map(|&i| (mu.point(i).to_vec(), mu.weights()[i])).collect();
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    if atoms.len() <= d || !(mass > 1e-9 * r.powi(d as i32)) {
        return Err(Error::DegenerateFit { mass });
    }
    let pts: Vec<Vec<f64>> = atoms.iter().map(|a| a.0.clone()).collect();
    let ws: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    let (center, basis) = weighted_pca(&pts, &ws, d);
    let inner = mu.ball_mass(x, 0.5 * r);
    let h = 2.0 * r / grid_res.max(2) as f64;
    let norm = r.powf(-(d as f64) - 1.0);
    let mut best: Option<(f64, FlatCandidate, f64)> = None;
    let planes = candidate_planes(&center, &basis);
    let count = planes.len();
    for b in planes {
        let mut flat = FlatCandidate {
            origin: center.clone(),
            basis: b,
            density: 0.0,
        };
        let area = disk_measure(&flat, x, 0.5 * r);
        flat.density = if area > 0.0 { inner / area } else { 0.0 };
        let nu = flat_samples(&flat, x, r, 0.25 * h);
        let value = lp_distance(&atoms, &nu, x, r, grid_res)? * norm;
        let nu_mass: f64 = nu.iter().map(|p| p.1).sum();
        let gap = 0.5 * h * (n as f64).sqrt() * (mass + nu_mass) * norm;
        if best.as_ref().map_or(true, |(v, _, _)| value < *v) {
            best = Some((value, flat, gap));
        }
    }
    let (value, flat, gap) = best.expect("at least one candidate");
    Ok(AlphaNumber {
        x: x.to_vec(),
        r,
        value,
        flat,
        gap,
        candidates: count,
    })
}
