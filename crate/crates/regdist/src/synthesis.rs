//! Numerical construction of distance-orthogonal kernels: a finite basis of
//! compactly supported radial splines times angular modes, one linear
//! constraint `∫_E K(z)|z|^{-d-α} dH^d(z) = 0` per sampled plane, a null-space
//! search, the two-stage smoothing, and the glued far-from-constant kernel.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::exactness::{orthogonality_residuals, AffinePlane};
use crate::geom;
use crate::kernels::{
    distance_standard_report, dyadic_lambdas, limit_profile, mode_name, parse_mode, profile_gap, radial_mollify,
    rotational_average, sampled_sup, write_modal_table, BSplineSum, DistanceStandardReport, End, Kernel, LogTable,
    MollifierSpec, Profile, ReportGrid, RotationWeight, SphereFn,
};
use crate::par;
use crate::quad::{self, Tol};
use crate::special::flat_constant;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;
use std::sync::Arc;

/// Tensor basis `B_j(|x|)·Y_m(x/|x|)`: `radial` cubic B-splines in `log t`
/// tiling `[r_min, r_max]`, times the angular `modes`. Index `m·radial + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBasis {
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub radial: usize,
    pub modes: Vec<SphereFn>,
    u0: f64,
    du: f64,
}

impl KernelBasis {
    pub fn new(n: usize, r_min: f64, r_max: f64, radial: usize, modes: Vec<SphereFn>) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if !(r_min > 0.0 && r_max > r_min) || radial == 0 || modes.is_empty() {
            return Err(Error::BadSpec("basis needs 0 < r_min < r_max, radial ≥ 1 and at least one mode".into()));
        }
        let (u0, du) = BSplineSum::uniform(r_min, r_max, radial);
        Ok(KernelBasis {
            n,
            r_min,
            r_max,
            radial,
            modes,
            u0,
            du,
        })
    }

    /// Planar basis with modes `1, cos θ, sin θ, …, cos Mθ, sin Mθ`.
    pub fn fourier(r_min: f64, r_max: f64, radial: usize, max_mode: usize) -> Result<Self> {
        let mut names = vec!["1".to_string()];
        for m in 1..=max_mode {
            names.push(format!("cos{m}"));
            names.push(format!("sin{m}"));
        }
        let modes = names.iter().map(|s| parse_mode(s)).collect::<Result<Vec<_>>>()?;
        Self::new(2, r_min, r_max, radial, modes)
    }

    pub fn size(&self) -> usize {
        self.radial * self.modes.len()
    }

    /// Geometric center `√(r_min r_max)` of the radial support.
    pub fn scale(&self) -> f64 {
        (self.r_min * self.r_max).sqrt()
    }

    fn knots(&self) -> Vec<f64> {
        (0..=self.radial + 3).map(|i| (self.u0 + i as f64 * self.du).exp()).collect()
    }

    /// All basis functions at `x`.
    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        let r = geom::norm(x);
        let w = geom::scaled(x, 1.0 / r);
        let mut out = vec![0.0; self.size()];
        for (m, f) in self.modes.iter().enumerate() {
            let y = f.eval(&w);
            for j in 0..self.radial {
                out[m * self.radial + j] = y * BSplineSum::basis(self.u0, self.du, j, &r);
            }
        }
        out
    }

    pub fn terms(&self, c: &[f64]) -> Vec<(Profile, SphereFn)> {
        self.modes
            .iter()
            .enumerate()
            .map(|(m, f)| {
                let coeffs = c[m * self.radial..(m + 1) * self.radial].to_vec();
                (
                    Profile::Spline(Arc::new(BSplineSum {
                        u0: self.u0,
                        du: self.du,
                        coeffs,
                    })),
                    f.clone(),
                )
            })
            .collect()
    }

    pub fn assemble(&self, c: &[f64]) -> Kernel {
        Kernel::modal(self.n, self.terms(c))
    }

    /// `∫_E b_k(z)|z|^{-d-α} dH^d(z)` for every basis function, one knot
    /// interval at a time in `t = |z| = ρ cosh u`.
    pub fn plane_row(&self, plane: &AffinePlane, alpha: f64) -> Result<Vec<f64>> {
        let rho = plane.distance();
        let nu = geom::scaled(&plane.offset, 1.0 / rho);
        let d = plane.dim();
        let nm = self.modes.len();
        let knots = self.knots();
        let mut row = vec![0.0; self.size()];
        let dirs: Vec<(Vec<f64>, f64)> = match d {
            1 => vec![(plane.basis[0].clone(), 1.0), (geom::scaled(&plane.basis[0], -1.0), 1.0)],
            2 => {
                let count = 32;
                (0..count)
                    .map(|j| {
                        let a = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                        (
                            geom::axpy(a.sin(), &plane.basis[1], &geom::scaled(&plane.basis[0], a.cos())),
                            2.0 * std::f64::consts::PI / count as f64,
                        )
                    })
                    .collect()
            }
            _ => return Err(Error::UnsupportedDimension(d)),
        };
        for i in 0..knots.len() - 1 {
            if knots[i + 1] <= rho {
                continue;
            }
            let ua = (knots[i].max(rho) / rho).acosh();
            let ub = (knots[i + 1] / rho).acosh();
            let first = i.saturating_sub(3);
            let last = i.min(self.radial - 1);
            if first > last {
                continue;
            }
            let width = last - first + 1;
            let f = |u: f64, out: &mut [f64]| {
                out.iter_mut().for_each(|o| *o = 0.0);
                let (sh, ch) = (u.sinh(), u.cosh());
                let t = rho * ch;
                let jac = if d == 1 { ch.powf(-alpha) } else { sh * ch.powf(-1.0 - alpha) };
                let b: Vec<f64> = (first..=last).map(|j| BSplineSum::basis(self.u0, self.du, j, &t)).collect();
                for (e, we) in &dirs {
                    let w = geom::scaled(&geom::axpy(sh, e, &nu), 1.0 / ch);
                    for (m, f) in self.modes.iter().enumerate() {
                        let y = f.eval(&w) * we * jac;
                        for (s, bv) in b.iter().enumerate() {
                            out[m * width + s] += y * bv;
                        }
                    }
                }
            };
            let r = match quad::integrate_vec(f, nm * width, ua, ub, Tol::rel(1e-12), "constraint entry") {
                Ok(r) => r,
                Err(_) => quad::integrate_vec(
                    f,
                    nm * width,
                    ua,
                    ub,
                    Tol {
                        max_intervals: 40_000,
                        ..Tol::rel(1e-9)
                    },
                    "constraint entry",
                )?,
            };
            for m in 0..nm {
                for s in 0..width {
                    row[m * self.radial + first + s] += r.value[m * width + s];
                }
            }
        }
        let scale = rho.powf(-alpha);
        row.iter_mut().for_each(|v| *v *= scale);
        Ok(row)
    }
}

/// Planes avoiding the origin, stratified over orientation and over
/// `log ρ ∈ [log lo, log hi]` (a Latin-hypercube pairing of the two strata).
pub fn plane_sampler(n: usize, d: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Result<Vec<AffinePlane>> {
    if !(n == 2 && d == 1 || n == 3 && (d == 1 || d == 2)) {
        return Err(Error::UnsupportedDimension(n));
    }
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::BadSpec("plane offsets need 0 < lo ≤ hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..count).collect();
    perm.shuffle(&mut rng);
    let mut out = Vec::with_capacity(count);
    for (j, &pj) in perm.iter().enumerate() {
        let rho = lo * (hi / lo).powf((pj as f64 + rng.gen::<f64>()) / count as f64);
        let plane = if n == 2 {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + rng.gen::<f64>()) / count as f64;
            let (s, c) = phi.sin_cos();
            AffinePlane::new(vec![rho * c, rho * s], vec![vec![-s, c]])?
        } else {
            let g: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let nu = geom::scaled(&g, 1.0 / geom::norm(&g));
            let comp = geom::orthonormal_complement(&nu);
            let basis = if d == 2 {
                comp
            } else {
                let a = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                vec![geom::axpy(a.sin(), &comp[1], &geom::scaled(&comp[0], a.cos()))]
            };
            AffinePlane::new(geom::scaled(&nu, rho), basis)?
        };
        out.push(plane);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    pub alpha: f64,
    pub planes: Vec<AffinePlane>,
    /// Rows scaled to unit Euclidean norm.
    pub rows: Vec<Vec<f64>>,
    /// Norm of each row before scaling.
    pub norms: Vec<f64>,
    /// Planes whose rows were dropped, with the reason.
    pub dropped: Vec<(AffinePlane, String)>,
    pub cols: usize,
}

impl ConstraintSystem {
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `|A c|` per row, in the unit-row scaling.
    pub fn residuals(&self, c: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| geom::dot(r, c).abs()).collect()
    }

    /// `|∫_E K|z|^{-d-α}| / (sup_norm·∫_E |z|^{-d-α})` per row.
    pub fn relative_residuals(&self, c: &[f64], sup_norm: f64) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.norms)
            .zip(&self.planes)
            .map(|((r, nrm), p)| {
                let flat = flat_constant(p.dim() as f64, self.alpha) * p.distance().powf(-self.alpha);
                geom::dot(r, c).abs() * nrm / (sup_norm * flat)
            })
            .collect()
    }

    /// Appends the rows of `other` at the given indices.
    pub fn extend_from(&mut self, other: &ConstraintSystem, idx: &[usize]) {
        for &i in idx {
            self.rows.push(other.rows[i].clone());
            self.norms.push(other.norms[i]);
            self.planes.push(other.planes[i].clone());
        }
    }
}

pub fn build_constraints(basis: &KernelBasis, planes: &[AffinePlane], alpha: f64) -> Result<ConstraintSystem> {
    let raw = par::map(planes, |p| basis.plane_row(p, alpha));
    let mut sys = ConstraintSystem {
        alpha,
        planes: Vec::new(),
        rows: Vec::new(),
        norms: Vec::new(),
        dropped: Vec::new(),
        cols: basis.size(),
    };
    for (p, r) in planes.iter().zip(raw) {
        match r {
            Ok(row) => {
                let nrm = geom::norm(&row);
                if !(nrm > 0.0) || !nrm.is_finite() {
                    sys.dropped.push((p.clone(), "plane misses the basis support".into()));
                    continue;
                }
                sys.rows.push(row.iter().map(|v| v / nrm).collect());
                sys.norms.push(nrm);
                sys.planes.push(p.clone());
            }
            Err(e @ Error::QuadratureFailure { .. }) => sys.dropped.push((p.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(sys)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub probe: Vec<f64>,
    /// Singular values below `null_tol·σ_max` span the numerical null space.
    pub null_tol: f64,
    /// Weight of the second-difference roughness penalty in the probe functional.
    pub smoothness: f64,
    pub ridge: f64,
}

impl SearchOptions {
    pub fn new(probe: Vec<f64>) -> Self {
        SearchOptions {
            probe,
            null_tol: 1e-10,
            smoothness: 1.0,
            ridge: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub coefficients: Vec<f64>,
    pub kernel: Kernel,
    pub probe: Vec<f64>,
    pub probe_value: f64,
    pub sup_norm: f64,
    /// `‖A c‖_∞` over the unit-scaled training rows.
    pub training_residual: f64,
    pub training_relative: f64,
    /// Largest holdout plane integral relative to the sup-norm kernel's.
    pub holdout_residual: f64,
    pub holdout_abs: f64,
    pub sigma_min: f64,
    pub sigma_second: f64,
    pub sigma_max: f64,
    pub null_dim: usize,
    pub rows: usize,
    pub cols: usize,
}

fn roughness(basis: &KernelBasis, smoothness: f64, ridge: f64) -> DMatrix<f64> {
    let m = basis.size();
    let mut h = DMatrix::<f64>::identity(m, m) * ridge;
    for mode in 0..basis.modes.len() {
        let off = mode * basis.radial;
        for j in 1..basis.radial.saturating_sub(1) {
            let idx = [off + j - 1, off + j, off + j + 1];
            let w = [1.0, -2.0, 1.0];
            for a in 0..3 {
                for b in 0..3 {
                    h[(idx[a], idx[b])] += smoothness * w[a] * w[b];
                }
            }
        }
    }
    h
}

/// Null vector of the training system maximizing `|K(x₀)|² / cᵀ(λG + ρI)c`,
/// where `G` penalizes second differences of the radial coefficients.
pub fn null_space_search(
    basis: &KernelBasis,
    train: &ConstraintSystem,
    holdout: &ConstraintSystem,
    opts: &SearchOptions,
) -> Result<SynthesisResult> {
    let m = basis.size();
    let rows = train.len();
    if m < rows + 10 {
        return Err(Error::BadSpec(format!("{m} basis functions for {rows} constraints; need at least rows + 10")));
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, r) in train.rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = sv[0];
    let sigma_min = sv[m - 1];
    let sigma_second = sv[m - 2];
    if sigma_min > 1e-6 * sigma_max {
        return Err(Error::DegenerateNullSpace {
            smallest: sigma_min,
            largest: sigma_max,
        });
    }
    let null: Vec<usize> = order.iter().copied().filter(|&i| svd.singular_values[i] <= opts.null_tol * sigma_max).collect();
    let null = if null.is_empty() { vec![order[m - 1]] } else { null };
    let p = null.len();
    let mut z = DMatrix::<f64>::zeros(m, p);
    for (c, &i) in null.iter().enumerate() {
        for r in 0..m {
            z[(r, c)] = vt[(i, r)];
        }
    }
    let e = DVector::from_vec(basis.eval_all(&opts.probe));
    let h = roughness(basis, opts.smoothness, opts.ridge);
    let zhz = z.transpose() * &h * &z;
    let b = z.transpose() * &e;
    let y = if b.norm() > 1e-14 * e.norm() {
        zhz.cholesky()
            .map(|ch| ch.solve(&b))
            .ok_or_else(|| Error::BadSpec("roughness penalty is not positive definite on the null space".into()))?
    } else {
        let mut y = DVector::zeros(p);
        y[p - 1] = 1.0;
        y
    };
    let mut c = &z * y;
    let nrm = c.norm();
    c /= nrm;
    if c.dot(&e) < 0.0 {
        c = -c;
    }
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let kernel = basis.assemble(&coefficients);
    let sup_norm = sampled_sup(&kernel, basis.r_min, basis.r_max, 1024, 64);
    let probe_value = kernel.value(&opts.probe);
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    Ok(SynthesisResult {
        training_residual: max(train.residuals(&coefficients)),
        training_relative: max(train.relative_residuals(&coefficients, sup_norm)),
        holdout_residual: max(holdout.relative_residuals(&coefficients, sup_norm)),
        holdout_abs: max(holdout.residuals(&coefficients)),
        coefficients,
        kernel,
        probe: opts.probe.clone(),
        probe_value,
        sup_norm,
        sigma_min,
        sigma_second,
        sigma_max,
        null_dim: null.len(),
        rows,
        cols: m,
    })
}

/// Re-expresses a planar kernel whose angular content is band-limited to
/// `|m| ≤ max_mode` as a Fourier-modal table on `[r_lo, r_hi]`.
pub fn tabulate_fourier(k: &Kernel, max_mode: usize, r_lo: f64, r_hi: f64, per_decade: usize) -> Result<Kernel> {
    if k.ambient_dim() != 2 {
        return Err(Error::UnsupportedDimension(k.ambient_dim()));
    }
    let decades = (r_hi / r_lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    let t: Vec<f64> = (0..count).map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / (count - 1) as f64)).collect();
    let angles = 4 * max_mode + 4;
    let th: Vec<f64> = (0..angles).map(|j| 2.0 * std::f64::consts::PI * j as f64 / angles as f64).collect();
    let samples: Vec<Vec<f64>> = par::map(&t, |&r| th.iter().map(|a| k.value(&[r * a.cos(), r * a.sin()])).collect());
    let mut terms = Vec::new();
    for m in 0..=max_mode {
        for (is_cos, name) in [(true, format!("cos{m}")), (false, format!("sin{m}"))] {
            if m == 0 && !is_cos {
                continue;
            }
            let norm = if m == 0 { 1.0 } else { 2.0 } / angles as f64;
            let y: Vec<f64> = samples
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&th)
                        .map(|(v, a)| v * if is_cos { (m as f64 * a).cos() } else { (m as f64 * a).sin() })
                        .sum::<f64>()
                        * norm
                })
                .collect();
            let mode = parse_mode(if m == 0 { "1" } else { &name })?;
            terms.push((Profile::Table(Arc::new(LogTable::new(&t, &y)?)), mode));
        }
    }
    Ok(Kernel::modal(2, terms))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingSpec {
    pub mollifier: MollifierSpec,
    pub rotation: RotationWeight,
    /// Table density used to re-express planar stages.
    pub per_decade: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub name: String,
    /// Largest plane residual relative to `sup|K̃|` of the unsmoothed kernel.
    pub residual: f64,
    pub inflation: f64,
    pub probe_value: f64,
}

#[derive(Clone, Debug)]
pub struct SmoothingReport {
    pub stages: Vec<StageReport>,
    pub kernel: Kernel,
    /// Positivity shift `M = 2 sup|K̃_smoothed|`.
    pub shift: f64,
    pub shifted: Kernel,
    /// Plane residual of `M + K̃_smoothed` relative to the constant `M`'s field.
    pub exact_residual: f64,
    pub standard: DistanceStandardReport,
}

/// Radial mollification, then rotational averaging, measuring the
/// orthogonality residual on `planes` after each stage. Planar stages are
/// re-tabulated per angular mode so later stages stay cheap to evaluate.
pub fn smooth_and_verify(
    basis: &KernelBasis,
    result: &SynthesisResult,
    spec: &SmoothingSpec,
    planes: &[AffinePlane],
    alpha: f64,
) -> Result<SmoothingReport> {
    let n = basis.n;
    let sup0 = result.sup_norm.max(f64::MIN_POSITIVE);
    let max_mode = basis
        .modes
        .iter()
        .map(|f| match f {
            SphereFn::Fourier { cos, sin } => cos.len().max(sin.len()).saturating_sub(1),
            SphereFn::Poly { .. } => 0,
        })
        .max()
        .unwrap_or(0);
    let (lo, hi) = (basis.r_min / spec.mollifier.hi, basis.r_max / spec.mollifier.lo);
    let settle = |k: Kernel| -> Result<Kernel> {
        if n == 2 && k.constant_value().is_none() {
            tabulate_fourier(&k, max_mode, lo, hi, spec.per_decade)
        } else {
            Ok(k)
        }
    };
    let worst = |k: &Kernel| -> Result<f64> {
        Ok(orthogonality_residuals(k, alpha, planes, sup0)?.into_iter().fold(0.0, f64::max))
    };
    let mut stages = Vec::new();
    let r0 = worst(&result.kernel)?;
    stages.push(StageReport {
        name: "synthesized".into(),
        residual: r0,
        inflation: 1.0,
        probe_value: result.kernel.value(&result.probe),
    });
    let k1 = settle(radial_mollify(&result.kernel, spec.mollifier.clone())?)?;
    let r1 = worst(&k1)?;
    stages.push(StageReport {
        name: "radial_mollify".into(),
        residual: r1,
        inflation: r1 / r0.max(f64::MIN_POSITIVE),
        probe_value: k1.value(&result.probe),
    });
    let k2 = settle(rotational_average(&k1, spec.rotation.clone())?)?;
    let r2 = worst(&k2)?;
    stages.push(StageReport {
        name: "rotational_average".into(),
        residual: r2,
        inflation: r2 / r1.max(f64::MIN_POSITIVE),
        probe_value: k2.value(&result.probe),
    });
    let sup2 = sampled_sup(&k2, lo, hi, 1024, 64);
    let shift = if sup2 > 0.0 { 2.0 * sup2 } else { 1.0 };
    let shifted = if sup2 > 0.0 {
        Kernel::combination(n, vec![(1.0, Kernel::constant(n, shift)), (1.0, k2.clone())])
    } else {
        Kernel::constant(n, shift)
    };
    let standard = distance_standard_report(&shifted, &ReportGrid::standard(n))?;
    Ok(SmoothingReport {
        stages,
        exact_residual: r2 * sup0 / shift,
        kernel: k2,
        shift,
        shifted,
        standard,
    })
}

#[derive(Clone, Debug)]
pub struct FarReport {
    pub kernel: Kernel,
    pub m: f64,
    pub scales: Vec<f64>,
    /// `K(√(a_ℓ a_{ℓ+1}) x₀)` per copy.
    pub probes: Vec<f64>,
    /// `M + (1-ε)|K̃(x₀)|`.
    pub probe_target: f64,
    /// Largest sampled `|K̃|` off each copy's plateau, and its budget `ε 2^{-ℓ}`.
    pub budget: Vec<(f64, f64)>,
    /// Sup-norm gap between the limit profiles along `√(a_ℓ a_{ℓ+1})` and `a_ℓ`.
    pub profile_gap: f64,
}

/// Largest sampled `|K̃|` on the radii a copy sees off its plateau, in the
/// copy's own variable `|x|/c`.
fn off_plateau_sup(k: &Kernel, scales: &[f64], i: usize) -> f64 {
    let (a, next) = (scales[i], scales[i + 1]);
    let c = (a * next).sqrt();
    let upper_lo = if i == 0 { a } else { a / 2.0 };
    let segs = [(next / 2.0 / c, 2.0 * next / c), (upper_lo / c, 2.0 * a / c)];
    segs.iter().map(|&(lo, hi)| sampled_sup(k, lo, hi, 64, 32)).fold(0.0, f64::max)
}

/// Validates a scale sequence against the decay budget and glues.
pub fn far_from_constant_with_scales(k: &Kernel, eps: f64, scales: Vec<f64>, m: f64, probe: &[f64]) -> Result<FarReport> {
    let mut budget = Vec::new();
    for i in 0..scales.len().saturating_sub(1) {
        let g = off_plateau_sup(k, &scales, i);
        let b = eps * 2f64.powi(-(i as i32 + 1));
        if g > b {
            return Err(Error::BudgetViolation {
                level: i + 1,
                value: g,
                budget: b,
            });
        }
        budget.push((g, b));
    }
    let glued = Kernel::glued(k, m, scales.clone())?;
    let g = glued.as_glued().cloned();
    let depth = scales.len() - 1;
    let centers: Vec<f64> = (0..depth)
        .map(|i| g.as_ref().map_or((scales[i] * scales[i + 1]).sqrt(), |g| g.center(i)))
        .collect();
    let probes = centers.iter().map(|c| glued.value(&geom::scaled(probe, *c))).collect();
    let kp = k.value(probe).abs();
    let along_centers = limit_profile(&glued, &centers);
    let along_scales = limit_profile(&glued, &scales[1..]);
    Ok(FarReport {
        profile_gap: profile_gap(&along_centers, &along_scales),
        kernel: glued,
        m,
        scales,
        probes,
        probe_target: m + (1.0 - eps) * kp,
        budget,
    })
}

/// Picks `a_{ℓ+1} = min(a_ℓ²/2^ℓ, a_ℓ/16)` and halves it until the copy's
/// off-plateau values meet `ε 2^{-ℓ}`, then glues `M + Σ φ_ℓ K̃(x/c_ℓ)` with
/// `M = 2 sup|K̃|`. `support` bounds the radii sampled for the sup.
pub fn far_from_constant(k: &Kernel, eps: f64, depth: usize, probe: &[f64], support: (f64, f64)) -> Result<FarReport> {
    if !(eps > 0.0 && eps < 0.5) || depth == 0 {
        return Err(Error::BadSpec("far_from_constant needs 0 < ε < 1/2 and depth ≥ 1".into()));
    }
    let sup = sampled_sup(k, support.0, support.1, 512, 64);
    for end in [End::Zero, End::Infinity] {
        let tail = limit_profile(k, &dyadic_lambdas(end, 60));
        let last = tail.limit().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if last > 1e-9 * sup.max(f64::MIN_POSITIVE) {
            return Err(Error::BadSpec(format!("kernel does not decay at {end:?}: sampled |K| = {last:e}")));
        }
    }
    let mut scales = vec![1.0];
    for i in 0..depth {
        let a = scales[i];
        let mut next = (a * a / 2f64.powi(i as i32 + 1)).min(a / 16.0);
        let b = eps * 2f64.powi(-(i as i32 + 1));
        let mut trial = scales.clone();
        trial.push(next);
        while off_plateau_sup(k, &trial, i) > b {
            next /= 2.0;
            if !(next > 1e-290) {
                return Err(Error::BudgetViolation {
                    level: i + 1,
                    value: off_plateau_sup(k, &trial, i),
                    budget: b,
                });
            }
            *trial.last_mut().expect("nonempty") = next;
        }
        scales.push(next);
    }
    let m = if sup > 0.0 { 2.0 * sup } else { 1.0 };
    far_from_constant_with_scales(k, eps, scales, m, probe)
}

/// Writes `<stem>.table` (modal table, 64 radii per decade) and
/// `<stem>.meta` (basis, coefficients and residuals as `key = value`).
pub fn save_synthesis(stem: &Path, basis: &KernelBasis, result: &SynthesisResult, seed: u64) -> Result<()> {
    let decades = (basis.r_max / basis.r_min).log10();
    let count = (decades * 64.0).ceil() as usize + 1;
    let t: Vec<f64> = (0..count)
        .map(|i| basis.r_min * (basis.r_max / basis.r_min).powf(i as f64 / (count - 1) as f64))
        .collect();
    write_modal_table(&stem.with_extension("table"), &basis.terms(&result.coefficients), &t)?;
    let mut c = Config::new();
    c.set("synth.n", basis.n);
    c.set("synth.r_min", basis.r_min);
    c.set("synth.r_max", basis.r_max);
    c.set("synth.radial", basis.radial);
    let names = basis.modes.iter().map(mode_name).collect::<Result<Vec<_>>>()?;
    c.set("synth.modes", names.join(","));
    c.set(
        "synth.coefficients",
        result.coefficients.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","),
    );
    c.set("synth.seed", seed);
    c.set("synth.probe", result.probe.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","));
    c.set("synth.probe_value", format!("{:?}", result.probe_value));
    c.set("synth.sup_norm", format!("{:?}", result.sup_norm));
    c.set("synth.training_residual", format!("{:?}", result.training_residual));
    c.set("synth.holdout_residual", format!("{:?}", result.holdout_residual));
    c.set("synth.sigma_min", format!("{:?}", result.sigma_min));
    c.set("synth.sigma_second", format!("{:?}", result.sigma_second));
    c.set("synth.sigma_max", format!("{:?}", result.sigma_max));
    c.set("synth.rows", result.rows);
    c.set("synth.cols", result.cols);
    std::fs::write(stem.with_extension("meta"), c.to_string())?;
    Ok(())
}

/// Rebuilds the exact spline kernel from a `.meta` sidecar.
pub fn load_synthesis(meta: &Path) -> Result<(KernelBasis, Vec<f64>)> {
    let c = Config::load(meta)?;
    let n = c.usize_or("synth.n", 2)?;
    let modes = c
        .require("synth.modes")?
        .split(',')
        .map(|s| parse_mode(s.trim()))
        .collect::<Result<Vec<_>>>()?;
    let basis = KernelBasis::new(
        n,
        c.require_f64("synth.r_min")?,
        c.require_f64("synth.r_max")?,
        c.usize_or("synth.radial", 0)?,
        modes,
    )?;
    let coeffs = c.f64_list("synth.coefficients")?.unwrap_or_default();
    if coeffs.len() != basis.size() {
        return Err(Error::Config(format!(
            "{}: {} coefficients for a basis of size {}",
            meta.display(),
            coeffs.len(),
            basis.size()
        )));
    }
    Ok((basis, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactness::plane_integral;

    fn small_basis() -> KernelBasis {
        KernelBasis::fourier(0.25, 16.0, 12, 1).unwrap()
    }

    #[test]
    fn rows_match_direct_plane_integrals() {
        let b = small_basis();
        let planes = plane_sampler(2, 1, 5, 0.5, 4.0, 3).unwrap();
        for p in &planes {
            let row = b.plane_row(p, 1.0).unwrap();
            for k in [0, 5, 13, 30] {
                let mut c = vec![0.0; b.size()];
                c[k] = 1.0;
                let direct = plane_integral(&b.assemble(&c), 1.0, p).unwrap();
                assert!((row[k] - direct).abs() <= 1e-9 * direct.abs().max(1e-3), "{k}: {} vs {direct}", row[k]);
            }
        }
    }

    #[test]
    fn far_planes_are_dropped() {
        let b = small_basis();
        let p = AffinePlane::new(vec![0.0, 20.0], vec![vec![1.0, 0.0]]).unwrap();
        let sys = build_constraints(&b, &[p], 1.0).unwrap();
        assert!(sys.is_empty());
        assert_eq!(sys.dropped.len(), 1);
    }

    #[test]
    fn sampler_is_stratified_and_deterministic() {
        let a = plane_sampler(2, 1, 32, 0.125, 8.0, 7).unwrap();
        assert_eq!(a, plane_sampler(2, 1, 32, 0.125, 8.0, 7).unwrap());
        let mut bins = [0usize; 32];
        for p in &a {
            let s = ((p.distance() / 0.125).ln() / (64f64).ln() * 32.0).floor() as usize;
            bins[s.min(31)] += 1;
        }
        assert!(bins.iter().all(|&c| c == 1));
        for p in plane_sampler(3, 2, 8, 1.0, 2.0, 1).unwrap() {
            assert!(geom::dot(&p.offset, &p.basis[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn null_vector_has_unit_norm_and_small_training_residual() {
        let b = small_basis();
        let train = build_constraints(&b, &plane_sampler(2, 1, 20, 0.5, 4.0, 1).unwrap(), 1.0).unwrap();
        let hold = build_constraints(&b, &plane_sampler(2, 1, 10, 0.5, 4.0, 2).unwrap(), 1.0).unwrap();
        let r = null_space_search(&b, &train, &hold, &SearchOptions::new(vec![1.5, 0.0])).unwrap();
        let norm: f64 = r.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(r.training_residual < 1e-8, "{}", r.training_residual);
        assert!(r.probe_value > 0.0);
        assert!(r.holdout_residual.is_finite());
    }

    #[test]
    fn empty_system_gives_any_unit_vector() {
        let b = small_basis();
        let empty = build_constraints(&b, &[], 1.0).unwrap();
        let r = null_space_search(&b, &empty, &empty, &SearchOptions::new(vec![1.5, 0.0])).unwrap();
        assert_eq!(r.null_dim, b.size());
        assert_eq!(r.training_residual, 0.0);
    }

    #[test]
    fn tabulation_reproduces_band_limited_kernel() {
        let b = small_basis();
        let c: Vec<f64> = (0..b.size()).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0).collect();
        let k = b.assemble(&c);
        let t = tabulate_fourier(&k, 1, b.r_min, b.r_max, 256).unwrap();
        for x in [[1.0, 0.5], [-3.0, 2.0], [0.3, -0.2]] {
            assert!((t.value(&x) - k.value(&x)).abs() < 1e-6, "{x:?}");
        }
    }

    #[test]
    fn meta_round_trip() {
        let b = small_basis();
        let empty = build_constraints(&b, &[], 1.0).unwrap();
        let r = null_space_search(&b, &empty, &empty, &SearchOptions::new(vec![1.5, 0.0])).unwrap();
        let dir = std::env::temp_dir().join(format!("regdist-synth-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("k");
        save_synthesis(&stem, &b, &r, 9).unwrap();
        let (b2, c2) = load_synthesis(&stem.with_extension("meta")).unwrap();
        assert_eq!(b2, b);
        assert_eq!(c2, r.coefficients);
        let tab = crate::kernels::read_table(&stem.with_extension("table"), 2).unwrap();
        assert!((tab.value(&[1.5, 0.0]) - r.probe_value).abs() < 1e-6);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn zero_kernel_smooths_to_constant() {
        let b = small_basis();
        let r = SynthesisResult {
            coefficients: vec![0.0; b.size()],
            kernel: Kernel::constant(2, 0.0),
            probe: vec![1.5, 0.0],
            probe_value: 0.0,
            sup_norm: 0.0,
            training_residual: 0.0,
            training_relative: 0.0,
            holdout_residual: 0.0,
            holdout_abs: 0.0,
            sigma_min: 0.0,
            sigma_second: 0.0,
            sigma_max: 0.0,
            null_dim: 0,
            rows: 0,
            cols: b.size(),
        };
        let spec = SmoothingSpec {
            mollifier: MollifierSpec::bump(0.8, 1.25),
            rotation: RotationWeight::Bump { max_angle: 0.2, nodes: 256 },
            per_decade: 64,
        };
        let planes = plane_sampler(2, 1, 3, 0.5, 2.0, 5).unwrap();
        let s = smooth_and_verify(&b, &r, &spec, &planes, 1.0).unwrap();
        assert_eq!(s.kernel.constant_value(), Some(0.0));
        assert_eq!(s.exact_residual, 0.0);
        assert!(s.shifted.constant_value().is_some());
    }

    #[test]
    fn single_copy_probe_is_shifted_value() {
        let k = Kernel::product(2, Profile::parse("exp(-4*log(t)^2)").unwrap(), SphereFn::cosine(vec![0.0, 0.0, 1.0]));
        let f = far_from_constant(&k, 0.1, 1, &[1.5, 0.0], (1e-3, 1e3)).unwrap();
        let want = f.m + k.value(&[1.5, 0.0]);
        assert!((f.probes[0] - want).abs() < 1e-12, "{} vs {want}", f.probes[0]);
        assert!(f.probes[0] >= f.probe_target);
    }
}
