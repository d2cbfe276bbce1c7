//! Adaptive Gauss–Kronrod (7/15) quadrature for scalar and vector integrands,
//! plus Gauss–Legendre rules.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tol {
    pub fn rel(rel: f64) -> Self {
        Tol {
            abs: 0.0,
            rel,
            max_intervals: 4000,
        }
    }
    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

impl Default for Tol {
    fn default() -> Self {
        Tol::rel(1e-8)
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    pub error: f64,
    pub evals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
    seq: usize,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error
            .total_cmp(&o.error)
            .then_with(|| o.seq.cmp(&self.seq))
    }
}

fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, m: usize, buf: &mut [f64]) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; m];
    let mut g = vec![0.0; m];
    f(c, buf);
    for i in 0..m {
        k[i] = WGK[7] * buf[i];
        g[i] = WG[3] * buf[i];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        for &x in &[c - dx, c + dx] {
            f(x, buf);
            for i in 0..m {
                k[i] += WGK[j] * buf[i];
                if j % 2 == 1 {
                    g[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..m {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).abs());
    }
    (k, err)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates a vector-valued function of length `m` over `[a, b]`.
/// Convergence is judged on the max-norm of the accumulated error.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    m: usize,
    a: f64,
    b: f64,
    tol: Tol,
    context: &str,
) -> Result<QuadResult> {
    let mut buf = vec![0.0; m];
    if a == b {
        return Ok(QuadResult {
            value: vec![0.0; m],
            error: 0.0,
            evals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&mut f, a, b, m, &mut buf);
    let mut total = v.clone();
    let mut err_total = e;
    let mut seq = 0usize;
    heap.push(Segment { a, b, value: v, error: e, seq });
    let mut evals = 15;
    loop {
        let target = tol.abs.max(tol.rel * norm_inf(&total));
        if err_total <= target || !err_total.is_finite() {
            break;
        }
        if heap.len() >= tol.max_intervals {
            break;
        }
        let s = heap.pop().expect("heap never empty");
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            heap.push(s);
            break;
        }
        let (v1, e1) = gk15(&mut f, s.a, mid, m, &mut buf);
        let (v2, e2) = gk15(&mut f, mid, s.b, m, &mut buf);
        evals += 30;
        for i in 0..m {
            total[i] += v1[i] + v2[i] - s.value[i];
        }
        err_total += e1 + e2 - s.error;
        seq += 1;
        heap.push(Segment { a: s.a, b: mid, value: v1, error: e1, seq });
        seq += 1;
        heap.push(Segment { a: mid, b: s.b, value: v2, error: e2, seq });
    }
    // Re-sum in positional order so the result does not depend on update history.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = vec![0.0; m];
    let mut error = 0.0;
    for s in &segs {
        for i in 0..m {
            value[i] += s.value[i];
        }
        error += s.error;
    }
    let target = tol.abs.max(tol.rel * norm_inf(&value));
    if !(error <= target) && !(error <= 1e-13 * norm_inf(&value)) {
        return Err(Error::QuadratureFailure {
            context: context.to_string(),
            estimate: error,
            tolerance: target,
        });
    }
    Ok(QuadResult { value, error, evals })
}

/// Scalar adaptive quadrature over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tol, context: &str) -> Result<(f64, f64)> {
    let r = integrate_vec(|x, out| out[0] = f(x), 1, a, b, tol, context)?;
    Ok((r.value[0], r.error))
}

/// Sums scalar integrals over consecutive breakpoints, with the relative
/// tolerance taken against the whole integral.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: Tol, context: &str) -> Result<f64> {
    Ok(integrate_vec_pieces(|x, out| out[0] = f(x), 1, breaks, tol, context)?[0])
}

/// Vector integral over consecutive breakpoints. A first coarse pass fixes the
/// overall magnitude so negligible pieces are not refined to their own relative
/// tolerance.
pub fn integrate_vec_pieces<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    m: usize,
    breaks: &[f64],
    tol: Tol,
    context: &str,
) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; m];
    let mut scale = 0.0f64;
    let mut coarse = vec![0.0; m];
    for w in breaks.windows(2) {
        let (v, _) = gk15(&mut f, w[0], w[1], m, &mut buf);
        for i in 0..m {
            coarse[i] += v[i];
        }
        scale = scale.max(norm_inf(&v));
    }
    scale = scale.max(norm_inf(&coarse));
    let piece_tol = Tol {
        abs: tol.abs.max(tol.rel * scale / (breaks.len() as f64).sqrt()),
        ..tol
    };
    let mut total = vec![0.0; m];
    for w in breaks.windows(2) {
        let r = integrate_vec(&mut f, m, w[0], w[1], piece_tol, context)?;
        for i in 0..m {
            total[i] += r.value[i];
        }
    }
    Ok(total)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre nodes and weights on [a, b].
pub fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for k in 0..order {
            xs.push(lo + 0.5 * h * (x[k] + 1.0));
            ws.push(0.5 * h * w[k]);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x| x * x * x + 2.0 * x, 0.0, 2.0, Tol::rel(1e-12), "t").unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let (v, _) = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tol::rel(1e-9), "t").unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn lorentzian_matches_arctan() {
        let (v, _) = integrate(|s| 1.0 / (1.0 + s * s), -50.0, 50.0, Tol::rel(1e-12), "t").unwrap();
        assert!((v - 2.0 * 50f64.atan()).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn vector_integrand() {
        let r = integrate_vec(
            |x, o| {
                o[0] = x.sin();
                o[1] = x.cos();
            },
            2,
            0.0,
            std::f64::consts::PI,
            Tol::rel(1e-12),
            "t",
        )
        .unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
    }

    #[test]
    fn failure_is_reported() {
        let tol = Tol {
            abs: 0.0,
            rel: 1e-14,
            max_intervals: 3,
        };
        let r = integrate(|x| (1.0 / x).sin(), 1e-4, 1.0, tol, "osc");
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
