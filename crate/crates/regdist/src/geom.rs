//! Small geometric helpers: direction sets, rotations, vector arithmetic.

use std::f64::consts::PI;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// `count` equally spaced unit vectors on the circle, starting at angle `phase`.
pub fn circle_directions(count: usize, phase: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let t = phase + 2.0 * PI * k as f64 / count as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// Fibonacci lattice on S², `count` nearly equal-area points.
pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Standard direction set on S^{n-1} for n = 2 or 3.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => circle_directions(count, 0.0),
        _ => fibonacci_sphere(count),
    }
}

pub type Mat3 = [[f64; 3]; 3];

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_matrix(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Rotation by `angle` about the unit vector `axis`.
pub fn axis_angle(axis: &[f64], angle: f64) -> Mat3 {
    let (s, c) = (0.5 * angle).sin_cos();
    quat_to_matrix([c, s * axis[0], s * axis[1], s * axis[2]])
}

/// Super-Fibonacci spiral: `count` quasi-uniform unit quaternions covering SO(3)
/// (Alexa's construction with constants √2 and the root 1.5337511687552043).
pub fn super_fibonacci(count: usize) -> Vec<[f64; 4]> {
    let phi = 2f64.sqrt();
    let psi = 1.533_751_168_755_204_3;
    (0..count)
        .map(|i| {
            let s = i as f64 + 0.5;
            let r = (s / count as f64).sqrt();
            let big_r = (1.0 - s / count as f64).sqrt();
            let a = 2.0 * PI * s / phi;
            let b = 2.0 * PI * s / psi;
            [r * a.sin(), r * a.cos(), big_r * b.sin(), big_r * b.cos()]
        })
        .collect()
}

pub fn rot2(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat_vec(m: &Mat3, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| (0..n).map(|k| m[i][k] * v[k]).sum()).collect()
}

/// Orthonormal completion: returns `n - 1` unit vectors orthogonal to unit `u`.
pub fn orthonormal_complement(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        let p = dot(&v, u);
        v = axpy(-p, u, &v);
        for b in &basis {
            let p = dot(&v, b);
            v = axpy(-p, b, &v);
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            basis.push(scaled(&v, 1.0 / nv));
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}
