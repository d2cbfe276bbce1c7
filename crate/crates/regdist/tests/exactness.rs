use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regdist::exactness::{orthogonality_residuals, plane_integral, radial_orthogonality_integral, AffinePlane};
use regdist::geom;
use regdist::kernels::{rescale_kernel, Profile, SphereFn};
use regdist::Kernel;

#[test]
fn zero_kernel_integrates_to_zero() {
    let zero = Kernel::constant(2, 0.0);
    for d in [1.0, 2.0, 3.0] {
        assert_eq!(radial_orthogonality_integral(&zero, d, 1.0, 0.7).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // d/dr ∫ K t^{-(3+α)}(t²-r²) dt = -2r ∫ K t^{-(3+α)} dt.
    #[test]
    fn codimension_descent(lr in -1.5f64..1.5, alpha in 0.5f64..2.0) {
        let k = Kernel::radial_expr(3, "1 + exp(-(log(t))^2)").unwrap();
        let r = 10f64.powf(lr);
        let h = 1e-3 * r;
        let i4 = |r: f64| radial_orthogonality_integral(&k, 4.0, alpha, r).unwrap();
        // Fourth-order central difference.
        let fd = (-i4(r + 2.0 * h) + 8.0 * i4(r + h) - 8.0 * i4(r - h) + i4(r - 2.0 * h)) / (12.0 * h);
        let i2 = radial_orthogonality_integral(&k, 2.0, alpha + 2.0, r).unwrap();
        prop_assert!((fd + 2.0 * r * i2).abs() <= 1e-4 * (2.0 * r * i2).abs(), "{fd} vs {}", -2.0 * r * i2);
    }
}

fn random_lines(count: usize, seed: u64) -> Vec<AffinePlane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut e: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            e = geom::scaled(&e, 1.0 / geom::norm(&e));
            let c = geom::orthonormal_complement(&e);
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let nu = geom::axpy(a.cos(), &c[0], &geom::scaled(&c[1], a.sin()));
            AffinePlane::new(geom::scaled(&nu, 10f64.powf(rng.gen_range(-1.0..1.0))), vec![e]).unwrap()
        })
        .collect()
}

#[test]
fn even_homogeneous_kernels_are_not_orthogonal_to_lines() {
    let kernels = [
        vec![(1.0, [2, 0, 0]), (-1.0 / 3.0, [0, 0, 0])],
        vec![(1.0, [1, 1, 0])],
        vec![(1.0, [0, 2, 0]), (-1.0, [0, 0, 2])],
        vec![(1.0, [4, 0, 0]), (-0.2, [0, 0, 0])],
        vec![(1.0, [1, 0, 1]), (0.5, [0, 1, 1]), (0.2, [2, 2, 0])],
    ];
    let lines = random_lines(64, 9);
    for terms in kernels {
        let k = Kernel::zero_homogeneous(3, SphereFn::Poly { terms: terms.clone() });
        let sup = regdist::kernels::sampled_sup(&k, 0.5, 2.0, 3, 400);
        let res = orthogonality_residuals(&k, 1.0, &lines, sup).unwrap();
        let worst = res.iter().cloned().fold(0.0, f64::max);
        assert!(worst > 1e-3, "{terms:?}: max residual {worst:.3e}");
    }
}

fn plane2(angle: f64, dist: f64) -> AffinePlane {
    let nu = vec![angle.cos(), angle.sin()];
    AffinePlane::new(geom::scaled(&nu, dist), vec![vec![-angle.sin(), angle.cos()]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plane_integrals_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, angle in 0.0f64..std::f64::consts::TAU, ld in -1.0f64..1.0) {
        let k1 = Kernel::product(2, Profile::parse("exp(-(log(t))^2)").unwrap(), SphereFn::cosine(vec![0.0, 1.0, 0.5]));
        let k2 = Kernel::radial_expr(2, "1/(1 + t^2)").unwrap();
        let mix = Kernel::combination(2, vec![(a, k1.clone()), (b, k2.clone())]);
        let p = [plane2(angle, 10f64.powf(ld))];
        let r = |k: &Kernel| orthogonality_residuals(k, 1.0, &p, 1.0).unwrap()[0];
        prop_assert!(r(&mix) <= a.abs() * r(&k1) + b.abs() * r(&k2) + 1e-9);
    }

    #[test]
    fn plane_integrals_scale_covariantly(lr in -2.0f64..2.0, angle in 0.0f64..std::f64::consts::TAU, alpha in 0.5f64..1.5) {
        let k = Kernel::product(2, Profile::parse("exp(-(log(t))^2)").unwrap(), SphereFn::cosine(vec![0.2, 1.0, 0.5]));
        let s = 10f64.powf(lr);
        let lhs = plane_integral(&rescale_kernel(&k, s), alpha, &plane2(angle, 1.0)).unwrap();
        let rhs = s.powf(alpha) * plane_integral(&k, alpha, &plane2(angle, s)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-12), "{lhs} vs {rhs}");
    }
}
