use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regdist::diagnostics::{carleson_sum, CarlesonOptions};
use regdist::engine::{Engine, SummationConfig};
use regdist::geom;
use regdist::kernels::{rescale_kernel, Profile, SphereFn};
use regdist::measures::{dist_to_support, generate, rescale_measure, DiscreteMeasure, SetGenerator};
use regdist::Kernel;

fn circle() -> DiscreteMeasure {
    generate(&SetGenerator::Sphere {
        n: 2,
        radius: 1.0,
        nodes: 2048,
    })
    .unwrap()
}

fn kernel() -> Kernel {
    Kernel::product(
        2,
        Profile::parse("1 + exp(-(log(t))^2)").unwrap(),
        SphereFn::cosine(vec![1.0, 0.0, 0.3]),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_eval_contracts(x in -2.0f64..2.0, y in -2.0f64..2.0, alpha in 0.3f64..2.0) {
        let mu = circle();
        let k = kernel();
        prop_assume!(dist_to_support(&mu, &[x, y]) > 2.5 * mu.spacing());
        let e = Engine::new(&k, &mu, alpha, SummationConfig::brute()).unwrap();
        let f = e.eval_field(&[x, y]).unwrap();
        prop_assert!(f.r > 0.0 && f.d > 0.0);
        prop_assert!((f.d - f.r.powf(-1.0 / alpha)).abs() <= 1e-14 * f.d);
        let h = &f.hess_r;
        prop_assert!((h[0][1] - h[1][0]).abs() <= 1e-12 * geom::frobenius(h));
        prop_assert_eq!(f.f, f.delta * geom::norm(&f.grad_sq_grad_d));
    }
}

/// Per-decade extremes of `Rδ^α`, `|∇R|δ^{1+α}`, `|∇²R|δ^{2+α}` and `D/δ`.
fn decade_constants(e: &Engine, mu: &DiscreteMeasure, lo: f64, seed: u64) -> [(f64, f64); 4] {
    let alpha = e.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [(f64::INFINITY, 0.0f64); 4];
    let mut taken = 0;
    while taken < 200 {
        let p = mu.point(rng.gen_range(0..mu.len())).to_vec();
        let dir = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = lo * 10f64.powf(rng.gen_range(0.0..1.0));
        let x = vec![p[0] + s * dir.cos(), p[1] + s * dir.sin()];
        let delta = dist_to_support(mu, &x);
        if delta < lo || delta > 10.0 * lo {
            continue;
        }
        let f = e.eval_field(&x).unwrap();
        let v = [
            f.r * delta.powf(alpha),
            geom::norm(&f.grad_r) * delta.powf(1.0 + alpha),
            geom::frobenius(&f.hess_r) * delta.powf(2.0 + alpha),
            f.d / delta,
        ];
        for (o, v) in out.iter_mut().zip(v) {
            *o = (o.0.min(v), o.1.max(v));
        }
        taken += 1;
    }
    out
}

#[test]
fn crude_bounds_are_scale_stable() {
    let mu = generate(&SetGenerator::FourCornerCantor { generation: 7 }).unwrap();
    let k = Kernel::radial_expr(2, "1 + exp(-(log(t))^2)").unwrap();
    let e = Engine::new(&k, &mu, 1.0, SummationConfig::tree(0.5, 4).with_target(1e-6)).unwrap();
    let fine = decade_constants(&e, &mu, 4.0 * mu.spacing(), 1);
    let coarse = decade_constants(&e, &mu, 40.0 * mu.spacing(), 2);
    for (i, (a, b)) in fine.iter().zip(&coarse).enumerate() {
        assert!(a.0 > 0.0 && a.1.is_finite(), "constant {i}: {a:?}");
        // Upper constants for all four; lower ones only for R and D.
        let ratio = a.1 / b.1;
        assert!((0.5..=2.0).contains(&ratio), "upper constant {i}: {a:?} vs {b:?}");
        if i == 0 || i == 3 {
            let ratio = a.0 / b.0;
            assert!((0.5..=2.0).contains(&ratio), "lower constant {i}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn field_is_lipschitz_in_the_kernel() {
    let mu = circle();
    let k = Kernel::radial_expr(2, "1 + exp(-(log(t))^2)").unwrap();
    let one = Kernel::constant(2, 1.0);
    let e1 = Engine::new(&one, &mu, 1.0, SummationConfig::brute()).unwrap();
    let ek = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
    for eps in [1e-1, 1e-3, 1e-6] {
        let bump = Kernel::zero_homogeneous(2, SphereFn::cosine(vec![0.0, 0.0, eps]));
        let kj = Kernel::combination(2, vec![(1.0, k.clone()), (1.0, bump)]);
        let ej = Engine::new(&kj, &mu, 1.0, SummationConfig::brute()).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.2], [1.3, -0.4], [0.0, 3.0]] {
            let gap = (ej.eval_r(&x).unwrap().r - ek.eval_r(&x).unwrap().r).abs();
            let bound = eps * e1.eval_r(&x).unwrap().r;
            assert!(gap <= bound * (1.0 + 1e-12), "eps {eps} at {x:?}: {gap} > {bound}");
        }
    }
}

#[test]
fn carleson_sum_is_scale_invariant() {
    let mu = circle();
    let k = Kernel::radial_expr(2, "1 + exp(-(log(t))^2)").unwrap();
    let q = mu.point(0).to_vec();
    let opts = CarlesonOptions {
        refine: false,
        j_max: Some(6),
    };
    let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
    let base = carleson_sum(&e, &q, 0.5, &opts).unwrap();
    for s in [0.5, 4.0] {
        let ks = rescale_kernel(&k, s);
        let ms = rescale_measure(&mu, &q, s);
        let es = Engine::new(&ks, &ms, 1.0, SummationConfig::brute()).unwrap();
        let shifted = CarlesonOptions {
            j_max: Some(6 + s.log2() as i32),
            ..opts
        };
        let v = carleson_sum(&es, &[0.0, 0.0], 0.5 / s, &shifted).unwrap();
        assert!((v.value - base.value).abs() <= 1e-9 * base.value, "s = {s}: {} vs {}", v.value, base.value);
    }
}
