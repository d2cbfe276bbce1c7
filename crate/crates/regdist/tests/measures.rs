use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regdist::diagnostics::alpha_number;
use regdist::measures::{
    ahlfors_check, dist_to_support, generate, pairwise_disjoint, rescale_measure, whitney_decompose, DiscreteMeasure,
    GraphProfile, SetGenerator,
};

fn circle() -> DiscreteMeasure {
    generate(&SetGenerator::Sphere {
        n: 2,
        radius: 1.0,
        nodes: 1024,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rescaled_distance(i in 0usize..1024, lr in -3.0f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let mu = circle();
        let q = mu.point(i).to_vec();
        let r = 2f64.powf(lr);
        let scaled = rescale_measure(&mu, &q, r);
        let lhs = dist_to_support(&scaled, &[x, y]);
        let rhs = dist_to_support(&mu, &[r * x + q[0], r * y + q[1]]) / r;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-3), "{lhs} vs {rhs}");
    }
}

#[test]
fn rescaled_ahlfors_ratios() {
    let mu = generate(&SetGenerator::FourCornerCantor { generation: 5 }).unwrap();
    let (q, r) = (mu.point(17).to_vec(), 0.25);
    let scaled = rescale_measure(&mu, &q, r);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<(Vec<f64>, f64)> = (0..50)
        .map(|_| (mu.point(rng.gen_range(0..mu.len())).to_vec(), 2f64.powf(rng.gen_range(-4.0..-1.0))))
        .collect();
    let moved: Vec<(Vec<f64>, f64)> = samples
        .iter()
        .map(|(p, big_r)| (p.iter().zip(&q).map(|(a, b)| (a - b) / r).collect(), big_r / r))
        .collect();
    let a = ahlfors_check(&mu, &samples).unwrap();
    let b = ahlfors_check(&scaled, &moved).unwrap();
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        assert!((sa.2 - sb.2).abs() <= 1e-12 * sa.2, "{} vs {}", sa.2, sb.2);
    }
}

#[test]
fn whitney_cubes_disjoint() {
    for mu in [circle(), generate(&SetGenerator::FourCornerCantor { generation: 4 }).unwrap()] {
        let q = mu.point(0).to_vec();
        let w = whitney_decompose(&mu, &q, 0.5, Some(7));
        assert!(w.cubes.len() > 50);
        assert!(pairwise_disjoint(&w.cubes));
        for c in &w.cubes {
            assert!(c.side <= c.dist && c.dist <= 4.0 * c.diam(), "{c:?}");
        }
    }
}

#[test]
fn nearest_atom_tracks_exact_distance() {
    let gens = [
        SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: 10.0,
            spacing: 0.01,
        },
        SetGenerator::Plane {
            n: 3,
            d: 2,
            half_extent: 2.0,
            spacing: 0.05,
        },
        SetGenerator::Sphere {
            n: 3,
            radius: 1.0,
            nodes: 4000,
        },
        SetGenerator::LipschitzGraph {
            profile: GraphProfile::Sine {
                amplitude: 0.3,
                omega: 1.0,
            },
            lipschitz_bound: None,
            half_extent: 10.0,
            spacing: 0.01,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for g in &gens {
        let mu = generate(g).unwrap();
        let n = mu.ambient_dim();
        let exact = mu.exact().expect("generator has a closed-form distance");
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let gap = (mu.nearest_atom_distance(&x) - exact.eval(&x)).abs();
            assert!(gap <= mu.spacing(), "{g:?} at {x:?}: gap {gap}");
        }
    }
}

#[test]
fn alpha_number_is_translation_invariant() {
    let mu = generate(&SetGenerator::LipschitzGraph {
        profile: GraphProfile::Sine {
            amplitude: 0.3,
            omega: 1.0,
        },
        lipschitz_bound: None,
        half_extent: 4.0,
        spacing: 0.02,
    })
    .unwrap();
    let v = [0.75, -0.5];
    let moved = rescale_measure(&mu, &[-v[0], -v[1]], 1.0);
    for x in [[0.0, 0.0], [1.0, 0.3 * 1f64.sin()]] {
        let a = alpha_number(&mu, &x, 0.5, 24).unwrap();
        let b = alpha_number(&moved, &[x[0] + v[0], x[1] + v[1]], 0.5, 24).unwrap();
        assert!((a.value - b.value).abs() <= 1e-9 * a.value.max(1e-6), "{} vs {}", a.value, b.value);
    }
}
