use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regdist::engine::{Engine, SummationConfig};
use regdist::measures::{dist_to_support, generate, DiscreteMeasure, SetGenerator};
use regdist::{par, Kernel};

fn queries(mu: &DiscreteMeasure, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut xs = Vec::with_capacity(count);
    while xs.len() < count {
        let x = vec![rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
        if dist_to_support(mu, &x) > 4.0 * mu.spacing() {
            xs.push(x);
        }
    }
    xs
}

fn threads(c: &mut Criterion) {
    let mu = generate(&SetGenerator::FourCornerCantor { generation: 6 }).unwrap();
    let k = Kernel::radial_expr(2, "1 + exp(-(log(t))^2)").unwrap();
    let xs = queries(&mu, 256);
    let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut g = c.benchmark_group("brute_4096_atoms_256_queries");
    let mut counts = vec![1, all];
    counts.dedup();
    for t in counts {
        g.bench_with_input(BenchmarkId::new("threads", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || e.eval_r_batch(&xs)))
        });
    }
    g.finish();
}

fn tree_vs_brute(c: &mut Criterion) {
    let k = Kernel::radial_expr(2, "1 + exp(-(log(t))^2)").unwrap();
    let mut g = c.benchmark_group("summation_64_queries");
    g.sample_size(10);
    for gen in [5u32, 7] {
        let mu = generate(&SetGenerator::FourCornerCantor { generation: gen }).unwrap();
        let xs = queries(&mu, 64);
        let brute = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
        let tree = Engine::new(&k, &mu, 1.0, SummationConfig::tree(0.5, 4).with_target(1e-6)).unwrap();
        g.bench_with_input(BenchmarkId::new("brute", mu.len()), &xs, |b, xs| b.iter(|| brute.eval_r_batch(xs)));
        g.bench_with_input(BenchmarkId::new("tree", mu.len()), &xs, |b, xs| b.iter(|| tree.eval_r_batch(xs)));
    }
    g.finish();
}

criterion_group!(benches, threads, tree_vs_brute);
criterion_main!(benches);
