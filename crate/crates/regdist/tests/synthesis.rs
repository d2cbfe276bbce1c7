use regdist::synthesis::{build_constraints, null_space_search, plane_sampler, KernelBasis, SearchOptions};

#[test]
fn resolve_with_violated_rows_is_stable() {
    let basis = KernelBasis::fourier(2f64.powi(-12), 2f64.powi(12), 40, 2).unwrap();
    let (lo, hi) = (0.125 * basis.scale(), 8.0 * basis.scale());
    let mut train = build_constraints(&basis, &plane_sampler(2, 1, 100, lo, hi, 1).unwrap(), 1.0).unwrap();
    let hold = build_constraints(&basis, &plane_sampler(2, 1, 60, lo, hi, 2).unwrap(), 1.0).unwrap();
    let opts = SearchOptions::new(vec![1.0, 0.0]);
    let first = null_space_search(&basis, &train, &hold, &opts).unwrap();
    assert!(first.sup_norm >= 1e-3);

    let rel = hold.relative_residuals(&first.coefficients, first.sup_norm);
    let mut worst: Vec<usize> = (0..rel.len()).collect();
    worst.sort_by(|a, b| rel[*b].total_cmp(&rel[*a]));
    worst.truncate(10);
    train.extend_from(&hold, &worst);

    let second = null_space_search(&basis, &train, &hold, &opts).unwrap();
    let floor = 1e-12;
    assert!(
        second.training_residual <= 10.0 * first.training_residual.max(floor),
        "{} vs {}",
        second.training_residual,
        first.training_residual
    );
    assert!(
        second.holdout_residual <= 10.0 * first.holdout_residual.max(floor),
        "{} vs {}",
        second.holdout_residual,
        first.holdout_residual
    );
    let norm: f64 = second.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12 && second.sup_norm >= 1e-3);
}

#[test]
fn assembly_is_linear_in_coefficients() {
    let basis = KernelBasis::fourier(0.01, 100.0, 12, 1).unwrap();
    let m = basis.size();
    let a: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7).sin()).collect();
    let b: Vec<f64> = (0..m).map(|i| (i as f64 * 1.3).cos()).collect();
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    for x in [[0.3, 0.1], [1.0, -2.0], [-5.0, 0.5]] {
        let lhs = basis.assemble(&sum).value(&x);
        let rhs = 2.0 * basis.assemble(&a).value(&x) - 0.5 * basis.assemble(&b).value(&x);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}
