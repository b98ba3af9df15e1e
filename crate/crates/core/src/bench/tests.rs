use super::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn dense_grid(ds: &Dataset, n: usize) -> Vec<f64> {
    ds.grid(n).unwrap()
}

#[test]
fn dataset_sigma_extrema() {
    assert_eq!(Dataset::G.sigma(&[0.0]), 0.5);
    assert_eq!(Dataset::G.sigma(&[1.0]), 1.0);
    let extrema = |ds: Dataset| {
        let s: Vec<f64> = dense_grid(&ds, 100_001).iter().map(|&x| ds.sigma(&[x])).collect();
        (s.iter().cloned().fold(f64::INFINITY, f64::min), s.iter().cloned().fold(0.0, f64::max))
    };
    let (lo, hi) = extrema(Dataset::Y);
    assert!((lo - (-1f64).exp() / 3.0).abs() < 1e-9 && (hi - 1f64.exp() / 3.0).abs() < 1e-9);
    let (lo, hi) = extrema(Dataset::W);
    assert!((lo - 0.01).abs() < 1e-9 && (hi - 1.01).abs() < 1e-9);
}

#[test]
fn five_d_sigma_range() {
    // σ depends on Σx only; sweep the sum over [0, 5]
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..=100_000 {
        let s = 5.0 * k as f64 / 100_000.0;
        let v = Dataset::FiveD.sigma(&[s / 5.0; 5]);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    assert!((lo - 0.09).abs() < 1e-9, "{lo}");
    assert!((hi - 0.99).abs() < 1e-9, "{hi}");
    assert!(lo >= 0.09 - 1e-12 && hi <= 0.99 + 1e-12);
}

#[test]
fn generate_is_deterministic() {
    let spec = DatasetSpec { dataset: Dataset::Y, n: 50, seed: 42 };
    assert_eq!(generate(&spec), generate(&spec));
    let other = generate(&DatasetSpec { seed: 43, ..spec.clone() });
    assert_ne!(generate(&spec), other);
}

#[test]
fn generate_respects_domain() {
    let s = generate(&DatasetSpec { dataset: Dataset::W, n: 500, seed: 1 });
    assert!(s.inputs.iter().all(|x| (0.0..=std::f64::consts::PI).contains(&x[0])));
    let s = generate(&DatasetSpec { dataset: Dataset::FiveD, n: 200, seed: 1 });
    assert!(s.inputs.iter().all(|x| x.len() == 5 && x.iter().all(|v| (0.0..=1.0).contains(v))));
    assert!(s.true_mean.iter().all(|&m| m == 0.0));
}

#[test]
fn standardized_residuals_are_standard_normal() {
    let s = generate(&DatasetSpec { dataset: Dataset::G, n: 20_000, seed: 9 });
    let z: Vec<f64> = (0..s.len()).map(|i| (s.targets[i] - s.true_mean[i]) / s.true_sigma[i]).collect();
    let (m, sd) = mean_std(&z);
    assert!(m.abs() < 0.03 && (sd - 1.0).abs() < 0.03);
}

#[test]
fn nlpd_examples() {
    let t: Vec<ForecastTriple> = (0..5).map(|i| ForecastTriple::new(i as f64, 1.0, i as f64).unwrap()).collect();
    assert!((nlpd(&t).unwrap() - 0.918_938_533_204_672_7).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t: Vec<ForecastTriple> =
        (0..10_000).map(|_| ForecastTriple::new(0.0, 1.0, rng.sample(StandardNormal)).unwrap()).collect();
    assert!((nlpd(&t).unwrap() - 1.418_938_533).abs() < 0.02);

    let a: Vec<ForecastTriple> = (0..7).map(|i| ForecastTriple::new(1.0, 0.3 + i as f64, 1.0).unwrap()).collect();
    let b: Vec<ForecastTriple> = a.iter().map(|t| ForecastTriple::new(t.mu, t.sigma / 2.0, t.y_obs).unwrap()).collect();
    assert!((nlpd(&a).unwrap() - nlpd(&b).unwrap() - 2f64.ln()).abs() < 1e-14);
    assert!(nlpd(&[]).is_err());
}

#[test]
fn nlpd_matches_direct_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t: Vec<ForecastTriple> = (0..200)
        .map(|_| {
            ForecastTriple::new(rng.random_range(-2.0..2.0), rng.random_range(0.3..3.0), rng.random_range(-4.0..4.0))
                .unwrap()
        })
        .collect();
    let direct = t
        .iter()
        .map(|t| {
            let z = (t.y_obs - t.mu) / t.sigma;
            -((-0.5 * z * z).exp() / (t.sigma * (2.0 * std::f64::consts::PI).sqrt())).ln()
        })
        .sum::<f64>()
        / t.len() as f64;
    assert!((nlpd(&t).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn quartiles_by_linear_interpolation() {
    let q = quartiles(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
    assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
    let q = quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
    let q = quartiles(&[7.0]).unwrap();
    assert_eq!((q.q1, q.median, q.q3), (7.0, 7.0, 7.0));
    assert_eq!(quantile(&[10.0, 0.0], 0.3).unwrap(), 3.0);
    assert!(quartiles(&[]).is_err());
    assert!(quantile(&[1.0], 1.5).is_err());
}

#[test]
fn seeds_depend_on_dataset_and_run_only() {
    let a = RunSeeds::new(7, &Dataset::G, 3);
    assert_eq!(a, RunSeeds::new(7, &Dataset::G, 3));
    assert_ne!(a, RunSeeds::new(7, &Dataset::G, 4));
    assert_ne!(a, RunSeeds::new(7, &Dataset::Y, 3));
    assert_ne!(a, RunSeeds::new(8, &Dataset::G, 3));
    let all = [a.data, a.test, a.mean, a.fit];
    for i in 0..4 {
        for j in 0..i {
            assert_ne!(all[i], all[j]);
        }
    }
}

#[test]
fn perfect_estimator_recovery() {
    let ds = Dataset::G;
    let x = ds.grid(200).unwrap();
    let truth: Vec<f64> = x.iter().map(|&g| ds.sigma(&[g])).collect();
    let curves = vec![truth.as_slice(); 5];
    let bands = RecoveryBands::from_curves(x, truth.clone(), &curves).unwrap();
    let s = sigma_recovery(&bands);
    assert!(s.mad < 1e-15);
    assert_eq!(s.coverage, 1.0);
}

#[test]
fn recovery_band_statistics() {
    let x = vec![0.0, 1.0];
    let bands = RecoveryBands::from_curves(x, vec![1.0, 1.0], &[&[0.0, 1.5], &[2.0, 1.5]]).unwrap();
    assert_eq!(bands.mean, vec![1.0, 1.5]);
    assert_eq!(bands.std, vec![1.0, 0.0]);
    let s = sigma_recovery(&bands);
    assert_eq!(s.mad, 0.25);
    assert_eq!(s.coverage, 0.5);
}

#[test]
fn unsupported_combinations() {
    let cfg = ExperimentConfig { n_runs: 1, ..ExperimentConfig::default() };
    assert!(matches!(run_experiment(&Dataset::FiveD, Estimator::ArPoly, &cfg), Err(Error::Unsupported(_))));
    assert!(matches!(run_experiment(&Dataset::FiveD, Estimator::Gp, &cfg), Err(Error::Unsupported(_))));
}

#[test]
fn identity_density_is_diagonal() {
    let ds = Dataset::FiveD;
    let m = density_plot_5d(|x| Ok(ds.sigma(x)), &ds, 20_000, 40, (0.0, 1.1), 1).unwrap();
    assert!((m.pearson - 1.0).abs() < 1e-12);
    for (c, col) in m.density.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            if r != c {
                assert_eq!(*v, 0.0);
            }
        }
        if m.counts[c] > 0 {
            assert_eq!(col[c], 1.0);
        }
    }
    assert_eq!(m.diagonal_fraction(0.0), 1.0);
}

#[test]
fn density_columns_normalized() {
    let ds = Dataset::FiveD;
    let m = density_plot_5d(|x| Ok(0.5 + 0.3 * (x[0] - 0.5)), &ds, 5_000, 25, (0.0, 1.1), 2).unwrap();
    for (c, col) in m.density.iter().enumerate() {
        let mx = col.iter().cloned().fold(0.0, f64::max);
        if m.counts[c] > 0 {
            assert_eq!(mx, 1.0);
        } else {
            assert_eq!(mx, 0.0);
        }
    }
}

#[test]
fn experiment_is_deterministic() {
    let cfg = ExperimentConfig { n_runs: 3, n_test: 200, ..ExperimentConfig::default() };
    let a = run_experiment(&Dataset::G, Estimator::ArPoly, &cfg).unwrap();
    let b = run_experiment(&Dataset::G, Estimator::ArPoly, &cfg).unwrap();
    assert_eq!(a.nlpds(), b.nlpds());
    assert_eq!(a.bands, b.bands);
    assert!(a.failures.is_empty());
}

#[test]
fn estimators_share_training_data() {
    let cfg = ExperimentConfig { n_runs: 1, n_test: 100, ..ExperimentConfig::default() };
    let a = run_one(&Dataset::Y, Estimator::Gp, &cfg, 0).unwrap();
    let b = run_one(&Dataset::Y, Estimator::ArPoly, &cfg, 0).unwrap();
    assert_eq!(a.seeds, b.seeds);
}
