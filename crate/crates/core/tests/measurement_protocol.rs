mod common;

use common::binomial_sigma;
use qdiag::linalg::{spectral_oracle, HermitianMatrix};
use qdiag::measurement::{make_observable, prepare_mixed_state, DensityMatrix};
use qdiag::protocol::{
    missing_value_probability, recover_eigenvectors, run_protocol, shots_to_complete, ProtocolConfig,
    StopReason, StopRule,
};
use qdiag::rng::{hermitian_with_spectrum, random_hermitian, random_mixed_matrix, random_pure_state, SimRng};

#[test]
fn born_rule_frequencies() {
    let mut rng = SimRng::new(2024);
    let shots = 100_000u64;
    for pair in 0..10 {
        let n = 2 + pair % 5;
        let a = random_hermitian(n, &mut rng);
        let rho = if pair % 2 == 0 {
            DensityMatrix::new(random_mixed_matrix(n, &mut rng)).unwrap()
        } else {
            DensityMatrix::pure(&random_pure_state(n, &mut rng))
        };
        let h = make_observable(&a).unwrap();
        let probs = h.outcome_probabilities(&rho).unwrap();
        let prepared = h.prepare(&rho).unwrap();
        let mut counts = vec![0u64; probs.len()];
        let mut stream = SimRng::derived(7, pair as u64);
        for _ in 0..shots {
            counts[prepared.measure_value(&mut stream).1] += 1;
        }
        for (k, (_, p)) in probs.iter().enumerate() {
            let freq = counts[k] as f64 / shots as f64;
            let sigma = binomial_sigma(*p, shots).max(1e-12);
            assert!((freq - p).abs() <= 4.0 * sigma, "pair {pair} branch {k}: {freq} vs {p}");
        }
    }
}

#[test]
fn mixed_state_two_level_frequencies() {
    let h = make_observable(&HermitianMatrix::from_real_diagonal(&[0.0, 1.0])).unwrap();
    let rho = prepare_mixed_state(2).unwrap();
    let mut rng = SimRng::new(1);
    let shots = 100_000;
    let ones = (0..shots).filter(|_| h.measure(&rho, &mut rng).unwrap().value == 1.0).count();
    let freq = ones as f64 / shots as f64;
    assert!((freq - 0.5).abs() <= 0.005, "{freq}");
}

#[test]
fn chained_measurements_repeat() {
    let a = random_hermitian(6, &mut SimRng::new(3));
    let h = make_observable(&a).unwrap();
    let mut rng = SimRng::new(4);
    let first = h.measure(&prepare_mixed_state(6).unwrap(), &mut rng).unwrap();
    let mut state = first.post_state.clone();
    for _ in 0..1000 {
        let next = h.measure(&state, &mut rng).unwrap();
        assert_eq!(next.value, first.value);
        assert!(DensityMatrix::new(next.post_state.as_matrix().clone()).is_ok());
        state = next.post_state;
    }
}

#[test]
fn outcome_sequences_are_reproducible() {
    let a = random_hermitian(5, &mut SimRng::new(8));
    let h = make_observable(&a).unwrap();
    let rho = prepare_mixed_state(5).unwrap();
    let run = |seed| {
        let mut rng = SimRng::new(seed);
        (0..200).map(|_| h.measure(&rho, &mut rng).unwrap().value.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(17), run(17));
    assert_ne!(run(17), run(18));
}

#[test]
fn missing_value_monte_carlo() {
    let a = HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 3.0, 4.0]);
    let h = make_observable(&a).unwrap();
    let prepared = h.prepare(&prepare_mixed_state(4).unwrap()).unwrap();
    let trials = 100_000;
    let mut rng = SimRng::new(99);
    let missing = (0..trials)
        .filter(|_| (0..10).all(|_| prepared.measure_value(&mut rng).1 != 0))
        .count();
    let freq = missing as f64 / trials as f64;
    let expected = missing_value_probability(4, 10);
    assert!((expected - 0.0563135147).abs() < 1e-9);
    assert!((freq - expected).abs() <= 0.003, "{freq}");
}

#[test]
fn seed11_discovers_oracle_spectrum_and_coupon_mean() {
    let a = random_hermitian(4, &mut SimRng::new(11));
    let spec = spectral_oracle(&a).unwrap();
    let mut cfg = ProtocolConfig::for_dim(4);
    cfg.seed = 11;
    let report = run_protocol(&a, &cfg).unwrap();
    let values: Vec<f64> = report.distinct_values.iter().map(|c| c.value).collect();
    assert_eq!(values, spec.eigenvalues);
    assert_eq!(report.stopped_because, StopReason::AllDistinctFound);

    let h = make_observable(&a).unwrap();
    let runs = shots_to_complete(&h, 4, 10_000, 10_000, 11).unwrap();
    let mean = runs.iter().map(|r| r.unwrap() as f64).sum::<f64>() / runs.len() as f64;
    let expected = 4.0 * (1.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 4.0);
    assert!((mean - expected).abs() <= 0.1, "mean {mean}");
}

#[test]
fn spectrum_correctness_random_matrices() {
    let mut rng = SimRng::new(5150);
    for trial in 0..20 {
        let n = 2 + trial % 7;
        let a = random_hermitian(n, &mut rng);
        let mut cfg = ProtocolConfig::for_dim(n);
        cfg.seed = trial as u64;
        let report = run_protocol(&a, &cfg).unwrap();
        let values: Vec<f64> = report.distinct_values.iter().map(|c| c.value).collect();
        assert_eq!(values, spectral_oracle(&a).unwrap().eigenvalues, "trial {trial}");
    }
}

#[test]
fn coupon_mean_within_three_percent() {
    for n in [2usize, 3, 5, 8] {
        let a = random_hermitian(n, &mut SimRng::new(n as u64));
        let h = make_observable(&a).unwrap();
        let runs = shots_to_complete(&h, n, 100_000, 10_000, 3).unwrap();
        let mean = runs.iter().map(|r| r.unwrap() as f64).sum::<f64>() / runs.len() as f64;
        let expected = n as f64 * (1..=n).map(|k| 1.0 / k as f64).sum::<f64>();
        assert!((mean / expected - 1.0).abs() <= 0.03, "n={n} mean {mean} expected {expected}");
    }
}

#[test]
fn noisy_readout_clusters() {
    let mut rng = SimRng::new(404);
    let spectrum = [-1.0, -0.4, 0.3, 1.0];
    let range = 2.0;
    let a = hermitian_with_spectrum(&spectrum, &mut rng);
    let mut cfg = ProtocolConfig::for_dim(4);
    cfg.stop_rule = StopRule::FixedShots;
    cfg.max_shots = 2000;
    cfg.readout_noise_sigma = 1e-3 * range;
    cfg.value_merge_tol = 1e-2;
    let report = run_protocol(&a, &cfg).unwrap();
    assert_eq!(report.distinct_values.len(), 4);
    let oracle = spectral_oracle(&a).unwrap().eigenvalues;
    for (c, e) in report.distinct_values.iter().zip(&oracle) {
        assert!((c.value - e).abs() <= 1e-3 * range);
    }
}

#[test]
fn recovered_vectors_match_oracle() {
    let a = random_hermitian(5, &mut SimRng::new(31));
    let mut cfg = ProtocolConfig::for_dim(5);
    cfg.seed = 2;
    let report = run_protocol(&a, &cfg).unwrap();
    let values: Vec<f64> = report.distinct_values.iter().map(|c| c.value).collect();
    let recovered = recover_eigenvectors(&a, &values, 1e-9).unwrap();
    let spec = spectral_oracle(&a).unwrap();
    for (k, r) in recovered.iter().enumerate() {
        assert_eq!(r.multiplicity(), 1);
        let overlap = spec.eigenvector(k).dotc(&r.vectors[0]).norm();
        assert!(overlap > 1.0 - 1e-9, "{overlap}");
        assert!(r.residuals[0] <= 1e-12);
    }
}
