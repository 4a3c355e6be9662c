use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thinfilm::diagnostics::{ks_two_sample, two_point_spatial};
use thinfilm::rng::{NoiseStream, Purpose};
use thinfilm::sampler::{bridge_from_increments, sample_batch, sample_batch_with_budget, sample_nu};
use thinfilm::Error;

/// Conditioned bridge drawn directly: Box–Muller normals, cumulative sums,
/// reject if any node is negative.
fn oracle_samples(n: usize, beta: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut normal = move || {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let nf = n as f64;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dw: Vec<f64> = (0..n).map(|_| normal() * (nf / beta).sqrt()).collect();
        let mean_dw = dw.iter().sum::<f64>() / nf;
        let mut w = vec![0.0; n];
        for i in 1..n {
            w[i] = w[i - 1] + (dw[i - 1] - mean_dw) / nf;
        }
        let mean_w = w.iter().sum::<f64>() / nf;
        let w: Vec<f64> = w.iter().map(|x| x - mean_w + 1.0).collect();
        if w.iter().all(|&x| x >= 0.0) {
            out.push(w);
        }
    }
    out
}

/// Mean of `f` with its standard error.
fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn node_variance_matches_oracle() {
    let (n, count) = (64, 10_000);
    let batch = sample_batch(n, 1.0, count, 17).unwrap();
    let oracle = oracle_samples(n, 1.0, count, 18);
    let (a, sa) = mean_se(batch.samples.iter().map(|s| (s.values()[0] - 1.0).powi(2)));
    let (b, sb) = mean_se(oracle.iter().map(|s| (s[0] - 1.0).powi(2)));
    assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}");
}

#[test]
fn increment_variance_matches_oracle() {
    let (n, count) = (50, 10_000);
    let batch = sample_batch(n, 1.0, count, 21).unwrap();
    let inc = two_point_spatial(&batch.samples, 0.1).unwrap();
    let oracle = oracle_samples(n, 1.0, count, 22);
    let (a, sa) = mean_se(inc.iter().map(|x| x * x));
    let (b, sb) = mean_se(oracle.iter().map(|s| (s[5] - s[0]).powi(2)));
    assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}");
}

#[test]
fn accepted_samples_have_unit_mean_and_are_nonnegative() {
    let batch = sample_batch(40, 1.0, 500, 3).unwrap();
    for s in &batch.samples {
        assert!((s.mean() - 1.0).abs() <= 1e-12);
        assert!(s.values().iter().all(|&x| x >= 0.0));
    }
    let rate = batch.acceptance_rate();
    assert!(rate > 0.0 && rate <= 1.0);
}

#[test]
fn bridge_closes_periodically() {
    let mut s = NoiseStream::new(5, 0, Purpose::Sampler);
    for k in 0..100 {
        let dw = s.gaussian_vector(k, 33);
        let mut w = vec![0.0; 33];
        bridge_from_increments(&dw, &mut w);
        let mean_dw = dw.iter().sum::<f64>() / 33.0;
        let closed = w[32] + (dw[32] - mean_dw) / 33.0;
        assert!((closed - w[0]).abs() <= 1e-12);
        assert!((w.iter().sum::<f64>() / 33.0 - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn sampling_is_deterministic() {
    let a = sample_nu(20, 1.0, &mut NoiseStream::new(9, 4, Purpose::Sampler)).unwrap();
    let b = sample_nu(20, 1.0, &mut NoiseStream::new(9, 4, Purpose::Sampler)).unwrap();
    assert_eq!(a, b);
    assert_eq!(sample_batch(16, 1.0, 50, 2).unwrap(), sample_batch(16, 1.0, 50, 2).unwrap());
    let one = sample_batch(16, 1.0, 1, 2).unwrap();
    assert_eq!(one.samples.len(), 1);
    assert!(one.acceptance_rate() > 0.0 && one.acceptance_rate() <= 1.0);
}

#[test]
fn law_is_rotation_invariant() {
    let batch = sample_batch(32, 1.0, 4000, 8).unwrap();
    let a: Vec<f64> = batch.samples.iter().map(|s| s.values()[0]).collect();
    let b: Vec<f64> = batch.samples.iter().map(|s| s.values()[13]).collect();
    let ks = ks_two_sample(&a, &b).unwrap();
    assert!(ks.passes(), "{ks:?}");
}

#[test]
fn weakly_conditioned_samples_scale_with_beta() {
    let (n, count) = (16, 4000);
    let wide = sample_batch(n, 100.0, count, 1).unwrap();
    let narrow = sample_batch(n, 400.0, count, 2).unwrap();
    let a: Vec<f64> = wide.samples.iter().map(|s| 1.0 + 0.5 * (s.values()[0] - 1.0)).collect();
    let b: Vec<f64> = narrow.samples.iter().map(|s| s.values()[0]).collect();
    let ks = ks_two_sample(&a, &b).unwrap();
    assert!(ks.passes(), "{ks:?}");
    assert!(wide.acceptance_rate() > 0.99, "{}", wide.acceptance_rate());
}

#[test]
fn acceptance_rate_is_stable_across_seeds() {
    let rates: Vec<f64> = (0..4).map(|s| sample_batch(50, 1.0, 1000, s).unwrap().acceptance_rate()).collect();
    let mean = rates.iter().sum::<f64>() / 4.0;
    // Binomial-like fluctuation of the rate estimate at 1000 acceptances.
    let sd = (mean * (1.0 - mean) / 1000.0).sqrt().max(1e-3);
    for r in &rates {
        assert!((r - mean).abs() <= 5.0 * sd, "{rates:?}");
    }
}

#[test]
fn attempt_budget_is_enforced() {
    let err = sample_batch_with_budget(200, 0.01, 10, 1, 5).unwrap_err();
    match err {
        Error::AttemptBudget { budget, n, beta, .. } => {
            assert_eq!((budget, n, beta), (5, 200, 0.01));
        }
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(sample_batch(1, 1.0, 1, 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(sample_batch(4, -1.0, 1, 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(sample_batch(4, 1.0, 0, 0), Err(Error::InvalidArgument(_))));
}
