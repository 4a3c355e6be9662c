use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use thinfilm::grid::{
    apply_central_difference, apply_central_difference_transpose, apply_forward_difference,
    apply_forward_difference_transpose, discrete_bilaplacian_drift, neg_laplacian_into,
    solve_implicit, EdgeField, FilmState, Scheme,
};

fn forward_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |a, i| {
        let mut v = 0.0;
        if i == (a + 1) % n {
            v += nf;
        }
        if i == a {
            v -= nf;
        }
        v
    })
}

fn central_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |j, i| {
        let mut v = 0.0;
        if i == (j + 1) % n {
            v += nf;
        }
        if i == (j + n - 1) % n {
            v -= nf;
        }
        v
    })
}

/// `Aᵀ G A AᵀA` or `Cᵀ M C AᵀA` built from explicit dense factors.
fn dense_drift(scheme: Scheme, metric: &[f64]) -> DMatrix<f64> {
    let n = metric.len();
    let a = forward_matrix(n);
    let lap = a.transpose() * &a;
    let g = DMatrix::from_diagonal(&DVector::from_column_slice(metric));
    match scheme {
        Scheme::GruenRumpf => a.transpose() * g * &a * lap,
        Scheme::CentralDifference => {
            let c = central_matrix(n);
            c.transpose() * g * &c * lap
        }
    }
}

fn dense_of(l: &thinfilm::DriftMatrix) -> DMatrix<f64> {
    let n = l.n();
    DMatrix::from_row_slice(n, n, &l.band().to_dense())
}

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.1f64..3.0, n)
}

fn sized_positive() -> impl Strategy<Value = Vec<f64>> {
    (2usize..40).prop_flat_map(positive_vec)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn operators_match_dense_matrices() {
    for n in [2, 3, 4, 7, 16] {
        let h: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (i as f64 * 1.7).sin()).collect();
        let hv = DVector::from_column_slice(&h);
        let a = forward_matrix(n);
        let c = central_matrix(n);
        let fs = FilmState::new(h.clone()).unwrap();
        let got = apply_forward_difference(&fs);
        assert!(max_abs(&(DVector::from_column_slice(got.values()) - &a * &hv).as_slice().to_vec()) < 1e-12);
        let got = apply_forward_difference_transpose(&EdgeField::new(h.clone()));
        assert!((DVector::from_column_slice(&got) - a.transpose() * &hv).amax() < 1e-12);
        let got = apply_central_difference(&h);
        assert!((DVector::from_column_slice(&got) - &c * &hv).amax() < 1e-12);
        let got = apply_central_difference_transpose(&h);
        assert!((DVector::from_column_slice(&got) - c.transpose() * &hv).amax() < 1e-12);
    }
}

#[test]
fn drift_matches_dense_products_including_small_grids() {
    for scheme in [Scheme::GruenRumpf, Scheme::CentralDifference] {
        for n in [2, 3, 4, 5, 6, 7, 8, 13, 16] {
            let metric: Vec<f64> = (0..n).map(|i| 0.4 + (i as f64 * 0.91).cos().abs()).collect();
            let h = FilmState::flat(n).unwrap();
            let l = discrete_bilaplacian_drift(&h, &metric, scheme).unwrap();
            let want = dense_drift(scheme, &metric);
            let got = dense_of(&l);
            let scale = want.amax();
            assert!(
                (got - &want).amax() <= 1e-12 * scale,
                "{scheme} n={n}"
            );
        }
    }
}

#[test]
fn drift_columns_sum_to_zero_for_random_states() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for n in [4, 8, 16] {
        for scheme in [Scheme::GruenRumpf, Scheme::CentralDifference] {
            for _ in 0..100 {
                let metric = positive_vec(n).new_tree(&mut runner).unwrap().current();
                let l = discrete_bilaplacian_drift(&FilmState::flat(n).unwrap(), &metric, scheme).unwrap();
                let sums = l.band().column_sums();
                let scale = (n as f64).powi(4) * max_abs(&metric);
                assert!(max_abs(&sums) <= 1e-12 * scale, "{scheme} n={n} {sums:?}");
            }
        }
    }
}

#[test]
fn flat_cubic_film_drift_annihilates_constants() {
    let h = FilmState::flat(6).unwrap();
    let metric = thinfilm::mobility::gr_metric_diag(&h, 3.0).unwrap();
    let l = discrete_bilaplacian_drift(&h, metric.values(), Scheme::GruenRumpf).unwrap();
    assert!(l.band().matvec(&[1.0; 6]).iter().all(|&v| v == 0.0));
    let mu = thinfilm::mobility::cd_metric_diag(&h, 3.0).unwrap();
    let l = discrete_bilaplacian_drift(&h, &mu, Scheme::CentralDifference).unwrap();
    assert!(l.band().matvec(&[1.0; 6]).iter().all(|&v| v == 0.0));
}

#[test]
fn solve_matches_dense_oracle() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for scheme in [Scheme::GruenRumpf, Scheme::CentralDifference] {
        for n in [2, 3, 5, 8, 12, 33, 64] {
            for dt_scale in [1e-4, 1e-1, 3.0] {
                let metric = positive_vec(n).new_tree(&mut runner).unwrap().current();
                let rhs = positive_vec(n).new_tree(&mut runner).unwrap().current();
                let dt = dt_scale / (n as f64).powi(4);
                let l = discrete_bilaplacian_drift(&FilmState::flat(n).unwrap(), &metric, scheme).unwrap();
                let u = solve_implicit(&l, dt, &rhs).unwrap();
                let system = DMatrix::identity(n, n) + dense_drift(scheme, &metric) * dt;
                let want = system.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
                let err = (DVector::from_column_slice(&u) - &want).amax();
                assert!(err <= 1e-10 * want.amax(), "{scheme} n={n} dt={dt}: {err:e}");
            }
        }
    }
}

#[test]
fn singular_system_is_reported() {
    // With g ≡ −c, L = −c (AᵀA)², and dt·c·λ₁² = 1 makes Id + dt L singular,
    // λ₁ = 4N² sin²(π/N) being the smallest nonzero eigenvalue of AᵀA.
    let n = 8;
    let nf = n as f64;
    let lambda = 4.0 * nf * nf * (std::f64::consts::PI / nf).sin().powi(2);
    let c = 1.0;
    let dt = 1.0 / (c * lambda * lambda);
    let mut l = discrete_bilaplacian_drift(&FilmState::flat(n).unwrap(), &vec![1.0; n], Scheme::GruenRumpf).unwrap();
    l.assemble(Scheme::GruenRumpf, &vec![-c; n]);
    let rhs: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / nf).cos()).collect();
    let err = solve_implicit(&l, dt, &rhs).unwrap_err();
    assert!(matches!(err, thinfilm::Error::Solver(_)), "{err}");
}

proptest! {
    #[test]
    fn adjointness(h in sized_positive(), seed in 0u64..1000) {
        let n = h.len();
        let v: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let ah = apply_forward_difference(&FilmState::new(h.clone()).unwrap());
        let atv = apply_forward_difference_transpose(&EdgeField::new(v.clone()));
        let (l, r) = (dot(ah.values(), &v), dot(&h, &atv));
        prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(n as f64 * max_abs(&h) * max_abs(&v)));
        let ch = apply_central_difference(&h);
        let ctv = apply_central_difference_transpose(&v);
        let (l, r) = (dot(&ch, &v), dot(&h, &ctv));
        prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(n as f64 * max_abs(&h) * max_abs(&v)));
    }

    #[test]
    fn transposes_sum_to_zero_and_constants_vanish(v in sized_positive(), c in -5.0f64..5.0) {
        let n = v.len();
        let scale = n as f64 * max_abs(&v);
        let s: f64 = apply_forward_difference_transpose(&EdgeField::new(v.clone())).iter().sum();
        prop_assert!(s.abs() <= 1e-12 * scale * n as f64);
        let s: f64 = apply_central_difference_transpose(&v).iter().sum();
        prop_assert!(s.abs() <= 1e-12 * scale * n as f64);
        let flat = FilmState::new(vec![c; n]).unwrap();
        prop_assert!(apply_forward_difference(&flat).values().iter().all(|&x| x == 0.0));
        prop_assert!(apply_central_difference(&vec![c; n]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_composition(h in sized_positive()) {
        let n = h.len();
        let nf = n as f64;
        let ah = apply_forward_difference(&FilmState::new(h.clone()).unwrap());
        let composed = apply_forward_difference_transpose(&ah);
        let mut direct = vec![0.0; n];
        neg_laplacian_into(&h, &mut direct);
        for i in 0..n {
            let expected = -nf * nf * (h[(i + 1) % n] - 2.0 * h[i] + h[(i + n - 1) % n]);
            prop_assert!((composed[i] - expected).abs() <= 1e-12 * nf * nf * max_abs(&h));
            prop_assert_eq!(direct[i], expected);
        }
    }

    #[test]
    fn solve_preserves_mean(
        metric in (4usize..48).prop_flat_map(positive_vec),
        rhs_seed in 0u64..1000,
        dt_scale in 1e-6f64..10.0,
        cd in any::<bool>(),
    ) {
        let n = metric.len();
        let scheme = if cd { Scheme::CentralDifference } else { Scheme::GruenRumpf };
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (((i as u64 * 7919 + rhs_seed) % 101) as f64 / 101.0 - 0.5)).collect();
        let l = discrete_bilaplacian_drift(&FilmState::flat(n).unwrap(), &metric, scheme).unwrap();
        let u = solve_implicit(&l, dt_scale / (n as f64).powi(4), &rhs).unwrap();
        let (mu, mr) = (u.iter().sum::<f64>() / n as f64, rhs.iter().sum::<f64>() / n as f64);
        prop_assert!((mu - mr).abs() <= 1e-10 * mr.abs());
    }
}
