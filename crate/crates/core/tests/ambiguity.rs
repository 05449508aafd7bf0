use evcd_core::ambiguity::{
    empirical_moments, eta, eta_covariance_branch, eta_mean_branch, min_eigenvalue,
    regularize_covariance, AmbiguityMode, AmbiguityParams,
};
use evcd_core::{AmbiguityParams32, Moments64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn true_moments() -> (Vec<f64>, DMatrix<f64>) {
    let mean = vec![1.1, 1.2, 1.2, 1.1];
    let cov = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.060, 0.010, -0.005, 0.000, //
            0.010, 0.050, 0.008, -0.004, //
            -0.005, 0.008, 0.070, 0.012, //
            0.000, -0.004, 0.012, 0.055,
        ],
    );
    (mean, cov)
}

fn gaussian_samples(k: usize, seed: u64) -> Vec<Vec<f64>> {
    let (mean, cov) = true_moments();
    let l = cov.cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let z = DVector::from_iterator(4, (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = &l * z;
            mean.iter().zip(x.iter()).map(|(m, d)| m + d).collect()
        })
        .collect()
}

fn errors(m: &Moments64) -> (f64, f64) {
    let (mean, cov) = true_moments();
    let dm = DVector::from_vec(m.mean.iter().zip(&mean).map(|(a, b)| a - b).collect());
    let em = dm.norm() / DVector::from_vec(mean).norm();
    let ec = (&m.cov - &cov).norm() / cov.norm();
    (em, ec)
}

#[test]
fn moments_converge_with_sample_size() {
    let small = empirical_moments(&gaussian_samples(100, 1)).unwrap();
    let large = empirical_moments(&gaussian_samples(10_000, 1)).unwrap();
    let (em, ec) = errors(&large);
    assert!(em <= 0.05 && ec <= 0.05, "mean {em}, cov {ec}");
    let (sm, sc) = errors(&small);
    assert!(em < sm && ec < sc);
}

#[test]
fn eta_at_case_study_settings() {
    let p = AmbiguityParams::new(0.1, 1.0, 0.1, AmbiguityMode::M1).unwrap();
    assert!((eta(&p).unwrap() - 10f64.sqrt()).abs() < 1e-12);
    let p32 = AmbiguityParams32::new(0.1, 1.0, 0.1, AmbiguityMode::M2).unwrap();
    assert!((eta(&p32).unwrap() - 3.1622777).abs() < 1e-5);
}

#[test]
fn eta_branches_meet_on_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let g2: f64 = rng.random_range(1.0..10.0);
        let eps: f64 = rng.random_range(0.01..0.99);
        let p = AmbiguityParams::new(eps * g2, g2, eps, AmbiguityMode::M1).unwrap();
        assert!((eta_mean_branch(&p) - eta_covariance_branch(&p)).abs() <= 1e-9);
    }
}

fn psd_from(entries: &[f64], n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &b * b.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn eta_nonincreasing_in_epsilon(g1 in 0.0f64..5.0, g2 in 1.0f64..10.0, e1 in 0.01f64..0.99, e2 in 0.01f64..0.99) {
        let g1 = g1.min(g2);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = eta(&AmbiguityParams::new(g1, g2, lo, AmbiguityMode::M1).unwrap()).unwrap();
        let b = eta(&AmbiguityParams::new(g1, g2, hi, AmbiguityMode::M1).unwrap()).unwrap();
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn eta_nondecreasing_in_gamma2(g1 in 0.0f64..1.0, a in 1.0f64..10.0, b in 1.0f64..10.0, eps in 0.01f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = eta(&AmbiguityParams::new(g1, lo, eps, AmbiguityMode::M1).unwrap()).unwrap();
        let y = eta(&AmbiguityParams::new(g1, hi, eps, AmbiguityMode::M1).unwrap()).unwrap();
        prop_assert!(x <= y + 1e-12);
    }

    #[test]
    fn empirical_covariance_is_psd(
        rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 5), 1..40),
    ) {
        let m = empirical_moments(&rows).unwrap();
        let scale = m.cov.amax().max(1.0);
        prop_assert!(min_eigenvalue(&m.cov) >= -1e-10 * scale);
        prop_assert_eq!(&m.cov, &m.cov.transpose());
    }

    #[test]
    fn regularization_restores_definiteness(entries in proptest::collection::vec(-1.0f64..1.0, 16), rank in 0usize..4) {
        let mut b = DMatrix::from_row_slice(4, 4, &entries);
        for j in rank..4 {
            b.column_mut(j).fill(0.0);
        }
        let cov = &b * b.transpose();
        let m = Moments64 { mean: vec![0.0; 4], cov: cov.clone(), k_sc: 10 };
        let r = regularize_covariance(&m, 1e-3);
        prop_assert!(min_eigenvalue(&r.cov) > 0.0);
        let pd = regularize_covariance(&Moments64 { cov: psd_from(&entries, 4) + DMatrix::identity(4, 4), ..m }, 0.0);
        prop_assert_eq!(pd.cov, psd_from(&entries, 4) + DMatrix::identity(4, 4));
    }
}
