use fdclust::basis::TimeGrid;
use fdclust::errorcorr::{
    conditional_params, estimate_covariances, pooled_group_mean, simulate_pseudo, FunctionalDataset, Surrogate,
};
use fdclust::linalg::eigenvalues;
use fdclust::Partition;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn scalar_shrinkage_example() {
    let (mu, cov) = conditional_params(
        &DVector::from_vec(vec![2.0]),
        &DVector::from_vec(vec![0.0]),
        &scalar(1.0),
        &scalar(3.0),
        3,
    )
    .unwrap();
    assert!((mu[0] - 1.0).abs() <= 1e-12);
    assert!((cov[(0, 0)] - 0.5).abs() <= 1e-12);
}

#[test]
fn no_measurement_error_returns_replicate_means() {
    let grid = TimeGrid::uniform(5).unwrap();
    let curves: Vec<Vec<Vec<f64>>> = (0..8)
        .map(|i| {
            let base: Vec<f64> = (0..5).map(|k| ((i * 7 + k * 3) % 11) as f64 * 0.37 - 1.1).collect();
            vec![base.clone(), base.clone(), base]
        })
        .collect();
    let ids = (0..8).map(|i| format!("s{i}")).collect();
    let data = FunctionalDataset::new(grid, ids, &curves).unwrap();
    let partition = Partition::from_labels([0, 0, 0, 0, 1, 1, 1, 2]);
    let est = estimate_covariances(data.array(), &partition).unwrap();
    for mode in [Surrogate::Average, Surrogate::Single] {
        let (pseudo, _) = simulate_pseudo(data.array(), &partition, &est, mode, 17).unwrap();
        for i in 0..8 {
            assert_eq!(pseudo.row(i).transpose(), data.array().subject_mean(i));
        }
    }
}

#[test]
fn singleton_pools_halfway_to_single_large_group() {
    let s = DVector::from_vec(vec![4.0, 0.0]);
    let groups = vec![(DVector::from_vec(vec![0.0, 0.0]), 5), (DVector::from_vec(vec![1.0, 1.0]), 2)];
    let (mean, w) = pooled_group_mean(&s, &groups).unwrap();
    assert_eq!(w, 0.5);
    assert_eq!(mean, DVector::from_vec(vec![2.0, 0.0]));
}

fn psd(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, m * m).prop_map(move |v| {
        let a = DMatrix::from_row_slice(m, m, &v);
        &a * a.transpose()
    })
}

proptest! {
    #[test]
    fn conditional_covariance_is_dominated(
        (eps, u) in (2usize..6).prop_flat_map(|m| (psd(m), psd(m))),
        j in 1usize..5,
    ) {
        let m = eps.nrows();
        let w = DVector::from_element(m, 1.0);
        let g = DVector::zeros(m);
        let (_, cov) = conditional_params(&w, &g, &eps, &u, j).unwrap();
        let scale = 1e-9 * (1.0 + eps.norm());
        prop_assert!(eigenvalues(&cov)[0] >= -scale);
        prop_assert!(eigenvalues(&(&eps - &cov))[0] >= -scale);
    }

    #[test]
    fn conditional_mean_matches_direct_inverse(
        (eps, u) in (2usize..5).prop_flat_map(|m| (psd(m), psd(m))),
        shift in -2.0f64..2.0,
    ) {
        let m = eps.nrows();
        let eps = eps + DMatrix::identity(m, m) * 0.5;
        let u = u + DMatrix::identity(m, m) * 0.5;
        let w = DVector::from_fn(m, |k, _| shift + k as f64);
        let g = DVector::from_element(m, -shift);
        let (mu, cov) = conditional_params(&w, &g, &eps, &u, 2).unwrap();
        let s = &eps * (&eps + &u / 2.0).try_inverse().unwrap();
        let direct = &g + &s * (&w - &g);
        prop_assert!((mu - direct).amax() < 1e-9);
        prop_assert!((cov - (&eps - &s * &eps)).amax() < 1e-9);
    }
}
