use fdclust::basis::{SplineConfig, TimeGrid};
use fdclust::fusion::{fit_fixed, select_and_fit, CurveSet, FusionConfig, FusionProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy_problem(seed: u64, n: usize) -> FusionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let grid = TimeGrid::uniform(10).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            grid.points()
                .iter()
                .map(|&t| if i % 2 == 0 { (3.0 * t).sin() } else { t } + noise.sample(&mut rng))
                .collect()
        })
        .collect();
    let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    FusionProblem::new(&CurveSet::on_grid(&grid, &ids, &rows).unwrap(), &SplineConfig::default()).unwrap()
}

#[test]
fn no_fusion_keeps_every_subject_apart() {
    let config = FusionConfig::default();
    for seed in 0..10 {
        let problem = noisy_problem(seed, 12);
        let fit = fit_fixed(&problem, 0.1, 0.0, &config).unwrap();
        assert_eq!(fit.k_hat, problem.n(), "seed {seed}");
    }
}

#[test]
fn huge_fusion_merges_everything() {
    let config = FusionConfig::default();
    assert!(config.mcp_gamma * config.admm_theta > 1.0);
    for seed in 0..10 {
        let problem = noisy_problem(100 + seed, 12);
        let fit = fit_fixed(&problem, 0.1, 1e6, &config).unwrap();
        assert_eq!(fit.k_hat, 1, "seed {seed}");
        for i in 1..problem.n() {
            assert_eq!(fit.beta.row(i), fit.beta.row(0));
        }
    }
}

#[test]
fn selected_fit_reports_its_grid_point() {
    let problem = noisy_problem(7, 10);
    let config = FusionConfig {
        lambda1_grid: vec![0.01, 0.1, 1.0],
        lambda2_grid: vec![0.05, 0.5, 5.0],
        ..FusionConfig::default()
    };
    let fit = select_and_fit(&problem, &config).unwrap();
    assert!(config.lambda1_grid.contains(&fit.lambda1));
    assert!(config.lambda2_grid.contains(&fit.lambda2));
    assert_eq!(fit.k_hat, fit.partition.num_clusters());
    let sel = fit.selection.as_ref().unwrap();
    assert_eq!(sel.lambda2_path.len(), config.lambda2_grid.len());
}
