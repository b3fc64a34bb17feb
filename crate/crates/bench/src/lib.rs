//! Inputs shared by the benchmarks.

use fdclust::fusion::{log_grid, FusionConfig, FusionProblem};
use fdclust::simbench::{generate, ScenarioConfig, SyntheticDataset};
use fdclust::{PipelineConfig, SplineConfig, Surrogate};

pub fn dataset(group_size: usize, seed: u64) -> SyntheticDataset {
    let config = ScenarioConfig { group_size, ..ScenarioConfig::default() };
    generate(&config, seed).expect("valid scenario")
}

pub fn surrogate_problem(data: &SyntheticDataset) -> FusionProblem {
    let curves = data.observed.surrogate_curves(Surrogate::Average).expect("curves");
    FusionProblem::new(&curves, &SplineConfig::default()).expect("problem")
}

/// Shorter grids than the defaults so one iteration stays well under a second.
pub fn quick_config() -> PipelineConfig {
    PipelineConfig {
        max_outer_iterations: 3,
        fusion: FusionConfig {
            lambda1_grid: log_grid(1e-3, 1e1, 5),
            lambda2_grid: log_grid(5e-2, 5.0, 10),
            ..FusionConfig::default()
        },
        ..PipelineConfig::default()
    }
}
