//! TOML run configurations.

use std::path::Path;

use fdclust::fusion::FusionConfig;
use fdclust::simbench::{Method, ScenarioConfig, CLOSE, FAR};
use fdclust::{seed, PipelineConfig, SplineConfig, Surrogate};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::ingest::IngestOptions;

/// Settings for `fit` and `correct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Surrogate,
    pub max_outer_iterations: usize,
    pub spline: SplineConfig,
    pub fusion: FusionConfig,
    pub ingest: IngestOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            seed: p.seed,
            mode: p.initial_mode,
            max_outer_iterations: p.max_outer_iterations,
            spline: p.spline,
            fusion: p.fusion,
            ingest: IngestOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            initial_mode: self.mode,
            max_outer_iterations: self.max_outer_iterations,
            seed: self.seed,
            fusion: self.fusion.clone(),
            spline: self.spline,
        }
    }
}

/// Settings for `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub max_outer_iterations: usize,
    pub spline: SplineConfig,
    pub fusion: FusionConfig,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        BenchConfig {
            methods: Method::ALL.to_vec(),
            max_outer_iterations: p.max_outer_iterations,
            spline: p.spline,
            fusion: p.fusion,
            scenarios: Vec::new(),
        }
    }
}

impl BenchConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            max_outer_iterations: self.max_outer_iterations,
            fusion: self.fusion.clone(),
            spline: self.spline,
            ..Default::default()
        }
    }
}

/// Far/close × σ ∈ {2, 3} × n ∈ {40, 80}.
pub fn simulation_grid(mode: Surrogate, n_mc: usize, master: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for c in [FAR, CLOSE] {
        for sigma in [2.0, 3.0] {
            for group_size in [20, 40] {
                out.push(ScenarioConfig {
                    group_size,
                    c,
                    sigma,
                    correction_mode: mode,
                    n_mc,
                    seed: seed::derive(master, out.len() as u64),
                    ..Default::default()
                });
            }
        }
    }
    out
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_run_config() {
        let c: RunConfig = toml::from_str("seed = 5\nmode = \"single\"\n[spline]\ndegree = 1\n[ingest]\nbins = 5.0\n").unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.mode, Surrogate::Single);
        assert_eq!(c.spline.degree, 1);
        assert_eq!(c.spline.interior_knots, SplineConfig::default().interior_knots);
        assert_eq!(c.ingest.bins, Some(5.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sead = 5\n").is_err());
    }

    #[test]
    fn run_config_round_trips() {
        let c = RunConfig { seed: 3, ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn bench_config_with_scenarios() {
        let c: BenchConfig = toml::from_str(
            "methods = [\"oracle\", \"naive\"]\n[[scenario]]\ngroup_size = 5\nn_mc = 2\n[[scenario]]\nc = -0.5\n",
        )
        .unwrap();
        assert_eq!(c.methods, vec![Method::Oracle, Method::Naive]);
        assert_eq!(c.scenarios.len(), 2);
        assert_eq!(c.scenarios[1].c, CLOSE);
    }

    #[test]
    fn grid_has_eight_scenarios() {
        let g = simulation_grid(Surrogate::Average, 50, 1);
        assert_eq!(g.len(), 8);
        assert_eq!(g.iter().filter(|s| s.c == FAR).count(), 4);
    }
}
