//! Synthetic two-group scenarios and replicated method comparisons.
//!
//! Group 1 follows `cos(1.5πt) + 2.5`, group 2 follows `sin(1.5πt) + c`, each
//! observed with iid `N(0, noise_sd²)` noise on an equally spaced grid. Each
//! replicate adds compound-symmetric error `γ_ij + γ'_ij(t)` with both parts
//! `N(0, σ²/4)`, so the error variance is `σ²/2` and the lag correlation is ½.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::TimeGrid;
use crate::error::{Error, Result};
use crate::errorcorr::{FunctionalDataset, Surrogate};
use crate::fusion::{select_and_fit, CurveSet, FusionProblem};
use crate::metrics::agreement;
use crate::partition::Partition;
use crate::pipeline::{self, PipelineConfig};
use crate::seed;

pub const FAR: f64 = -3.5;
pub const CLOSE: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub group_size: usize,
    pub c: f64,
    pub sigma: f64,
    pub replicates: usize,
    pub grid_size: usize,
    pub noise_sd: f64,
    pub correction_mode: Surrogate,
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            group_size: 20,
            c: FAR,
            sigma: 2.0,
            replicates: 3,
            grid_size: 10,
            noise_sd: 0.4,
            correction_mode: Surrogate::Average,
            n_mc: 50,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size == 0 {
            return Err(Error::InvalidParameter("group_size must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise_sd must be >= 0, got {}", self.noise_sd)));
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidParameter("c must be finite".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidParameter("grid_size must be >= 2".into()));
        }
        Ok(())
    }

    pub fn subjects(&self) -> usize {
        2 * self.group_size
    }

    /// "far", "close", or the offset itself.
    pub fn model_label(&self) -> String {
        if self.c == FAR {
            "far".into()
        } else if self.c == CLOSE {
            "close".into()
        } else {
            format!("c={}", self.c)
        }
    }

    /// Seed of replication `rep`.
    pub fn replication_seed(&self, rep: usize) -> u64 {
        seed::derive(self.seed, rep as u64)
    }
}

pub fn mean_curve(group: usize, c: f64, t: f64) -> f64 {
    match group {
        0 => (1.5 * PI * t).cos() + 2.5,
        _ => (1.5 * PI * t).sin() + c,
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub truth: Partition,
    /// `n × m` error-free curves.
    pub true_curves: DMatrix<f64>,
    pub observed: FunctionalDataset,
    pub seed: u64,
    pub config: ScenarioConfig,
}

impl SyntheticDataset {
    pub fn true_curve_set(&self) -> Result<CurveSet> {
        self.observed.curves_from_rows(&self.true_curves)
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite nonnegative sd")
}

pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<SyntheticDataset> {
    config.validate()?;
    let n = config.subjects();
    let m = config.grid_size;
    let grid = TimeGrid::uniform(m)?;
    let mut rng = seed::rng(seed);
    let eps = normal(config.noise_sd);
    let half = normal(config.sigma / 2.0);

    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= config.group_size)).collect();
    let mut true_curves = DMatrix::zeros(n, m);
    let mut observed = Vec::with_capacity(n);
    for i in 0..n {
        for (k, &t) in grid.points().iter().enumerate() {
            true_curves[(i, k)] = mean_curve(labels[i], config.c, t) + eps.sample(&mut rng);
        }
        let reps: Vec<Vec<f64>> = (0..config.replicates)
            .map(|_| {
                let shared = half.sample(&mut rng);
                (0..m).map(|k| true_curves[(i, k)] + shared + half.sample(&mut rng)).collect()
            })
            .collect();
        observed.push(reps);
    }
    let ids = (0..n).map(|i| format!("s{:03}", i + 1)).collect();
    Ok(SyntheticDataset {
        truth: Partition::from_labels(&labels),
        true_curves,
        observed: FunctionalDataset::new(grid, ids, &observed)?,
        seed,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Fusion on the error-free curves.
    Oracle,
    /// Fusion on the surrogates.
    Naive,
    /// The full correction pipeline.
    Corrected,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Oracle, Method::Naive, Method::Corrected];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Oracle => "oracle",
            Method::Naive => "naive",
            Method::Corrected => "corrected",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "naive" => Ok(Method::Naive),
            "corrected" => Ok(Method::Corrected),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub k_hat: Option<usize>,
    pub rand: Option<f64>,
    pub jaccard: Option<f64>,
    pub arand: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub sigma: f64,
    pub n: usize,
    pub mode: Surrogate,
    pub method: Method,
    pub mean_k_hat: f64,
    pub mean_rand: f64,
    pub mean_jaccard: f64,
    pub mean_arand: f64,
    pub replications: usize,
    pub attrition: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub rows: Vec<TableRow>,
    pub replications: Vec<ReplicationResult>,
}

fn score(
    rep: usize,
    seed: u64,
    method: Method,
    truth: &Partition,
    estimate: Result<Partition>,
) -> ReplicationResult {
    let scored = estimate.and_then(|p| Ok((p.num_clusters(), agreement(truth, &p)?)));
    match scored {
        Ok((k, a)) => ReplicationResult {
            replication: rep,
            seed,
            method,
            k_hat: Some(k),
            rand: Some(a.rand),
            jaccard: Some(a.jaccard),
            arand: Some(a.arand),
            error: None,
        },
        Err(e) => ReplicationResult {
            replication: rep,
            seed,
            method,
            k_hat: None,
            rand: None,
            jaccard: None,
            arand: None,
            error: Some(e.to_string()),
        },
    }
}

/// All requested methods on replication `rep`.
pub fn run_replication(
    scenario: &ScenarioConfig,
    methods: &[Method],
    settings: &PipelineConfig,
    rep: usize,
) -> Vec<ReplicationResult> {
    let seed = scenario.replication_seed(rep);
    let data = match generate(scenario, seed) {
        Ok(d) => d,
        Err(e) => {
            return methods.iter().map(|&m| score(rep, seed, m, &Partition::singletons(1), Err(e.clone()))).collect();
        }
    };
    let mut config = settings.clone();
    config.initial_mode = scenario.correction_mode;
    config.seed = seed::derive(seed, u64::MAX);

    let corrected = methods
        .contains(&Method::Corrected)
        .then(|| pipeline::run(&data.observed, &config));
    methods
        .iter()
        .map(|&method| {
            let estimate = match method {
                Method::Oracle => data
                    .true_curve_set()
                    .and_then(|c| FusionProblem::new(&c, &config.spline))
                    .and_then(|p| select_and_fit(&p, &config.fusion))
                    .map(|f| f.partition),
                Method::Naive => match &corrected {
                    Some(Ok(outcome)) => Ok(outcome.initial.partition.clone()),
                    _ => pipeline::initial_cluster(&data.observed, &config).map(|f| f.partition),
                },
                Method::Corrected => match corrected.as_ref().expect("computed above") {
                    Ok(outcome) => Ok(outcome.partition.clone()),
                    Err(e) => Err(e.clone()),
                },
            };
            score(rep, seed, method, &data.truth, estimate)
        })
        .collect()
}

fn aggregate(scenario: &ScenarioConfig, method: Method, results: &[ReplicationResult]) -> TableRow {
    let ok: Vec<&ReplicationResult> = results.iter().filter(|r| r.method == method && r.error.is_none()).collect();
    let total = results.iter().filter(|r| r.method == method).count();
    let mean = |f: &dyn Fn(&ReplicationResult) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    TableRow {
        model: scenario.model_label(),
        sigma: scenario.sigma,
        n: scenario.subjects(),
        mode: scenario.correction_mode,
        method,
        mean_k_hat: mean(&|r| r.k_hat.unwrap_or(0) as f64),
        mean_rand: mean(&|r| r.rand.unwrap_or(f64::NAN)),
        mean_jaccard: mean(&|r| r.jaccard.unwrap_or(f64::NAN)),
        mean_arand: mean(&|r| r.arand.unwrap_or(f64::NAN)),
        replications: ok.len(),
        attrition: total - ok.len(),
    }
}

/// Run `n_mc` replications of every method and aggregate one row per method.
///
/// `threads <= 1` runs serially. Results do not depend on `threads`.
pub fn run_benchmark(
    scenario: &ScenarioConfig,
    methods: &[Method],
    settings: &PipelineConfig,
    threads: usize,
) -> Result<BenchmarkResult> {
    scenario.validate()?;
    settings.validate()?;
    if scenario.n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be >= 1".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods requested".into()));
    }

    let run = |rep| run_replication(scenario, &methods, settings, rep);
    let per_rep: Vec<Vec<ReplicationResult>> = if threads <= 1 {
        (0..scenario.n_mc).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| (0..scenario.n_mc).into_par_iter().map(run).collect())
    };
    let replications: Vec<ReplicationResult> = per_rep.into_iter().flatten().collect();
    let rows = methods.iter().map(|&m| aggregate(scenario, m, &replications)).collect();
    Ok(BenchmarkResult { rows, replications })
}

/// Fixed-width text rendering of table rows.
pub fn render_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<8} {:>5} {:>4} {:<8} {:<10} {:>7} {:>7} {:>7} {:>7} {:>5} {:>5}\n",
        "model", "sigma", "n", "mode", "method", "K", "Rand", "Jaccard", "aRand", "reps", "fail"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:>5} {:>4} {:<8} {:<10} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>5} {:>5}\n",
            r.model,
            r.sigma,
            r.n,
            r.mode.to_string(),
            r.method.to_string(),
            r.mean_k_hat,
            r.mean_rand,
            r.mean_jaccard,
            r.mean_arand,
            r.replications,
            r.attrition
        ));
    }
    out
}
