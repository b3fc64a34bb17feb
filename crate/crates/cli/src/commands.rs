//! Command implementations. Each takes a fully resolved [`RunSpec`] so that a
//! manifest can replay it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fdclust::metrics::agreement;
use fdclust::pipeline::{self, PipelineOutcome};
use fdclust::simbench::{generate, render_table, run_benchmark};
use fdclust::{select_and_fit, FusionFit, FusionProblem, FunctionalDataset, Partition};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, RunConfig};
use crate::error::CliError;
use crate::ingest::{dataset_records, ingest, read_long_csv, write_long_csv, Ingested, LongRecord};
use crate::output::{file_digest, now_unix, OutputDir, RunManifest, MANIFEST};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunSpec {
    Fit(FitSpec),
    Correct(FitSpec),
    Evaluate(EvaluateSpec),
    Bench(BenchSpec),
    Fixture(FixtureSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub input: PathBuf,
    pub emit_data: bool,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSpec {
    pub truth: PathBuf,
    pub estimate: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub parallel: usize,
    pub emit_data: bool,
    pub config: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
}

impl RunSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RunSpec::Fit(_) => "fit",
            RunSpec::Correct(_) => "correct",
            RunSpec::Evaluate(_) => "evaluate",
            RunSpec::Bench(_) => "bench",
            RunSpec::Fixture(_) => "fixture",
        }
    }

    fn inputs(&self) -> Vec<&Path> {
        match self {
            RunSpec::Fit(s) | RunSpec::Correct(s) => vec![&s.input],
            RunSpec::Evaluate(s) => vec![&s.truth, &s.estimate],
            RunSpec::Bench(_) | RunSpec::Fixture(_) => vec![],
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            RunSpec::Fit(s) | RunSpec::Correct(s) => Some(s.config.seed),
            RunSpec::Fixture(s) => Some(s.seed),
            RunSpec::Bench(_) | RunSpec::Evaluate(_) => None,
        }
    }
}

/// Run `spec`, writing outputs and a manifest under `out`.
pub fn execute(spec: &RunSpec, out: &Path) -> Result<RunManifest, CliError> {
    let mut inputs = BTreeMap::new();
    for path in spec.inputs() {
        inputs.insert(path.display().to_string(), file_digest(path)?);
    }
    let mut dir = OutputDir::new(out)?;
    match spec {
        RunSpec::Fit(s) => fit(s, &mut dir)?,
        RunSpec::Correct(s) => correct(s, &mut dir)?,
        RunSpec::Evaluate(s) => evaluate(s, &mut dir)?,
        RunSpec::Bench(s) => bench(s, &mut dir)?,
        RunSpec::Fixture(s) => dir.write("fixture.csv", &crate::fixture::fixture_csv(s.seed)?)?,
    }
    let manifest = RunManifest {
        command: spec.name().to_string(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_seconds: now_unix(),
        seed: spec.seed(),
        inputs,
        outputs: dir.digests().clone(),
        run: spec.clone(),
    };
    dir.write(MANIFEST, manifest.to_toml()?.as_bytes())?;
    Ok(manifest)
}

/// Re-run a manifest into `out` and check every output digest.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<RunManifest, CliError> {
    let recorded = RunManifest::read(manifest_path)?;
    for (path, digest) in &recorded.inputs {
        let now = file_digest(Path::new(path))?;
        if &now != digest {
            return Err(CliError::Data(format!("input {path} changed since the recorded run")));
        }
    }
    let fresh = execute(&recorded.run, out)?;
    let differing: Vec<&String> = recorded
        .outputs
        .keys()
        .chain(fresh.outputs.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|k| recorded.outputs.get(*k) != fresh.outputs.get(*k))
        .collect();
    if !differing.is_empty() {
        return Err(CliError::Data(format!(
            "replayed outputs differ: {}",
            differing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(fresh)
}

fn load_dataset(spec: &FitSpec, min_replicates: usize) -> Result<Ingested, CliError> {
    let file = std::fs::File::open(&spec.input).map_err(|e| CliError::Data(format!("{}: {e}", spec.input.display())))?;
    let records = read_long_csv(file)?;
    let mut options = spec.config.ingest.clone();
    options.min_replicates = options.min_replicates.max(min_replicates);
    let ingested = ingest(&records, &options)?;
    for (id, why) in &ingested.excluded {
        warn!("subject {id} excluded: {why}");
    }
    Ok(ingested)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn membership_csv(ids: &[String], partition: &Partition) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "cluster"])?;
    for (id, &label) in ids.iter().zip(partition.labels()) {
        w.write_record([id.as_str(), &(label + 1).to_string()])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Fitted mean curve of each cluster on the data grid.
fn centers_csv(
    problem: &FusionProblem,
    fit: &FusionFit,
    grid: &[f64],
    original_times: &[f64],
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster", "time", "original_time", "value"])?;
    for (k, members) in fit.partition.groups().iter().enumerate() {
        let i = members[0];
        let curve = fit.fitted(problem, i);
        for (m, (&t, v)) in grid.iter().zip(curve.iter()).enumerate() {
            w.write_record([(k + 1).to_string(), fmt(t), fmt(original_times[m]), fmt(*v)])?;
        }
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct FitSummary<'a> {
    subjects: usize,
    replicates: usize,
    points: usize,
    mode: String,
    k_hat: usize,
    cluster_sizes: Vec<usize>,
    lambda1: f64,
    lambda2: f64,
    bic_lambda1: Option<f64>,
    bic_lambda2: Option<f64>,
    admm_iterations: usize,
    termination: String,
    excluded: &'a [(String, String)],
    #[serde(skip_serializing_if = "Option::is_none")]
    correction: Option<CorrectionSummary>,
}

#[derive(Serialize)]
struct CorrectionSummary {
    stop_reason: Option<String>,
    returned_iteration: usize,
    iterations: usize,
    initial_k_hat: usize,
}

fn summary<'a>(data: &Ingested, spec: &FitSpec, fit: &FusionFit, excluded: &'a [(String, String)]) -> FitSummary<'a> {
    FitSummary {
        subjects: data.dataset.subjects(),
        replicates: data.dataset.replicates(),
        points: data.dataset.grid().len(),
        mode: spec.config.mode.to_string(),
        k_hat: fit.k_hat,
        cluster_sizes: fit.partition.sizes(),
        lambda1: fit.lambda1,
        lambda2: fit.lambda2,
        bic_lambda1: fit.bic1.map(|b| b.value),
        bic_lambda2: fit.bic2.map(|b| b.value),
        admm_iterations: fit.iterations,
        termination: format!("{:?}", fit.termination),
        excluded,
        correction: None,
    }
}

fn surrogate_problem(data: &FunctionalDataset, spec: &FitSpec) -> Result<FusionProblem, CliError> {
    let curves = data.surrogate_curves(spec.config.mode)?;
    Ok(FusionProblem::new(&curves, &spec.config.spline)?)
}

fn fit(spec: &FitSpec, out: &mut OutputDir) -> Result<(), CliError> {
    let ingested = load_dataset(spec, 1)?;
    let config = spec.config.pipeline();
    config.validate()?;
    let data = &ingested.dataset;
    let problem = surrogate_problem(data, spec)?;
    let fit = select_and_fit(&problem, &config.fusion)?;
    info!("{} subjects, {} clusters", data.subjects(), fit.k_hat);
    out.write("membership.csv", &membership_csv(data.ids(), &fit.partition)?)?;
    out.write("centers.csv", &centers_csv(&problem, &fit, data.grid().points(), &ingested.original_times)?)?;
    let s = summary(&ingested, spec, &fit, &ingested.excluded);
    out.write("summary.json", serde_json::to_string_pretty(&s)?.as_bytes())?;
    Ok(())
}

fn trace_csv(outcome: &PipelineOutcome) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iteration",
        "k_hat",
        "lambda1",
        "lambda2",
        "bic2",
        "membership_changes",
        "clipped_fraction",
        "returned",
        "stop",
        "warning",
    ])?;
    for r in &outcome.trace.records {
        w.write_record([
            r.iteration.to_string(),
            r.k_hat.to_string(),
            fmt(r.lambda1),
            fmt(r.lambda2),
            fmt(r.bic2),
            r.membership_changes.to_string(),
            r.clipped_fraction.map_or(String::new(), fmt),
            (r.iteration == outcome.returned_iteration).to_string(),
            r.stop.map_or(String::new(), |s| s.to_string()),
            r.warning.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn correct(spec: &FitSpec, out: &mut OutputDir) -> Result<(), CliError> {
    let ingested = load_dataset(spec, 2)?;
    let config = spec.config.pipeline();
    let data = &ingested.dataset;
    let outcome = pipeline::run(data, &config)?;
    info!(
        "{} subjects: {} initial clusters, {} after correction ({})",
        data.subjects(),
        outcome.initial.k_hat,
        outcome.fit.k_hat,
        outcome.trace.stop_reason().map_or("-".into(), |s| s.to_string())
    );
    // Every curve set here lives on the dataset grid, so one design serves all.
    let problem = surrogate_problem(data, spec)?;
    out.write("membership.csv", &membership_csv(data.ids(), &outcome.partition)?)?;
    out.write("initial_membership.csv", &membership_csv(data.ids(), &outcome.initial.partition)?)?;
    out.write("centers.csv", &centers_csv(&problem, &outcome.fit, data.grid().points(), &ingested.original_times)?)?;
    out.write("trace.csv", &trace_csv(&outcome)?)?;
    if spec.emit_data {
        if let Some(pseudo) = &outcome.pseudo {
            let records: Vec<LongRecord> = data
                .ids()
                .iter()
                .enumerate()
                .flat_map(|(i, id)| {
                    data.grid().points().iter().enumerate().map(move |(m, &t)| LongRecord {
                        subject: id.clone(),
                        replicate: "1".into(),
                        time: t,
                        value: Some(pseudo[(i, m)]),
                    })
                })
                .collect();
            out.write("pseudo.csv", &write_long_csv(&records)?)?;
        }
    }
    let mut s = summary(&ingested, spec, &outcome.fit, &ingested.excluded);
    s.correction = Some(CorrectionSummary {
        stop_reason: outcome.trace.stop_reason().map(|r| r.to_string()),
        returned_iteration: outcome.returned_iteration,
        iterations: outcome.trace.records.len() - 1,
        initial_k_hat: outcome.initial.k_hat,
    });
    out.write("summary.json", serde_json::to_string_pretty(&s)?.as_bytes())?;
    Ok(())
}

#[derive(Deserialize)]
struct MembershipRow {
    subject: String,
    cluster: String,
}

pub fn read_membership(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, row) in rdr.deserialize::<MembershipRow>().enumerate() {
        let row = row.map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), k + 2)))?;
        if !seen.insert(row.subject.clone()) {
            return Err(CliError::Data(format!("{}: subject {} listed twice", path.display(), row.subject)));
        }
        rows.push((row.subject, row.cluster));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Metrics {
    n: usize,
    tp: u64,
    tn: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    rand: f64,
    jaccard: f64,
    arand: f64,
}

fn evaluate(spec: &EvaluateSpec, out: &mut OutputDir) -> Result<(), CliError> {
    let truth = read_membership(&spec.truth)?;
    let estimate: BTreeMap<String, String> = read_membership(&spec.estimate)?.into_iter().collect();
    let truth_ids: BTreeSet<&String> = truth.iter().map(|(s, _)| s).collect();
    let only_truth: Vec<&str> = truth_ids.iter().filter(|s| !estimate.contains_key(**s)).map(|s| s.as_str()).collect();
    let only_est: Vec<&str> = estimate.keys().filter(|s| !truth_ids.contains(s)).map(|s| s.as_str()).collect();
    if !only_truth.is_empty() || !only_est.is_empty() {
        return Err(CliError::Data(format!(
            "subject sets differ; only in truth: [{}]; only in estimate: [{}]",
            only_truth.join(", "),
            only_est.join(", ")
        )));
    }
    if truth.len() < 2 {
        return Err(CliError::Data("need at least two subjects".into()));
    }
    let t = Partition::from_labels(truth.iter().map(|(_, c)| c.clone()));
    let e = Partition::from_labels(truth.iter().map(|(s, _)| estimate[s].clone()));
    let a = agreement(&t, &e)?;
    let m = Metrics {
        n: truth.len(),
        tp: a.counts.tp,
        tn: a.counts.tn,
        fp: a.counts.fp,
        fn_: a.counts.fn_,
        rand: a.rand,
        jaccard: a.jaccard,
        arand: a.arand,
    };
    out.write("metrics.json", serde_json::to_string_pretty(&m)?.as_bytes())?;
    Ok(())
}

fn bench(spec: &BenchSpec, out: &mut OutputDir) -> Result<(), CliError> {
    let config = &spec.config;
    if config.scenarios.is_empty() {
        return Err(CliError::Usage("no scenarios configured".into()));
    }
    let settings = config.pipeline();
    let mut rows = Vec::new();
    let mut reps = csv::Writer::from_writer(Vec::new());
    reps.write_record(["scenario", "replication", "seed", "method", "k_hat", "rand", "jaccard", "arand", "error"])?;
    for (idx, scenario) in config.scenarios.iter().enumerate() {
        info!(
            "scenario {}: {} sigma={} n={} mode={} ({} replications)",
            idx + 1,
            scenario.model_label(),
            scenario.sigma,
            scenario.subjects(),
            scenario.correction_mode,
            scenario.n_mc
        );
        let result = run_benchmark(scenario, &config.methods, &settings, spec.parallel)?;
        for r in &result.replications {
            let opt = |v: Option<f64>| v.map_or(String::new(), fmt);
            reps.write_record([
                (idx + 1).to_string(),
                r.replication.to_string(),
                r.seed.to_string(),
                r.method.to_string(),
                r.k_hat.map_or(String::new(), |k| k.to_string()),
                opt(r.rand),
                opt(r.jaccard),
                opt(r.arand),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        rows.extend(result.rows);
        if spec.emit_data {
            for rep in 0..scenario.n_mc {
                let data = generate(scenario, scenario.replication_seed(rep))?;
                let stem = format!("data/scenario{}_rep{}", idx + 1, rep);
                out.write(&format!("{stem}.csv"), &write_long_csv(&dataset_records(&data.observed))?)?;
                out.write(&format!("{stem}_truth.csv"), &membership_csv(data.observed.ids(), &data.truth)?)?;
            }
        }
    }
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record([
        "model", "sigma", "n", "mode", "method", "k_hat", "rand", "jaccard", "arand", "replications", "attrition",
    ])?;
    for r in &rows {
        table.write_record([
            r.model.clone(),
            fmt(r.sigma),
            r.n.to_string(),
            r.mode.to_string(),
            r.method.to_string(),
            fmt(r.mean_k_hat),
            fmt(r.mean_rand),
            fmt(r.mean_jaccard),
            fmt(r.mean_arand),
            r.replications.to_string(),
            r.attrition.to_string(),
        ])?;
    }
    out.write("table.csv", &table.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    out.write("table.txt", render_table(&rows).as_bytes())?;
    out.write("replications.csv", &reps.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    let attrition: usize = rows.iter().map(|r| r.attrition).sum();
    if attrition > 0 {
        warn!("{attrition} replication(s) failed; see replications.csv");
    }
    Ok(())
}
