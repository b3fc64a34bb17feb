//! Long-format CSV ingestion and preprocessing.
//!
//! Steps, each optional except the last: cubic-spline imputation of missing
//! grid values, bin averaging, centering, truncation, and rescaling of time
//! onto `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use fdclust::{FunctionalDataset, TimeGrid};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One row of the long-format input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRecord {
    pub subject: String,
    pub replicate: String,
    pub time: f64,
    /// `None` for an empty field.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Subtract each replicate curve's own mean.
    #[default]
    Curve,
    /// Subtract, per replicate index, the mean over all subjects and times.
    CrossSubject,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub impute: bool,
    /// Bin width in input time units.
    pub bins: Option<f64>,
    pub centering: Centering,
    /// Inclusive window in input time units, applied after binning.
    pub truncate: Option<(f64, f64)>,
    pub min_replicates: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            impute: true,
            bins: None,
            centering: Centering::Curve,
            truncate: None,
            min_replicates: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: FunctionalDataset,
    /// Times of the common grid before rescaling.
    pub original_times: Vec<f64>,
    pub excluded: Vec<(String, String)>,
}

#[derive(Deserialize)]
struct RawRow {
    subject: String,
    replicate: String,
    time: String,
    value: String,
}

pub fn read_long_csv<R: Read>(reader: R) -> Result<Vec<LongRecord>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (k, row) in rdr.deserialize::<RawRow>().enumerate() {
        // header is line 1
        let line = k + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let time = match row.time.parse::<f64>() {
            Ok(t) if t.is_finite() => t,
            _ => {
                bad.push(format!("line {line}: bad time {:?}", row.time));
                continue;
            }
        };
        let value = if row.value.is_empty() || row.value.eq_ignore_ascii_case("na") {
            None
        } else {
            match row.value.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    bad.push(format!("line {line}: bad value {:?}", row.value));
                    continue;
                }
            }
        };
        if row.subject.is_empty() || row.replicate.is_empty() {
            bad.push(format!("line {line}: empty subject or replicate"));
            continue;
        }
        out.push(LongRecord {
            subject: row.subject,
            replicate: row.replicate,
            time,
            value,
        });
    }
    if !bad.is_empty() {
        return Err(CliError::Data(format!("unparseable rows:\n  {}", bad.join("\n  "))));
    }
    Ok(out)
}

/// Numeric ids sort numerically, others lexically after them.
fn id_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Natural cubic spline through `(x, y)`, `x` strictly increasing.
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        NaturalSpline { x, y, m }
    }

    /// Linear beyond the end knots.
    pub fn eval(&self, t: f64) -> f64 {
        let (x, y, m) = (&self.x, &self.y, &self.m);
        let n = x.len();
        if n == 1 {
            return y[0];
        }
        let slope = |i: usize| {
            let h = x[i + 1] - x[i];
            (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0
        };
        if t <= x[0] {
            return y[0] + slope(0) * (t - x[0]);
        }
        if t >= x[n - 1] {
            let h = x[n - 1] - x[n - 2];
            let end = (y[n - 1] - y[n - 2]) / h + h * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
            return y[n - 1] + end * (t - x[n - 1]);
        }
        let i = x.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
        let h = x[i + 1] - x[i];
        let a = (x[i + 1] - t) / h;
        let b = (t - x[i]) / h;
        a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
    }
}

type Curve = Vec<Option<f64>>;

fn impute(curve: &mut Curve, times: &[f64]) -> Result<(), String> {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(curve.iter())
        .filter_map(|(&t, v)| v.map(|v| (t, v)))
        .unzip();
    if x.len() == curve.len() {
        return Ok(());
    }
    if x.len() < 2 {
        return Err(format!("only {} observed values", x.len()));
    }
    let spline = NaturalSpline::new(x, y);
    for (v, &t) in curve.iter_mut().zip(times) {
        if v.is_none() {
            *v = Some(spline.eval(t));
        }
    }
    Ok(())
}

/// Bin index of each time, starting at the smallest time.
fn bin_edges(times: &[f64], width: f64) -> Vec<usize> {
    let t0 = times[0];
    times
        .iter()
        .map(|&t| ((t - t0) / width + 1e-9).floor() as usize)
        .collect()
}

/// Average members of each bin; times become the member-time means.
fn bin(times: &[f64], curves: &mut [Vec<Curve>], width: f64) -> Vec<f64> {
    let idx = bin_edges(times, width);
    let nbins = idx.last().map_or(0, |&b| b + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nbins];
    for (k, &b) in idx.iter().enumerate() {
        members[b].push(k);
    }
    members.retain(|m| !m.is_empty());
    let new_times = members
        .iter()
        .map(|m| m.iter().map(|&k| times[k]).sum::<f64>() / m.len() as f64)
        .collect();
    for subject in curves.iter_mut() {
        for curve in subject.iter_mut() {
            *curve = members
                .iter()
                .map(|m| {
                    let vals: Vec<f64> = m.iter().filter_map(|&k| curve[k]).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect();
        }
    }
    new_times
}

pub fn ingest(records: &[LongRecord], options: &IngestOptions) -> Result<Ingested, CliError> {
    if let Some(w) = options.bins {
        if !(w > 0.0 && w.is_finite()) {
            return Err(CliError::Usage(format!("bin width must be positive, got {w}")));
        }
    }
    if let Some((a, b)) = options.truncate {
        if !(a < b) {
            return Err(CliError::Usage(format!("truncation window [{a}, {b}] is empty")));
        }
    }
    if records.is_empty() {
        return Err(CliError::Data("input has no rows".into()));
    }

    let mut times: Vec<f64> = records.iter().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let time_index = |t: f64| times.binary_search_by(|x| x.total_cmp(&t)).expect("time is on the grid");

    // subject -> replicate -> curve
    let mut table: BTreeMap<&str, BTreeMap<&str, Curve>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut dups = Vec::new();
    for r in records {
        if !seen.insert((r.subject.as_str(), r.replicate.as_str(), r.time.to_bits())) {
            dups.push(format!("({}, {}, {})", r.subject, r.replicate, r.time));
            continue;
        }
        let curve = table
            .entry(&r.subject)
            .or_default()
            .entry(&r.replicate)
            .or_insert_with(|| vec![None; times.len()]);
        curve[time_index(r.time)] = r.value;
    }
    if !dups.is_empty() {
        return Err(CliError::Data(format!("duplicate (subject, replicate, time): {}", dups.join(", "))));
    }

    let mut excluded = Vec::new();
    let mut subjects: Vec<(String, Vec<Curve>)> = Vec::new();
    let mut subject_ids: Vec<&str> = table.keys().copied().collect();
    subject_ids.sort_by(|a, b| id_order(a, b));
    for id in subject_ids {
        let reps = &table[id];
        if reps.len() < options.min_replicates.max(1) {
            excluded.push((id.to_string(), format!("{} replicates, need {}", reps.len(), options.min_replicates)));
            continue;
        }
        let mut rep_ids: Vec<&str> = reps.keys().copied().collect();
        rep_ids.sort_by(|a, b| id_order(a, b));
        subjects.push((id.to_string(), rep_ids.iter().map(|r| reps[r].clone()).collect()));
    }
    if subjects.is_empty() {
        return Err(CliError::Data("no subject has enough replicates".into()));
    }
    let j = subjects.iter().map(|(_, r)| r.len()).min().expect("nonempty");
    for (id, reps) in subjects.iter_mut() {
        if reps.len() > j {
            warn!("subject {id}: using the first {j} of {} replicates", reps.len());
            reps.truncate(j);
        }
    }

    if options.impute {
        let mut kept = Vec::new();
        for (id, mut reps) in subjects {
            match reps.iter_mut().try_for_each(|c| impute(c, &times)) {
                Ok(()) => kept.push((id, reps)),
                Err(why) => {
                    warn!("subject {id} excluded: {why}");
                    excluded.push((id, why));
                }
            }
        }
        subjects = kept;
    }

    let mut curves: Vec<Vec<Curve>> = subjects.iter().map(|(_, r)| r.clone()).collect();
    let ids: Vec<String> = subjects.into_iter().map(|(id, _)| id).collect();
    if let Some(w) = options.bins {
        times = bin(&times, &mut curves, w);
    }

    let missing: Vec<String> = ids
        .iter()
        .zip(&curves)
        .filter(|(_, reps)| reps.iter().any(|c| c.iter().any(Option::is_none)))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "missing values remain (enable imputation) for subjects: {}",
            missing.join(", ")
        )));
    }
    let mut values: Vec<Vec<Vec<f64>>> = curves
        .into_iter()
        .map(|reps| reps.into_iter().map(|c| c.into_iter().map(|v| v.expect("checked")).collect()).collect())
        .collect();

    match options.centering {
        Centering::Curve => {
            for curve in values.iter_mut().flatten() {
                let mean = curve.iter().sum::<f64>() / curve.len() as f64;
                curve.iter_mut().for_each(|v| *v -= mean);
            }
        }
        Centering::CrossSubject => {
            for r in 0..j {
                let (sum, count) = values
                    .iter()
                    .flat_map(|s| s[r].iter())
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                let mean = sum / count as f64;
                values.iter_mut().for_each(|s| s[r].iter_mut().for_each(|v| *v -= mean));
            }
        }
        Centering::None => {}
    }

    if let Some((a, b)) = options.truncate {
        let keep: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= a && times[k] <= b).collect();
        times = keep.iter().map(|&k| times[k]).collect();
        for curve in values.iter_mut().flatten() {
            *curve = keep.iter().map(|&k| curve[k]).collect();
        }
    }
    if times.len() < 2 {
        return Err(CliError::Data(format!("{} time point(s) left after preprocessing", times.len())));
    }

    let (lo, hi) = (times[0], times[times.len() - 1]);
    let scaled: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| if k == times.len() - 1 { 1.0 } else { (t - lo) / (hi - lo) })
        .collect();
    let grid = TimeGrid::new(scaled)?;
    let dataset = FunctionalDataset::new(grid, ids, &values)?;
    Ok(Ingested {
        dataset,
        original_times: times,
        excluded,
    })
}

/// Long-format rows of a dataset, replicates numbered from 1.
pub fn dataset_records(data: &FunctionalDataset) -> Vec<LongRecord> {
    let arr = data.array();
    let mut out = Vec::new();
    for (i, id) in data.ids().iter().enumerate() {
        for j in 0..arr.replicates() {
            for (&t, &v) in data.grid().points().iter().zip(arr.curve(i, j)) {
                out.push(LongRecord {
                    subject: id.clone(),
                    replicate: (j + 1).to_string(),
                    time: t,
                    value: Some(v),
                });
            }
        }
    }
    out
}

pub fn write_long_csv(records: &[LongRecord]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "replicate", "time", "value"])?;
    for r in records {
        let value = r.value.map_or(String::new(), |v| v.to_string());
        w.write_record([r.subject.as_str(), r.replicate.as_str(), &r.time.to_string(), &value])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}
