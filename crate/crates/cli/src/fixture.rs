//! Synthetic stand-in for a minute-level activity study: 45 subjects in three
//! activity patterns, three days each, 135 minutes per day with sporadic gaps.
//! Binned at five minutes it gives 27 points per curve.

use std::f64::consts::PI;

use fdclust::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::CliError;
use crate::ingest::{write_long_csv, LongRecord};

pub const SUBJECTS: usize = 45;
pub const DAYS: usize = 3;
pub const MINUTES: usize = 135;
pub const MISSING_RATE: f64 = 0.02;
pub const BUNDLED_SEED: u64 = 0;

fn pattern(group: usize, t: f64) -> f64 {
    match group {
        0 => 1.5 + 0.8 * (PI * t).sin(),
        1 => 1.5 + 0.8 * (2.0 * PI * t).cos(),
        _ => 1.5 + 1.2 * t,
    }
}

pub fn fixture_records(seed_value: u64) -> Vec<LongRecord> {
    let mut rng = seed::rng(seed_value);
    let subject_sd = Normal::new(0.0, 0.15).expect("valid sd");
    let day_sd = Normal::new(0.0, 0.3).expect("valid sd");
    let minute_sd = Normal::new(0.0, 0.25).expect("valid sd");
    let mut out = Vec::with_capacity(SUBJECTS * DAYS * MINUTES);
    for i in 0..SUBJECTS {
        let group = i % 3;
        let offset = subject_sd.sample(&mut rng);
        for day in 0..DAYS {
            let shift = day_sd.sample(&mut rng);
            for minute in 0..MINUTES {
                let t = minute as f64 / (MINUTES - 1) as f64;
                let value = pattern(group, t) + offset + shift + minute_sd.sample(&mut rng);
                let missing = rng.random::<f64>() < MISSING_RATE;
                out.push(LongRecord {
                    subject: format!("p{:02}", i + 1),
                    replicate: (day + 1).to_string(),
                    time: minute as f64,
                    value: (!missing).then_some(value),
                });
            }
        }
    }
    out
}

pub fn fixture_csv(seed_value: u64) -> Result<Vec<u8>, CliError> {
    write_long_csv(&fixture_records(seed_value))
}

/// Pattern of each fixture subject.
pub fn fixture_groups() -> Vec<usize> {
    (0..SUBJECTS).map(|i| i % 3).collect()
}
