//! Episode accounting: metrics records, trajectory rows and their files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Running totals over an episode (or the contribution of one step).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub steps: u64,
    pub fuel_l: f64,
    pub degradation: f64,
    pub reward: f64,
    pub neg_balance_steps: u64,
    pub neg_balance_kwh: f64,
    pub pos_balance_steps: u64,
    pub pos_balance_kwh: f64,
    /// Steps where any part of the agent action was modified.
    pub shield_interventions: u64,
    /// Steps where the recovery shield replaced the status command.
    pub recovery_interventions: u64,
    /// Steps where no status command passed both recovery rollouts.
    pub recovery_exhausted: u64,
    pub battery_reserve_minutes: u64,
    pub genset_overload_minutes: u64,
}

impl MetricsRecord {
    pub fn accumulate(&mut self, d: &MetricsRecord) {
        self.steps += d.steps;
        self.fuel_l += d.fuel_l;
        self.degradation += d.degradation;
        self.reward += d.reward;
        self.neg_balance_steps += d.neg_balance_steps;
        self.neg_balance_kwh += d.neg_balance_kwh;
        self.pos_balance_steps += d.pos_balance_steps;
        self.pos_balance_kwh += d.pos_balance_kwh;
        self.shield_interventions += d.shield_interventions;
        self.recovery_interventions += d.recovery_interventions;
        self.recovery_exhausted += d.recovery_exhausted;
        self.battery_reserve_minutes += d.battery_reserve_minutes;
        self.genset_overload_minutes += d.genset_overload_minutes;
    }
}

/// Event flags carried in the trajectory `intervention` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InterventionFlags {
    pub recovery: bool,
    pub reserve: bool,
    pub overload: bool,
    pub exhausted: bool,
}

impl InterventionFlags {
    pub fn encode(&self) -> String {
        let names = [
            (self.recovery, "recovery"),
            (self.reserve, "reserve"),
            (self.overload, "overload"),
            (self.exhausted, "exhausted"),
        ];
        let set: Vec<&str> = names.iter().filter(|(on, _)| *on).map(|(_, n)| *n).collect();
        if set.is_empty() {
            "none".to_string()
        } else {
            set.join("|")
        }
    }

    pub fn decode(s: &str) -> Option<Self> {
        let mut f = Self::default();
        if s == "none" {
            return Some(f);
        }
        for part in s.split('|') {
            match part {
                "recovery" => f.recovery = true,
                "reserve" => f.reserve = true,
                "overload" => f.overload = true,
                "exhausted" => f.exhausted = true,
                _ => return None,
            }
        }
        Some(f)
    }
}

/// One minute of a trajectory, in the column order of the CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub minute: u64,
    pub demand: f64,
    pub wind_avail: f64,
    pub p_wind: f64,
    pub p_batt: f64,
    pub soc: f64,
    pub p_gen1: f64,
    pub p_gen2: f64,
    pub status1: String,
    pub status2: String,
    pub fuel_l: f64,
    pub deg: f64,
    pub reward: f64,
    pub balance: f64,
    pub intervention: String,
}

pub const TRAJECTORY_HEADER: [&str; 15] = [
    "minute",
    "demand",
    "wind_avail",
    "p_wind",
    "p_batt",
    "soc",
    "p_gen1",
    "p_gen2",
    "status1",
    "status2",
    "fuel_l",
    "deg",
    "reward",
    "balance",
    "intervention",
];

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut records = r.records();
    match records.next() {
        None => return Ok(Vec::new()),
        Some(header) => {
            let header = header?;
            if header.iter().ne(TRAJECTORY_HEADER) {
                return Err(crate::Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("expected header {}", TRAJECTORY_HEADER.join(",")),
                });
            }
        }
    }
    records
        .map(|rec| {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rec.deserialize(None).map_err(|e| crate::Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Step latency statistics (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(contract("no latency samples"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantile = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
        Ok(Self {
            samples: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50: quantile(0.5),
            p99: quantile(0.99),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Episode summary written next to the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub policy: String,
    pub seed: u64,
    pub minutes: u64,
    pub alpha: f64,
    pub device_shields: bool,
    pub recovery_shield: bool,
    pub metrics: MetricsRecord,
    pub latency: Option<LatencyStats>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
