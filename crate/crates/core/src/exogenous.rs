//! Demand and available-wind series: CSV ingestion, synthetic generation and
//! forecasts.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scu::Exogenous;
use crate::systems::RecoveryScenario;

pub const MINUTES_PER_DAY: usize = 1440;
pub const FORECAST_POINTS: usize = 30;
pub const FORECAST_INTERVAL: usize = 15;
pub const WIND_MAX_KW: f64 = 400.0;
pub const CSV_HEADER: [&str; 3] = ["minute", "demand_kw", "wind_avail_kw"];

const DEMAND_RANGE: (f64, f64) = (180.0, 540.0);

/// One value per minute of demand and available wind power (kW).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExogenousSeries {
    pub demand: Vec<f64>,
    pub wind_avail: Vec<f64>,
}

impl ExogenousSeries {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    /// Inputs for minute `t`, wrapping around the end of the series.
    pub fn at(&self, t: usize) -> Exogenous {
        let i = t % self.len();
        Exogenous { demand: self.demand[i], wind_avail: self.wind_avail[i] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.demand.len() != self.wind_avail.len() {
            return Err(Error::Config("demand and wind series differ in length".into()));
        }
        if let Some(d) = self.demand.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Config(format!("demand {d} is not a finite non-negative value")));
        }
        if let Some(w) = self.wind_avail.iter().find(|w| !(0.0..=WIND_MAX_KW).contains(*w)) {
            return Err(Error::Config(format!("available wind {w} outside [0, {WIND_MAX_KW}]")));
        }
        Ok(())
    }

    /// Historical extremes and fastest per-minute changes, as used by the
    /// recovery shield's worst-case rollout.
    pub fn recovery_scenario(&self, horizon: usize) -> RecoveryScenario {
        let max_step = |xs: &[f64]| xs.windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
        RecoveryScenario {
            horizon,
            demand_high: self.demand.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            demand_low: self.demand.iter().copied().fold(f64::INFINITY, f64::min),
            wind_low: self.wind_avail.iter().copied().fold(f64::INFINITY, f64::min),
            demand_ramp: max_step(&self.demand),
            wind_ramp: max_step(&self.wind_avail),
            ..RecoveryScenario::default()
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", CSV_HEADER.join(","))?;
        for (t, (d, w)) in self.demand.iter().zip(&self.wind_avail).enumerate() {
            writeln!(out, "{t},{d},{w}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads a series CSV (`minute,demand_kw,wind_avail_kw`, header optional).
pub fn load_series(path: &Path) -> Result<ExogenousSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut series = ExogenousSeries::default();
    let mut previous: Option<i64> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && record.get(0) == Some(CSV_HEADER[0]) {
            if record.iter().ne(CSV_HEADER.iter().copied()) {
                return Err(parse_err(line, format!("expected header {}", CSV_HEADER.join(","))));
            }
            continue;
        }
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 columns, found {}", record.len())));
        }
        let number = |col: usize| -> Result<f64> {
            record[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("{} is not a number: {:?}", CSV_HEADER[col], &record[col])))
        };
        let minute: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("minute is not an integer: {:?}", &record[0])))?;
        if let Some(p) = previous {
            if minute != p + 1 {
                return Err(parse_err(line, format!("minute {minute} does not follow {p}")));
            }
        }
        previous = Some(minute);
        let demand = number(1)?;
        let wind = number(2)?;
        let range = |field, value: f64, min: f64, max: f64| {
            if (min..=max).contains(&value) {
                Ok(())
            } else {
                Err(Error::OutOfRange { path: path.to_path_buf(), line, field, value, min, max })
            }
        };
        range("demand_kw", demand, 0.0, f64::MAX)?;
        range("wind_avail_kw", wind, 0.0, WIND_MAX_KW)?;
        series.demand.push(demand);
        series.wind_avail.push(wind);
    }
    Ok(series)
}

fn diurnal(t: usize) -> f64 {
    // Low around 04:00, high around 19:00.
    let phase = (t % MINUTES_PER_DAY) as f64 / MINUTES_PER_DAY as f64;
    -60.0 * (std::f64::consts::TAU * (phase - 1.0 / 24.0)).cos() - 25.0 * (2.0 * std::f64::consts::TAU * phase).sin()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Synthetic series matching the site statistics: demand between 180 and
/// 540 kW averaging about 320 kW, wind between 0 and 400 kW.
pub fn synth_series(seed: u64, days: usize) -> ExogenousSeries {
    let n = days * MINUTES_PER_DAY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = 0.0;
    let mut wind: f64 = 272.0 + 60.0 * normal(&mut rng);
    let mut series = ExogenousSeries { demand: Vec::with_capacity(n), wind_avail: Vec::with_capacity(n) };
    for t in 0..n {
        walk = 0.995 * walk + 2.5 * normal(&mut rng);
        let d = 320.0 + diurnal(t) + walk;
        series.demand.push(d.clamp(DEMAND_RANGE.0, DEMAND_RANGE.1));
        wind += 0.002 * (272.0 - wind) + 5.0 * normal(&mut rng);
        wind = wind.clamp(0.0, WIND_MAX_KW);
        series.wind_avail.push(wind);
    }
    series
}

/// Hard synthetic series: weak wind that collapses to zero and demand that
/// jumps to its maximum at a steep rate several times a day.
pub fn adversarial_series(seed: u64, days: usize) -> ExogenousSeries {
    let n = days * MINUTES_PER_DAY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xad5e_7a11);
    let mut series = ExogenousSeries { demand: Vec::with_capacity(n), wind_avail: Vec::with_capacity(n) };
    let mut wind: f64 = 80.0;
    let mut base = 260.0;
    let mut surge = 0.0_f64;
    let mut target = 0.0_f64;
    let mut hold = 0usize;
    for _ in 0..n {
        if hold == 0 {
            // alternate between calm periods and surges to the demand ceiling
            if target > 0.0 {
                target = 0.0;
                hold = rng.random_range(60..180);
            } else {
                target = rng.random_range(200.0..300.0);
                hold = rng.random_range(30..120);
            }
        }
        hold -= 1;
        surge += (target - surge).clamp(-20.0, 30.0);
        base = (base + 1.5 * normal(&mut rng)).clamp(220.0, 300.0);
        series.demand.push((base + surge).clamp(DEMAND_RANGE.0, DEMAND_RANGE.1));
        wind += 0.01 * (40.0 - wind) + 6.0 * normal(&mut rng);
        wind = wind.clamp(0.0, WIND_MAX_KW);
        series.wind_avail.push(wind);
    }
    series
}

/// Which exogenous variable a forecast covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForecastKind {
    Demand,
    Wind,
}

/// Forecast error: zero-mean Gaussian whose standard deviation grows as
/// `sigma * sqrt(k)` at lead `k` (in forecast points). `sigma = 0` gives the
/// true future values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastNoise {
    pub sigma_kw: f64,
    pub seed: u64,
}

fn forecast_rng(seed: u64, t: usize, kind: ForecastKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((t as u64) << 1 | matches!(kind, ForecastKind::Wind) as u64);
    rng
}

/// 30-point forecast at 15-minute intervals issued at minute `t`.
pub fn forecast_at(series: &ExogenousSeries, t: usize, kind: ForecastKind, noise: ForecastNoise) -> [f64; FORECAST_POINTS] {
    let values = match kind {
        ForecastKind::Demand => &series.demand,
        ForecastKind::Wind => &series.wind_avail,
    };
    let mut out = [0.0; FORECAST_POINTS];
    let mut rng = (noise.sigma_kw > 0.0).then(|| forecast_rng(noise.seed, t, kind));
    for (k, slot) in out.iter_mut().enumerate() {
        let lead = k + 1;
        let truth = values[(t + lead * FORECAST_INTERVAL) % values.len()];
        let err = rng.as_mut().map_or(0.0, |r| noise.sigma_kw * (lead as f64).sqrt() * normal(r));
        *slot = match kind {
            ForecastKind::Demand => (truth + err).max(0.0),
            ForecastKind::Wind => (truth + err).clamp(0.0, WIND_MAX_KW),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_rows_with_or_without_header() {
        let f = write("0,320,272\n1,318,270\n2,321,268\n");
        let s = load_series(f.path()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.at(1), Exogenous { demand: 318.0, wind_avail: 270.0 });
        let f = write("minute,demand_kw,wind_avail_kw\n0,320,272\n1,318,270\n");
        assert_eq!(load_series(f.path()).unwrap().len(), 2);
    }

    #[test]
    fn wind_above_rating_is_out_of_range() {
        let f = write("0,320,272\n1,318,450\n");
        match load_series(f.path()).unwrap_err() {
            Error::OutOfRange { line, field, value, .. } => {
                assert_eq!((line, field, value), (2, "wind_avail_kw", 450.0));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_column_reports_line() {
        let f = write("0,320,272\n1,318\n");
        match load_series(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn minutes_must_be_consecutive() {
        let f = write("0,320,272\n2,318,270\n");
        assert!(matches!(load_series(f.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let s = synth_series(3, 1);
        let f = tempfile::NamedTempFile::new().unwrap();
        s.write_csv(f.path()).unwrap();
        assert_eq!(load_series(f.path()).unwrap(), s);
    }

    #[test]
    fn synthetic_series_is_deterministic_and_in_range() {
        let a = synth_series(11, 10);
        assert_eq!(a, synth_series(11, 10));
        assert_ne!(a, synth_series(12, 10));
        assert_eq!(a.len(), 14400);
        a.validate().unwrap();
        assert!(a.demand.iter().all(|d| (180.0..=540.0).contains(d)));
        let mean = a.demand.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 320.0).abs() <= 25.0, "mean demand {mean}");
    }

    #[test]
    fn adversarial_series_is_in_range() {
        let s = adversarial_series(1, 3);
        s.validate().unwrap();
        assert!(s.demand.iter().all(|d| (180.0..=540.0).contains(d)));
    }

    #[test]
    fn scenario_extremes_match_series() {
        let s = ExogenousSeries { demand: vec![300.0, 320.0, 310.0, 400.0], wind_avail: vec![50.0, 10.0, 30.0, 25.0] };
        let r = s.recovery_scenario(9);
        assert_eq!((r.demand_high, r.wind_low, r.demand_ramp, r.wind_ramp), (400.0, 10.0, 90.0, 40.0));
    }

    #[test]
    fn perfect_foresight_without_noise() {
        let s = synth_series(5, 1);
        let f = forecast_at(&s, 100, ForecastKind::Demand, ForecastNoise::default());
        for (k, v) in f.iter().enumerate() {
            assert_eq!(*v, s.demand[100 + 15 * (k + 1)]);
        }
        // wraps around the end of the series
        let f = forecast_at(&s, 1439, ForecastKind::Wind, ForecastNoise::default());
        assert_eq!(f[0], s.wind_avail[14]);
    }

    #[test]
    fn noisy_forecast_is_deterministic() {
        let s = synth_series(5, 1);
        let noise = ForecastNoise { sigma_kw: 10.0, seed: 9 };
        let a = forecast_at(&s, 50, ForecastKind::Wind, noise);
        assert_eq!(a, forecast_at(&s, 50, ForecastKind::Wind, noise));
        assert_ne!(a, forecast_at(&s, 50, ForecastKind::Demand, noise));
    }

    #[test]
    fn forecast_error_grows_with_lead() {
        let flat = ExogenousSeries { demand: vec![300.0; 2000], wind_avail: vec![200.0; 2000] };
        let noise = ForecastNoise { sigma_kw: 5.0, seed: 1 };
        let (mut first, mut last) = (Vec::new(), Vec::new());
        for t in 0..1000 {
            let f = forecast_at(&flat, t, ForecastKind::Demand, noise);
            first.push(f[0] - 300.0);
            last.push(f[29] - 300.0);
        }
        let std = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        assert!(std(&last) > std(&first));
        assert!((std(&first) - 5.0).abs() < 0.6);
    }
}
