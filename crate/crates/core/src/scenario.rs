//! Weather series, time-stepped simulation and iteration statistics.

use std::f64::consts::PI;
use std::io;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AirflowSystem, BoundaryState, PressureVector};
use crate::network::Network;
use crate::solver::{solve_system, SolveError, SolverConfig, Strategy};

pub const WEATHER_HEADER: [&str; 4] = ["timestamp", "wind_speed_m_s", "wind_dir_deg", "temp_out_c"];

const KELVIN_OFFSET: f64 = 273.15;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: String,
    pub wind_speed: f64,
    pub wind_direction: f64,
    /// °C
    pub outdoor_temperature: f64,
}

impl WeatherRecord {
    pub fn boundary(&self) -> BoundaryState {
        BoundaryState::new(
            self.wind_speed,
            self.wind_direction,
            self.outdoor_temperature + KELVIN_OFFSET,
        )
    }
}

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("weather header must be `{}`, found `{found}`", WEATHER_HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: negative wind speed {value}")]
    NegativeWindSpeed { line: u64, value: f64 },
    #[error("line {line}: timestamp {timestamp} does not follow the previous one")]
    NonMonotone { line: u64, timestamp: String },
    #[error("weather file has no records")]
    Empty,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .ok()
        .or_else(|| {
            chrono::DateTime::parse_from_rfc3339(s)
                .ok()
                .map(|d| d.naive_utc())
        })
}

/// Reads a weather CSV with header `timestamp,wind_speed_m_s,wind_dir_deg,temp_out_c`.
pub fn parse_weather(text: &str) -> Result<Vec<WeatherRecord>, WeatherError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| WeatherError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(WEATHER_HEADER) {
        return Err(WeatherError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out: Vec<WeatherRecord> = Vec::new();
    let mut times: Vec<NaiveDateTime> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| WeatherError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let malformed = |message: String| WeatherError::Malformed { line, message };
        let number = |i: usize| -> Result<f64, WeatherError> {
            let v: f64 = row[i].parse().map_err(|_| {
                malformed(format!(
                    "{} is not a number: `{}`",
                    WEATHER_HEADER[i], &row[i]
                ))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(format!("{} is not finite", WEATHER_HEADER[i])))
            }
        };

        let time = parse_timestamp(&row[0])
            .ok_or_else(|| malformed(format!("invalid ISO-8601 timestamp `{}`", &row[0])))?;
        let record = WeatherRecord {
            timestamp: row[0].to_owned(),
            wind_speed: number(1)?,
            wind_direction: number(2)?,
            outdoor_temperature: number(3)?,
        };
        if record.wind_speed < 0.0 {
            return Err(WeatherError::NegativeWindSpeed {
                line,
                value: record.wind_speed,
            });
        }
        if record.outdoor_temperature + KELVIN_OFFSET <= 0.0 {
            return Err(malformed("temperature below absolute zero".into()));
        }
        if let Some(&prev) = times.last() {
            if time <= prev {
                return Err(WeatherError::NonMonotone {
                    line,
                    timestamp: record.timestamp,
                });
            }
            if times.len() >= 2 && time - prev != prev - times[times.len() - 2] {
                warn!("line {line}: weather time step is not uniform");
            }
        }
        times.push(time);
        out.push(record);
    }
    if out.is_empty() {
        return Err(WeatherError::Empty);
    }
    Ok(out)
}

pub fn write_weather<W: io::Write>(records: &[WeatherRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WEATHER_HEADER)?;
    for r in records {
        w.write_record([
            r.timestamp.clone(),
            format!("{:.2}", r.wind_speed),
            format!("{:.1}", r.wind_direction),
            format!("{:.2}", r.outdoor_temperature),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic tropical weather: diurnal temperature swing around 26 °C and a
/// gusty easterly trade wind with a diurnal cycle, all from a seeded RNG.
pub fn synthetic_weather(days: u32, step_minutes: u32, seed: u64) -> Vec<WeatherRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let start = NaiveDate::from_ymd_opt(1998, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let steps = (days as u64 * 24 * 60 / step_minutes.max(1) as u64) as usize;
    let dt_hours = step_minutes as f64 / 60.0;

    // AR(1) disturbances with roughly hourly memory.
    let phi = (-dt_hours / 3.0).exp();
    let innovation = (1.0 - phi * phi).sqrt();
    let (mut gust, mut veer, mut drift) = (0.0, 0.0, 0.0);

    (0..steps)
        .map(|i| {
            let time = start + Duration::minutes(i as i64 * step_minutes as i64);
            let hour = i as f64 * dt_hours % 24.0;
            gust = phi * gust + innovation * unit.sample(&mut rng);
            veer = phi * veer + innovation * unit.sample(&mut rng);
            drift = phi * drift + innovation * unit.sample(&mut rng);

            let temperature = 26.0 + 3.5 * (2.0 * PI * (hour - 9.0) / 24.0).sin() + 0.4 * drift;
            let speed = (3.0 + 1.5 * (2.0 * PI * (hour - 8.0) / 24.0).sin() + 1.2 * gust).max(0.0);
            let direction = (110.0 + 25.0 * veer).rem_euclid(360.0);
            WeatherRecord {
                timestamp: time.format(TIMESTAMP_FORMAT).to_string(),
                wind_speed: (speed * 100.0).round() / 100.0,
                wind_direction: (direction * 10.0).round() / 10.0,
                outdoor_temperature: (temperature * 100.0).round() / 100.0,
            }
        })
        .collect()
}

/// Iteration accounting and result of one time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimestepRecord {
    pub timestamp: String,
    pub strategy: Strategy,
    pub picard_iters: usize,
    pub newton_iters: usize,
    pub converged_in_picard: bool,
    pub picard_aborted: Option<String>,
    pub max_residual: f64,
    pub pressures: PressureVector,
    /// Reason the step failed, `None` when it converged.
    pub failure: Option<String>,
}

impl TimestepRecord {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }

    /// Newton iterations plus the Picard iterations spent when Picard ran
    /// without finishing the step.
    pub fn iterations_with_picard(&self) -> usize {
        if self.converged_in_picard {
            self.newton_iters
        } else {
            self.newton_iters + self.picard_iters
        }
    }
}

/// Solves every weather record in turn. Failed steps are recorded and the
/// next step restarts from zero pressures.
pub fn run_simulation(
    net: &Network,
    weather: &[WeatherRecord],
    strategy: Strategy,
    cfg: &SolverConfig,
    warm_start: bool,
) -> Result<Vec<TimestepRecord>, SolveError> {
    cfg.validate()?;
    let zeros = vec![0.0; net.zones.len()];
    let mut start = zeros.clone();
    let mut out = Vec::with_capacity(weather.len());

    for w in weather {
        let bc = w.boundary();
        let sys = AirflowSystem::new(net, &bc, cfg.dp_lin)?;
        let record = match solve_system(&sys, &start, strategy, cfg) {
            Ok(o) => {
                start = if warm_start {
                    o.pressures.clone()
                } else {
                    zeros.clone()
                };
                TimestepRecord {
                    timestamp: w.timestamp.clone(),
                    strategy,
                    picard_iters: o.picard_iters_used,
                    newton_iters: o.newton_iters,
                    converged_in_picard: o.converged_in_picard,
                    picard_aborted: o.picard_aborted.map(|a| a.label().to_owned()),
                    max_residual: o.max_residual,
                    pressures: o.pressures,
                    failure: None,
                }
            }
            Err(e) => {
                warn!("{} {}: {}", w.timestamp, strategy, e);
                start = zeros.clone();
                let reason = e.kind().to_owned();
                match e {
                    SolveError::NonConvergence {
                        iterations,
                        max_residual,
                        pressures,
                        picard_iters_used,
                        picard_aborted,
                    } => TimestepRecord {
                        timestamp: w.timestamp.clone(),
                        strategy,
                        picard_iters: picard_iters_used,
                        newton_iters: iterations,
                        converged_in_picard: false,
                        picard_aborted: picard_aborted.map(|a| a.label().to_owned()),
                        max_residual,
                        pressures,
                        failure: Some(reason),
                    },
                    SolveError::SingularJacobian {
                        iteration,
                        pressures,
                        picard_iters_used,
                        picard_aborted,
                    } => TimestepRecord {
                        timestamp: w.timestamp.clone(),
                        strategy,
                        picard_iters: picard_iters_used,
                        newton_iters: iteration,
                        converged_in_picard: false,
                        picard_aborted: picard_aborted.map(|a| a.label().to_owned()),
                        max_residual: sys.max_residual(&pressures),
                        pressures,
                        failure: Some(reason),
                    },
                    other => return Err(other),
                }
            }
        };
        out.push(record);
    }
    Ok(out)
}

/// Writes records in the long timestep format, one pressure column per zone.
pub fn write_timesteps<W: io::Write>(
    records: &[TimestepRecord],
    zone_ids: &[&str],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "timestamp",
        "strategy",
        "picard_iters",
        "newton_iters",
        "converged_in_picard",
        "picard_aborted",
        "max_residual_kg_s",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(zone_ids.iter().map(|z| format!("p_{z}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.timestamp.clone(),
            r.strategy.label().to_owned(),
            r.picard_iters.to_string(),
            r.newton_iters.to_string(),
            r.converged_in_picard.to_string(),
            r.picard_aborted.clone().unwrap_or_default(),
            r.max_residual.to_string(),
        ];
        row.extend(r.pressures.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub steps: usize,
    pub mean_newton_iters: f64,
    /// Mean rounded to the nearest integer, as usually tabulated.
    pub mean_newton_iters_rounded: u64,
    pub median_newton_iters: f64,
    pub max_newton_iters: usize,
    /// Mean of Newton iterations plus Picard iterations on steps where
    /// Picard ran without converging.
    pub mean_iters_with_picard: f64,
    pub mean_iters_with_picard_rounded: u64,
    pub converged_in_picard_pct: f64,
    pub converged_in_picard_steps: usize,
    pub picard_aborted_steps: usize,
    pub failures: usize,
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2]) as f64
    }
}

/// Iteration statistics of one strategy's records. `None` when empty.
pub fn summarize(records: &[TimestepRecord]) -> Option<StrategySummary> {
    let first = records.first()?;
    let n = records.len() as f64;
    let mut newton: Vec<usize> = records.iter().map(|r| r.newton_iters).collect();
    let mean_newton = newton.iter().sum::<usize>() as f64 / n;
    let mean_with_picard = records
        .iter()
        .map(|r| r.iterations_with_picard())
        .sum::<usize>() as f64
        / n;
    let in_picard = records.iter().filter(|r| r.converged_in_picard).count();
    Some(StrategySummary {
        strategy: first.strategy,
        steps: records.len(),
        mean_newton_iters: mean_newton,
        mean_newton_iters_rounded: mean_newton.round() as u64,
        max_newton_iters: newton.iter().copied().max().unwrap_or(0),
        median_newton_iters: median(&mut newton),
        mean_iters_with_picard: mean_with_picard,
        mean_iters_with_picard_rounded: mean_with_picard.round() as u64,
        converged_in_picard_pct: 100.0 * in_picard as f64 / n,
        converged_in_picard_steps: in_picard,
        picard_aborted_steps: records
            .iter()
            .filter(|r| r.picard_aborted.is_some())
            .count(),
        failures: records.iter().filter(|r| !r.converged()).count(),
    })
}
