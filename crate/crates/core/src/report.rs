//! Multi-strategy comparison runs and their output files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::network::Network;
use crate::scenario::{
    run_simulation, summarize, write_timesteps, StrategySummary, TimestepRecord, WeatherRecord,
};
use crate::solver::{SolveError, SolverConfig, Strategy};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("a comparison needs at least two distinct strategies")]
    TooFewStrategies,
    #[error("weather series is empty")]
    NoWeather,
    #[error("{strategy}: {source}")]
    Solve {
        strategy: Strategy,
        #[source]
        source: SolveError,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct StepFailure {
    pub strategy: Strategy,
    pub timestamp: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub records: Vec<TimestepRecord>,
}

/// Per-strategy runs over one weather series, with their summaries.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub config: SolverConfig,
    pub warm_start: bool,
    pub zone_ids: Vec<String>,
    pub summaries: Vec<StrategySummary>,
    #[serde(skip)]
    pub runs: Vec<StrategyRun>,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: &'a SolverConfig,
    warm_start: bool,
    steps: usize,
    /// Mean Newton iterations per strategy.
    mean_newton_iters: BTreeMap<&'a str, f64>,
    /// Mean iterations when Picard iterations count on steps Picard did not finish.
    mean_iters_with_picard: BTreeMap<&'a str, f64>,
    strategies: &'a [StrategySummary],
    failures: Vec<StepFailure>,
}

/// Runs every strategy over the full weather series, in parallel.
pub fn compare(
    net: &Network,
    weather: &[WeatherRecord],
    strategies: &[Strategy],
    cfg: &SolverConfig,
    warm_start: bool,
) -> Result<ComparisonReport, CompareError> {
    let mut unique: Vec<Strategy> = Vec::new();
    for s in strategies {
        if !unique.contains(s) {
            unique.push(*s);
        }
    }
    if unique.len() < 2 {
        return Err(CompareError::TooFewStrategies);
    }
    if weather.is_empty() {
        return Err(CompareError::NoWeather);
    }

    let results: Vec<(Strategy, Result<Vec<TimestepRecord>, SolveError>)> =
        thread::scope(|scope| {
            let handles: Vec<_> = unique
                .iter()
                .map(|&s| {
                    (
                        s,
                        scope.spawn(move || run_simulation(net, weather, s, cfg, warm_start)),
                    )
                })
                .collect();
            handles
                .into_iter()
                .map(|(s, h)| (s, h.join().expect("simulation thread panicked")))
                .collect()
        });

    let mut runs = Vec::with_capacity(results.len());
    for (strategy, result) in results {
        let records = result.map_err(|source| CompareError::Solve { strategy, source })?;
        runs.push(StrategyRun { strategy, records });
    }
    let summaries = runs
        .iter()
        .map(|r| summarize(&r.records).expect("non-empty weather"))
        .collect();

    Ok(ComparisonReport {
        config: *cfg,
        warm_start,
        zone_ids: net.zones.iter().map(|z| z.id.clone()).collect(),
        summaries,
        runs,
    })
}

impl ComparisonReport {
    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    pub fn records(&self, strategy: Strategy) -> Option<&[TimestepRecord]> {
        self.runs
            .iter()
            .find(|r| r.strategy == strategy)
            .map(|r| r.records.as_slice())
    }

    pub fn failures(&self) -> Vec<StepFailure> {
        self.runs
            .iter()
            .flat_map(|run| {
                run.records.iter().filter_map(move |r| {
                    r.failure.as_ref().map(|reason| StepFailure {
                        strategy: run.strategy,
                        timestamp: r.timestamp.clone(),
                        reason: reason.clone(),
                    })
                })
            })
            .collect()
    }

    /// One row per time step per strategy.
    pub fn long_csv(&self) -> Vec<u8> {
        let ids: Vec<&str> = self.zone_ids.iter().map(String::as_str).collect();
        let records: Vec<TimestepRecord> = self
            .runs
            .iter()
            .flat_map(|r| r.records.iter().cloned())
            .collect();
        let mut buf = Vec::new();
        write_timesteps(&records, &ids, &mut buf).expect("writing to memory cannot fail");
        buf
    }

    /// Newton iterations with one column per strategy.
    pub fn wide_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["step".to_owned(), "timestamp".to_owned()];
        header.extend(self.runs.iter().map(|r| r.strategy.label().to_owned()));
        w.write_record(&header).expect("in-memory csv");
        let steps = self.runs.first().map_or(0, |r| r.records.len());
        for i in 0..steps {
            let mut row = vec![
                (i + 1).to_string(),
                self.runs[0].records[i].timestamp.clone(),
            ];
            row.extend(
                self.runs
                    .iter()
                    .map(|r| r.records[i].newton_iters.to_string()),
            );
            w.write_record(&row).expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }

    pub fn summary_json(&self) -> String {
        let doc = SummaryDocument {
            config: &self.config,
            warm_start: self.warm_start,
            steps: self.runs.first().map_or(0, |r| r.records.len()),
            mean_newton_iters: self
                .summaries
                .iter()
                .map(|s| (s.strategy.label(), s.mean_newton_iters))
                .collect(),
            mean_iters_with_picard: self
                .summaries
                .iter()
                .map(|s| (s.strategy.label(), s.mean_iters_with_picard))
                .collect(),
            strategies: &self.summaries,
            failures: self.failures(),
        };
        serde_json::to_string_pretty(&doc).expect("summary serialization cannot fail")
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name")
    })?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}
