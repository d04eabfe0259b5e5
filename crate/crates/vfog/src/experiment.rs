//! Parameter sweeps over the full pipeline, written as `results.csv` plus one
//! chart per metric.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vfog_core::error::StageError;
use vfog_core::flow::Approach;
use vfog_core::pipeline::{run_with, RunOptions, RunResult};
use vfog_core::{units, Role, Scenario};

use crate::config::{load_scenario, ConfigError};
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Common cap of the vehicle and BS powers, in dBm. The AV budget belongs
    /// to the primary user and stays as configured.
    MaxPower,
    /// Delay budget of every task, in frames.
    Delay,
    /// Cache of every relay, in bits.
    Cache,
    /// Compute capacity of every fog vehicle, in bits.
    Compute,
    None,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::MaxPower,
        SweepAxis::Delay,
        SweepAxis::Cache,
        SweepAxis::Compute,
        SweepAxis::None,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::MaxPower => "max_power",
            SweepAxis::Delay => "delay",
            SweepAxis::Cache => "cache",
            SweepAxis::Compute => "compute",
            SweepAxis::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<SweepAxis> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    fn unit(&self) -> &'static str {
        match self {
            SweepAxis::MaxPower => "max power (dBm)",
            SweepAxis::Delay => "delay budget (frames)",
            SweepAxis::Cache => "cache capacity (bits)",
            SweepAxis::Compute => "compute capacity (bits)",
            SweepAxis::None => "point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    /// Parses `lo:hi:step`.
    pub fn parse(s: &str) -> Result<Range, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:step, got {s:?}"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let r = Range {
            lo: num(parts[0])?,
            hi: num(parts[1])?,
            step: num(parts[2])?,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return Err("range bounds must be finite".into());
        }
        if !(self.step > 0.0) {
            return Err("step must be positive".into());
        }
        if self.hi < self.lo {
            return Err("range is empty".into());
        }
        Ok(())
    }

    /// `lo, lo + step, ...` up to `hi`, computed by index so there is no
    /// accumulated drift.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: PathBuf,
    pub approaches: Vec<Approach>,
    pub sweep: SweepAxis,
    pub range: Option<Range>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub deterministic_channel: bool,
    pub options: RunOptions,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Spec(m.into()));
        if self.approaches.is_empty() {
            return bad("no approaches selected");
        }
        match (self.sweep, &self.range) {
            (SweepAxis::None, Some(_)) => bad("sweep none takes no range"),
            (SweepAxis::None, None) => Ok(()),
            (_, None) => bad("a sweep needs --range lo:hi:step"),
            (_, Some(r)) => r.validate().map_err(ExperimentError::Spec),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.range {
            Some(r) if self.sweep != SweepAxis::None => r.points(),
            _ => vec![0.0],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{approach} at {axis} = {value}: {source}")]
    Solver {
        approach: &'static str,
        axis: &'static str,
        value: f64,
        source: StageError,
    },
    #[error("writing {path}: {source}")]
    Output { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Apply one sweep point to a copy of the scenario.
pub fn apply(scenario: &Scenario, axis: SweepAxis, value: f64) -> Scenario {
    let mut s = scenario.clone();
    match axis {
        SweepAxis::MaxPower => {
            let w = units::dbm_to_watts(value);
            s.channel.p_max_v = w;
            s.channel.p_max_bs = w;
        }
        SweepAxis::Delay => {
            let frames = value.round().max(0.0) as usize;
            for t in &mut s.tasks {
                t.delay_budget = frames;
            }
        }
        SweepAxis::Cache => {
            for v in &mut s.vehicles {
                if let Role::Relay { cache_capacity } = &mut v.role {
                    *cache_capacity = value;
                }
            }
        }
        SweepAxis::Compute => {
            for v in &mut s.vehicles {
                if let Role::Fog { compute_capacity } = &mut v.role {
                    *compute_capacity = value;
                }
            }
        }
        SweepAxis::None => {}
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub approach: &'static str,
    pub sweep_param: &'static str,
    pub value: f64,
    pub throughput_bits: f64,
    pub consumed_power_watts: f64,
    pub objective: f64,
    pub outage_rate: f64,
}

impl ResultRow {
    fn from_run(axis: SweepAxis, value: f64, run: &RunResult) -> Self {
        ResultRow {
            approach: run.approach.name(),
            sweep_param: axis.name(),
            value,
            throughput_bits: run.throughput(),
            consumed_power_watts: run.consumed_power(),
            objective: run.objective(),
            outage_rate: run.outage_rate(),
        }
    }
}

/// Every (value, approach) point, in parallel. Results come back in
/// value-major, approach-minor order regardless of scheduling.
pub fn sweep(
    scenario: &Scenario,
    approaches: &[Approach],
    axis: SweepAxis,
    values: &[f64],
    options: &RunOptions,
) -> Result<Vec<(ResultRow, RunResult)>, ExperimentError> {
    let points: Vec<(f64, Approach)> = values
        .iter()
        .flat_map(|&v| approaches.iter().map(move |&a| (v, a)))
        .collect();
    points
        .par_iter()
        .map(|&(value, approach)| {
            let s = apply(scenario, axis, value);
            let run = run_with(&s, approach, options).map_err(|source| ExperimentError::Solver {
                approach: approach.name(),
                axis: axis.name(),
                value,
                source,
            })?;
            Ok((ResultRow::from_run(axis, value, &run), run))
        })
        .collect()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(|source| ExperimentError::Output {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| ExperimentError::Output {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

const METRICS: [(&str, &str); 4] = [
    ("throughput_bits", "throughput (bits)"),
    ("consumed_power_watts", "consumed power (W)"),
    ("objective", "objective"),
    ("outage_rate", "AV outage rate"),
];

fn metric(row: &ResultRow, name: &str) -> f64 {
    match name {
        "throughput_bits" => row.throughput_bits,
        "consumed_power_watts" => row.consumed_power_watts,
        "objective" => row.objective,
        _ => row.outage_rate,
    }
}

pub fn write_charts(
    dir: &Path,
    axis: SweepAxis,
    approaches: &[Approach],
    rows: &[ResultRow],
) -> Result<(), ExperimentError> {
    for (name, label) in METRICS {
        let series: Vec<Series> = approaches
            .iter()
            .map(|a| Series {
                name: a.name().into(),
                points: rows
                    .iter()
                    .filter(|r| r.approach == a.name())
                    .map(|r| (r.value, metric(r, name)))
                    .collect(),
            })
            .collect();
        let svg = line_chart(&format!("{label} vs {}", axis.name()), axis.unit(), label, &series);
        let path = dir.join(format!("{name}.svg"));
        fs::write(&path, svg).map_err(|source| ExperimentError::Output {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

pub fn prepare(spec: &ExperimentSpec) -> Result<Scenario, ExperimentError> {
    spec.validate()?;
    let mut scenario = load_scenario(&spec.scenario)?;
    if let Some(seed) = spec.seed {
        scenario.seed = seed;
    }
    if spec.deterministic_channel {
        scenario.channel.deterministic = true;
    }
    Ok(scenario)
}

/// Load, sweep and write `results.csv` and the charts into `spec.out_dir`.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, ExperimentError> {
    let scenario = prepare(spec)?;
    let results = sweep(&scenario, &spec.approaches, spec.sweep, &spec.values(), &spec.options)?;
    let rows: Vec<ResultRow> = results.into_iter().map(|(r, _)| r).collect();
    fs::create_dir_all(&spec.out_dir).map_err(|source| ExperimentError::Output {
        path: spec.out_dir.display().to_string(),
        source,
    })?;
    write_results(&spec.out_dir.join("results.csv"), &rows)?;
    write_charts(&spec.out_dir, spec.sweep, &spec.approaches, &rows)?;
    Ok(rows)
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
