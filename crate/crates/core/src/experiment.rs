//! Batch runner: generate instances over a sweep of service counts, run
//! the selected algorithms on each, and aggregate.
//!
//! CSV outputs (one header row each):
//!
//! * `runs.csv`: `services, seed, algorithm, status, objective, iterations,
//!   cuts, time_ms, error`. `objective` is empty unless a solution was
//!   found; `iterations` and `cuts` are empty for non-decomposition
//!   algorithms.
//! * `gaps.csv`: `services, seed, nu_fp, nu_fp1, nu_fp2, nu_ns, gap_fp1,
//!   gap_fp2, error`. Gap columns are empty where the metric is undefined.
//! * `summary.csv`: `services, algorithm, instances, feasible,
//!   common_feasible, avg_objective, avg_iterations, avg_time_ms`.
//!   `avg_objective` is over instances every algorithm solved.
//! * `gap_summary.csv`: `services, instances, defined, avg_gap_fp1,
//!   avg_gap_fp2`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    solve_direct, solve_lp_dynamic_rounding, solve_lp_one_shot_rounding, BaselineOutcome,
    BaselineResult,
};
use crate::benders::{gap_improvement, solve_cbd, CbdConfig, CbdStatus};
use crate::formulations::FpVariant;
use crate::instance::{generate, GeneratorConfig, Instance};
use crate::milp::MilpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "cbd-fp")]
    CbdFp,
    #[serde(rename = "cbd-fp1")]
    CbdFp1,
    #[serde(rename = "cbd-fp2")]
    CbdFp2,
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "lpor")]
    Lpor,
    #[serde(rename = "lpdr")]
    Lpdr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::CbdFp,
        Algorithm::CbdFp1,
        Algorithm::CbdFp2,
        Algorithm::Direct,
        Algorithm::Lpor,
        Algorithm::Lpdr,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::CbdFp => "cbd-fp",
            Algorithm::CbdFp1 => "cbd-fp1",
            Algorithm::CbdFp2 => "cbd-fp2",
            Algorithm::Direct => "direct",
            Algorithm::Lpor => "lpor",
            Algorithm::Lpdr => "lpdr",
        }
    }

    fn variant(&self) -> Option<FpVariant> {
        match self {
            Algorithm::CbdFp => Some(FpVariant::Fp),
            Algorithm::CbdFp1 => Some(FpVariant::FpI),
            Algorithm::CbdFp2 => Some(FpVariant::FpII),
            _ => None,
        }
    }
}

fn default_iter_max() -> usize {
    usize::MAX
}

/// Experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base generator settings; `services` and `seed` are overridden.
    #[serde(default)]
    pub generator: GeneratorConfig,
    /// Service counts to sweep.
    pub services: Vec<usize>,
    /// Generator seeds used for every service count.
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    /// Also compute the gap-improvement metric per instance.
    #[serde(default)]
    pub gap: bool,
    #[serde(default = "default_iter_max")]
    pub iter_max: usize,
    /// Per-run wall-clock limit.
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no algorithms selected")]
    NoAlgorithms,
    #[error("no service counts or seeds given")]
    EmptySweep,
    #[error("iter_max must be at least 1")]
    IterMax,
    #[error("time limit must be positive")]
    TimeLimit,
    #[error("cannot parse experiment config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        Ok(toml::from_str(text)?)
    }

    pub fn check(&self) -> Result<(), ExperimentError> {
        if self.algorithms.is_empty() {
            return Err(ExperimentError::NoAlgorithms);
        }
        if self.services.is_empty() || self.seeds.is_empty() {
            return Err(ExperimentError::EmptySweep);
        }
        if self.iter_max == 0 {
            return Err(ExperimentError::IterMax);
        }
        if self.time_limit_secs.is_some_and(|t| !(t > 0.0)) {
            return Err(ExperimentError::TimeLimit);
        }
        Ok(())
    }

    fn time_limit(&self) -> Option<Duration> {
        self.time_limit_secs.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub services: usize,
    pub seed: u64,
    pub algorithm: String,
    pub status: String,
    pub objective: Option<f64>,
    pub iterations: Option<usize>,
    pub cuts: Option<usize>,
    pub time_ms: f64,
    pub error: Option<String>,
}

impl RunRow {
    pub fn feasible(&self) -> bool {
        self.objective.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub services: usize,
    pub seed: u64,
    pub nu_fp: Option<f64>,
    pub nu_fp1: Option<f64>,
    pub nu_fp2: Option<f64>,
    pub nu_ns: Option<f64>,
    pub gap_fp1: Option<f64>,
    pub gap_fp2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub services: usize,
    pub algorithm: String,
    pub instances: usize,
    pub feasible: usize,
    pub common_feasible: usize,
    pub avg_objective: Option<f64>,
    pub avg_iterations: Option<f64>,
    pub avg_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummaryRow {
    pub services: usize,
    pub instances: usize,
    pub defined: usize,
    pub avg_gap_fp1: Option<f64>,
    pub avg_gap_fp2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub runs: Vec<RunRow>,
    pub gaps: Vec<GapRow>,
}

impl ExperimentOutput {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.runs)
    }

    pub fn gap_summary(&self) -> Vec<GapSummaryRow> {
        summarize_gaps(&self.gaps)
    }

    /// Write the four CSV files into `dir`, creating it if needed.
    pub fn write_csv(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("runs.csv"), &self.runs)?;
        write_rows(&dir.join("gaps.csv"), &self.gaps)?;
        write_rows(&dir.join("summary.csv"), &self.summary())?;
        write_rows(&dir.join("gap_summary.csv"), &self.gap_summary())?;
        Ok(())
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Read rows written by [`ExperimentOutput::write_csv`].
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Result<Vec<T>, csv::Error> = r.deserialize().collect();
    Ok(rows?)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregate per (service count, algorithm).
pub fn summarize(runs: &[RunRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<usize, BTreeMap<&str, Vec<&RunRow>>> = BTreeMap::new();
    for r in runs {
        groups
            .entry(r.services)
            .or_default()
            .entry(r.algorithm.as_str())
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for (services, by_alg) in groups {
        // Seeds every algorithm of this size solved.
        let mut common: Option<Vec<u64>> = None;
        for rows in by_alg.values() {
            let seeds: Vec<u64> = rows
                .iter()
                .filter(|r| r.feasible())
                .map(|r| r.seed)
                .collect();
            common = Some(match common {
                None => seeds,
                Some(c) => c.into_iter().filter(|s| seeds.contains(s)).collect(),
            });
        }
        let common = common.unwrap_or_default();
        for (alg, rows) in by_alg {
            out.push(SummaryRow {
                services,
                algorithm: alg.to_string(),
                instances: rows.len(),
                feasible: rows.iter().filter(|r| r.feasible()).count(),
                common_feasible: common.len(),
                avg_objective: mean(
                    rows.iter()
                        .filter(|r| common.contains(&r.seed))
                        .filter_map(|r| r.objective),
                ),
                avg_iterations: mean(rows.iter().filter_map(|r| r.iterations).map(|i| i as f64)),
                avg_time_ms: mean(rows.iter().map(|r| r.time_ms)).unwrap_or(0.0),
            });
        }
    }
    out
}

/// Aggregate gap rows per service count, over rows where both metrics are
/// defined.
pub fn summarize_gaps(gaps: &[GapRow]) -> Vec<GapSummaryRow> {
    let mut groups: BTreeMap<usize, Vec<&GapRow>> = BTreeMap::new();
    for g in gaps {
        groups.entry(g.services).or_default().push(g);
    }
    groups
        .into_iter()
        .map(|(services, rows)| {
            let defined: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|g| Some((g.gap_fp1?, g.gap_fp2?)))
                .collect();
            GapSummaryRow {
                services,
                instances: rows.len(),
                defined: defined.len(),
                avg_gap_fp1: mean(defined.iter().map(|d| d.0)),
                avg_gap_fp2: mean(defined.iter().map(|d| d.1)),
            }
        })
        .collect()
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn milp_config(limit: Option<Duration>) -> MilpConfig {
    MilpConfig {
        deadline: limit.map(|l| Instant::now() + l),
        ..MilpConfig::default()
    }
}

/// Run one algorithm on one instance. Errors become rows.
pub fn run_algorithm(
    instance: &Instance,
    algorithm: Algorithm,
    iter_max: usize,
    limit: Option<Duration>,
) -> RunRow {
    let mut row = RunRow {
        services: instance.services.len(),
        seed: 0,
        algorithm: algorithm.name().to_string(),
        status: String::new(),
        objective: None,
        iterations: None,
        cuts: None,
        time_ms: 0.0,
        error: None,
    };
    let start = Instant::now();
    if let Some(variant) = algorithm.variant() {
        let cfg = CbdConfig {
            iter_max,
            variant,
            milp: MilpConfig::default(),
            time_limit: limit,
        };
        match solve_cbd(instance, &cfg) {
            Ok(r) => {
                row.status = r.status.name().to_string();
                if let CbdStatus::Optimal(s) = &r.status {
                    row.objective = Some(s.objective);
                }
                row.iterations = Some(r.iterations.len());
                row.cuts = Some(r.cuts.len());
            }
            Err(e) => {
                row.status = "error".into();
                row.error = Some(e.to_string());
            }
        }
        row.time_ms = millis(start.elapsed());
        return row;
    }
    let result: BaselineResult = match algorithm {
        Algorithm::Direct => solve_direct(instance, &milp_config(limit)),
        Algorithm::Lpor => solve_lp_one_shot_rounding(instance, &Default::default()),
        Algorithm::Lpdr => {
            solve_lp_dynamic_rounding(instance, &Default::default(), MilpConfig::default().tol_int)
        }
        _ => unreachable!("decomposition handled above"),
    };
    match result.outcome {
        BaselineOutcome::Feasible {
            objective,
            proven_optimal,
            ..
        } => {
            row.status = if proven_optimal {
                "optimal"
            } else {
                "feasible"
            }
            .into();
            row.objective = Some(objective);
        }
        BaselineOutcome::InfeasibleOrFailed { reason } => {
            row.status = "infeasible_or_failed".into();
            row.error = Some(reason);
        }
    }
    row.time_ms = millis(result.runtime);
    row
}

fn gap_row(instance: &Instance, services: usize, seed: u64, limit: Option<Duration>) -> GapRow {
    let cfg = CbdConfig {
        milp: milp_config(limit),
        time_limit: limit,
        ..CbdConfig::default()
    };
    let mut row = GapRow {
        services,
        seed,
        nu_fp: None,
        nu_fp1: None,
        nu_fp2: None,
        nu_ns: None,
        gap_fp1: None,
        gap_fp2: None,
        error: None,
    };
    match gap_improvement(instance, &cfg) {
        Ok(g) => {
            (row.nu_fp, row.nu_fp1, row.nu_fp2, row.nu_ns) = (g.nu_fp, g.nu_fp1, g.nu_fp2, g.nu_ns);
            (row.gap_fp1, row.gap_fp2) = (g.fp_i, g.fp_ii);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

enum Job {
    Run(Algorithm),
    Gap,
}

enum JobResult {
    Run(RunRow),
    Gap(GapRow),
}

/// Run the whole sweep on a bounded worker pool. Rows come back in sweep
/// order regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.check()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;

    let mut jobs = Vec::new();
    for &services in &config.services {
        for &seed in &config.seeds {
            for &alg in &config.algorithms {
                jobs.push((services, seed, Job::Run(alg)));
            }
            if config.gap {
                jobs.push((services, seed, Job::Gap));
            }
        }
    }
    let limit = config.time_limit();
    let results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|(services, seed, job)| {
                let gen = GeneratorConfig {
                    services: *services,
                    seed: *seed,
                    ..config.generator.clone()
                };
                let instance = generate(&gen);
                match (job, instance) {
                    (Job::Run(alg), Ok(inst)) => JobResult::Run(RunRow {
                        seed: *seed,
                        ..run_algorithm(&inst, *alg, config.iter_max, limit)
                    }),
                    (Job::Gap, Ok(inst)) => JobResult::Gap(gap_row(&inst, *services, *seed, limit)),
                    (Job::Run(alg), Err(e)) => JobResult::Run(RunRow {
                        services: *services,
                        seed: *seed,
                        algorithm: alg.name().to_string(),
                        status: "error".into(),
                        objective: None,
                        iterations: None,
                        cuts: None,
                        time_ms: 0.0,
                        error: Some(format!("instance generation: {e}")),
                    }),
                    (Job::Gap, Err(e)) => JobResult::Gap(GapRow {
                        services: *services,
                        seed: *seed,
                        nu_fp: None,
                        nu_fp1: None,
                        nu_fp2: None,
                        nu_ns: None,
                        gap_fp1: None,
                        gap_fp2: None,
                        error: Some(format!("instance generation: {e}")),
                    }),
                }
            })
            .collect()
    });
    let mut out = ExperimentOutput::default();
    for r in results {
        match r {
            JobResult::Run(row) => out.runs.push(row),
            JobResult::Gap(row) => out.gaps.push(row),
        }
    }
    Ok(out)
}
