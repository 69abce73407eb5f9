//! Monte Carlo sweeps over seeds and one scenario axis.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_assignment, exhaustive_oracle, no_cooperation_mode, random_matching, upper_bound};
use crate::error::{Error, Result};
use crate::matching::{run_algorithm1, MatchingConfig, DEFAULT_ITERATION_CAP};
use crate::net_model::{sample_channels, LinkBudget};
use crate::rng::derive_seed;
use crate::scenario::{sample_scenario, ScenarioConfig};
use crate::semantic_model::{build_surrogate_tables, AccuracyTables, SurrogateConfig};
use crate::symbol_search::Objective;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Swap matching maximizing QoE.
    QoeMax,
    /// Swap matching maximizing semantic rate.
    SrMax,
    Random,
    NoCoop,
    UpperBound,
    Oracle,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::QoeMax => "qoe_max",
            SolverKind::SrMax => "sr_max",
            SolverKind::Random => "random",
            SolverKind::NoCoop => "no_coop",
            SolverKind::UpperBound => "upper_bound",
            SolverKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GTh,
    NumChannels,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::GTh => "g_th",
            SweepAxis::NumChannels => "num_channels",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_seeds() -> usize {
    100
}

fn default_cap() -> usize {
    DEFAULT_ITERATION_CAP
}

fn default_oracle_cap() -> u64 {
    crate::baselines::DEFAULT_ORACLE_CAP as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub master_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default = "default_cap")]
    pub iteration_cap: usize,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
    /// Off by default so result files are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported, expected {CONFIG_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solvers requested".into()));
        }
        if self.iteration_cap == 0 {
            return Err(Error::Config("iteration_cap must be positive".into()));
        }
        for v in self.axis_values() {
            self.scenario_at(v)?;
        }
        build_surrogate_tables(&self.surrogate, &self.scenario.semantic)?;
        Ok(())
    }

    fn axis_values(&self) -> Vec<f64> {
        self.sweep.as_ref().map_or(vec![0.0], |s| s.values.clone())
    }

    pub fn axis_name(&self) -> &'static str {
        self.sweep.as_ref().map_or("none", |s| s.axis.name())
    }

    /// Scenario configuration at one axis value.
    pub fn scenario_at(&self, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = self.scenario.clone();
        match self.sweep.as_ref().map(|s| s.axis) {
            None => {}
            Some(SweepAxis::GTh) => cfg.g_th = value,
            Some(SweepAxis::NumChannels) => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("num_channels axis value {value} is not a positive integer")));
                }
                cfg.num_channels = value as usize;
            }
        }
        // validated by a throwaway sample
        sample_scenario(&cfg, 0)?;
        Ok(cfg)
    }
}

/// Seeds of one Monte Carlo trial, all derived from the trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub scenario: u64,
    pub channels: u64,
    pub matching: u64,
    pub random: u64,
}

impl TrialSeeds {
    pub fn new(master_seed: u64, index: usize) -> Self {
        let trial = master_seed.wrapping_add(index as u64);
        TrialSeeds {
            trial,
            scenario: derive_seed(trial, 1),
            channels: derive_seed(trial, 2),
            matching: derive_seed(trial, 3),
            random: derive_seed(trial, 4),
        }
    }
}

/// One row of the per-run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub solver: String,
    pub axis_name: String,
    pub axis_value: f64,
    pub seed: u64,
    pub overall_qoe: f64,
    pub served_users: usize,
    pub iterations: usize,
    pub wall_ms: f64,
}

/// Mean, sample standard deviation and normal 95% interval of the overall
/// QoE for one (solver, axis value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub solver: String,
    pub axis_name: String,
    pub axis_value: f64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_served_users: f64,
    pub mean_iterations: f64,
}

/// Runs one solver on one sampled instance.
#[allow(clippy::too_many_arguments)]
pub fn run_solver(
    solver: SolverKind,
    scenario: &crate::scenario::Scenario,
    link: &LinkBudget,
    tables: &AccuracyTables,
    seeds: &TrialSeeds,
    iteration_cap: usize,
    oracle_cap: u64,
) -> Result<(f64, usize, usize)> {
    let alg = |objective: Objective| -> Result<(f64, usize, usize)> {
        let config = MatchingConfig { objective, cooperative: true, iteration_cap };
        let out = run_algorithm1(scenario, link, tables, &config, seeds.matching)?;
        let mut a = out.assignment.clone();
        let e = evaluate_assignment(scenario, link, tables, objective, &mut a);
        Ok((e.overall_qoe, e.served_users, out.stats.sweeps))
    };
    match solver {
        SolverKind::QoeMax => alg(Objective::QoEMax),
        SolverKind::SrMax => alg(Objective::SRMax),
        SolverKind::NoCoop => {
            let out = no_cooperation_mode(scenario, link, tables, iteration_cap, seeds.matching)?;
            let mut a = out.assignment.clone();
            let e = evaluate_assignment(scenario, link, tables, Objective::QoEMax, &mut a);
            Ok((e.overall_qoe, e.served_users, out.stats.sweeps))
        }
        SolverKind::Random => {
            let mut a = random_matching(scenario, seeds.random);
            let e = evaluate_assignment(scenario, link, tables, Objective::QoEMax, &mut a);
            Ok((e.overall_qoe, e.served_users, 0))
        }
        SolverKind::UpperBound => {
            let ub = upper_bound(scenario);
            Ok((ub, ub as usize, 0))
        }
        SolverKind::Oracle => {
            let o = exhaustive_oracle(scenario, link, tables, Objective::QoEMax, oracle_cap as u128)?;
            Ok((o.evaluation.overall_qoe, o.evaluation.served_users, 0))
        }
    }
}

/// Runs every (axis value, seed, solver) combination. Rows come out
/// ordered by axis value, then seed, then solver as listed.
pub fn run_rows(config: &ExperimentConfig, workers: usize) -> Result<Vec<RunRow>> {
    config.check()?;
    let tables = build_surrogate_tables(&config.surrogate, &config.scenario.semantic)?;
    let axis_name = config.axis_name();
    let jobs: Vec<(f64, usize)> =
        config.axis_values().into_iter().flat_map(|v| (0..config.seeds).map(move |i| (v, i))).collect();
    let work = |&(value, index): &(f64, usize)| -> Result<Vec<RunRow>> {
        let seeds = TrialSeeds::new(config.master_seed, index);
        let scenario = sample_scenario(&config.scenario_at(value)?, seeds.scenario)?;
        let realization = sample_channels(&scenario, seeds.channels);
        let link = LinkBudget::new(&scenario, &realization);
        config
            .solvers
            .iter()
            .map(|&solver| {
                let start = Instant::now();
                let (qoe, served, iterations) =
                    run_solver(solver, &scenario, &link, &tables, &seeds, config.iteration_cap, config.oracle_cap)?;
                let wall_ms = if config.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                Ok(RunRow {
                    solver: solver.name().into(),
                    axis_name: axis_name.into(),
                    axis_value: value,
                    seed: seeds.trial,
                    overall_qoe: qoe,
                    served_users: served,
                    iterations,
                    wall_ms,
                })
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let nested: Vec<Vec<RunRow>> = pool.install(|| jobs.par_iter().map(work).collect::<Result<_>>())?;
    Ok(nested.into_iter().flatten().collect())
}

/// Groups rows by axis value and solver, in first-appearance order.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, String, String)> = Vec::new();
    for r in rows {
        let k = (r.axis_value, r.solver.clone(), r.axis_name.clone());
        if !keys.iter().any(|x| x.0.to_bits() == k.0.to_bits() && x.1 == k.1) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(value, solver, axis_name)| {
            let sel: Vec<&RunRow> =
                rows.iter().filter(|r| r.axis_value.to_bits() == value.to_bits() && r.solver == solver).collect();
            let n = sel.len();
            let mean = sel.iter().map(|r| r.overall_qoe).sum::<f64>() / n as f64;
            let std = if n > 1 {
                (sel.iter().map(|r| (r.overall_qoe - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let half = 1.96 * std / (n as f64).sqrt();
            AggregateRow {
                solver,
                axis_name,
                axis_value: value,
                n,
                mean,
                std,
                ci95_low: mean - half,
                ci95_high: mean + half,
                mean_served_users: sel.iter().map(|r| r.served_users as f64).sum::<f64>() / n as f64,
                mean_iterations: sel.iter().map(|r| r.iterations as f64).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

const RUN_HEADER: [&str; 8] =
    ["solver", "axis_name", "axis_value", "seed", "overall_qoe", "served_users", "iterations", "wall_ms"];
const AGGREGATE_HEADER: [&str; 10] = [
    "solver",
    "axis_name",
    "axis_value",
    "n",
    "mean",
    "std",
    "ci95_low",
    "ci95_high",
    "mean_served_users",
    "mean_iterations",
];

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes `runs.csv` and `aggregate.csv` into
/// `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<(Vec<RunRow>, Vec<AggregateRow>)> {
    let rows = run_rows(config, workers)?;
    let agg = aggregate(&rows);
    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join(RUNS_FILE), &RUN_HEADER, &rows)?;
    write_csv(&out_dir.join(AGGREGATE_FILE), &AGGREGATE_HEADER, &agg)?;
    Ok((rows, agg))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
schema_version = 1
master_seed = 11
seeds = 3
solvers = ["qoe_max", "random", "upper_bound"]

[sweep]
axis = "num_channels"
values = [4, 6]

[scenario]
n_single = 3
n_bimodal = 3
"#;

    #[test]
    fn parses_toml_and_json() {
        let cfg = ExperimentConfig::parse(TOML).unwrap();
        assert_eq!(cfg.seeds, 3);
        assert_eq!(cfg.scenario.n_single, 3);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            TOML.replace("seeds = 3", "seeds = 3\ntypo = 1"),
            TOML.replace("\"random\"", "\"genetic\""),
            TOML.replace("schema_version = 1", "schema_version = 2"),
            TOML.replace("values = [4, 6]", "values = [4.5]"),
            TOML.replace("n_bimodal = 3", "n_bimodal = 3\ncolour = 2"),
        ] {
            let err = ExperimentConfig::parse(&bad).unwrap_err();
            assert!(err.is_config(), "{err}");
        }
    }

    #[test]
    fn rows_are_ordered_and_worker_independent() {
        let cfg = ExperimentConfig::parse(TOML).unwrap();
        let a = run_rows(&cfg, 1).unwrap();
        let b = run_rows(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 3 * 3);
        assert_eq!(a[0].solver, "qoe_max");
        assert_eq!(a[0].axis_value, 4.0);
        assert_eq!(a[3].seed, 12);
        assert!(a.iter().all(|r| r.wall_ms == 0.0));
    }

    #[test]
    fn aggregate_statistics() {
        let row = |q: f64| RunRow {
            solver: "x".into(),
            axis_name: "none".into(),
            axis_value: 0.0,
            seed: 0,
            overall_qoe: q,
            served_users: 2,
            iterations: 1,
            wall_ms: 0.0,
        };
        let agg = aggregate(&[row(1.0), row(2.0), row(3.0)]);
        assert_eq!(agg.len(), 1);
        assert_eq!((agg[0].n, agg[0].mean, agg[0].std), (3, 2.0, 1.0));
        assert!((agg[0].ci95_high - (2.0 + 1.96 / 3f64.sqrt())).abs() < 1e-12);
        assert!(aggregate(&[]).is_empty());
    }
}
