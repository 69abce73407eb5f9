use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use semqoe::experiment::{run_experiment, ExperimentConfig};
use semqoe::matching::MatchingConfig;
use semqoe::scenario::{sample_scenario, validate, Scenario, ScenarioConfig};
use semqoe::semantic_model::SurrogateConfig;
use semqoe::symbol_search::Objective;
use semqoe::trace::{replay, ReplayReport, Trace};
use semqoe::Error;

#[derive(Parser)]
#[command(name = "semqoe", version, about = "QoE-driven semantic resource allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write runs.csv and aggregate.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed count in the config.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, env = "SEMQOE_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Re-apply a swap trace and check every recorded value.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Check a scenario file against the model invariants.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Sample a scenario with default parameters and write it as JSON.
    SampleScenario {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        num_channels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the swap matching on one scenario and write its trace.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::QoeMax)]
        objective: ObjectiveArg,
        #[arg(long)]
        no_coop: bool,
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    QoeMax,
    SrMax,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Ok(Scenario::from_json(&read_input(path)?)?)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out, seeds, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(n) = seeds {
                cfg.seeds = n;
            }
            if workers == 0 {
                return Err(Failure::Config("--workers must be at least 1".into()));
            }
            let (rows, agg) = run_experiment(&cfg, &out, workers)?;
            println!("{} runs, {} aggregate rows written to {}", rows.len(), agg.len(), out.display());
        }
        Command::Replay { trace } => {
            let file = fs::File::open(&trace).map_err(|e| Failure::Config(format!("{}: {e}", trace.display())))?;
            let t = Trace::read(BufReader::new(file))?;
            match replay(&t)? {
                ReplayReport::Verified { swaps, final_objective } => {
                    println!("verified: {swaps} swaps, final objective {final_objective}");
                }
                ReplayReport::Diverged { step, reason } => {
                    return Err(Failure::Runtime(format!("diverged at step {step}: {reason}")));
                }
            }
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            let violations = validate(&s);
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("{}: {}", v.code, v.message);
                }
                return Err(Failure::Config(format!("{} violation(s)", violations.len())));
            }
            println!("valid: {} cells, {} users, {} channels", s.num_cells(), s.num_users(), s.num_channels);
        }
        Command::SampleScenario { seed, num_channels, out } => {
            let mut cfg = ScenarioConfig::default();
            if let Some(m) = num_channels {
                cfg.num_channels = m;
            }
            let s = sample_scenario(&cfg, seed)?;
            fs::write(&out, s.to_json()?).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
        }
        Command::Solve { scenario, channel_seed, seed, objective, no_coop, trace } => {
            let s = load_scenario(&scenario)?;
            let objective = match objective {
                ObjectiveArg::QoeMax => Objective::QoEMax,
                ObjectiveArg::SrMax => Objective::SRMax,
            };
            let matching = MatchingConfig { objective, cooperative: !no_coop, ..MatchingConfig::default() };
            let t = Trace::record(&s, channel_seed, &SurrogateConfig::default(), &matching, seed)?;
            let mut w = create(&trace)?;
            t.write(&mut w)?;
            w.flush().map_err(|e| Failure::Runtime(format!("{}: {e}", trace.display())))?;
            println!("{} swaps over {} sweeps, objective {}", t.swaps.len(), t.header.sweeps, t.header.final_objective);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
