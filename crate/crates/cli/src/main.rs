use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acta_core::harness::demo::{demo_scenario, small_scenario};
use acta_core::harness::{replay, run_phase1, run_phase2, Engine, EngineOptions, HarnessError, Scenario, SessionLog};
use acta_core::learner::{evaluate, train, AttentionModel, Dataset, LearnerError, TrainConfig};
use acta_core::protocol::Phase;
use clap::{Parser, Subcommand};

mod server;

#[derive(Parser)]
#[command(name = "acta", version, about = "Seeded simulator for a closed-loop nudge and neurofeedback walking protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the open-loop nudge phase and collect a labeled dataset.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "default")]
        seed_set: String,
        #[arg(long)]
        out: PathBuf,
        /// Dataset CSV; defaults to `<out>.dataset.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Fit the attention classifier to a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
    },
    /// Score a model against a labeled dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run the closed-loop neurofeedback phase.
    Phase2 {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "default")]
        seed_set: String,
        #[arg(long)]
        out: PathBuf,
        /// Phase-1 dataset the between-session retraining starts from.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Verify a log and recompute its derived records.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a paced session behind the operator HTTP API.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        /// Required for closed-loop scenarios.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "default")]
        seed_set: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        /// Write the session log here when the server stops.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop serving once the run has finished.
        #[arg(long)]
        exit_on_finish: bool,
    },
    /// Write the built-in scenarios to a directory.
    Init {
        #[arg(long, default_value = "scenarios")]
        dir: PathBuf,
    },
}

#[derive(Debug)]
pub(crate) enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<LearnerError> for CliError {
    fn from(e: LearnerError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Unreadable inputs are the caller's mistake, so they count as validation
/// errors; failures writing outputs are runtime errors.
fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_log(path: &Path, log: &SessionLog) -> Result<(), CliError> {
    log.write(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path, phase: Option<Phase>) -> Result<Scenario, CliError> {
    let sc = Scenario::from_toml(&read(path)?)?;
    match phase {
        Some(p) if sc.phase != p => Err(CliError::Validation(format!("{} has phase {}; this command needs {}", path.display(), sc.phase.as_str(), p.as_str()))),
        _ => Ok(sc),
    }
}

fn load_model(path: &Path) -> Result<AttentionModel, CliError> {
    Ok(AttentionModel::from_json(&read(path)?)?)
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(Dataset::from_csv(&read(path)?)?)
}

fn json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn dataset_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".dataset.csv");
    PathBuf::from(p)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scenario, seed_set, out, dataset } => {
            let sc = load_scenario(&scenario, Some(Phase::OpenLoopNudges))?;
            let (log, data) = run_phase1(&sc, &seed_set)?;
            write_log(&out, &log)?;
            let data_path = dataset.unwrap_or_else(|| dataset_path(&out));
            write(&data_path, &data.to_csv())?;
            println!("wrote {} ({} sessions) and {} ({} records)", out.display(), sc.n_sessions, data_path.display(), data.len());
        }
        Command::Train { dataset, out, seed, epochs, l2 } => {
            let data = load_dataset(&dataset)?;
            let defaults = TrainConfig::default();
            let config = TrainConfig { epochs: epochs.unwrap_or(defaults.epochs), l2: l2.unwrap_or(defaults.l2), ..defaults };
            let model = train(&data, &config, seed)?;
            write(&out, &model.to_json())?;
            println!("wrote {} (final loss {:.6}, {} records)", out.display(), model.meta.final_loss, model.meta.n_records);
        }
        Command::Eval { model, dataset } => {
            let (model, data) = (load_model(&model)?, load_dataset(&dataset)?);
            if model.feature_names != data.feature_names {
                return Err(CliError::Validation("the model and the dataset use different features".into()));
            }
            println!("{}", json(&evaluate(&model, &data)?));
        }
        Command::Phase2 { scenario, model, seed_set, out, dataset } => {
            let sc = load_scenario(&scenario, Some(Phase::ClosedLoopNfb))?;
            let options = EngineOptions { base_dataset: dataset.as_deref().map(load_dataset).transpose()?, ..Default::default() };
            let run = run_phase2(&sc, &seed_set, Some(load_model(&model)?), options)?;
            write_log(&out, &run.log)?;
            for s in &run.sessions {
                let acc = s.derived.eval.map_or_else(|| "-".to_string(), |e| format!("{:.3}", e.accuracy));
                println!("session {}: {} feedback events, accuracy {acc}", s.plan.session_index, s.events.len());
            }
            println!("wrote {}", out.display());
        }
        Command::Replay { log, report } => {
            if !log.is_file() {
                return Err(CliError::Validation(format!("{}: no such log", log.display())));
            }
            let r = replay(&SessionLog::read(&log)?)?;
            write(&report, &json(&r))?;
            println!("replay of {} matches the recorded derived records ({} sessions)", log.display(), r.sessions.len());
        }
        Command::Serve { scenario, model, seed_set, port, host, pace, out, exit_on_finish } => {
            let sc = load_scenario(&scenario, None)?;
            if !(pace.is_finite() && pace > 0.0) {
                return Err(CliError::Validation(format!("pace must be a positive number, got {pace}")));
            }
            let model = model.as_deref().map(load_model).transpose()?;
            let engine = Engine::new(sc, &seed_set, model, EngineOptions { live_metrics: true, ..Default::default() })?;
            match (server::serve(engine, &host, port, pace, exit_on_finish)?, out) {
                (Some(log), Some(out)) => {
                    write_log(&out, &log)?;
                    println!("wrote {}", out.display());
                }
                (None, Some(_)) => eprintln!("the run was stopped before it finished; no log written"),
                _ => {}
            }
        }
        Command::Init { dir } => {
            std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
            for (name, sc) in [
                ("demo-phase1.toml", demo_scenario(Phase::OpenLoopNudges)),
                ("demo-phase2.toml", demo_scenario(Phase::ClosedLoopNfb)),
                ("small-phase1.toml", small_scenario(Phase::OpenLoopNudges)),
                ("small-phase2.toml", small_scenario(Phase::ClosedLoopNfb)),
            ] {
                let path = dir.join(name);
                write(&path, &sc.to_toml())?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
