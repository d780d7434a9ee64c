use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use portmon_cli::{
    cmd_analyze, cmd_eval_detection, cmd_export_dataset, cmd_run, cmd_simulate, load_noise, load_scenario, CliError,
    RunOptions,
};

#[derive(Parser)]
#[command(name = "portmon", version, about = "Event-triggered port structure monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth log of a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run world, nodes, and ingest end to end.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        sensors: usize,
        /// Probability of dropping each streamed data packet.
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        /// Probability of delivering a streamed data packet twice.
        #[arg(long, default_value_t = 0.0)]
        duplicate: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the bulk CSV upload and rely on the stream alone.
        #[arg(long)]
        no_bulk: bool,
        /// External MQTT broker, e.g. mqtt://localhost:1883.
        #[arg(long)]
        broker: Option<String>,
    },
    /// Analyze one sensor of a stored run.
    Analyze {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        sensor: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the simulated detector on an annotated dataset.
    EvalDetection {
        #[arg(long)]
        dataset: PathBuf,
        /// Noise JSON file, or one of perfect, calibrated, all-miss.
        #[arg(long)]
        noise: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the PR-sweep CSV.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the built-in 24-scene test set.
    ExportDataset {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scenario, out, seed } => {
            let outcome = cmd_simulate(load_scenario(&scenario, seed)?, &out)?;
            println!(
                "wrote {} distance readings and {} scenes ({} berthing events) to {}",
                outcome.log.distances.len(),
                outcome.log.scenes.len(),
                outcome.berthing_events,
                out.display()
            );
        }
        Command::Run { scenario, sensors, loss, duplicate, out, seed, no_bulk, broker } => {
            let opts =
                RunOptions { sensors, loss_rate: loss, duplicate_rate: duplicate, bulk_upload: !no_bulk, broker };
            let outcome = cmd_run(load_scenario(&scenario, seed)?, &opts, &out)?;
            for (i, log) in outcome.logs.iter().enumerate() {
                let long = log.sessions.iter().filter(|s| s.berthing).count();
                println!(
                    "sensor {}: {} sessions ({long} long), {} events",
                    i + 1,
                    log.sessions.len(),
                    log.events.len()
                );
            }
            println!(
                "ingest: {} packets, {} bulk uploads, {} detections",
                outcome.stats.packets, outcome.stats.bulk_uploads, outcome.stats.detections
            );
        }
        Command::Analyze { store, sensor, out } => {
            let report = cmd_analyze(&store, &sensor, &out)?;
            println!("sensor {sensor}: {} sessions analyzed into {}", report.sessions.len(), out.display());
        }
        Command::EvalDetection { dataset, noise, seed, out } => {
            let report = cmd_eval_detection(&dataset, &load_noise(&noise)?, seed, &out)?;
            println!(
                "AP@0.5 = {:.4} over {} scenes ({} ground-truth boxes, {} detections)",
                report.ap, report.scenes, report.ground_truth, report.detections
            );
        }
        Command::ExportDataset { out } => {
            cmd_export_dataset(&out)?;
            println!("wrote dataset to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
