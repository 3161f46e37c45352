use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Parser, Subcommand};
use stone_cli::check::render;
use stone_cli::{cmd_check, cmd_gen, cmd_report, cmd_run, CliError, RunArgs};
use stone_core::config::{StageFlags, SubmodularKind};
use stone_core::verify::BatteryConfig;
use stone_core::Strategy;

#[derive(Parser)]
#[command(name = "stone", version, about = "Class-balanced active learning experiments on synthetic scene pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene file from a spec document.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one active-learning experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value = "stone",
              value_parser = PossibleValuesParser::new(["stone", "random", "entropy", "coreset", "badge"]))]
        strategy: String,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Comma list of active stages: gbsss, step1, step2, sdmcb, all.
        #[arg(long, value_parser = parse_stages)]
        stages: Option<StageFlags>,
        #[arg(long, value_parser = PossibleValuesParser::new(["feature", "literal", "facility", "maxcov"]))]
        submodular: Option<String>,
        #[arg(long)]
        max_boxes: Option<u64>,
        /// Write each round's predictions and embeddings under OUT/dumps.
        #[arg(long)]
        dump: bool,
    },
    /// Compare finished runs round by round.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Directory for table.csv and entropy_curves.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in verification battery.
    Check,
}

fn parse_stages(list: &str) -> Result<StageFlags, String> {
    StageFlags::parse_list(list).map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen { config, out } => {
            let n = cmd_gen(&config, &out)?;
            println!("wrote {n} scenes to {}", out.display());
        }
        Command::Run {
            config,
            scenes,
            strategy,
            seed,
            out,
            stages,
            submodular,
            max_boxes,
            dump,
        } => {
            let strategy: Strategy = strategy.parse().map_err(|e: stone_core::StoneError| CliError::Usage(e.to_string()))?;
            let submodular = submodular.as_deref().map(|name| {
                SubmodularKind::from_name(name).expect("restricted by the argument parser")
            });
            let args = RunArgs {
                config,
                scenes,
                strategy,
                seed,
                out,
                stages,
                submodular,
                max_boxes,
                dump,
            };
            let manifest = cmd_run(&args)?;
            for r in &manifest.rounds {
                println!(
                    "round {:>2}: {:>3} scenes, {:>5} boxes queried, label entropy {:.6}",
                    r.round,
                    r.selected.len(),
                    r.boxes_queried,
                    r.label_entropy
                );
            }
            println!("results in {}", args.out.display());
        }
        Command::Report { runs, out } => {
            let report = cmd_report(&runs, out.as_deref())?;
            print!("{}", report.table());
        }
        Command::Check => {
            let outcomes = cmd_check(&BatteryConfig::default());
            print!("{}", render(&outcomes));
            let failed = outcomes.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::CheckFailed(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
