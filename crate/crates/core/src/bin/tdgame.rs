//! Command-line front end for running games and experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use transrobust::game::{replay, GameTranscript, GameKind, Seeds};
use transrobust::gaussian_sep::RegimeParams;
use transrobust::io::{load_config, run_experiment, ExperimentConfig, ExperimentKind};
use transrobust::rejectron::RejectronScenario;
use transrobust::{Error, Result};

#[derive(Parser)]
#[command(name = "tdgame", version, about = "Transductive adversarial robustness games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Inductive-vs-transductive separation on two Gaussians.
    Separation(Common),
    /// Rejection-curve scenarios for selective classification.
    Rejectron(Common),
    /// Several attackers against one game.
    AttackBench(Common),
    /// Re-run a saved game transcript and check it reproduces bit for bit.
    Replay {
        /// Transcript JSON written by a previous run.
        transcript: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for results; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    seed_attacker: Option<u64>,
    #[arg(long)]
    seed_defender: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Suppress the summary printed to stdout.
    #[arg(long)]
    quiet: bool,
}

const DEFAULT_SEEDS: Seeds = Seeds {
    data: 0,
    attacker: 1,
    defender: 2,
};

fn builtin(kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        kind,
        output_dir: None,
        seeds: DEFAULT_SEEDS,
        trials: 1,
        setting: GameKind::Transductive,
        game: None,
        separation: None,
        rejectron: None,
        attack_bench: None,
    };
    match kind {
        ExperimentKind::Separation => {
            cfg.separation = Some(RegimeParams::default());
            cfg.trials = 200;
        }
        ExperimentKind::Rejectron => cfg.rejectron = Some(RejectronScenario::desk()),
        _ => {
            return Err(Error::Validation {
                field: "config".into(),
                message: "--config is required for this subcommand".into(),
            })
        }
    }
    Ok(cfg)
}

fn resolve(expected: Option<ExperimentKind>, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, expected) {
        (Some(path), _) => load_config(path)?,
        (None, Some(kind)) => builtin(kind)?,
        (None, None) => {
            return Err(Error::Validation {
                field: "config".into(),
                message: "--config is required".into(),
            })
        }
    };
    if let Some(kind) = expected {
        if cfg.kind != kind {
            return Err(Error::Validation {
                field: "kind".into(),
                message: format!("expected {:?}, config has {:?}", kind, cfg.kind),
            });
        }
    }
    if let Some(s) = args.seed_data {
        cfg.seeds.data = s;
    }
    if let Some(s) = args.seed_attacker {
        cfg.seeds.attacker = s;
    }
    if let Some(s) = args.seed_defender {
        cfg.seeds.defender = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(expected: Option<ExperimentKind>, args: &Common) -> Result<()> {
    let cfg = resolve(expected, args)?;
    let out = run_experiment(&cfg)?;
    if let Some(dir) = &cfg.output_dir {
        out.write(dir, &cfg)?;
    }
    if !args.quiet {
        for line in &out.lines {
            println!("{line}");
        }
        if let Some(dir) = &cfg.output_dir {
            println!("results written to {}", dir.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => execute(None, &args),
        Command::Separation(args) => execute(Some(ExperimentKind::Separation), &args),
        Command::Rejectron(args) => execute(Some(ExperimentKind::Rejectron), &args),
        Command::AttackBench(args) => execute(Some(ExperimentKind::AttackBench), &args),
        Command::Replay { transcript, quiet } => {
            let text = std::fs::read_to_string(&transcript)?;
            let saved = GameTranscript::from_json(&text)?;
            let again = replay(&saved)?;
            if !quiet {
                println!(
                    "replay ok: referee_valuation={} robust_acc={}",
                    again.referee_valuation,
                    again.robust_accuracy()
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
