use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtpc_ident::harness::{execute, resolve_out_dir, ExperimentConfig, Kind, OUT_DIR_ENV};
use dtpc_ident::Error;

/// Identification over the discrete-time Poisson channel with ISI.
#[derive(Parser)]
#[command(name = "dtpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity bounds and the finite-n converse trend.
    Bounds(Common),
    /// Construct, calibrate and simulate a DI codebook.
    DiSim(Common),
    /// Simulate the feedback identification protocol.
    DifSim(Common),
    /// Check the Bhattacharyya closed form and the fidelity sandwich.
    MeasuresCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `output`, then the environment).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Bounds(a) => (Kind::Bounds, a),
        Command::DiSim(a) => (Kind::DiSim, a),
        Command::DifSim(a) => (Kind::DifSim, a),
        Command::MeasuresCheck(a) => (Kind::MeasuresCheck, a),
    };
    match go(kind, &args) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let details = match &e {
                Error::Validation(v) => v.clone(),
                other => vec![other.to_string()],
            };
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "details": details });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn go(kind: Kind, args: &Common) -> Result<serde_json::Value, Error> {
    let (mut config, digest) = ExperimentConfig::load(&args.config)?;
    if config.kind != kind {
        return Err(Error::Validation(vec![format!(
            "config kind is {} but subcommand is {}",
            config.kind.as_str(),
            kind.as_str()
        )]));
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    let env = std::env::var(OUT_DIR_ENV).ok();
    let dir = resolve_out_dir(args.out.as_deref(), &config, env.as_deref());
    let out = execute(&config, &digest, &dir)?;
    Ok(serde_json::json!({
        "kind": kind.as_str(),
        "config_digest": digest,
        "out": dir,
        "rows": out.rows.len(),
    }))
}
