use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedpp_cli::{parse_config, AppError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fedpp", version, about = "FedAvg under partial participation: simulate, sweep, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one federated training and write trace.csv, trace.json, loss.svg.
    Train(Common),
    /// Run every (rate, seed) pair and write sweep.csv, sweep.json, sweep.svg.
    Sweep(Common),
    /// Evaluate the selected checks and write verify.json.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Participation rate; for `sweep` this replaces the rate list.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Worker threads for local training.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(common: &Common, sweeping: bool) -> Result<ExperimentConfig, AppError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        if sweeping {
            cfg.sweep.seeds = vec![seed];
        }
    }
    if let Some(rate) = common.rate {
        cfg.federation.rate = rate;
        cfg.federation.schedule = None;
        if sweeping {
            cfg.sweep.rates = vec![rate];
        }
    }
    if let Some(rounds) = common.rounds {
        cfg.federation.rounds = rounds;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, AppError> {
    let (common, sweeping) = match &cli.command {
        Command::Train(c) | Command::Verify(c) => (c, false),
        Command::Sweep(c) => (c, true),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(AppError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load(common, sweeping)?;
    let out = cfg.output.clone();
    match cli.command {
        Command::Train(_) => {
            let s = fedpp_cli::train(&cfg, &out)?;
            println!(
                "{} rounds, loss {:.6e} -> {:.6e}{}",
                s.rounds,
                s.initial_loss,
                s.final_loss,
                if s.bounded { "" } else { " (no theoretical bound)" }
            );
            Ok(true)
        }
        Command::Sweep(_) => {
            let s = fedpp_cli::sweep(&cfg, &out)?;
            for c in &s.cells {
                match (&c.final_loss, &c.error) {
                    (Some(l), _) => println!("rate {} seed {}: final loss {l:.6e}", c.rate, c.seed),
                    (_, Some(e)) => println!("rate {} seed {}: failed: {e}", c.rate, c.seed),
                    _ => {}
                }
            }
            Ok(true)
        }
        Command::Verify(_) => {
            let r = fedpp_cli::verify(&cfg, &out)?;
            for (name, t) in &r.summary {
                let status = if t.failed == 0 { "ok" } else { "FAILED" };
                println!("{name}: {status} ({} of {} failed, worst slack {:.3e})", t.failed, t.evaluated, t.worst_slack);
            }
            println!("{}", if r.passed { "all checks passed" } else { "some checks failed" });
            Ok(r.passed)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fedpp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
