use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use induction_lab::config::{ExperimentConfig, PremiseSpec};
use induction_lab::io::read_bytes;
use induction_lab::pipeline;
use induction_lab::{LabError, LabResult};

#[derive(Parser)]
#[command(
    name = "induction-lab",
    version,
    about = "Property induction experiments on a small belief classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the belief bank and taxonomy.
    Generate(Common),
    /// Train the classifier on the bank.
    Pretrain(Common),
    /// Teach the nonce property on each premise set.
    Induce {
        #[command(flatten)]
        common: Common,
        /// `all-singletons` or sets such as `robin+canary;penguin`.
        #[arg(long)]
        premises: Option<String>,
    },
    /// Run the phenomena, emergent and geometry analyses.
    Battery(Common),
    /// Print a summary table of every statistic.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(common: &Common, premises: Option<&str>) -> LabResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| induction_core::Error::Config(format!("{} is not UTF-8", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(p) = premises {
        cfg.premises = p
            .parse::<PremiseSpec>()
            .map_err(|msg| induction_core::Error::Config(format!("--premises: {msg}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> LabResult<()> {
    let (common, premises) = match &cli.command {
        Command::Generate(c) | Command::Pretrain(c) | Command::Battery(c) | Command::Report(c) => (c, None),
        Command::Induce { common, premises } => (common, premises.as_deref()),
    };
    let cfg = load(common, premises)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = common.jobs {
        pool = pool.num_threads(k.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| LabError::Manifest(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate(_) => pipeline::cmd_generate(&cfg),
        Command::Pretrain(_) => pipeline::cmd_pretrain(&cfg),
        Command::Induce { .. } => pipeline::cmd_induce(&cfg),
        Command::Battery(_) => pipeline::cmd_battery(&cfg),
        Command::Report(_) => pipeline::cmd_report(&cfg).map(|text| print!("{text}")),
    })
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
