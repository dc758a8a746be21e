use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use erasure_cli::ablate::{cmd_ablate, AblateOptions};
use erasure_cli::evaluate::cmd_evaluate;
use erasure_cli::generate::cmd_generate_data;
use erasure_cli::infer::cmd_infer;
use erasure_cli::training::cmd_train;
use erasure_cli::{PipelineConfig, PipelineError, Variant};

/// Road obstacle detection by erasing the drivable area and comparing.
#[derive(Parser)]
#[command(name = "erasure", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; without it the built-in preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no --config is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Toy)]
    preset: Preset,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured variant.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Toy,
    Default,
}

#[derive(Subcommand)]
enum Command {
    /// Build the training set (and, for toy data, the evaluation frames).
    GenerateData {
        /// Replace existing outputs.
        #[arg(long)]
        force: bool,
    },
    /// Train the network of the selected variant.
    Train,
    /// Write heatmaps for the evaluation frames.
    Infer,
    /// Compute AP / FPR95 of the heatmaps of the selected variant.
    Evaluate,
    /// Infer and evaluate several variants and tabulate them.
    Ablate {
        /// Comma-separated variants (default: all the frames support).
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
        /// Train variants that have no checkpoint yet.
        #[arg(long)]
        train_missing: bool,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn load_config(c: &Common) -> erasure_cli::Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => match c.preset {
            Preset::Toy => PipelineConfig::toy(),
            Preset::Default => PipelineConfig::default(),
        },
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(v) = c.variant {
        cfg.variant = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Exit status of a run that finished with some failed frames.
const PARTIAL: u8 = 1;

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::PrintConfig => print!("{}", cfg.to_toml()),
        Command::GenerateData { force } => {
            let s = cmd_generate_data(&cfg, force)?;
            println!(
                "wrote {} training and {} validation samples to {} ({} cutouts, {} shortfalls)",
                s.train,
                s.val,
                s.dataset.display(),
                s.cutouts,
                s.shortfalls
            );
            if let Some(p) = s.test_frames {
                println!("wrote evaluation frames to {}", p.display());
            }
        }
        Command::Train => {
            let s = cmd_train(&cfg)?;
            for r in &s.history {
                let val = r.val_loss.map_or_else(|| "-".into(), |v| format!("{v:.5}"));
                println!("epoch {:>3}  train {:.5}  val {val}  lr {:.2e}", r.epoch, r.train_loss, r.lr);
            }
            println!(
                "best epoch {} (loss {:.5}); checkpoint {}",
                s.best_epoch,
                s.best_loss,
                s.checkpoint.display()
            );
        }
        Command::Infer => {
            let s = cmd_infer(&cfg)?;
            for (v, dir) in &s.dirs {
                println!("{v}: {} of {} frames -> {}", s.frames - s.failed.len(), s.frames, dir.display());
            }
            if !s.failed.is_empty() {
                for f in &s.failed {
                    eprintln!("failed: {}: {}", f.id, f.error);
                }
                return Ok(PARTIAL);
            }
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&cfg)?;
            let p = &s.report.pooled;
            let pct = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |v| format!("{:.2}", 100.0 * v));
            println!(
                "{}: AP {}  FPR95 {}{}  ({} frames) -> {}",
                s.report.variant,
                pct(p.ap),
                pct(p.fpr95),
                if p.tpr95_reachable { "" } else { " (95% TPR unreachable)" },
                s.report.frames.len(),
                s.dir.display()
            );
        }
        Command::Ablate { variants, train_missing } => {
            let s = cmd_ablate(&cfg, &AblateOptions { variants, train_missing })?;
            print!("{}", s.table);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<PipelineError>().is_some_and(PipelineError::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
