use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use salsynth_cli::{
    cmd_ablate, cmd_eval, cmd_gen_assets, cmd_gen_dataset, cmd_infer, cmd_stats, cmd_train,
    init_workers, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "salsynth",
    version,
    about = "Synthetic salient-object data and pseudo-label domain adaptation"
)]
struct Cli {
    /// TOML run config; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output location; its meaning depends on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write procedural foreground and background PNGs.
    GenAssets {
        #[arg(long)]
        n_fg: Option<usize>,
        #[arg(long)]
        n_bg: Option<usize>,
    },
    /// Composite the source dataset and the shifted target dataset.
    GenDataset,
    /// Object-size histogram and center-bias heatmap of one dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Run the multi-round pipeline into the run directory.
    Train,
    /// Score a checkpoint on a dataset's labelled records.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write saliency maps for the given PNG images.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Source-only, vanilla pseudo-label and uncertainty-aware runs side by side.
    Ablate,
}

fn run(cli: Cli) -> Result<()> {
    let text = match &cli.config {
        Some(p) => {
            Some(fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?)
        }
        None => None,
    };
    let mut cfg = match &text {
        Some(t) => RunConfig::from_toml(t)
            .with_context(|| format!("in {}", cli.config.as_ref().unwrap().display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    init_workers(cfg.workers);
    let test_dims = (cfg.train.test_input_dims[0], cfg.train.test_input_dims[1]);
    match cli.command {
        Command::GenAssets { n_fg, n_bg } => {
            let out = cli.out.unwrap_or_else(|| cfg.paths.assets.clone());
            cmd_gen_assets(
                n_fg.unwrap_or(cfg.assets.n_fg),
                n_bg.unwrap_or(cfg.assets.n_bg),
                cfg.assets.spec(),
                cfg.seed,
                &out,
            )?;
            println!("assets written to {}", out.display());
        }
        Command::GenDataset => {
            if let Some(out) = cli.out {
                cfg.paths.datasets = out;
            }
            cmd_gen_dataset(&cfg)?;
            println!("datasets written to {}", cfg.paths.datasets.display());
        }
        Command::Stats { dataset, bins } => {
            let out = cli.out.unwrap_or_else(|| dataset.join("stats"));
            cmd_stats(&dataset, bins, &out)?;
            println!("statistics written to {}", out.display());
        }
        Command::Train => {
            if let Some(out) = cli.out {
                cfg.paths.run_dir = out;
            }
            let s = cmd_train(&cfg, text.as_deref())?;
            println!(
                "final mae {:.4} f_beta {:.4} checksum {}",
                s.final_mae, s.final_f_beta, s.checksum
            );
        }
        Command::Eval {
            checkpoint,
            dataset,
        } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("eval"));
            let r = cmd_eval(&checkpoint, &dataset, test_dims, cfg.metrics.svg, &out)?;
            println!(
                "mae {:.4} f_beta {:.4} over {} images",
                r.mae, r.f_beta, r.n_images
            );
        }
        Command::Infer { checkpoint, images } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("saliency"));
            cmd_infer(&checkpoint, &images, test_dims, &out)?;
            println!("{} maps written to {}", images.len(), out.display());
        }
        Command::Ablate => {
            if let Some(out) = cli.out {
                cfg.paths.run_dir = out;
            }
            for r in cmd_ablate(&cfg)? {
                println!(
                    "{:<12} mae {:.4} f_beta {:.4}",
                    r.arm, r.summary.final_mae, r.summary.final_f_beta
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
