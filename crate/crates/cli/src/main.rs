use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bangkit_cli::commands::*;
use bangkit_cli::{log_level, Overrides, PipelineConfig, Status};
use bangkit_toy::ToyCheckConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bangkit", version, about = "Exploded-view sequence synthesis, tracking and evaluation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML pipeline config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// SDF grid resolution
    #[arg(long, global = true)]
    sdf_res: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Split, filter and explode every mesh in a directory
    Synth { input: PathBuf },
    /// Fit part trajectories to a sequence directory
    Track {
        sequence: PathBuf,
        /// Keep gradients of points that sit inside other parts
        #[arg(long)]
        no_mask_overlaps: bool,
    },
    /// Score a fitted trajectory against its sequence
    Eval {
        sequence: PathBuf,
        /// Trajectory file; defaults to the one in the sequence directory
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Histograms over a synthesized dataset
    Stats { dataset: PathBuf },
    /// Run the toy-model invariant and gradient suite
    Toycheck {
        /// Comma-separated key=value overrides, e.g. `L=16,channels=16`
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        cfg_scale: Option<f64>,
    },
    /// Tracking quality versus number of frames
    Framestudy {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        frames: Vec<usize>,
        /// Mesh directory; synthetic assemblies when omitted
        #[arg(long)]
        input: Option<PathBuf>,
        /// Number of synthetic assemblies
        #[arg(long, default_value_t = 8)]
        assets: usize,
    },
}

fn run(cli: Cli) -> Result<Status> {
    let c = &cli.common;
    let overrides = Overrides { seed: c.seed, out: c.out.clone(), threads: c.threads, sdf_res: c.sdf_res };
    let mut cfg = PipelineConfig::resolve(c.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Synth { input } => {
            let s = cmd_synth(&input, &cfg)?;
            print!("{}", synth_table(&s));
            Ok(Status::Ok)
        }
        Command::Track { sequence, no_mask_overlaps } => {
            if no_mask_overlaps {
                cfg.track.mask_overlaps = false;
            }
            let t = cmd_track(&sequence, &cfg, c.out.as_deref())?;
            print!("{}", track_table(&t));
            Ok(if t.converged { Status::Ok } else { Status::Unconverged })
        }
        Command::Eval { sequence, trajectory } => {
            let r = cmd_eval(&sequence, &cfg, trajectory.as_deref(), c.out.as_deref())?;
            print!("{}", eval_table(&r));
            Ok(Status::Ok)
        }
        Command::Stats { dataset } => {
            let s = cmd_stats(&dataset, &cfg)?;
            print!("{}", stats_table(&s));
            Ok(Status::Ok)
        }
        Command::Toycheck { dims, steps, cfg_scale } => {
            let mut tc = ToyCheckConfig { dims: cfg.toy.clone(), seed: cfg.seed, ..ToyCheckConfig::default() };
            if let Some(text) = dims {
                tc.dims = parse_dims(&text, &tc.dims)?;
            }
            if let Some(s) = steps {
                tc.steps = s;
            }
            if let Some(s) = cfg_scale {
                tc.cfg_scale = s;
            }
            let r = cmd_toycheck(&tc, &cfg)?;
            print!("{}", toycheck_table(&r));
            Ok(if r.passed { Status::Ok } else { Status::AcceptanceFailed })
        }
        Command::Framestudy { frames, input, assets } => {
            let rows = cmd_framestudy(input.as_deref(), assets, &frames, &cfg)?;
            print!("{}", framestudy_table(&rows));
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log_level(std::env::var("BANGKIT_LOG").ok().as_deref()))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::UsageOrIo.code() } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::UsageOrIo.code())
        }
    }
}
