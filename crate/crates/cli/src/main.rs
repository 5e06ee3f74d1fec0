use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tmaris::config::{parse_multiplier_mode, parse_seeds};
use tmaris::{ExperimentConfig, RunOutput, SweepAxis};
use tmaris_core::MultiplierMode;

#[derive(Parser)]
#[command(
    name = "tmaris",
    version,
    about = "Max-min SINR beamforming experiments for a TMA transmissive RIS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-iteration traces at the configured scenario.
    Converge(Common),
    /// Final min-SINR over a parameter grid with paired seeds.
    Sweep(Common),
    /// Per-iteration wall time over an element or user grid.
    Timing(Common),
    /// Write a plotting script for the CSVs in the output directory.
    Plots(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed range `a..b` or list `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sweep_axis: Option<SweepAxis>,
    #[arg(long, value_parser = parse_multiplier_mode)]
    multiplier_mode: Option<MultiplierMode>,
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s).map_err(anyhow::Error::msg)?;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(a) = self.sweep_axis {
            if cfg.sweep_axis != Some(a) {
                cfg.sweep_values.clear();
            }
            cfg.sweep_axis = Some(a);
        }
        if let Some(m) = self.multiplier_mode {
            cfg.solver.multiplier_mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(out: &RunOutput) {
    for s in out.summary.iter().filter(|s| s.seed.is_none()) {
        println!("{} = {:.4}", s.label, s.value);
    }
    println!("wrote {}", out.csv.display());
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    tmaris::init_thread_pool()?;
    match cli.command {
        Command::Converge(c) => report(&tmaris::run_convergence(&c.config()?)?),
        Command::Sweep(c) => report(&tmaris::run_sweep(&c.config()?)?),
        Command::Timing(c) => report(&tmaris::run_timing(&c.config()?)?),
        Command::Plots(c) => {
            let cfg = c.config()?;
            let path = tmaris::emit_plots(&cfg.out_dir)
                .with_context(|| format!("cannot write plots for {}", cfg.out_dir.display()))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
