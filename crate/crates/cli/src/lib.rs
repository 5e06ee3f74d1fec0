//! Experiment runner for the transmissive RIS beamforming solver.
//!
//! Configurations are flat `key = value` files ([`config`]); each run
//! writes one versioned CSV ([`experiments`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;

pub use config::{ConfigError, ExperimentConfig, SweepAxis};
pub use experiments::{
    emit_plots, run_convergence, run_sweep, run_timing, ExperimentError, ResultRow, RunOutput, SummaryRow,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "TMARIS_THREADS";

/// Applies [`THREADS_ENV`] to the global thread pool. Returns the cap, if any.
/// Only the first call in a process has an effect.
pub fn init_thread_pool() -> anyhow::Result<Option<usize>> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize =
        v.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV}={v} is not a thread count"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_ENV} must be at least 1");
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}
