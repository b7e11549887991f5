//! Experiment runner behind the `maxenergy` command.

pub mod config;
pub mod discrete;
pub mod eval;
pub mod output;
pub mod solve;
pub mod verify;

use anyhow::{Context, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MAXENERGY_THREADS";

/// Worker count from `--threads`, else from [`THREADS_ENV`]; `None` leaves
/// the rayon default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn init_threads(flag: Option<usize>) -> Result<()> {
    if let Some(n) = thread_count(flag)? {
        anyhow::ensure!(n > 0, "thread count must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}
