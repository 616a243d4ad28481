//! Configuration, orchestration and report emission for the `burgers-fbsde` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// `--threads`, else `BURGERS_FBSDE_THREADS`, else rayon's default. Results
/// do not depend on the choice.
pub fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var("BURGERS_FBSDE_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("BURGERS_FBSDE_THREADS: not a thread count: {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Config("threads: must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    Ok(())
}
