//! Experiment harness: scenario files, seeded episodes, sweeps, the oracle
//! check and CSV output.

pub mod episode;
pub mod output;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use episode::{run_episode, run_seeds, EpisodeContext, EpisodeResult, EpisodeSummary, SlotOutcome};
pub use output::{emit_outputs, prepare_out_dir, SCHEMA_VERSION};
pub use scenario::{Algorithm, Scenario};
pub use sweep::{run_sweep, SweepAxis, SweepRow};
pub use verify::{run_verify, verify_scenario, VerifyRow};

use crate::error::{Error, Result};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "UCMEC_THREADS";

/// Run `f` on a pool sized by `UCMEC_THREADS`, or rayon's default when unset.
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| Error::Invalid(format!("{THREADS_ENV}={v:?}")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(pool.install(f))
}
