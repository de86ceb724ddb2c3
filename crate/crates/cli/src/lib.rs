//! Command implementations behind the `scenred` binary: synthetic corpus
//! generation, reduction, surrogate training, evaluation and benchmarking.

pub mod commands;
pub mod corpus;
pub mod error;
pub mod report;

pub use commands::{
    cmd_bench, cmd_eval, cmd_gen, cmd_reduce, cmd_train, run_reducer, BenchArgs, EvalArgs, GenArgs, ReduceArgs,
    Reducer, TrainArgs, TrainOutcome,
};
pub use error::{CliError, Result};
pub use report::{BenchReport, EvalReport, EvalRow, ReductionReport};

// Training allocates and drops large activation buffers every pass; the
// system allocator hands them back to the kernel each time.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub const THREADS_ENV: &str = "SCENRED_THREADS";

/// Caps the global rayon pool at `SCENRED_THREADS` when it is set.
/// Returns the cap, if any.
pub fn init_thread_pool() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(Some(threads))
}
