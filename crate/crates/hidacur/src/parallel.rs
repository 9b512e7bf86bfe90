//! Block-parallel Monte Carlo.
//!
//! Workers claim block indices from a shared counter and return each block's
//! statistics tagged with its index. The merge happens afterwards in index
//! order, so the estimate does not depend on the number of threads or on
//! scheduling.

use std::sync::atomic::{AtomicU64, Ordering};

use hidacur_core::montecarlo::{combine, BlockStats, Estimator};

use crate::RunError;

pub const THREADS_VAR: &str = "HIDACUR_THREADS";

/// Worker count: `HIDACUR_THREADS` when set, otherwise the available
/// parallelism.
pub fn thread_budget() -> Result<usize, RunError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(RunError::Config(format!(
                "{THREADS_VAR} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Statistics of every block of `est`, in block order.
pub fn run_blocks(est: &Estimator, threads: usize) -> Vec<BlockStats> {
    let count = est.config().block_count();
    let threads = threads.clamp(1, count.max(1) as usize);
    if threads == 1 {
        return est.run_blocks();
    }
    let next = AtomicU64::new(0);
    let mut tagged: Vec<(u64, BlockStats)> = std::thread::scope(|s| {
        let workers: Vec<_> = (0..threads)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let b = next.fetch_add(1, Ordering::Relaxed);
                        if b >= count {
                            break done;
                        }
                        done.push((b, est.run_block(b)));
                    }
                })
            })
            .collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("Monte Carlo worker panicked"))
            .collect()
    });
    tagged.sort_unstable_by_key(|(b, _)| *b);
    tagged.into_iter().map(|(_, s)| s).collect()
}

/// Running merge after each block, for convergence plots.
pub fn partial_merges(blocks: &[BlockStats]) -> Vec<BlockStats> {
    let mut out: Vec<BlockStats> = Vec::with_capacity(blocks.len());
    for b in blocks {
        let next = match out.last() {
            Some(acc) => acc.merge(b),
            None => b.clone(),
        };
        out.push(next);
    }
    out
}

/// Merged statistics of all blocks.
pub fn total(blocks: &[BlockStats]) -> BlockStats {
    combine(blocks).expect("a Monte Carlo run has at least one block")
}
