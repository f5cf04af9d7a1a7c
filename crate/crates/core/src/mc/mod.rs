//! Monte Carlo estimators with batch-means error bars.
//!
//! Paths are generated in parallel with one random stream per path index;
//! reductions run over per-path summaries in index order, so results do
//! not depend on the number of worker threads.

mod experiments;
mod stats;

pub use experiments::*;
pub use stats::*;
