//! Execution strategy for Monte-Carlo loops.
//!
//! Work is always split into fixed-size chunks, each with its own RNG stream
//! derived from `(seed, chunk index)`. Results therefore do not depend on
//! whether chunks run on the rayon pool or sequentially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per chunk / RNG stream.
pub const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

/// Seeded sample budget for a Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions { samples, seed, exec: Execution::default() }
    }

    pub fn sequential(mut self) -> Self {
        self.exec = Execution::Sequential;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Chunk sizes covering `samples`.
    pub(crate) fn chunks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.samples.div_ceil(CHUNK));
        let mut start = 0;
        let mut idx = 0;
        while start < self.samples {
            let len = CHUNK.min(self.samples - start);
            out.push((idx, len));
            start += len;
            idx += 1;
        }
        out
    }
}

/// RNG for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps `f` over `items`, in parallel when requested and available.
/// Output order always matches input order.
pub fn map_ordered<I, T, F>(exec: Execution, items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => items.into_iter().map(f).collect(),
        Execution::Parallel => par_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    F: Fn(I) -> T,
{
    items.into_iter().map(f).collect()
}
