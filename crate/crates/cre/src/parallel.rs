//! Parallel mining. Chunks are formed exactly as in the sequential miner and
//! results are collected in chunk order, so the output does not depend on the
//! number of workers.

use cre_core::miner::{mine_chunk, SuspiciousGroup};
use cre_core::{Predictor, SchemaConfig, Sentence};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn mine_parallel<P: Predictor + ?Sized>(
    corpus: &[Sentence],
    seed: &P,
    schema: &SchemaConfig,
    chunk_size: usize,
    workers: usize,
) -> Result<Vec<SuspiciousGroup>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let chunks: Vec<Vec<SuspiciousGroup>> = pool.install(|| {
        corpus
            .par_chunks(chunk_size.max(1))
            .map(|chunk| mine_chunk(chunk, seed, schema))
            .collect::<std::result::Result<_, _>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}
