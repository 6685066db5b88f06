//! Ordered fan-out/fan-in over a bounded worker pool.
//!
//! Input streams are cut into fixed-size chunks; each chunk is mapped in
//! parallel and its results are collected in input order before the next
//! chunk is pulled. Output order and content are therefore independent of the
//! worker count, and memory stays bounded by one chunk.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK: usize = 4096;

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("curate-worker-{i}"))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Pulls up to `size` items, stopping early at the first error.
pub fn next_chunk<T, I>(iter: &mut I, size: usize) -> Result<Vec<T>>
where
    I: Iterator<Item = Result<T>>,
{
    let mut chunk = Vec::with_capacity(size.min(DEFAULT_CHUNK));
    for item in iter.by_ref().take(size) {
        chunk.push(item?);
    }
    Ok(chunk)
}

/// Maps `items` on `pool`, preserving order.
pub fn map_ordered<T, U, F>(pool: &ThreadPool, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    pool.install(|| items.par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let items: Vec<u64> = (0..10_000).collect();
        let one = map_ordered(&thread_pool(1).unwrap(), &items, |x| x * x);
        let eight = map_ordered(&thread_pool(8).unwrap(), &items, |x| x * x);
        assert_eq!(one, eight);
        assert_eq!(one[9_999], 9_999 * 9_999);
    }

    #[test]
    fn chunks_stop_at_errors() {
        let mut it = vec![Ok(1), Ok(2), Err(Error::ZeroNorm), Ok(4)].into_iter();
        assert_eq!(next_chunk(&mut it, 2).unwrap(), vec![1, 2]);
        assert!(next_chunk(&mut it, 2).is_err());
        assert_eq!(next_chunk(&mut it, 2).unwrap(), vec![4]);
        assert!(next_chunk(&mut it, 2).unwrap().is_empty());
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(thread_pool(0).is_err());
    }
}
