//! Chunked execution with a rayon backend and a sequential fallback.
//!
//! Work is split into fixed-size chunks whose boundaries depend only on the
//! total sample count, never on the number of workers. Each chunk derives its
//! own RNG substream and partial results are combined in chunk order, so a
//! computation yields the same bits whether it runs on one thread or many.

/// Samples per work chunk. Part of the reproducibility contract: changing it
/// changes every seeded result.
pub const CHUNK_SIZE: usize = 4096;

/// How chunk work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Number of chunks covering `n` items.
pub fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK_SIZE)
}

/// Item range `[start, end)` covered by chunk `c` of `n` items.
pub fn chunk_range(c: usize, n: usize) -> std::ops::Range<usize> {
    let start = c * CHUNK_SIZE;
    start..n.min(start + CHUNK_SIZE)
}

/// Maps `f` over chunk indices `0..chunks`, returning results in index order.
pub fn map_chunks<T, F>(chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_chunks_with(default_execution(), chunks, f)
}

pub fn map_chunks_with<T, F>(exec: Execution, chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..chunks).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..chunks).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => (0..chunks).map(f).collect(),
    }
}

fn default_execution() -> Execution {
    if worker_count() > 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// Workers available to the current scope.
pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs `f` with at most `workers` threads. `workers == 0` keeps the ambient
/// pool. Without the `parallel` feature this simply calls `f`.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

/// Pairwise (tree) reduction over `items` in index order. The tree shape
/// depends only on `items.len()`.
pub fn pairwise_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range() {
        let n = 3 * CHUNK_SIZE + 17;
        assert_eq!(chunk_count(n), 4);
        let total: usize = (0..chunk_count(n)).map(|c| chunk_range(c, n).len()).sum();
        assert_eq!(total, n);
        assert_eq!(chunk_range(3, n), 3 * CHUNK_SIZE..n);
    }

    #[test]
    fn pairwise_matches_fixed_tree() {
        let v: Vec<u64> = (1..=7).collect();
        assert_eq!(pairwise_reduce(v, |a, b| a + b), Some(28));
        assert_eq!(pairwise_reduce(Vec::<u64>::new(), |a, b| a + b), None);
    }

    #[test]
    fn order_preserved_under_parallelism() {
        let seq = map_chunks_with(Execution::Sequential, 100, |c| c * c);
        let par = with_workers(4, || map_chunks_with(Execution::Parallel, 100, |c| c * c));
        assert_eq!(seq, par);
    }
}
