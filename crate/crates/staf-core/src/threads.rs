//! Scoped worker threads with deterministic work division.
//!
//! Work is always split into fixed-size chunks whose boundaries depend only
//! on the problem size, never on the thread count, so outputs (and any
//! caller-side reductions over the returned chunk results) are identical for
//! every `STAF_THREADS` setting.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

/// Worker-thread cap: `STAF_THREADS` if set and valid, else the available
/// parallelism.
pub fn max_threads() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        if let Ok(v) = std::env::var("STAF_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    return n;
                }
            }
        }
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    })
}

/// Runs `f(chunk_index, start, chunk)` over consecutive fixed-size chunks of
/// `data`, distributing chunks across up to [`max_threads`] workers.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, usize, &mut [T]) + Sync,
{
    assert!(chunk_len > 0);
    let n_chunks = data.len().div_ceil(chunk_len);
    let workers = max_threads().min(n_chunks).max(1);
    if workers <= 1 || n_chunks <= 1 {
        for (idx, chunk) in data.chunks_mut(chunk_len).enumerate() {
            f(idx, idx * chunk_len, chunk);
        }
        return;
    }
    let chunks: Vec<(usize, &mut [T])> = data.chunks_mut(chunk_len).enumerate().collect();
    let queue: Vec<std::sync::Mutex<Option<(usize, &mut [T])>>> =
        chunks.into_iter().map(|c| std::sync::Mutex::new(Some(c))).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= queue.len() {
                    break;
                }
                let taken = queue[i].lock().expect("chunk queue poisoned").take();
                if let Some((idx, chunk)) = taken {
                    f(idx, idx * chunk_len, chunk);
                }
            });
        }
    });
}

/// Maps fixed-size index ranges `[start, end)` of `0..n` to values, returned
/// in chunk order for deterministic sequential reduction by the caller.
pub fn map_chunks<R, F>(n: usize, chunk_len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, usize) -> R + Sync,
{
    assert!(chunk_len > 0);
    let n_chunks = n.div_ceil(chunk_len);
    let mut out: Vec<Option<R>> = (0..n_chunks).map(|_| None).collect();
    for_each_chunk_mut(&mut out, 1, |idx, _, slot| {
        let start = idx * chunk_len;
        let end = (start + chunk_len).min(n);
        slot[0] = Some(f(start, end));
    });
    out.into_iter().map(|r| r.expect("chunk computed")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_mutation_covers_everything() {
        let mut data: Vec<u64> = vec![0; 1003];
        for_each_chunk_mut(&mut data, 64, |_, start, chunk| {
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = (start + i) as u64;
            }
        });
        for (i, v) in data.iter().enumerate() {
            assert_eq!(*v, i as u64);
        }
    }

    #[test]
    fn map_chunks_preserves_order() {
        let sums = map_chunks(100, 7, |s, e| (s..e).sum::<usize>());
        assert_eq!(sums.len(), 15);
        let total: usize = sums.iter().sum();
        assert_eq!(total, (0..100).sum::<usize>());
        // chunk order, not completion order
        assert_eq!(sums[0], (0..7).sum::<usize>());
        assert_eq!(sums[14], (98..100).sum::<usize>());
    }
}
