//! Thin switch between rayon and sequential execution.

/// Number of workers actually used for a requested thread count.
pub(crate) fn effective_threads(requested: usize) -> usize {
    if cfg!(feature = "parallel") {
        requested.max(1)
    } else {
        1
    }
}

/// Maps `f` over `items`, in parallel when the feature is enabled and more
/// than one thread is requested. Output order always follows input order.
pub(crate) fn map_chunks<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if effective_threads(threads) > 1 {
            use rayon::prelude::*;
            return in_pool(threads, || items.par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    items.iter().map(f).collect()
}

/// Runs `f` inside a rayon pool sized to `threads`.
#[cfg(feature = "parallel")]
pub(crate) fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Splits `0..len` into `parts` contiguous, nearly equal ranges.
pub(crate) fn split_ranges(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1).min(len.max(1));
    let base = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let size = base + usize::from(p < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}
