//! Index-ordered parallel map, sequential without the `parallel` feature.

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sizes the global worker pool from `KAHLER_LAB_THREADS` when set. Returns the
/// thread count in effect.
pub fn configure_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = std::env::var("KAHLER_LAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
            // a second initialization is harmless; the first one wins
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
