//! Data-parallel map with a sequential fallback.
//!
//! Frequency-sweep points, load-sweep entries, and Monte Carlo runs are all
//! independent, so the hot loops funnel through this one helper. With the
//! default `parallel` feature it fans out over rayon; without it the same
//! call sites degrade to a plain iterator. Both paths collect in input
//! order, which is what keeps emitted CSVs byte-identical regardless of
//! thread count.

#[cfg(feature = "parallel")]
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
