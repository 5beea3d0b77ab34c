//! Data-parallel execution of independent work items.
//!
//! Every parallel loop in the crate goes through [`map_indexed`], which
//! returns results in index order. Work items never share mutable state, so
//! the output is identical for any thread count and for the sequential
//! fallback used when the `parallel` feature is disabled.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// One item after another on the calling thread.
    Sequential,
    /// Rayon work stealing (falls back to sequential without the
    /// `parallel` feature).
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        Exec::Parallel => parallel_map(n, f),
    }
}

/// Like [`map_indexed`] but short-circuits on the first error (in index
/// order for the sequential path; the parallel path reports the error with
/// the lowest index).
pub fn try_map_indexed<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Runs `f` inside a pool with `threads` workers. `None` uses the global
/// pool. Without the `parallel` feature the thread count is ignored.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("failed to build thread pool");
            return pool.install(f);
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(Exec::Sequential, 100, |i| i * i);
        let par = map_indexed(Exec::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = with_threads(Some(1), || {
            map_indexed(Exec::Parallel, 50, |i| (i as f64).sin())
        });
        let b = with_threads(Some(4), || {
            map_indexed(Exec::Parallel, 50, |i| (i as f64).sin())
        });
        assert_eq!(a, b);
    }

    #[test]
    fn try_map_reports_error() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(Exec::Parallel, 10, |i| if i == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
