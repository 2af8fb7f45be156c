//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the parallel paths run on rayon.
//! Without it, [`Execution::Parallel`] silently degrades to a plain loop, so
//! callers never need their own `cfg` gates. Every helper preserves input
//! order in its output, which keeps results bit-identical across modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fill `out[i] = f(i)`.
pub fn fill<R, F>(out: &mut [R], exec: Execution, f: F)
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = exec;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Run `f` inside a pool of `jobs` workers (or inline when sequential).
pub fn with_workers<R, F>(jobs: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(&xs, Execution::Sequential, |x| x * x);
        let b = map(&xs, Execution::Parallel, |x| x * x);
        assert_eq!(a, b);
        let c = map_range(1000, Execution::Parallel, |i| (i * i) as u64);
        assert_eq!(a, c);
        let mut d = vec![0u64; 1000];
        fill(&mut d, Execution::Parallel, |i| (i * i) as u64);
        assert_eq!(a, d);
    }
}
