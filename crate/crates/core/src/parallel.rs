//! Order-stable parallel reductions.
//!
//! Work is split into fixed-size index chunks. Chunks run in parallel but are
//! merged strictly in chunk order, so floating-point results do not depend on
//! the thread count or scheduling.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::Result;

/// Run `work` on consecutive chunks of `0..n` and fold the chunk results in order.
pub fn chunked_reduce<T, W, M>(n: usize, chunk: usize, work: W, mut merge: M) -> Result<Option<T>>
where
    T: Send,
    W: Fn(Range<usize>) -> Result<T> + Sync,
    M: FnMut(&mut T, T),
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let parts: Vec<Result<T>> = (0..n_chunks).into_par_iter().map(|c| work(c * chunk..((c + 1) * chunk).min(n))).collect();
    let mut acc: Option<T> = None;
    for part in parts {
        let part = part?;
        match acc.as_mut() {
            None => acc = Some(part),
            Some(a) => merge(a, part),
        }
    }
    Ok(acc)
}

/// Elementwise `acc += x`.
pub fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Build a rayon pool with `threads` workers (0 means the rayon default).
pub fn thread_pool(threads: usize) -> std::result::Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build()
}
