//! Intra-kernel parallelism. `MIMO_SEER_THREADS` caps the worker count
//! (0 or 1 means serial). Work splits into disjoint output chunks, so
//! results are bitwise independent of the schedule and thread count.

use std::sync::OnceLock;

static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

pub fn configured_threads() -> usize {
    match std::env::var("MIMO_SEER_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => 1,
            Ok(n) => n,
            Err(_) => 1,
        },
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

fn pool() -> Option<&'static rayon::ThreadPool> {
    POOL.get_or_init(|| {
        let threads = configured_threads();
        if threads <= 1 {
            None
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .ok()
        }
    })
    .as_ref()
}

/// Split `out` into at most `configured_threads()` contiguous chunks of
/// whole `unit`-sized rows and run `f(first_unit_index, chunk)` on each.
pub(crate) fn for_row_chunks<F>(out: &mut [f64], unit: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert!(unit > 0 && out.len() % unit == 0);
    let rows = out.len() / unit;
    let threads = configured_threads().min(rows.max(1));
    if threads <= 1 || rows <= 1 {
        f(0, out);
        return;
    }
    let rows_per_chunk = rows.div_ceil(threads);
    let chunk_len = rows_per_chunk * unit;
    match pool() {
        Some(p) => p.install(|| {
            use rayon::prelude::*;
            out.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, chunk)| f(i * rows_per_chunk, chunk));
        }),
        None => f(0, out),
    }
}
