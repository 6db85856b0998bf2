//! Reusable f64 scratch buffers for kernel temporaries. Avoids paying
//! page-fault and zeroing cost on every convolution call.

use std::cell::RefCell;

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

const MAX_POOLED: usize = 12;

/// Borrow a buffer of length `len`. Contents are unspecified; callers
/// must fully overwrite it (or use [`take_zeroed`]).
pub(crate) fn take(len: usize) -> Vec<f64> {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        let best = (0..pool.len())
            .filter(|&i| pool[i].capacity() >= len)
            .min_by_key(|&i| pool[i].capacity())
            .or_else(|| (0..pool.len()).max_by_key(|&i| pool[i].capacity()));
        match best {
            Some(i) => {
                let mut buf = pool.swap_remove(i);
                if buf.len() >= len {
                    buf.truncate(len);
                } else {
                    buf.resize(len, 0.0);
                }
                buf
            }
            None => vec![0.0; len],
        }
    })
}

/// Borrow a buffer of length `len`, guaranteed all-zero.
pub(crate) fn take_zeroed(len: usize) -> Vec<f64> {
    let mut buf = take(len);
    buf.fill(0.0);
    buf
}

/// Return a buffer to the pool.
pub(crate) fn give(buf: Vec<f64>) {
    if buf.capacity() == 0 {
        return;
    }
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        if pool.len() < MAX_POOLED {
            pool.push(buf);
        } else if let Some(i) = (0..pool.len()).min_by_key(|&i| pool[i].capacity()) {
            if pool[i].capacity() < buf.capacity() {
                pool[i] = buf;
            }
        }
    });
}
