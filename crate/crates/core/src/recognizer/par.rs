//! Deterministic fan-out over per-sample work.
//!
//! Scoring and embedding are pure per sample, so threads split the index
//! range into contiguous chunks and results are reassembled in index order.
//! Output is byte-identical regardless of `jobs`; on failure the error with
//! the lowest index wins so diagnostics do not depend on thread timing.

use crate::error::Result;

pub(crate) fn par_map<T, F>(n: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let jobs = jobs.max(1).min(n.max(1));
    if jobs == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(jobs);
    let mut slots: Vec<Option<Result<T>>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    std::thread::scope(|scope| {
        let mut rest = slots.as_mut_slice();
        let mut start = 0usize;
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            rest = tail;
            let f = &f;
            scope.spawn(move || {
                for (offset, slot) in head.iter_mut().enumerate() {
                    *slot = Some(f(start + offset));
                }
            });
            start += take;
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("par_map worker left a slot unfilled"))
        .collect()
}
