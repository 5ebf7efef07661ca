//! Work distribution across worker threads.
//!
//! Compression assigns whole slices to workers with a greedy
//! number-partitioning plan keyed on row counts, since per-slice cost is
//! proportional to `I_k`. Iteration work is uniform per slice and is split
//! into contiguous chunks instead.
//!
//! Every parallel map writes one output slot per slice, and callers reduce
//! those slots serially in ascending slice order. Floating-point results are
//! therefore bit-identical for any worker count.

use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of slice indices to `T` workers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub sets: Vec<Vec<usize>>,
    pub loads: Vec<usize>,
}

impl PartitionPlan {
    pub fn num_workers(&self) -> usize {
        self.sets.len()
    }

    pub fn num_slices(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// `max(loads) - min(loads)`.
    pub fn imbalance(&self) -> usize {
        let max = self.loads.iter().copied().max().unwrap_or(0);
        let min = self.loads.iter().copied().min().unwrap_or(0);
        max - min
    }
}

/// Greedy number partitioning of slices by row count.
///
/// Slices are visited in descending row count (ties by ascending index) and
/// each goes to the currently lightest set (ties by lowest set index).
pub fn greedy_partition(row_counts: &[usize], workers: usize) -> PartitionPlan {
    let workers = workers.max(1);
    let mut order: Vec<usize> = (0..row_counts.len()).collect();
    order.sort_by(|&a, &b| row_counts[b].cmp(&row_counts[a]).then(a.cmp(&b)));

    let mut sets = vec![Vec::new(); workers];
    let mut loads = vec![0usize; workers];
    for k in order {
        let lightest = (0..workers)
            .min_by_key(|&t| (loads[t], t))
            .expect("at least one worker");
        sets[lightest].push(k);
        loads[lightest] += row_counts[k];
    }
    PartitionPlan { sets, loads }
}

/// Contiguous, near-equal chunks of `0..n` for `workers` workers.
pub fn uniform_chunks(n: usize, workers: usize) -> Vec<std::ops::Range<usize>> {
    let workers = workers.max(1).min(n.max(1));
    let base = n / workers;
    let extra = n % workers;
    let mut start = 0;
    (0..workers)
        .map(|t| {
            let len = base + usize::from(t < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Worker pool configuration. Threads are scoped to each call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Executor {
    threads: usize,
}

impl Default for Executor {
    fn default() -> Self {
        Self::new(default_threads())
    }
}

/// Logical core count, or 1 if unknown.
pub fn default_threads() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

impl Executor {
    pub fn new(threads: usize) -> Self {
        Self {
            threads: threads.max(1),
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Runs `task(k)` for `k in 0..n` over uniform chunks and returns the
    /// results in slice order. On failure, the error of the lowest failing
    /// slice is returned, tagged with its index.
    pub fn map_slices<T, F>(&self, n: usize, task: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        if n == 0 {
            return Ok(Vec::new());
        }
        let chunks = uniform_chunks(n, self.threads);
        if chunks.len() == 1 {
            return (0..n).map(|k| task(k).map_err(|e| e.in_slice(k))).collect();
        }
        let abort = AtomicBool::new(false);
        let results: Vec<Vec<(usize, Result<T>)>> = thread::scope(|s| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|range| {
                    let (task, abort) = (&task, &abort);
                    let range = range.clone();
                    s.spawn(move || run_indices(range, task, abort))
                })
                .collect();
            handles.into_iter().map(join).collect()
        });
        collect_ordered(n, results)
    }

    /// Runs `task(k)` with worker `t` handling exactly `plan.sets[t]`.
    pub fn map_with_plan<T, F>(&self, plan: &PartitionPlan, task: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        let n = plan.num_slices();
        if n == 0 {
            return Ok(Vec::new());
        }
        let busy: Vec<&Vec<usize>> = plan.sets.iter().filter(|s| !s.is_empty()).collect();
        let abort = AtomicBool::new(false);
        let results: Vec<Vec<(usize, Result<T>)>> = if busy.len() == 1 {
            vec![run_indices(busy[0].iter().copied(), &task, &abort)]
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = busy
                    .iter()
                    .map(|set| {
                        let (task, abort) = (&task, &abort);
                        let set = *set;
                        s.spawn(move || run_indices(set.iter().copied(), task, abort))
                    })
                    .collect();
                handles.into_iter().map(join).collect()
            })
        };
        collect_ordered(n, results)
    }
}

fn run_indices<T, F>(
    indices: impl Iterator<Item = usize>,
    task: &F,
    abort: &AtomicBool,
) -> Vec<(usize, Result<T>)>
where
    F: Fn(usize) -> Result<T>,
{
    let mut out = Vec::new();
    for k in indices {
        if abort.load(Ordering::Relaxed) {
            break;
        }
        let r = task(k);
        if r.is_err() {
            abort.store(true, Ordering::Relaxed);
        }
        out.push((k, r));
    }
    out
}

fn join<T>(h: thread::ScopedJoinHandle<'_, T>) -> T {
    match h.join() {
        Ok(v) => v,
        Err(panic) => std::panic::resume_unwind(panic),
    }
}

fn collect_ordered<T>(n: usize, parts: Vec<Vec<(usize, Result<T>)>>) -> Result<Vec<T>> {
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let mut first_err: Option<(usize, Error)> = None;
    for (k, r) in parts.into_iter().flatten() {
        match r {
            Ok(v) => slots[k] = Some(v),
            Err(e) => {
                if first_err.as_ref().is_none_or(|(j, _)| k < *j) {
                    first_err = Some((k, e));
                }
            }
        }
    }
    if let Some((k, e)) = first_err {
        return Err(e.in_slice(k));
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("every slice produced a result"))
        .collect())
}
