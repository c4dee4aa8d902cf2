//! In-process worker pool for independent block updates.
//!
//! Tasks are claimed by index from an atomic counter and their results
//! land in the slot matching their index, so the assembled output is
//! identical no matter how many workers run or how the scheduler
//! interleaves them.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// How block updates within one relaxation sweep are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockExecutor {
    Serial,
    /// Fixed-size thread pool, spawned per sweep batch.
    Threads(usize),
}

impl Default for BlockExecutor {
    fn default() -> Self {
        BlockExecutor::Serial
    }
}

impl BlockExecutor {
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            BlockExecutor::Serial
        } else {
            BlockExecutor::Threads(workers)
        }
    }

    /// Run every task and return their results in task order.
    pub fn run<T, F>(&self, tasks: Vec<F>) -> Vec<T>
    where
        T: Send,
        F: FnOnce() -> T + Send,
    {
        match *self {
            BlockExecutor::Serial => tasks.into_iter().map(|f| f()).collect(),
            BlockExecutor::Threads(workers) => run_pool(tasks, workers),
        }
    }
}

fn run_pool<T, F>(tasks: Vec<F>, workers: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let count = tasks.len();
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let tasks: Vec<Mutex<Option<F>>> = tasks.into_iter().map(|f| Mutex::new(Some(f))).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers.min(count).max(1) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= count {
                    break;
                }
                let task = tasks[idx]
                    .lock()
                    .expect("task mutex poisoned")
                    .take()
                    .expect("task claimed twice");
                let result = task();
                slots.lock().expect("result mutex poisoned")[idx] = Some(result);
            });
        }
    });

    slots
        .into_inner()
        .expect("result mutex poisoned")
        .into_iter()
        .map(|r| r.expect("worker panicked before storing its result"))
        .collect()
}
