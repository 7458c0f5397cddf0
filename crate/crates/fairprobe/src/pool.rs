//! Bounded worker pool over scoped threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Tracks how many jobs run at once and the highest value seen.
#[derive(Debug, Default)]
pub struct InFlight {
    now: AtomicUsize,
    max: AtomicUsize,
}

pub struct InFlightGuard<'a>(&'a InFlight);

impl InFlight {
    pub fn enter(&self) -> InFlightGuard<'_> {
        let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
        self.max.fetch_max(n, Ordering::SeqCst);
        InFlightGuard(self)
    }

    pub fn max(&self) -> usize {
        self.max.load(Ordering::SeqCst)
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        self.0.now.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Runs `f` over `items` on at most `workers` threads. Results come back
/// in input order along with the peak concurrency observed.
pub fn run<T, R, F>(items: Vec<T>, workers: usize, f: F) -> (Vec<R>, usize)
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    let queue = Mutex::new(items.into_iter().enumerate());
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    let counter = InFlight::default();
    let threads = workers.max(1).min(n);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let next = queue.lock().unwrap_or_else(|p| p.into_inner()).next();
                let Some((i, item)) = next else { break };
                let r = {
                    let _g = counter.enter();
                    f(item)
                };
                results.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
            });
        }
    });
    let out = results
        .into_inner()
        .unwrap_or_else(|p| p.into_inner())
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();
    (out, counter.max())
}

/// Runs each bin on its own thread, items within a bin sequentially.
/// Results are flattened in bin order.
pub fn run_bins<T, R, F>(bins: Vec<Vec<T>>, f: F) -> (Vec<R>, usize)
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let counter = InFlight::default();
    let out = std::thread::scope(|s| {
        let handles: Vec<_> = bins
            .into_iter()
            .map(|bin| {
                let (f, counter) = (&f, &counter);
                s.spawn(move || {
                    bin.into_iter()
                        .map(|item| {
                            let _g = counter.enter();
                            f(item)
                        })
                        .collect::<Vec<R>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    });
    (out, counter.max())
}
