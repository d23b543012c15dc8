//! Parallel suite execution with output identical to the sequential run.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use articflow_core::eval::{aggregate, plan_trials, run_trial, NamedEstimator, SuiteConfig, SuiteObject, SuiteReport, TrialRecord};

/// Runs every trial on up to `jobs` worker threads. Records are sorted by
/// trial index before aggregation, so the report does not depend on `jobs`.
pub fn run_suite_parallel(
    objects: &[SuiteObject],
    estimators: &[NamedEstimator],
    config: &SuiteConfig,
    suite_seed: u64,
    jobs: usize,
) -> articflow_core::Result<SuiteReport> {
    let plan = plan_trials(objects, estimators, config, suite_seed)?;
    let jobs = jobs.clamp(1, plan.len().max(1));
    let next = AtomicUsize::new(0);
    let records: Mutex<Vec<TrialRecord>> = Mutex::new(Vec::with_capacity(plan.len()));
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = plan.get(i) else { break };
                let rec = run_trial(objects, estimators, config, spec);
                records.lock().expect("worker panicked").push(rec);
            });
        }
    });
    Ok(aggregate(records.into_inner().expect("worker panicked"), estimators, config, suite_seed))
}

/// Logical CPUs available, at least one.
pub fn available_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
