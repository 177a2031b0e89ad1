//! Job registry and FIFO workers.

use std::collections::{BTreeMap, VecDeque};
use std::ops::ControlFlow;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::Notify;

use layoutforge_core::layout::Layout;
use layoutforge_core::model::ModelParams;
use layoutforge_core::optimizer::{best_feasible_step, optimize_with, write_trace_dir, OptimizationTrace, PenaltyConfig, StepRecord, StepSummary};
use layoutforge_core::tasks::TaskSequence;
use layoutforge_core::Error as CoreError;

use crate::ServiceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

/// What `GET /jobs/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub state: JobState,
    /// Update steps completed so far.
    pub progress: usize,
    pub steps: usize,
    /// Feasible step with the lowest prediction among those recorded.
    pub best_step: Option<usize>,
    pub summary: Vec<StepSummary>,
    pub error: Option<String>,
    /// Where the finished trace was written.
    pub trace_dir: Option<String>,
}

struct Job {
    state: JobState,
    steps: usize,
    input: Option<(Layout, TaskSequence, PenaltyConfig)>,
    trace: OptimizationTrace,
    error: Option<String>,
    trace_dir: Option<String>,
}

impl Job {
    fn best(&self) -> Option<usize> {
        if self.state == JobState::Done {
            Some(self.trace.best_step)
        } else {
            best_feasible_step(&self.trace.steps).or(if self.trace.steps.is_empty() { None } else { Some(0) })
        }
    }
}

#[derive(Default)]
struct Inner {
    next_id: u64,
    jobs: BTreeMap<String, Job>,
    queue: VecDeque<String>,
}

/// Thread-safe job table plus the queue the workers drain in order.
#[derive(Clone)]
pub struct Registry {
    inner: Arc<Mutex<Inner>>,
    wake: Arc<Notify>,
    config: Arc<ServiceConfig>,
}

impl Registry {
    /// Creates the registry and spawns `max_concurrent_jobs` workers.
    pub fn start(params: Arc<ModelParams<f64>>, config: Arc<ServiceConfig>) -> Self {
        let reg = Self { inner: Arc::default(), wake: Arc::new(Notify::new()), config };
        for _ in 0..reg.config.max_concurrent_jobs.max(1) {
            let worker = reg.clone();
            let params = params.clone();
            tokio::spawn(async move { worker.work(params).await });
        }
        reg
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Queues a job; fails when the wait queue is full.
    pub fn submit(&self, layout: Layout, sequence: TaskSequence, penalties: PenaltyConfig, steps: usize) -> Result<String, String> {
        let id = {
            let mut inner = self.lock();
            if inner.queue.len() >= self.config.max_queued_jobs {
                return Err(format!("queue full ({} jobs waiting)", inner.queue.len()));
            }
            inner.next_id += 1;
            let id = inner.next_id.to_string();
            inner.jobs.insert(
                id.clone(),
                Job {
                    state: JobState::Queued,
                    steps,
                    input: Some((layout, sequence, penalties)),
                    trace: OptimizationTrace::default(),
                    error: None,
                    trace_dir: None,
                },
            );
            inner.queue.push_back(id.clone());
            id
        };
        self.wake.notify_one();
        Ok(id)
    }

    async fn work(self, params: Arc<ModelParams<f64>>) {
        loop {
            let next = {
                let mut inner = self.lock();
                let id = inner.queue.pop_front();
                id.map(|id| {
                    let job = inner.jobs.get_mut(&id).expect("queued job exists");
                    job.state = JobState::Running;
                    (id, job.input.take().expect("queued job has input"), job.steps)
                })
            };
            let Some((id, (layout, sequence, penalties), steps)) = next else {
                self.wake.notified().await;
                continue;
            };
            let this = self.clone();
            let params = params.clone();
            let run = tokio::task::spawn_blocking(move || this.run(&id, &layout, &sequence, &penalties, steps, &params));
            if let Err(e) = run.await {
                log::error!("optimization worker panicked: {e}");
            }
        }
    }

    fn run(&self, id: &str, layout: &Layout, sequence: &TaskSequence, penalties: &PenaltyConfig, steps: usize, params: &ModelParams<f64>) {
        let config = layoutforge_core::optimizer::OptimizerConfig { steps, ..self.config.optimizer.clone() };
        let result = optimize_with(layout, sequence, params, &config, penalties, |rec| {
            if let Some(job) = self.lock().jobs.get_mut(id) {
                job.trace.steps.push(rec.clone());
            }
            ControlFlow::Continue(())
        });
        let (trace, error) = match result {
            Ok(t) => (t, None),
            Err(CoreError::NonFiniteObjective { step, trace }) => (*trace, Some(format!("objective became non-finite at step {step}"))),
            Err(e) => {
                let partial = self.lock().jobs.get(id).map(|j| j.trace.clone()).unwrap_or_default();
                (partial, Some(e.to_string()))
            }
        };
        let dir = self.config.trace_root.join(id);
        let written = write_trace_dir(&trace, &dir).map(|_| dir.display().to_string());
        if let Err(e) = &written {
            log::warn!("could not write trace for job {id}: {e}");
        }
        let mut inner = self.lock();
        if let Some(job) = inner.jobs.get_mut(id) {
            job.trace = trace;
            job.trace_dir = written.ok();
            job.state = if error.is_some() { JobState::Failed } else { JobState::Done };
            job.error = error;
        }
    }

    pub fn view(&self, id: &str) -> Option<JobView> {
        let inner = self.lock();
        let job = inner.jobs.get(id)?;
        Some(JobView {
            id: id.to_string(),
            state: job.state,
            progress: job.trace.steps.len().saturating_sub(1),
            steps: job.steps,
            best_step: job.best(),
            summary: job.trace.summary().steps,
            error: job.error.clone(),
            trace_dir: job.trace_dir.clone(),
        })
    }

    /// Applies `f` to recorded step `n` of job `id`.
    pub fn with_step<R>(&self, id: &str, n: usize, f: impl FnOnce(&StepRecord) -> R) -> Option<R> {
        let inner = self.lock();
        inner.jobs.get(id)?.trace.steps.get(n).map(f)
    }

    pub fn best_layout(&self, id: &str) -> Option<Layout> {
        let inner = self.lock();
        let job = inner.jobs.get(id)?;
        let best = job.best()?;
        job.trace.steps.get(best).map(|s| s.layout.clone())
    }
}
