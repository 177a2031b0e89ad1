//! Per-step record of an optimization run and its on-disk form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layout::Layout;

/// Two top-level items whose centers were exchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyValues {
    pub overlap: f64,
    pub boundary: f64,
    pub constraints: f64,
}

impl PenaltyValues {
    /// Hard constraints hold exactly.
    pub fn is_feasible(&self) -> bool {
        self.overlap == 0.0 && self.boundary == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub layout: Layout,
    /// Model-predicted sequence total.
    pub predicted_total: f64,
    pub per_task: Vec<f64>,
    pub penalties: PenaltyValues,
    /// Predicted total plus weighted penalties.
    pub objective: f64,
    /// Swaps applied while producing this step.
    pub swaps: Vec<SwapEvent>,
    pub css: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub steps: Vec<StepRecord>,
    /// Feasible step with the lowest predicted total.
    pub best_step: usize,
}

/// `summary.json` contents: everything but the layouts and CSS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub best_step: usize,
    pub steps: Vec<StepSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub predicted_total: f64,
    pub objective: f64,
    pub penalties: PenaltyValues,
    pub feasible: bool,
    pub swaps: Vec<SwapEvent>,
}

impl OptimizationTrace {
    /// Re-selects the best feasible step; falls back to the initial step.
    pub fn mark_best(&mut self) {
        self.best_step = best_feasible_step(&self.steps).unwrap_or(0);
    }

    pub fn best(&self) -> Option<&StepRecord> {
        self.steps.get(self.best_step)
    }

    pub fn initial(&self) -> Option<&StepRecord> {
        self.steps.first()
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            best_step: self.best_step,
            steps: self
                .steps
                .iter()
                .map(|s| StepSummary {
                    step: s.step,
                    predicted_total: s.predicted_total,
                    objective: s.objective,
                    penalties: s.penalties,
                    feasible: s.penalties.is_feasible(),
                    swaps: s.swaps.clone(),
                })
                .collect(),
        }
    }
}

/// Feasible record with the lowest finite prediction; earliest on ties.
pub fn best_feasible_step(steps: &[StepRecord]) -> Option<usize> {
    steps
        .iter()
        .filter(|s| s.penalties.is_feasible() && s.predicted_total.is_finite())
        .min_by(|a, b| a.predicted_total.total_cmp(&b.predicted_total).then(a.step.cmp(&b.step)))
        .map(|s| s.step)
}

/// Writes `step_<n>.css`, `step_<n>.layout.json` and `summary.json` into `dir`.
pub fn write_trace_dir(trace: &OptimizationTrace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in &trace.steps {
        fs::write(dir.join(format!("step_{}.css", s.step)), &s.css)?;
        fs::write(dir.join(format!("step_{}.layout.json", s.step)), s.layout.to_json())?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&trace.summary())?)?;
    Ok(())
}
