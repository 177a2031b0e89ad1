//! Task sequences and their expansion into interaction steps.

mod photo;
mod recipe;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use photo::build_photo_editing_sequence;
pub use recipe::build_recipe_sequence;

use crate::error::{Error, Result};
use crate::layout::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionType {
    Tap,
    Acquire,
    DragAndDrop,
    Slide,
}

impl InteractionType {
    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self as usize] = 1.0;
        v
    }

    pub fn needs_destination(self) -> bool {
        matches!(self, InteractionType::DragAndDrop | InteractionType::Slide)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStep {
    pub interaction: InteractionType,
    pub target_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination_id: Option<String>,
    /// 1-based position within the task.
    pub step_index: u32,
    pub total_steps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slide_range: Option<[f64; 2]>,
}

/// Host-relative position of an anchored element for the rest of the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub id: String,
    pub rx: f64,
    pub ry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_type: u8,
    pub steps: Vec<TaskStep>,
    /// How many times this (target, task type) pair has occurred so far, 1-based.
    pub trial_index: u32,
    /// Overlay moves that take effect from this task on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub placements: Vec<Placement>,
}

impl Task {
    /// The element the task is about: the target of its last step.
    pub fn target_id(&self) -> &str {
        &self.steps.last().expect("task has steps").target_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub frac_left_handed: f64,
    pub avg_age_years: f64,
}

impl Demographics {
    /// Population values used when optimizing for everyone.
    pub const POPULATION: Demographics = Demographics { frac_left_handed: 0.1, avg_age_years: 37.7 };
}

impl Default for Demographics {
    fn default() -> Self {
        Self::POPULATION
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSequence {
    pub demographics: Demographics,
    pub tasks: Vec<Task>,
}

/// What a task asks the user to do, before expansion into steps.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// Type 1: tap a sticker or filter.
    Select { target: String },
    /// Type 2: open a sticker set, then pick a sticker.
    OpenAndSelect { opener: String, target: String },
    /// Type 3: move the slider handle into a range.
    Slide { slider: String, range: [f64; 2] },
    /// Type 4: drag something onto a drop target.
    DragDrop { target: String, destination: String },
    /// Type 4 with a preceding tap that reveals the dragged item.
    OpenAndDrag { opener: String, target: String, destination: String },
    /// Type 5: tap an icon or button.
    TapAction { target: String },
}

impl TaskSpec {
    pub fn task_type(&self) -> u8 {
        match self {
            TaskSpec::Select { .. } => 1,
            TaskSpec::OpenAndSelect { .. } => 2,
            TaskSpec::Slide { .. } => 3,
            TaskSpec::DragDrop { .. } | TaskSpec::OpenAndDrag { .. } => 4,
            TaskSpec::TapAction { .. } => 5,
        }
    }

    pub fn expand(&self) -> Vec<TaskStep> {
        let step = |interaction, target: &str, destination: Option<&str>, range| TaskStep {
            interaction,
            target_id: target.to_string(),
            destination_id: destination.map(str::to_string),
            step_index: 0,
            total_steps: 0,
            slide_range: range,
        };
        let mut steps = match self {
            TaskSpec::Select { target } | TaskSpec::TapAction { target } => {
                vec![step(InteractionType::Tap, target, None, None)]
            }
            TaskSpec::OpenAndSelect { opener, target } => {
                vec![step(InteractionType::Tap, opener, None, None), step(InteractionType::Tap, target, None, None)]
            }
            TaskSpec::Slide { slider, range } => {
                vec![step(InteractionType::Acquire, slider, None, None), step(InteractionType::Slide, slider, Some(slider), Some(*range))]
            }
            TaskSpec::DragDrop { target, destination } => {
                vec![step(InteractionType::Acquire, target, None, None), step(InteractionType::DragAndDrop, target, Some(destination), None)]
            }
            TaskSpec::OpenAndDrag { opener, target, destination } => vec![
                step(InteractionType::Tap, opener, None, None),
                step(InteractionType::Acquire, target, None, None),
                step(InteractionType::DragAndDrop, target, Some(destination), None),
            ],
        };
        let total = steps.len() as u32;
        for (i, s) in steps.iter_mut().enumerate() {
            s.step_index = i as u32 + 1;
            s.total_steps = total;
        }
        steps
    }
}

/// Expands a task of `task_type` into its interaction steps.
///
/// Type 2 takes the opener and the sticker as `targets`. Drag-and-drop
/// (type 4) and slider (type 3) tasks need a destination.
pub fn expand_steps(task_type: u8, targets: &[&str], destination: Option<&str>, slide_range: Option<[f64; 2]>) -> Result<Vec<TaskStep>> {
    let one = |n: usize| -> Result<String> {
        if targets.len() == n {
            Ok(targets[n - 1].to_string())
        } else {
            Err(Error::InvalidTask(format!("task type {task_type} takes {n} target(s), got {}", targets.len())))
        }
    };
    let spec = match task_type {
        1 => TaskSpec::Select { target: one(1)? },
        2 => TaskSpec::OpenAndSelect { opener: targets.first().copied().unwrap_or_default().to_string(), target: one(2)? },
        3 => {
            let slider = one(1)?;
            if destination.is_none() && slide_range.is_none() {
                return Err(Error::MissingDestination(3));
            }
            TaskSpec::Slide { slider, range: slide_range.unwrap_or([0.0, 1.0]) }
        }
        4 => {
            let destination = destination.ok_or(Error::MissingDestination(4))?.to_string();
            match targets {
                [target] => TaskSpec::DragDrop { target: target.to_string(), destination },
                [opener, target] => TaskSpec::OpenAndDrag { opener: opener.to_string(), target: target.to_string(), destination },
                _ => return Err(Error::InvalidTask("drag-and-drop takes one or two targets".into())),
            }
        }
        5 => TaskSpec::TapAction { target: one(1)? },
        t => return Err(Error::InvalidTask(format!("unknown task type {t}"))),
    };
    Ok(spec.expand())
}

impl TaskSequence {
    /// Builds a sequence from specs, numbering trials per (target, task type).
    pub fn from_specs(specs: Vec<(TaskSpec, Vec<Placement>)>, demographics: Demographics) -> Self {
        let mut counts: BTreeMap<(String, u8), u32> = BTreeMap::new();
        let tasks = specs
            .into_iter()
            .map(|(spec, placements)| {
                let steps = spec.expand();
                let key = (steps.last().unwrap().target_id.clone(), spec.task_type());
                let trial = counts.entry(key).or_insert(0);
                *trial += 1;
                Task { task_type: spec.task_type(), steps, trial_index: *trial, placements }
            })
            .collect();
        Self { demographics, tasks }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    pub fn n_steps(&self) -> usize {
        self.tasks.iter().map(|t| t.steps.len()).sum()
    }

    /// First `n` tasks, keeping the overlay placements already in effect.
    pub fn truncated(&self, n: usize) -> Self {
        Self { demographics: self.demographics, tasks: self.tasks.iter().take(n).cloned().collect() }
    }

    pub fn with_demographics(mut self, demographics: Demographics) -> Self {
        self.demographics = demographics;
        self
    }

    /// Per-task index of the placement set in effect ("scene"), and the
    /// distinct scenes in order of first use.
    pub fn scenes(&self) -> (Vec<usize>, Vec<Vec<Placement>>) {
        let mut scenes: Vec<Vec<Placement>> = vec![Vec::new()];
        let mut current: BTreeMap<String, Placement> = BTreeMap::new();
        let mut per_task = Vec::with_capacity(self.tasks.len());
        for task in &self.tasks {
            if !task.placements.is_empty() {
                for p in &task.placements {
                    current.insert(p.id.clone(), p.clone());
                }
                scenes.push(current.values().cloned().collect());
            }
            per_task.push(scenes.len() - 1);
        }
        (per_task, scenes)
    }

    /// Checks step structure and that every referenced id exists in `layout`.
    pub fn validate_against(&self, layout: &Layout) -> Result<()> {
        for (i, task) in self.tasks.iter().enumerate() {
            if !(1..=5).contains(&task.task_type) || task.steps.is_empty() {
                return Err(Error::InvalidTask(format!("task {i}: bad type or no steps")));
            }
            for (k, s) in task.steps.iter().enumerate() {
                if s.step_index != k as u32 + 1 || s.total_steps != task.steps.len() as u32 {
                    return Err(Error::InvalidTask(format!("task {i}: inconsistent step numbering")));
                }
                if s.interaction.needs_destination() != s.destination_id.is_some() {
                    return Err(Error::InvalidTask(format!("task {i}: destination mismatch")));
                }
                for id in std::iter::once(&s.target_id).chain(s.destination_id.iter()) {
                    if layout.element(id).is_none() {
                        return Err(Error::UnknownElement(id.clone()));
                    }
                }
            }
            for p in &task.placements {
                let el = layout.element(&p.id).ok_or_else(|| Error::UnknownElement(p.id.clone()))?;
                if !el.is_overlay() {
                    return Err(Error::InvalidTask(format!("task {i}: `{}` is not anchored", p.id)));
                }
            }
        }
        Ok(())
    }
}
