//! Encoder input rows and the per-step task tail.

mod embedding;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use embedding::{embed_label, EmbeddingTable, EMBEDDING_DIM, STANDARD_SEED, VOCABULARY};

use crate::error::{Error, Result};
use crate::layout::{Layout, UiElement};
use crate::tasks::{Demographics, Placement, TaskSequence, TaskStep};

pub const FEATURE_WIDTH: usize = 27;
pub const TAIL_WIDTH: usize = 8;
/// Step counts are divided by this so the tail stays bounded.
pub const MAX_STEPS_CAP: f64 = 4.0;

/// Column offsets inside a [`FeatureRow`].
pub mod col {
    pub const ROLE: usize = 0;
    pub const SALIENCE: usize = 3;
    pub const EMBEDDING: usize = 4;
    pub const RECT: usize = 8;
    pub const ORIENTATION: usize = 12;
    pub const CONTAINER: usize = 15;
    pub const KIND: usize = 19;
}

pub type FeatureRow = [f64; FEATURE_WIDTH];
pub type TaskTail = [f64; TAIL_WIDTH];

/// Elements in encoder order: top edge, then left edge, then id.
/// Containers are not encoded; their members are.
pub fn order_elements(layout: &Layout) -> Vec<&UiElement> {
    order_element_indices(layout).into_iter().map(|i| &layout.elements[i]).collect()
}

pub fn order_element_indices(layout: &Layout) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..layout.elements.len()).collect();
    idx.sort_by(|&a, &b| encoder_order(&layout.elements[a], &layout.elements[b]));
    idx
}

/// Role one-hot: interaction target, drop or slide destination, anything else.
pub fn role_one_hot(element: &UiElement, step: &TaskStep) -> [f64; 3] {
    if element.id == step.target_id {
        [1.0, 0.0, 0.0]
    } else if step.destination_id.as_deref() == Some(element.id.as_str()) {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Salience mapped linearly so that 0 → −1 and the longest vocabulary word → 1.
pub fn salience_norm(salience: u32, table: &EmbeddingTable) -> f64 {
    (2.0 * salience as f64 / table.max_word_len() as f64 - 1.0).clamp(-1.0, 1.0)
}

pub fn element_features(element: &UiElement, step: &TaskStep, layout: &Layout, table: &EmbeddingTable) -> Result<FeatureRow> {
    let mut row = [0.0; FEATURE_WIDTH];
    row[col::ROLE..col::ROLE + 3].copy_from_slice(&role_one_hot(element, step));
    row[col::SALIENCE] = salience_norm(element.label_salience, table);
    row[col::EMBEDDING..col::EMBEDDING + 4].copy_from_slice(&table.get(&element.label)?);
    row[col::RECT..col::RECT + 4].copy_from_slice(&element.rect.to_array());
    row[col::ORIENTATION..col::ORIENTATION + 3].copy_from_slice(&element.orientation.one_hot());
    if let Some(cid) = &element.container_id {
        let c = layout.container(cid).ok_or_else(|| Error::UnknownElement(cid.clone()))?;
        row[col::CONTAINER..col::CONTAINER + 4].copy_from_slice(&c.rect.to_array());
    }
    row[col::KIND..col::KIND + 8].copy_from_slice(&element.kind.one_hot());
    Ok(row)
}

pub fn task_tail(step: &TaskStep, demographics: &Demographics) -> TaskTail {
    let mut t = [0.0; TAIL_WIDTH];
    t[..4].copy_from_slice(&step.interaction.one_hot());
    t[4] = step.step_index as f64 / MAX_STEPS_CAP;
    t[5] = step.total_steps as f64 / MAX_STEPS_CAP;
    t[6] = demographics.frac_left_handed;
    t[7] = demographics.avg_age_years / 100.0;
    t
}

/// Everything the encoder sees for one step: the scene (overlay placements)
/// and the target/destination roles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderKey {
    pub scene: usize,
    pub target: String,
    pub destination: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    /// Index into [`SequencePlan::encoders`].
    pub encoder: usize,
    pub tail: TaskTail,
    pub task: usize,
}

/// One encoder row together with the element it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRow {
    pub element: usize,
    pub row: FeatureRow,
}

/// A task sequence flattened into steps, with identical encoder inputs shared.
///
/// Steps with the same scene, target and destination produce the same
/// embedding, so the encoder runs once per distinct key.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePlan {
    pub scenes: Vec<Vec<Placement>>,
    pub encoders: Vec<EncoderKey>,
    pub steps: Vec<StepPlan>,
    pub n_tasks: usize,
}

impl SequencePlan {
    pub fn new(sequence: &TaskSequence) -> Self {
        let (task_scene, scenes) = sequence.scenes();
        let mut encoders = Vec::new();
        let mut lookup: HashMap<EncoderKey, usize> = HashMap::new();
        let mut steps = Vec::new();
        for (ti, task) in sequence.tasks.iter().enumerate() {
            for step in &task.steps {
                let key = EncoderKey { scene: task_scene[ti], target: step.target_id.clone(), destination: step.destination_id.clone() };
                let encoder = *lookup.entry(key.clone()).or_insert_with(|| {
                    encoders.push(key);
                    encoders.len() - 1
                });
                steps.push(StepPlan { encoder, tail: task_tail(step, &sequence.demographics), task: ti });
            }
        }
        Self { scenes, encoders, steps, n_tasks: sequence.tasks.len() }
    }

    pub fn steps_per_task(&self) -> Vec<usize> {
        let mut n = vec![0; self.n_tasks];
        for s in &self.steps {
            n[s.task] += 1;
        }
        n
    }

    /// The layout as it looks in each scene.
    pub fn staged_layouts(&self, layout: &Layout) -> Result<Vec<Layout>> {
        self.scenes.iter().map(|p| layout.staged(p)).collect()
    }

    /// Encoder rows for every distinct key, in encoder order.
    pub fn encoder_rows(&self, layout: &Layout, table: &EmbeddingTable) -> Result<Vec<Vec<EncodedRow>>> {
        let staged = self.staged_layouts(layout)?;
        let orders: Vec<Vec<usize>> = staged.iter().map(order_element_indices).collect();
        self.encoders
            .iter()
            .map(|key| {
                let scene = &staged[key.scene];
                if scene.element(&key.target).is_none() {
                    return Err(Error::UnknownElement(key.target.clone()));
                }
                if let Some(d) = &key.destination {
                    if scene.element(d).is_none() {
                        return Err(Error::UnknownElement(d.clone()));
                    }
                }
                let step = TaskStep {
                    interaction: crate::tasks::InteractionType::Tap,
                    target_id: key.target.clone(),
                    destination_id: key.destination.clone(),
                    step_index: 1,
                    total_steps: 1,
                    slide_range: None,
                };
                let rows = orders[key.scene]
                    .iter()
                    .map(|&i| Ok(EncodedRow { element: i, row: element_features(&scene.elements[i], &step, scene, table)? }))
                    .collect::<Result<Vec<_>>>()?;
                if rows.is_empty() {
                    return Err(Error::EmptyLayout);
                }
                Ok(rows)
            })
            .collect()
    }
}

/// Encoder sort key: top edge, left edge, id.
pub fn encoder_order(a: &UiElement, b: &UiElement) -> Ordering {
    a.rect.top().total_cmp(&b.rect.top()).then_with(|| a.rect.left().total_cmp(&b.rect.left())).then_with(|| a.id.cmp(&b.id))
}
