//! Training loop: one Adam step per layout sequence.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{place_rows, prepare_rows, sequence_loss_node, ParamNodes};
use super::{clip_global_norm, observed_spread, Adam, ModelParams, OutputScale};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, FeatureRow, SequencePlan};
use crate::layout::Layout;
use crate::scalar::Real;
use crate::seed;
use crate::tasks::TaskSequence;

/// One layout with its task sequence and observed per-task metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    pub layout: Layout,
    pub sequence: TaskSequence,
    pub observed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Share of layouts held out to pick the best epoch.
    pub validation_fraction: f64,
    /// Also measure the training-set loss without dropout after each epoch.
    #[serde(default)]
    pub track_train_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-4, clip_norm: 1.0, epochs: 850, seed: 0, validation_fraction: 1.0 / 6.0, track_train_loss: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean sequence loss over the epoch's updates, dropout active.
    pub train_loss: f64,
    /// Inference-mode loss over the training set, when tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_eval_loss: Option<f64>,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + serde::de::DeserializeOwned")]
pub struct TrainReport<T> {
    pub params: ModelParams<T>,
    /// Epoch whose parameters were kept (0 means the initial weights).
    pub best_epoch: usize,
    pub best_validation_loss: Option<f64>,
    pub history: Vec<EpochReport>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

struct Prepared {
    id: String,
    plan: SequencePlan,
    rows: Vec<Vec<FeatureRow>>,
    observed: Vec<f64>,
}

fn prepare(ex: &TrainingExample, table: &EmbeddingTable) -> Result<Prepared> {
    let plan = SequencePlan::new(&ex.sequence);
    if ex.observed.len() != plan.n_tasks {
        return Err(Error::LengthMismatch(ex.observed.len(), plan.n_tasks));
    }
    observed_spread(&ex.observed)?;
    Ok(Prepared { id: ex.id.clone(), rows: prepare_rows(&plan, &ex.layout, table)?, plan, observed: ex.observed.clone() })
}

/// Output scale from per-step averages of the training observations.
fn fit_output_scale(examples: &[&TrainingExample]) -> OutputScale {
    let mut per_step = Vec::new();
    for ex in examples {
        for (task, &obs) in ex.sequence.tasks.iter().zip(&ex.observed) {
            per_step.push(obs / task.steps.len() as f64);
        }
    }
    if per_step.is_empty() {
        return OutputScale::default();
    }
    let n = per_step.len() as f64;
    let mean = per_step.iter().sum::<f64>() / n;
    let std = (per_step.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    OutputScale { offset: mean, scale: if std > 0.0 { std } else { 1.0 } }
}

/// Sequence loss of one example, and optionally its gradients.
fn run_example<T: Real>(
    params: &ModelParams<T>,
    ex: &Prepared,
    train: bool,
    dropout_seed: u64,
    want_grads: bool,
) -> Result<(T, Option<Vec<Vec<T>>>)> {
    let mut tape = Tape::new();
    let nodes = ParamNodes::new(&mut tape, params, want_grads);
    let rows = place_rows(&mut tape, &ex.rows);
    let loss = sequence_loss_node(&mut tape, &nodes, &ex.plan, &rows, &ex.observed, train, dropout_seed)?;
    let value = tape.scalar(loss);
    if !want_grads {
        return Ok((value, None));
    }
    let grads = tape.backward(loss)?;
    let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let g = nodes.tensor_ids().iter().zip(lens).map(|(&id, n)| grads.get_or_zeros(id, n)).collect();
    Ok((value, Some(g)))
}

/// Mean inference-mode sequence loss over `examples`.
fn mean_loss<T: Real>(params: &ModelParams<T>, examples: &[Prepared]) -> Result<f64> {
    let mut sum = 0.0;
    for ex in examples {
        sum += run_example(params, ex, false, 0, false)?.0.as_f64();
    }
    Ok(sum / examples.len().max(1) as f64)
}

/// Trains from a seeded initialization and returns the best parameters.
pub fn train<T: Real>(examples: &[TrainingExample], config: &TrainConfig) -> Result<ModelParams<T>> {
    Ok(train_with(examples, config, None, |_| {})?.params)
}

/// Full training run with an optional starting point and a per-epoch callback.
pub fn train_with<T: Real>(
    examples: &[TrainingExample],
    config: &TrainConfig,
    init: Option<ModelParams<T>>,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainReport<T>> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let table = EmbeddingTable::standard();

    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seed::rng(config.seed, "validation-split", 0));
    let n_val = if examples.len() >= 2 && config.validation_fraction > 0.0 {
        ((examples.len() as f64 * config.validation_fraction).round() as usize).clamp(1, examples.len() - 1)
    } else {
        0
    };
    let mut val_idx: Vec<usize> = order[..n_val].to_vec();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();

    let train_set: Vec<Prepared> = train_idx.iter().map(|&i| prepare(&examples[i], table)).collect::<Result<_>>()?;
    let val_set: Vec<Prepared> = val_idx.iter().map(|&i| prepare(&examples[i], table)).collect::<Result<_>>()?;

    let mut params = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => {
            let mut p = ModelParams::init(config.seed);
            let refs: Vec<&TrainingExample> = train_idx.iter().map(|&i| &examples[i]).collect();
            p.output = fit_output_scale(&refs);
            p
        }
    };
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(T::lit(config.learning_rate), &shapes);

    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_val = if val_set.is_empty() { None } else { Some(mean_loss(&params, &val_set)?) };
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut visit: Vec<usize> = (0..train_set.len()).collect();
        visit.shuffle(&mut seed::rng(config.seed, "epoch-order", epoch as u64));
        let mut loss_sum = 0.0;
        for &k in &visit {
            let ex = &train_set[k];
            let dropout_seed = seed::derive(config.seed, "dropout", (epoch * train_set.len() + k) as u64);
            let (loss, grads) = run_example(&params, ex, true, dropout_seed, true)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, layout: ex.id.clone() });
            }
            let mut grads = grads.expect("gradients requested");
            clip_global_norm(&mut grads, T::lit(config.clip_norm));
            adam.step(&mut params.tensors_mut(), &grads);
            loss_sum += loss.as_f64();
        }
        let train_loss = loss_sum / train_set.len().max(1) as f64;
        let train_eval_loss = if config.track_train_loss { Some(mean_loss(&params, &train_set)?) } else { None };
        let validation_loss = if val_set.is_empty() { None } else { Some(mean_loss(&params, &val_set)?) };
        let improved = match (validation_loss, best_val) {
            (Some(v), Some(b)) => v < b,
            (Some(_), None) => true,
            (None, _) => true,
        };
        if improved {
            best = params.clone();
            best_epoch = epoch;
            if validation_loss.is_some() {
                best_val = validation_loss;
            }
        }
        let report = EpochReport { epoch, train_loss, train_eval_loss, validation_loss };
        on_epoch(&report);
        history.push(report);
    }

    Ok(TrainReport {
        params: best,
        best_epoch,
        best_validation_loss: best_val,
        history,
        train_ids: train_idx.iter().map(|&i| examples[i].id.clone()).collect(),
        validation_ids: val_idx.iter().map(|&i| examples[i].id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::templates;
    use crate::tasks::build_photo_editing_sequence;

    fn toy_examples() -> Vec<TrainingExample> {
        let seq = build_photo_editing_sequence(1, 0).truncated(6);
        (0..3)
            .map(|i| TrainingExample {
                id: format!("l{i}"),
                layout: templates::photo_good(i),
                observed: seq.tasks.iter().enumerate().map(|(k, t)| 400.0 * t.steps.len() as f64 + 30.0 * k as f64 + 10.0 * i as f64).collect(),
                sequence: seq.clone(),
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let ex = toy_examples();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 2, seed: 1, ..Default::default() };
        let report = train_with::<f64>(&ex, &cfg, None, |_| {}).unwrap();
        let mut init = ModelParams::<f64>::init(1);
        init.output = report.params.output;
        assert_eq!(report.params, init);
    }

    #[test]
    fn training_is_deterministic() {
        let ex = toy_examples();
        let cfg = TrainConfig { epochs: 2, seed: 3, ..Default::default() };
        let a = train_with::<f64>(&ex, &cfg, None, |_| {}).unwrap();
        let b = train_with::<f64>(&ex, &cfg, None, |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.validation_ids.len(), 1);
        assert_eq!(a.train_ids.len(), 2);
    }

    #[test]
    fn training_reduces_loss() {
        let ex = toy_examples();
        let cfg = TrainConfig { epochs: 40, seed: 2, learning_rate: 3e-3, validation_fraction: 0.0, ..Default::default() };
        let report = train_with::<f64>(&ex, &cfg, None, |_| {}).unwrap();
        let first = report.history.first().unwrap().train_loss;
        let last = report.history.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
        assert!(report.history.iter().all(|e| e.train_eval_loss.is_none()));
    }

    #[test]
    fn tracked_train_loss_is_dropout_free() {
        let ex = toy_examples();
        let cfg = TrainConfig { epochs: 2, seed: 2, validation_fraction: 0.0, track_train_loss: true, ..Default::default() };
        let report = train_with::<f64>(&ex, &cfg, None, |_| {}).unwrap();
        let prepared: Vec<Prepared> = ex.iter().map(|e| prepare(e, EmbeddingTable::standard()).unwrap()).collect();
        let expected = mean_loss(&report.params, &prepared).unwrap();
        let last = report.history.last().unwrap().train_eval_loss.unwrap();
        assert!((last - expected).abs() <= 1e-12 * expected, "{last} vs {expected}");
    }

    #[test]
    fn constant_observations_rejected() {
        let mut ex = toy_examples();
        ex[0].observed = vec![500.0; ex[0].observed.len()];
        assert!(matches!(train::<f64>(&ex, &TrainConfig { epochs: 1, ..Default::default() }), Err(Error::ZeroVariance)));
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(train::<f64>(&[], &TrainConfig::default()), Err(Error::EmptyDataset)));
    }
}
