//! Forward pass of the network on a tape.

use serde::{Deserialize, Serialize};

use super::{observed_spread, DropoutRates, ModelParams, OutputScale};
use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, FeatureRow, SequencePlan};
use crate::layout::Layout;
use crate::scalar::Real;
use crate::seed;
use crate::tasks::TaskSequence;

/// Model weights placed on a tape, either as variables (training) or constants.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    encoder: Vec<(NodeId, NodeId)>,
    predictor: Vec<(NodeId, NodeId)>,
    feed_forward: (NodeId, NodeId),
    head: (NodeId, NodeId),
    encoder_cells: usize,
    predictor_cells: usize,
    pub output: OutputScale,
    pub dropout: DropoutRates,
}

/// Node handles for one sequence evaluation.
#[derive(Debug, Clone)]
pub struct SequenceOutputs {
    /// Scalar prediction per step, in milliseconds.
    pub steps: Vec<NodeId>,
    /// Per-task sums as one vector.
    pub per_task: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub per_step: Vec<f64>,
    pub per_task: Vec<f64>,
    pub total: f64,
}

impl ParamNodes {
    pub fn new<T: Real>(tape: &mut Tape<T>, params: &ModelParams<T>, trainable: bool) -> Self {
        let mut leaf = |v: &Vec<T>| if trainable { tape.var(v.clone()) } else { tape.constant(v.clone()) };
        let encoder = params.encoder.iter().map(|l| (leaf(&l.w), leaf(&l.b))).collect();
        let predictor = params.predictor.iter().map(|l| (leaf(&l.w), leaf(&l.b))).collect();
        let feed_forward = (leaf(&params.feed_forward.w), leaf(&params.feed_forward.b));
        let head = (leaf(&params.head.w), leaf(&params.head.b));
        Self {
            encoder,
            predictor,
            feed_forward,
            head,
            encoder_cells: params.encoder[0].hidden,
            predictor_cells: params.predictor[0].hidden,
            output: params.output,
            dropout: params.dropout,
        }
    }

    /// Wraps weight nodes already on `tape`, given in the order of
    /// [`ModelParams::tensors`]. `params` supplies shapes and output scaling.
    pub fn from_tensor_ids<T: Real>(tape: &Tape<T>, params: &ModelParams<T>, ids: &[NodeId]) -> Result<Self> {
        let tensors = params.tensors();
        if ids.len() != tensors.len() {
            return Err(Error::ShapeMismatch { op: "from_tensor_ids", detail: format!("{} nodes for {} tensors", ids.len(), tensors.len()) });
        }
        for (k, (&id, t)) in ids.iter().zip(&tensors).enumerate() {
            if tape.value(id).len() != t.len() {
                return Err(Error::ShapeMismatch {
                    op: "from_tensor_ids",
                    detail: format!("tensor {k}: {} values, expected {}", tape.value(id).len(), t.len()),
                });
            }
        }
        let n_enc = params.encoder.len();
        let n_pred = params.predictor.len();
        let pair = |i: usize| (ids[2 * i], ids[2 * i + 1]);
        let base = n_enc + n_pred;
        Ok(Self {
            encoder: (0..n_enc).map(pair).collect(),
            predictor: (n_enc..base).map(pair).collect(),
            feed_forward: pair(base),
            head: pair(base + 1),
            encoder_cells: params.encoder[0].hidden,
            predictor_cells: params.predictor[0].hidden,
            output: params.output,
            dropout: params.dropout,
        })
    }

    /// Nodes in the order of [`ModelParams::tensors`].
    pub fn tensor_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for (w, b) in self.encoder.iter().chain(&self.predictor) {
            out.push(*w);
            out.push(*b);
        }
        out.extend([self.feed_forward.0, self.feed_forward.1, self.head.0, self.head.1]);
        out
    }

    /// Runs the encoder stack over rows in order; returns the top layer's
    /// final hidden state.
    pub fn encode<T: Real>(&self, tape: &mut Tape<T>, rows: &[NodeId]) -> Result<NodeId> {
        if rows.is_empty() {
            return Err(crate::error::Error::EmptyLayout);
        }
        let h = self.encoder_cells;
        let mut states: Vec<NodeId> = self.encoder.iter().map(|_| tape.constant(vec![T::zero(); 2 * h])).collect();
        for &row in rows {
            let mut x = row;
            for (l, (w, b)) in self.encoder.iter().enumerate() {
                states[l] = tape.lstm_cell(x, states[l], *w, *b)?;
                x = tape.slice(states[l], 0, h)?;
            }
        }
        tape.slice(*states.last().expect("encoder has layers"), 0, h)
    }

    /// Runs the predictor over every step of `plan`, with `embeddings[k]`
    /// the encoder output for `plan.encoders[k]`. Recurrent state carries
    /// across the whole sequence.
    pub fn predict<T: Real>(
        &self,
        tape: &mut Tape<T>,
        plan: &SequencePlan,
        embeddings: &[NodeId],
        train: bool,
        dropout_seed: u64,
    ) -> Result<SequenceOutputs> {
        let h = self.predictor_cells;
        let mut states: Vec<NodeId> = self.predictor.iter().map(|_| tape.constant(vec![T::zero(); 2 * h])).collect();
        let mut steps = Vec::with_capacity(plan.steps.len());
        let scale = T::lit(self.output.scale);
        let offset = T::lit(self.output.offset);
        for (s, step) in plan.steps.iter().enumerate() {
            let s = s as u64;
            let emb = tape.dropout(embeddings[step.encoder], self.dropout.embedding, train, seed::derive(dropout_seed, "embedding-dropout", s));
            let tail = tape.constant(step.tail.iter().map(|&v| T::lit(v)).collect());
            let mut x = tape.concat(&[emb, tail]);
            for (l, (w, b)) in self.predictor.iter().enumerate() {
                states[l] = tape.lstm_cell(x, states[l], *w, *b)?;
                x = tape.slice(states[l], 0, h)?;
            }
            let ff = tape.affine(self.feed_forward.0, x, self.feed_forward.1)?;
            let ff = tape.relu(ff);
            let ff = tape.dropout(ff, self.dropout.feed_forward, train, seed::derive(dropout_seed, "ff-dropout", s));
            let y = tape.affine(self.head.0, ff, self.head.1)?;
            let y = tape.scale(y, scale);
            steps.push(tape.add_scalar(y, offset));
        }
        let mut by_task: Vec<Vec<NodeId>> = vec![Vec::new(); plan.n_tasks];
        for (step, &node) in plan.steps.iter().zip(&steps) {
            by_task[step.task].push(node);
        }
        let tasks: Vec<NodeId> = by_task
            .iter()
            .map(|nodes| {
                let v = tape.concat(nodes);
                tape.sum(v)
            })
            .collect();
        let per_task = tape.concat(&tasks);
        Ok(SequenceOutputs { steps, per_task })
    }
}

/// Encoder rows for every distinct encoder input of `plan`.
pub fn prepare_rows(plan: &SequencePlan, layout: &Layout, table: &EmbeddingTable) -> Result<Vec<Vec<FeatureRow>>> {
    Ok(plan.encoder_rows(layout, table)?.into_iter().map(|rows| rows.into_iter().map(|r| r.row).collect()).collect())
}

/// Places rows on the tape as constants, one list per encoder input.
pub(crate) fn place_rows<T: Real>(tape: &mut Tape<T>, rows: &[Vec<FeatureRow>]) -> Vec<Vec<NodeId>> {
    rows.iter().map(|rs| rs.iter().map(|r| tape.constant(r.iter().map(|&v| T::lit(v)).collect())).collect()).collect()
}

/// Places rows on the tape as constants and encodes each distinct input.
pub(crate) fn encode_constant_rows<T: Real>(tape: &mut Tape<T>, nodes: &ParamNodes, rows: &[Vec<FeatureRow>]) -> Result<Vec<NodeId>> {
    let placed = place_rows(tape, rows);
    placed.iter().map(|ids| nodes.encode(tape, ids)).collect()
}

/// Sequence loss `Σ(y−t)² / Σ(t−t̄)²` built on `tape` from encoder rows that
/// are already nodes (`rows[k]` feeds `plan.encoders[k]`). Training uses
/// this with constant rows; making rows variables exposes input gradients.
#[allow(clippy::too_many_arguments)]
pub fn sequence_loss_node<T: Real>(
    tape: &mut Tape<T>,
    nodes: &ParamNodes,
    plan: &SequencePlan,
    rows: &[Vec<NodeId>],
    observed: &[f64],
    train: bool,
    dropout_seed: u64,
) -> Result<NodeId> {
    if observed.len() != plan.n_tasks {
        return Err(Error::LengthMismatch(observed.len(), plan.n_tasks));
    }
    let inv_spread = T::lit(1.0 / observed_spread(observed)?);
    let embeddings = rows.iter().map(|ids| nodes.encode(tape, ids)).collect::<Result<Vec<_>>>()?;
    let out = nodes.predict(tape, plan, &embeddings, train, dropout_seed)?;
    let obs = tape.constant(observed.iter().map(|&v| T::lit(v)).collect());
    let diff = tape.sub(out.per_task, obs)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.scale(total, inv_spread))
}

/// Inference-mode prediction for a layout and task sequence.
pub fn predict_sequence<T: Real>(layout: &Layout, sequence: &TaskSequence, params: &ModelParams<T>) -> Result<PredictionResult> {
    let plan = SequencePlan::new(sequence);
    let rows = prepare_rows(&plan, layout, EmbeddingTable::standard())?;
    let mut tape = Tape::new();
    let nodes = ParamNodes::new(&mut tape, params, false);
    let embeddings = encode_constant_rows(&mut tape, &nodes, &rows)?;
    let out = nodes.predict(&mut tape, &plan, &embeddings, false, 0)?;
    let per_step: Vec<f64> = out.steps.iter().map(|&s| tape.scalar(s).as_f64()).collect();
    let per_task: Vec<f64> = tape.value(out.per_task).iter().map(|v| v.as_f64()).collect();
    let total = per_task.iter().sum();
    Ok(PredictionResult { per_step, per_task, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::templates;
    use crate::tasks::build_photo_editing_sequence;

    #[test]
    fn per_task_is_sum_of_steps() {
        let layout = templates::photo_good(0);
        let seq = build_photo_editing_sequence(1, 2);
        let params = ModelParams::<f64>::init(3);
        let pred = predict_sequence(&layout, &seq, &params).unwrap();
        let plan = SequencePlan::new(&seq);
        let mut sums = vec![0.0; plan.n_tasks];
        for (s, v) in plan.steps.iter().zip(&pred.per_step) {
            sums[s.task] += v;
        }
        for (a, b) in sums.iter().zip(&pred.per_task) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!((pred.total - pred.per_task.iter().sum::<f64>()).abs() <= 1e-9);
    }

    #[test]
    fn inference_is_reproducible() {
        let layout = templates::photo_good(1);
        let seq = build_photo_editing_sequence(1, 2);
        let params = ModelParams::<f64>::init(3);
        assert_eq!(predict_sequence(&layout, &seq, &params).unwrap(), predict_sequence(&layout, &seq, &params).unwrap());
    }

    #[test]
    fn embedding_has_encoder_width() {
        let layout = templates::photo_good(0);
        let seq = build_photo_editing_sequence(1, 2);
        let plan = SequencePlan::new(&seq);
        let rows = prepare_rows(&plan, &layout, EmbeddingTable::standard()).unwrap();
        let params = ModelParams::<f64>::init(3);
        let mut tape = Tape::new();
        let nodes = ParamNodes::new(&mut tape, &params, false);
        let e = encode_constant_rows(&mut tape, &nodes, &rows[..1]).unwrap();
        assert_eq!(tape.value(e[0]).len(), 23);
    }

    #[test]
    fn two_step_task_sums_its_steps() {
        let layout = templates::photo_good(0);
        let mut seq = build_photo_editing_sequence(1, 0);
        seq.tasks.retain(|t| t.steps.len() == 2);
        seq.tasks.truncate(1);
        let pred = predict_sequence(&layout, &seq, &ModelParams::<f64>::init(0)).unwrap();
        assert_eq!(pred.per_step.len(), 2);
        assert!((pred.per_task[0] - pred.per_step[0] - pred.per_step[1]).abs() <= 1e-12);
    }

    #[test]
    fn runs_in_f32() {
        let layout = templates::photo_good(0);
        let seq = build_photo_editing_sequence(1, 2);
        let p64 = ModelParams::<f64>::init(5);
        let p32: ModelParams<f32> = p64.cast();
        let a = predict_sequence(&layout, &seq, &p64).unwrap();
        let b = predict_sequence(&layout, &seq, &p32).unwrap();
        assert!((a.total - b.total).abs() <= 1e-3 * a.total.abs().max(1.0));
    }
}
