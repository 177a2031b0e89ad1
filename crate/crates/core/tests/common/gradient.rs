//! Full-model gradient check: analytic gradients of the sequence loss with
//! respect to every weight and every encoder input row, against central
//! differences at eps 1e-5.

#![allow(dead_code)]

use std::time::Instant;

use super::double_double::Dd;
use layoutforge_core::autodiff::{relative_error, NodeId, Tape};
use layoutforge_core::features::{EmbeddingTable, SequencePlan};
use layoutforge_core::geometry::Rect;
use layoutforge_core::layout::{ElementKind, Layout, Orientation, ScreenSpec, UiElement};
use layoutforge_core::model::{prepare_rows, sequence_loss_node, ModelParams, OutputScale, ParamNodes};
use layoutforge_core::tasks::{Demographics, TaskSequence, TaskSpec};
use layoutforge_core::Real;

fn icon(id: &str, r: Rect) -> UiElement {
    UiElement {
        id: id.into(),
        kind: ElementKind::Icon,
        label: id.into(),
        rect: r,
        orientation: Orientation::None,
        container_id: None,
        aspect_ratio: None,
        label_salience: id.len() as u32,
        anchor_id: None,
    }
}

struct Instance {
    plan: SequencePlan,
    params: ModelParams<f64>,
    observed: Vec<f64>,
    row_shape: Vec<usize>,
    inputs: Vec<Vec<f64>>,
}

fn instance() -> Instance {
    let mut layout = Layout::new(ScreenSpec::default());
    layout.elements = vec![
        icon("undo", Rect::new(0.2, 0.1, 0.15, 0.08)),
        icon("upload", Rect::new(0.8, 0.1, 0.15, 0.08)),
        icon("save", Rect::new(0.3, 0.85, 0.2, 0.1)),
        icon("cancel", Rect::new(0.7, 0.85, 0.2, 0.1)),
    ];
    let seq = TaskSequence::from_specs(
        ["undo", "save", "upload"].iter().map(|t| (TaskSpec::TapAction { target: t.to_string() }, vec![])).collect(),
        Demographics::POPULATION,
    );
    let plan = SequencePlan::new(&seq);
    let rows = prepare_rows(&plan, &layout, EmbeddingTable::standard()).unwrap();
    let mut params = ModelParams::<f64>::init(11);
    params.output = OutputScale { offset: 700.0, scale: 250.0 };
    let mut inputs: Vec<Vec<f64>> = params.tensors().into_iter().cloned().collect();
    inputs.extend(rows.iter().flatten().map(|r| r.to_vec()));
    Instance { plan, params, observed: vec![620.0, 910.0, 760.0], row_shape: rows.iter().map(Vec::len).collect(), inputs }
}

/// Sequence loss with every weight tensor and every encoder input row as a
/// tape input, so both kinds of gradient come out of one backward pass.
fn loss<T: Real>(tape: &mut Tape<T>, ids: &[NodeId], inst: &Instance, params: &ModelParams<T>) -> NodeId {
    let n = params.tensors().len();
    let nodes = ParamNodes::from_tensor_ids(tape, params, &ids[..n]).unwrap();
    let mut rest = &ids[n..];
    let mut rows = Vec::new();
    for &k in &inst.row_shape {
        rows.push(rest[..k].to_vec());
        rest = &rest[k..];
    }
    sequence_loss_node(tape, &nodes, &inst.plan, &rows, &inst.observed, false, 0).unwrap()
}

/// Outcome of a full gradient check.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub coordinates: usize,
    /// Largest relative error over all coordinates.
    pub worst: f64,
    /// Coordinates whose f64 difference quotient was too noisy to decide and
    /// were settled by the double-double evaluation instead.
    pub refined: usize,
    pub elapsed: std::time::Duration,
}

/// Every coordinate is first compared against an f64 central difference. Where
/// that disagrees by more than `refine_above` the quotient is recomputed in
/// double-double, which removes the rounding noise that swamps partial
/// derivatives many orders below the loss, and the refined value is final.
pub fn check_model_gradients(refine_above: f64) -> GradientCheck {
    let inst = instance();
    let start = Instant::now();
    let eps = 1e-5;

    let mut tape = Tape::<f64>::new();
    let ids: Vec<NodeId> = inst.inputs.iter().map(|v| tape.var(v.clone())).collect();
    let root = loss(&mut tape, &ids, &inst, &inst.params);
    let grads = tape.backward(root).unwrap();

    let eval64 = |probe: &[Vec<f64>]| {
        let mut tape = Tape::<f64>::new();
        let ids: Vec<NodeId> = probe.iter().map(|v| tape.constant(v.clone())).collect();
        let root = loss(&mut tape, &ids, &inst, &inst.params);
        tape.scalar(root)
    };
    let params_dd: ModelParams<Dd> = inst.params.cast();
    let eval_dd = |probe: &[Vec<Dd>]| {
        let mut tape = Tape::<Dd>::new();
        let ids: Vec<NodeId> = probe.iter().map(|v| tape.constant(v.clone())).collect();
        let root = loss(&mut tape, &ids, &inst, &params_dd);
        tape.scalar(root)
    };

    let mut probe = inst.inputs.clone();
    let mut probe_dd: Vec<Vec<Dd>> = inst.inputs.iter().map(|v| v.iter().map(|&x| Dd::from_f64(x)).collect()).collect();
    let (mut worst, mut refined, mut coordinates) = (0.0_f64, 0, 0);
    for (i, id) in ids.iter().enumerate() {
        let analytic = grads.get_or_zeros(*id, inst.inputs[i].len());
        for (k, &a) in analytic.iter().enumerate() {
            coordinates += 1;
            let x0 = probe[i][k];
            probe[i][k] = x0 + eps;
            let up = eval64(&probe);
            probe[i][k] = x0 - eps;
            let down = eval64(&probe);
            probe[i][k] = x0;
            let mut err = relative_error(a, (up - down) / (2.0 * eps));
            if err > refine_above {
                refined += 1;
                let (x0, h) = (probe_dd[i][k], Dd::from_f64(eps));
                probe_dd[i][k] = x0 + h;
                let up = eval_dd(&probe_dd);
                probe_dd[i][k] = x0 - h;
                let down = eval_dd(&probe_dd);
                probe_dd[i][k] = x0;
                err = relative_error(a, ((up - down) / (h + h)).as_f64());
            }
            worst = worst.max(err);
        }
    }
    GradientCheck { coordinates, worst, refined, elapsed: start.elapsed() }
}
