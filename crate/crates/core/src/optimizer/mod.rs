//! Gradient descent on layout geometry through a trained model.
//!
//! Free elements and group containers are the parameters, each a
//! `[cx, cy, w, h]` vector. Members follow their container through reflow and
//! overlays follow their host, so their gradients are chained back onto the
//! item that owns them.

mod penalty;
mod trace;

use std::collections::HashMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

pub use penalty::{
    constraint_value, penalty_boundary, penalty_constraints, penalty_nodes, penalty_overlap, AlignEdge, Axis, Constraint, ConstraintSpec,
    PenaltyConfig, PenaltyNodes,
};
pub use trace::{best_feasible_step, write_trace_dir, OptimizationTrace, PenaltyValues, StepRecord, StepSummary, SwapEvent, TraceSummary};

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::features::{col, EmbeddingTable, SequencePlan};
use crate::geometry::Rect;
use crate::layout::{choose_grid, export_css, grid_rects, reflow_group, validate_layout, ItemRef, Layout, MIN_EXTENT};
use crate::model::{clip_norm, ModelParams, ParamNodes};
use crate::tasks::{Demographics, TaskSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Per-item gradient norm cap.
    pub grad_clip: f64,
    pub steps: usize,
    /// Demographics written into the sequence before optimizing.
    pub demographics: Demographics,
    /// Kept for provenance; the update loop itself draws no random numbers.
    pub seed: u64,
    /// Exchange overlapping items when their gradients favor it.
    pub swaps: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, grad_clip: 0.5, steps: 500, demographics: Demographics::POPULATION, seed: 0, swaps: true }
    }
}

/// Objective value with its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub predicted_total: f64,
    pub per_task: Vec<f64>,
    pub penalties: PenaltyValues,
    pub objective: f64,
}

/// Gradients of the objective with respect to every top-level item.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutGradients {
    pub items: Vec<ItemRef>,
    /// Full gradient per item, before clipping.
    pub raw: Vec<[f64; 4]>,
    /// Same without the overlap term; used by the swap test.
    pub without_overlap: Vec<[f64; 4]>,
    /// `raw` clipped per item to the configured norm.
    pub clipped: Vec<[f64; 4]>,
    pub value: ObjectiveValue,
}

impl LayoutGradients {
    pub fn by_id<'a>(&self, layout: &'a Layout) -> HashMap<&'a str, [f64; 4]> {
        self.items.iter().zip(&self.clipped).map(|(&i, g)| (layout.item_id(i), *g)).collect()
    }
}

/// Combines the weighted parts into `F`.
fn total_objective(predicted: f64, p: &PenaltyValues, cfg: &PenaltyConfig) -> f64 {
    predicted + cfg.overlap_constant * p.overlap + cfg.boundary_constant * p.boundary + p.constraints
}

/// Inference-mode objective: predicted sequence total plus weighted penalties.
pub fn objective(layout: &Layout, sequence: &TaskSequence, params: &ModelParams<f64>, penalties: &PenaltyConfig) -> Result<ObjectiveValue> {
    let pred = crate::model::predict_sequence(layout, sequence, params)?;
    let p =
        PenaltyValues { overlap: penalty_overlap(layout), boundary: penalty_boundary(layout), constraints: penalty_constraints(layout, penalties)? };
    Ok(ObjectiveValue { predicted_total: pred.total, objective: total_objective(pred.total, &p, penalties), per_task: pred.per_task, penalties: p })
}

type Jacobian = [[f64; 4]; 4];

/// `J[r][c]` = d(member rect r-th component) / d(container rect c-th component),
/// by central differences with the grid held fixed.
fn member_jacobians(layout: &Layout, container: usize) -> Result<Vec<Jacobian>> {
    let c = &layout.containers[container];
    let members = layout.members_of(c)?;
    let n = members.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let aspect = members[0].aspect_ratio;
    let grid = choose_grid(&c.rect, n, aspect, &layout.screen);
    let mut jac = vec![[[0.0; 4]; 4]; n];
    let h = 1e-6;
    for d in 0..4 {
        let mut up = c.rect.to_array();
        up[d] += h;
        let mut down = c.rect.to_array();
        down[d] -= h;
        let ru = grid_rects(&Rect::from_array(up), n, aspect, &layout.screen, grid);
        let rd = grid_rects(&Rect::from_array(down), n, aspect, &layout.screen, grid);
        for k in 0..n {
            let (a, b) = (ru[k].to_array(), rd[k].to_array());
            for r in 0..4 {
                jac[k][r][d] = (a[r] - b[r]) / (2.0 * h);
            }
        }
    }
    Ok(jac)
}

/// Where gradients on each element's rect end up.
struct Routing {
    items: Vec<ItemRef>,
    item_index: HashMap<ItemRef, usize>,
    /// Per member element: container item slot and its Jacobian.
    members: HashMap<usize, (usize, Jacobian)>,
    /// Per container index: its item slot.
    containers: HashMap<String, usize>,
}

impl Routing {
    fn new(layout: &Layout) -> Result<Self> {
        let items = layout.top_level();
        let item_index: HashMap<ItemRef, usize> = items.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut members = HashMap::new();
        let mut containers = HashMap::new();
        for ci in 0..layout.containers.len() {
            let slot = item_index[&ItemRef::Container(ci)];
            containers.insert(layout.containers[ci].id.clone(), slot);
            let jac = member_jacobians(layout, ci)?;
            for (id, j) in layout.containers[ci].member_ids.iter().zip(jac) {
                let e = layout.element_index(id).ok_or_else(|| Error::UnknownElement(id.clone()))?;
                members.insert(e, (slot, j));
            }
        }
        Ok(Self { items, item_index, members, containers })
    }

    /// Adds `g`, the gradient on element `e`'s rect in `scene`, to its owner.
    fn route(&self, scene: &Layout, e: usize, g: [f64; 4], out: &mut [[f64; 4]]) {
        let el = &scene.elements[e];
        if let Some(host_id) = &el.anchor_id {
            // overlay rect: cx = host.left + rx·host.w, extent fixed
            let Some(host) = scene.element_index(host_id) else { return };
            let hr = scene.elements[host].rect;
            let rx = (el.rect.cx - hr.left()) / hr.w;
            let ry = (el.rect.cy - hr.top()) / hr.h;
            let hg = [g[0], g[1], g[0] * (rx - 0.5), g[1] * (ry - 0.5)];
            self.route(scene, host, hg, out);
        } else if let Some((slot, j)) = self.members.get(&e) {
            for (c, o) in out[*slot].iter_mut().enumerate() {
                *o += (0..4).map(|r| j[r][c] * g[r]).sum::<f64>();
            }
        } else if let Some(&slot) = self.item_index.get(&ItemRef::Element(e)) {
            for (o, v) in out[slot].iter_mut().zip(g) {
                *o += v;
            }
        }
    }
}

fn add4(a: &mut [f64; 4], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

type ItemGrads = Vec<[f64; 4]>;

/// Gradient of the penalty terms per item: `(overlap, boundary + constraints)`.
fn penalty_gradients(layout: &Layout, items: &[ItemRef], cfg: &PenaltyConfig) -> Result<(PenaltyValues, ItemGrads, ItemGrads)> {
    let mut tape = Tape::new();
    let vars: Vec<NodeId> = items.iter().map(|&i| tape.var(layout.item_rect(i).to_array().to_vec())).collect();
    let p = penalty_nodes(&mut tape, layout, items, &vars, cfg)?;
    let values = PenaltyValues { overlap: tape.scalar(p.overlap), boundary: tape.scalar(p.boundary), constraints: tape.scalar(p.constraints) };
    let ov = tape.scale(p.overlap, cfg.overlap_constant);
    let bd = tape.scale(p.boundary, cfg.boundary_constant);
    let rest = tape.add(bd, p.constraints)?;
    let g_ov = tape.backward(ov)?;
    let g_rest = tape.backward(rest)?;
    let pick =
        |g: &crate::autodiff::Gradients<f64>| -> Vec<[f64; 4]> { vars.iter().map(|&v| g.get_or_zeros(v, 4).try_into().expect("4-vector")).collect() };
    Ok((values, pick(&g_ov), pick(&g_rest)))
}

/// Gradients of `F` with respect to all top-level items.
///
/// The model term is averaged over the sequence's step occurrences before
/// the penalty gradients are added; each item's vector is then clipped to
/// `grad_clip`.
pub fn layout_gradients(
    layout: &Layout,
    sequence: &TaskSequence,
    params: &ModelParams<f64>,
    penalties: &PenaltyConfig,
    grad_clip: f64,
) -> Result<LayoutGradients> {
    let plan = SequencePlan::new(sequence);
    layout_gradients_planned(layout, &plan, params, penalties, grad_clip)
}

fn layout_gradients_planned(
    layout: &Layout,
    plan: &SequencePlan,
    params: &ModelParams<f64>,
    penalties: &PenaltyConfig,
    grad_clip: f64,
) -> Result<LayoutGradients> {
    let routing = Routing::new(layout)?;
    let items = routing.items.clone();
    let scenes = plan.staged_layouts(layout)?;
    let encoded = plan.encoder_rows(layout, EmbeddingTable::standard())?;

    let mut tape = Tape::new();
    let nodes = ParamNodes::new(&mut tape, params, false);
    let mut row_vars = Vec::with_capacity(encoded.len());
    let mut embeddings = Vec::with_capacity(encoded.len());
    for rows in &encoded {
        let ids: Vec<NodeId> = rows.iter().map(|r| tape.var(r.row.to_vec())).collect();
        embeddings.push(nodes.encode(&mut tape, &ids)?);
        row_vars.push(ids);
    }
    let out = nodes.predict(&mut tape, plan, &embeddings, false, 0)?;
    let per_task: Vec<f64> = tape.value(out.per_task).to_vec();
    let predicted_total: f64 = per_task.iter().sum();
    let root = tape.sum(out.per_task);
    let grads = tape.backward(root)?;

    let mut model = vec![[0.0; 4]; items.len()];
    for (k, rows) in encoded.iter().enumerate() {
        let scene = &scenes[plan.encoders[k].scene];
        for (row, &var) in rows.iter().zip(&row_vars[k]) {
            let Some(g) = grads.get(var) else { continue };
            let rect_g: [f64; 4] = g[col::RECT..col::RECT + 4].try_into().expect("4-vector");
            routing.route(scene, row.element, rect_g, &mut model);
            if let Some(cid) = &scene.elements[row.element].container_id {
                if let Some(&slot) = routing.containers.get(cid) {
                    add4(&mut model[slot], &g[col::CONTAINER..col::CONTAINER + 4]);
                }
            }
        }
    }
    let n_steps = plan.steps.len().max(1) as f64;
    for g in &mut model {
        g.iter_mut().for_each(|v| *v /= n_steps);
    }

    let (pvals, g_overlap, g_rest) = penalty_gradients(layout, &items, penalties)?;
    let mut without_overlap = model.clone();
    for (w, r) in without_overlap.iter_mut().zip(&g_rest) {
        add4(w, r);
    }
    let mut raw = without_overlap.clone();
    for (w, o) in raw.iter_mut().zip(&g_overlap) {
        add4(w, o);
    }
    let clipped = raw
        .iter()
        .map(|g| {
            let mut c = *g;
            clip_norm(&mut c, grad_clip);
            c
        })
        .collect();
    let value = ObjectiveValue { predicted_total, objective: total_objective(predicted_total, &pvals, penalties), per_task, penalties: pvals };
    Ok(LayoutGradients { items, raw, without_overlap, clipped, value })
}

/// First-order test for exchanging the centers of A and B:
/// `(g_A − g_B)·(p_B − p_A) < 0`.
pub fn swap_is_beneficial(g_a: [f64; 2], p_a: [f64; 2], g_b: [f64; 2], p_b: [f64; 2]) -> bool {
    let dot = (g_a[0] - g_b[0]) * (p_b[0] - p_a[0]) + (g_a[1] - g_b[1]) * (p_b[1] - p_a[1]);
    dot < 0.0
}

/// Swaps centers of overlapping top-level pairs whose position gradients
/// predict a lower objective after the exchange. Each item swaps at most once,
/// and a swap that would push either item further off-screen is skipped.
/// `grads` are per item in `layout.top_level()` order.
pub fn swap_if_beneficial(layout: &Layout, grads: &[[f64; 4]]) -> (Layout, Vec<SwapEvent>) {
    let items = layout.top_level();
    let mut out = layout.clone();
    let mut used = vec![false; items.len()];
    let mut events = Vec::new();
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            if used[a] || used[b] {
                continue;
            }
            let (ra, rb) = (layout.item_rect(items[a]), layout.item_rect(items[b]));
            if crate::geometry::overlap_area(&ra, &rb) <= 0.0 {
                continue;
            }
            let (ga, gb) = (&grads[a], &grads[b]);
            let na = Rect::new(rb.cx, rb.cy, ra.w, ra.h);
            let nb = Rect::new(ra.cx, ra.cy, rb.w, rb.h);
            // a first-order estimate cannot see the jump in boundary excess
            let pushes_out = na.boundary_excess() + nb.boundary_excess() > ra.boundary_excess() + rb.boundary_excess();
            if !pushes_out && swap_is_beneficial([ga[0], ga[1]], [ra.cx, ra.cy], [gb[0], gb[1]], [rb.cx, rb.cy]) {
                out.set_item_rect(items[a], na);
                out.set_item_rect(items[b], nb);
                used[a] = true;
                used[b] = true;
                events.push(SwapEvent { a: layout.item_id(items[a]).to_string(), b: layout.item_id(items[b]).to_string() });
            }
        }
    }
    (out, events)
}

/// Reflows each group; a group that cannot be laid out keeps `fallback`'s
/// container rect.
fn reflow_or_revert(layout: &mut Layout, fallback: &Layout) -> Result<()> {
    for ci in 0..layout.containers.len() {
        let rects = {
            let c = &layout.containers[ci];
            reflow_group(c, &layout.members_of(c)?, &layout.screen)
        };
        let rects = match rects {
            Ok(r) => r,
            Err(_) => {
                layout.containers[ci].rect = fallback.containers[ci].rect;
                let c = &layout.containers[ci];
                reflow_group(c, &layout.members_of(c)?, &layout.screen)?
            }
        };
        let ids = layout.containers[ci].member_ids.clone();
        for (id, r) in ids.iter().zip(rects) {
            layout.element_mut(id).expect("member exists").rect = r;
        }
    }
    Ok(())
}

/// Rescales a fixed-aspect item to its pixel aspect ratio, keeping its area.
fn project_aspect(rect: Rect, aspect: f64, layout: &Layout) -> Rect {
    let (sw, sh) = (layout.screen.width_px as f64, layout.screen.height_px as f64);
    let area = rect.w * rect.h;
    if area.is_nan() || area <= 0.0 {
        return rect;
    }
    let w = (area * aspect * sh / sw).sqrt();
    Rect::new(rect.cx, rect.cy, w, area / w)
}

/// One update: `x ← x − lr·g` per item, then aspect projection, extent
/// clamp, reflow, swaps and overlay restoration.
fn apply_step(layout: &Layout, grads: &LayoutGradients, learning_rate: f64, swaps: bool) -> Result<(Layout, Vec<SwapEvent>)> {
    let anchors = layout.overlay_anchors();
    let mut next = layout.clone();
    for (&item, g) in grads.items.iter().zip(&grads.clipped) {
        if g.iter().all(|&v| v == 0.0) || learning_rate == 0.0 {
            continue;
        }
        let mut a = layout.item_rect(item).to_array();
        for (x, d) in a.iter_mut().zip(g) {
            *x -= learning_rate * d;
        }
        let mut r = Rect::from_array(a);
        if let Some(aspect) = layout.item_aspect(item) {
            r = project_aspect(r, aspect, layout);
        }
        r.w = r.w.max(MIN_EXTENT);
        r.h = r.h.max(MIN_EXTENT);
        next.set_item_rect(item, r);
    }
    reflow_or_revert(&mut next, layout)?;
    let (mut next, swaps) = if swaps { swap_if_beneficial(&next, &grads.without_overlap) } else { (next, Vec::new()) };
    if !swaps.is_empty() {
        reflow_or_revert(&mut next, layout)?;
    }
    next.restore_overlays(&anchors)?;
    Ok((next, swaps))
}

fn record(step: usize, layout: &Layout, value: &ObjectiveValue, swaps: Vec<SwapEvent>) -> StepRecord {
    StepRecord {
        step,
        layout: layout.clone(),
        predicted_total: value.predicted_total,
        per_task: value.per_task.clone(),
        penalties: value.penalties,
        objective: value.objective,
        swaps,
        css: export_css(layout),
    }
}

pub fn optimize(
    layout: &Layout,
    sequence: &TaskSequence,
    params: &ModelParams<f64>,
    config: &OptimizerConfig,
    penalties: &PenaltyConfig,
) -> Result<OptimizationTrace> {
    optimize_with(layout, sequence, params, config, penalties, |_| ControlFlow::Continue(()))
}

/// Runs `config.steps` updates and records `steps + 1` snapshots.
///
/// `observer` sees each record as it is produced; returning `Break` stops
/// the run early with the trace so far.
pub fn optimize_with(
    layout: &Layout,
    sequence: &TaskSequence,
    params: &ModelParams<f64>,
    config: &OptimizerConfig,
    penalties: &PenaltyConfig,
    mut observer: impl FnMut(&StepRecord) -> ControlFlow<()>,
) -> Result<OptimizationTrace> {
    params.validate()?;
    penalties.validate(layout)?;
    if !validate_layout(layout).is_empty() {
        return Err(Error::InfeasibleLayout(validate_layout(layout).summary()));
    }
    let sequence = sequence.clone().with_demographics(config.demographics);
    sequence.validate_against(layout)?;
    let plan = SequencePlan::new(&sequence);

    let mut trace = OptimizationTrace::default();
    let mut current = layout.clone();
    let mut swaps = Vec::new();
    for step in 0..=config.steps {
        let grads = layout_gradients_planned(&current, &plan, params, penalties, config.grad_clip)?;
        let rec = record(step, &current, &grads.value, std::mem::take(&mut swaps));
        let finite = grads.value.objective.is_finite() && grads.raw.iter().flatten().all(|v| v.is_finite());
        if !finite {
            trace.steps.push(rec);
            trace.mark_best();
            return Err(Error::NonFiniteObjective { step, trace: Box::new(trace) });
        }
        let flow = observer(&rec);
        trace.steps.push(rec);
        if step == config.steps || flow.is_break() {
            break;
        }
        let (next, s) = apply_step(&current, &grads, config.learning_rate, config.swaps)?;
        current = next;
        swaps = s;
    }
    trace.mark_best();
    Ok(trace)
}
