//! Penalty terms built from ReLU pieces: zero when a constraint holds,
//! growing continuously with the violation.

use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::geometry::{overlap_area, Rect};
use crate::layout::{ItemRef, Layout};
use crate::scalar::relu;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignEdge {
    Start,
    Center,
    End,
}

/// Soft design constraints on top-level items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Constraint {
    /// `ReLU(min_w − w) + ReLU(min_h − h)`.
    MinSize { id: String, min_w: f64, min_h: f64 },
    /// `(w_a − w_b)² + (h_a − h_b)²`.
    EqualSize { a: String, b: String },
    /// Side by side along `axis`: `ReLU(gap − max_gap)` plus squared
    /// misalignment across the axis plus squared difference of the
    /// bordering sides.
    GroupAdjacency { a: String, b: String, axis: Axis, max_gap: f64 },
    /// Squared difference of the chosen edge between the first item and
    /// each other item. `Horizontal` lines items up in a row (compares y).
    Alignment { ids: Vec<String>, axis: Axis, edge: AlignEdge },
}

impl Constraint {
    pub fn ids(&self) -> Vec<&str> {
        match self {
            Constraint::MinSize { id, .. } => vec![id],
            Constraint::EqualSize { a, b } | Constraint::GroupAdjacency { a, b, .. } => vec![a, b],
            Constraint::Alignment { ids, .. } => ids.iter().map(String::as_str).collect(),
        }
    }
}

fn default_constraint_constant() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(flatten)]
    pub constraint: Constraint,
    #[serde(default = "default_constraint_constant")]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub overlap_constant: f64,
    pub boundary_constant: f64,
    pub constraints: Vec<ConstraintSpec>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { overlap_constant: 10_000.0, boundary_constant: 10_000.0, constraints: Vec::new() }
    }
}

impl PenaltyConfig {
    pub fn validate(&self, layout: &Layout) -> Result<()> {
        if self.overlap_constant < 0.0 || self.boundary_constant < 0.0 || self.constraints.iter().any(|c| c.constant < 0.0) {
            return Err(Error::InvalidTask("penalty constants must be non-negative".into()));
        }
        let top = layout.top_level();
        for c in &self.constraints {
            for id in c.constraint.ids() {
                match layout.item_by_id(id) {
                    Some(item) if top.contains(&item) => {}
                    _ => return Err(Error::UnknownConstraintTarget(id.to_string())),
                }
            }
        }
        Ok(())
    }
}

/// Σ over unordered top-level pairs of the intersection area.
pub fn penalty_overlap(layout: &Layout) -> f64 {
    let rects: Vec<Rect> = layout.top_level().into_iter().map(|i| layout.item_rect(i)).collect();
    let mut total = 0.0;
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            total += overlap_area(&rects[i], &rects[j]);
        }
    }
    total
}

/// Σ over top-level items of how far each edge sticks out of the screen.
pub fn penalty_boundary(layout: &Layout) -> f64 {
    layout.top_level().into_iter().map(|i| layout.item_rect(i).boundary_excess()).sum()
}

fn rect_of(layout: &Layout, id: &str) -> Result<Rect> {
    layout.item_by_id(id).map(|i| layout.item_rect(i)).ok_or_else(|| Error::UnknownConstraintTarget(id.to_string()))
}

fn edge_value(r: &Rect, axis: Axis, edge: AlignEdge) -> f64 {
    match (axis, edge) {
        (Axis::Horizontal, AlignEdge::Start) => r.top(),
        (Axis::Horizontal, AlignEdge::Center) => r.cy,
        (Axis::Horizontal, AlignEdge::End) => r.bottom(),
        (Axis::Vertical, AlignEdge::Start) => r.left(),
        (Axis::Vertical, AlignEdge::Center) => r.cx,
        (Axis::Vertical, AlignEdge::End) => r.right(),
    }
}

/// Unweighted value of one constraint.
pub fn constraint_value(layout: &Layout, c: &Constraint) -> Result<f64> {
    Ok(match c {
        Constraint::MinSize { id, min_w, min_h } => {
            let r = rect_of(layout, id)?;
            relu(min_w - r.w) + relu(min_h - r.h)
        }
        Constraint::EqualSize { a, b } => {
            let (ra, rb) = (rect_of(layout, a)?, rect_of(layout, b)?);
            (ra.w - rb.w).powi(2) + (ra.h - rb.h).powi(2)
        }
        Constraint::GroupAdjacency { a, b, axis, max_gap } => {
            let (ra, rb) = (rect_of(layout, a)?, rect_of(layout, b)?);
            match axis {
                Axis::Horizontal => {
                    let gap = (ra.cx - rb.cx).abs() - 0.5 * (ra.w + rb.w);
                    relu(gap - max_gap) + (ra.cy - rb.cy).powi(2) + (ra.h - rb.h).powi(2)
                }
                Axis::Vertical => {
                    let gap = (ra.cy - rb.cy).abs() - 0.5 * (ra.h + rb.h);
                    relu(gap - max_gap) + (ra.cx - rb.cx).powi(2) + (ra.w - rb.w).powi(2)
                }
            }
        }
        Constraint::Alignment { ids, axis, edge } => {
            let rects = ids.iter().map(|id| rect_of(layout, id)).collect::<Result<Vec<_>>>()?;
            let Some(first) = rects.first() else { return Ok(0.0) };
            let e0 = edge_value(first, *axis, *edge);
            rects[1..].iter().map(|r| (edge_value(r, *axis, *edge) - e0).powi(2)).sum()
        }
    })
}

/// Σ constant · constraint value.
pub fn penalty_constraints(layout: &Layout, config: &PenaltyConfig) -> Result<f64> {
    config.constraints.iter().map(|c| Ok(c.constant * constraint_value(layout, &c.constraint)?)).sum()
}

/// Scalar nodes describing one rect on the tape.
struct Parts {
    cx: NodeId,
    cy: NodeId,
    w: NodeId,
    h: NodeId,
    l: NodeId,
    r: NodeId,
    t: NodeId,
    b: NodeId,
}

fn parts(tape: &mut Tape<f64>, v: NodeId) -> Result<Parts> {
    let cx = tape.slice(v, 0, 1)?;
    let cy = tape.slice(v, 1, 1)?;
    let w = tape.slice(v, 2, 1)?;
    let h = tape.slice(v, 3, 1)?;
    let hw = tape.scale(w, 0.5);
    let hh = tape.scale(h, 0.5);
    Ok(Parts { cx, cy, w, h, l: tape.sub(cx, hw)?, r: tape.add(cx, hw)?, t: tape.sub(cy, hh)?, b: tape.add(cy, hh)? })
}

fn min(tape: &mut Tape<f64>, a: NodeId, b: NodeId) -> Result<NodeId> {
    let d = tape.sub(a, b)?;
    let d = tape.relu(d);
    tape.sub(a, d)
}

fn max(tape: &mut Tape<f64>, a: NodeId, b: NodeId) -> Result<NodeId> {
    let d = tape.sub(b, a)?;
    let d = tape.relu(d);
    tape.add(a, d)
}

fn total(tape: &mut Tape<f64>, terms: &[NodeId]) -> NodeId {
    if terms.is_empty() {
        return tape.constant(vec![0.0]);
    }
    let v = tape.concat(terms);
    tape.sum(v)
}

fn sq_diff(tape: &mut Tape<f64>, a: NodeId, b: NodeId) -> Result<NodeId> {
    let d = tape.sub(a, b)?;
    Ok(tape.square(d))
}

/// Penalty nodes over per-item 4-vectors `[cx, cy, w, h]`.
pub struct PenaltyNodes {
    pub overlap: NodeId,
    pub boundary: NodeId,
    /// Already weighted by each constraint's constant.
    pub constraints: NodeId,
}

pub fn penalty_nodes(tape: &mut Tape<f64>, layout: &Layout, items: &[ItemRef], vars: &[NodeId], config: &PenaltyConfig) -> Result<PenaltyNodes> {
    let p: Vec<Parts> = vars.iter().map(|&v| parts(tape, v)).collect::<Result<_>>()?;
    let mut overlap_terms = Vec::new();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let rmin = min(tape, p[i].r, p[j].r)?;
            let lmax = max(tape, p[i].l, p[j].l)?;
            let bmin = min(tape, p[i].b, p[j].b)?;
            let tmax = max(tape, p[i].t, p[j].t)?;
            let ix = tape.sub(rmin, lmax)?;
            let ix = tape.relu(ix);
            let iy = tape.sub(bmin, tmax)?;
            let iy = tape.relu(iy);
            overlap_terms.push(tape.mul(ix, iy)?);
        }
    }
    let mut boundary_terms = Vec::new();
    for q in &p {
        let nl = tape.scale(q.l, -1.0);
        let nt = tape.scale(q.t, -1.0);
        let r1 = tape.add_scalar(q.r, -1.0);
        let b1 = tape.add_scalar(q.b, -1.0);
        for x in [nl, r1, nt, b1] {
            boundary_terms.push(tape.relu(x));
        }
    }
    let index = |id: &str| -> Result<usize> {
        layout.item_by_id(id).and_then(|it| items.iter().position(|x| *x == it)).ok_or_else(|| Error::UnknownConstraintTarget(id.to_string()))
    };
    let mut constraint_terms = Vec::new();
    for spec in &config.constraints {
        let term = match &spec.constraint {
            Constraint::MinSize { id, min_w, min_h } => {
                let q = &p[index(id)?];
                let nw = tape.scale(q.w, -1.0);
                let dw = tape.add_scalar(nw, *min_w);
                let dw = tape.relu(dw);
                let nh = tape.scale(q.h, -1.0);
                let dh = tape.add_scalar(nh, *min_h);
                let dh = tape.relu(dh);
                tape.add(dw, dh)?
            }
            Constraint::EqualSize { a, b } => {
                let (a, b) = (index(a)?, index(b)?);
                let dw = sq_diff(tape, p[a].w, p[b].w)?;
                let dh = sq_diff(tape, p[a].h, p[b].h)?;
                tape.add(dw, dh)?
            }
            Constraint::GroupAdjacency { a, b, axis, max_gap } => {
                let (a, b) = (&p[index(a)?], &p[index(b)?]);
                let (ca, cb, sa, sb, oa, ob, da, db) = match axis {
                    Axis::Horizontal => (a.cx, b.cx, a.w, b.w, a.cy, b.cy, a.h, b.h),
                    Axis::Vertical => (a.cy, b.cy, a.h, b.h, a.cx, b.cx, a.w, b.w),
                };
                let d = tape.sub(ca, cb)?;
                let d = tape.abs(d);
                let s = tape.add(sa, sb)?;
                let s = tape.scale(s, 0.5);
                let gap = tape.sub(d, s)?;
                let gap = tape.add_scalar(gap, -max_gap);
                let gap = tape.relu(gap);
                let mis = sq_diff(tape, oa, ob)?;
                let side = sq_diff(tape, da, db)?;
                total(tape, &[gap, mis, side])
            }
            Constraint::Alignment { ids, axis, edge } => {
                let idx = ids.iter().map(|id| index(id)).collect::<Result<Vec<_>>>()?;
                let pick = |q: &Parts| match (axis, edge) {
                    (Axis::Horizontal, AlignEdge::Start) => q.t,
                    (Axis::Horizontal, AlignEdge::Center) => q.cy,
                    (Axis::Horizontal, AlignEdge::End) => q.b,
                    (Axis::Vertical, AlignEdge::Start) => q.l,
                    (Axis::Vertical, AlignEdge::Center) => q.cx,
                    (Axis::Vertical, AlignEdge::End) => q.r,
                };
                let mut terms = Vec::new();
                if let Some(&first) = idx.first() {
                    let e0 = pick(&p[first]);
                    for &k in &idx[1..] {
                        let e = pick(&p[k]);
                        terms.push(sq_diff(tape, e, e0)?);
                    }
                }
                total(tape, &terms)
            }
        };
        constraint_terms.push(tape.scale(term, spec.constant));
    }
    Ok(PenaltyNodes { overlap: total(tape, &overlap_terms), boundary: total(tape, &boundary_terms), constraints: total(tape, &constraint_terms) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ElementKind, Orientation, ScreenSpec, UiElement};

    fn el(id: &str, r: Rect) -> UiElement {
        UiElement {
            id: id.into(),
            kind: ElementKind::Icon,
            label: "undo".into(),
            rect: r,
            orientation: Orientation::None,
            container_id: None,
            aspect_ratio: None,
            label_salience: 1,
            anchor_id: None,
        }
    }

    fn layout(rects: &[Rect]) -> Layout {
        let mut l = Layout::new(ScreenSpec::default());
        l.elements = rects.iter().enumerate().map(|(i, r)| el(&format!("e{i}"), *r)).collect();
        l
    }

    fn spec(c: Constraint) -> PenaltyConfig {
        PenaltyConfig { constraints: vec![ConstraintSpec { constraint: c, constant: 1.0 }], ..Default::default() }
    }

    /// Tape values and gradients for the layout's items.
    fn on_tape(l: &Layout, cfg: &PenaltyConfig) -> ([f64; 3], Vec<[f64; 4]>) {
        let items = l.top_level();
        let mut tape = Tape::new();
        let vars: Vec<NodeId> = items.iter().map(|&i| tape.var(l.item_rect(i).to_array().to_vec())).collect();
        let p = penalty_nodes(&mut tape, l, &items, &vars, cfg).unwrap();
        let vals = [tape.scalar(p.overlap), tape.scalar(p.boundary), tape.scalar(p.constraints)];
        let all = tape.concat(&[p.overlap, p.boundary, p.constraints]);
        let s = tape.sum(all);
        let g = tape.backward(s).unwrap();
        let grads = vars.iter().map(|&v| g.get_or_zeros(v, 4).try_into().unwrap()).collect();
        (vals, grads)
    }

    #[test]
    fn disjoint_layout_has_no_overlap() {
        let l = layout(&[Rect::new(0.2, 0.2, 0.1, 0.1), Rect::new(0.7, 0.7, 0.1, 0.1)]);
        assert_eq!(penalty_overlap(&l), 0.0);
        assert_eq!(penalty_boundary(&l), 0.0);
    }

    #[test]
    fn overlap_of_point_two_squares() {
        let l = layout(&[Rect::from_edges(0.1, 0.1, 0.4, 0.4), Rect::from_edges(0.2, 0.2, 0.5, 0.5)]);
        assert!((penalty_overlap(&l) - 0.04).abs() <= 1e-12);
        let (vals, _) = on_tape(&l, &PenaltyConfig::default());
        assert!((vals[0] - 0.04).abs() <= 1e-12);
    }

    #[test]
    fn boundary_right_edge() {
        let l = layout(&[Rect::from_edges(0.85, 0.1, 1.05, 0.2)]);
        assert!((penalty_boundary(&l) - 0.05).abs() <= 1e-12);
    }

    #[test]
    fn boundary_fully_outside_left() {
        // left = -0.35, right = -0.1: ReLU(0.35) from the left edge, nothing else
        let l = layout(&[Rect::from_edges(-0.35, 0.4, -0.1, 0.5)]);
        assert!((penalty_boundary(&l) - 0.35).abs() <= 1e-12);
        let (vals, _) = on_tape(&l, &PenaltyConfig::default());
        assert!((vals[1] - 0.35).abs() <= 1e-12);
    }

    #[test]
    fn min_size_example() {
        let l = layout(&[Rect::new(0.5, 0.5, 0.05, 0.1)]);
        let c = Constraint::MinSize { id: "e0".into(), min_w: 0.08, min_h: 0.08 };
        assert!((constraint_value(&l, &c).unwrap() - 0.03).abs() <= 1e-12);
        let ok = Constraint::MinSize { id: "e0".into(), min_w: 0.05, min_h: 0.1 };
        assert_eq!(constraint_value(&l, &ok).unwrap(), 0.0);
        let (vals, _) = on_tape(&l, &spec(c));
        assert!((vals[2] - 0.03).abs() <= 1e-12);
    }

    #[test]
    fn equal_size_identical_is_zero() {
        let l = layout(&[Rect::new(0.2, 0.5, 0.1, 0.2), Rect::new(0.7, 0.5, 0.1, 0.2)]);
        assert_eq!(constraint_value(&l, &Constraint::EqualSize { a: "e0".into(), b: "e1".into() }).unwrap(), 0.0);
    }

    #[test]
    fn unknown_target_reported() {
        let l = layout(&[Rect::new(0.2, 0.5, 0.1, 0.2)]);
        let cfg = spec(Constraint::EqualSize { a: "e0".into(), b: "nope".into() });
        assert!(matches!(cfg.validate(&l), Err(Error::UnknownConstraintTarget(id)) if id == "nope"));
        assert!(matches!(penalty_constraints(&l, &cfg), Err(Error::UnknownConstraintTarget(_))));
    }

    #[test]
    fn constraint_json_shape() {
        let c = ConstraintSpec { constraint: Constraint::MinSize { id: "undo".into(), min_w: 0.1, min_h: 0.1 }, constant: 5.0 };
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"type\":\"min-size\""));
        assert_eq!(serde_json::from_str::<ConstraintSpec>(&json).unwrap(), c);
    }

    fn all_constraints() -> PenaltyConfig {
        let cs = vec![
            Constraint::MinSize { id: "e0".into(), min_w: 0.2, min_h: 0.3 },
            Constraint::EqualSize { a: "e0".into(), b: "e1".into() },
            Constraint::GroupAdjacency { a: "e1".into(), b: "e2".into(), axis: Axis::Horizontal, max_gap: 0.01 },
            Constraint::GroupAdjacency { a: "e0".into(), b: "e2".into(), axis: Axis::Vertical, max_gap: 0.02 },
            Constraint::Alignment { ids: vec!["e0".into(), "e1".into(), "e2".into()], axis: Axis::Vertical, edge: AlignEdge::Start },
            Constraint::Alignment { ids: vec!["e1".into(), "e2".into()], axis: Axis::Horizontal, edge: AlignEdge::End },
        ];
        PenaltyConfig { constraints: cs.into_iter().map(|constraint| ConstraintSpec { constraint, constant: 3.0 }).collect(), ..Default::default() }
    }

    fn violating() -> Layout {
        layout(&[Rect::new(0.3, 0.35, 0.15, 0.2), Rect::new(0.45, 0.45, 0.2, 0.25), Rect::new(0.93, 0.8, 0.2, 0.12)])
    }

    #[test]
    fn tape_values_match_plain_functions() {
        let l = violating();
        let cfg = all_constraints();
        let (vals, _) = on_tape(&l, &cfg);
        assert!((vals[0] - penalty_overlap(&l)).abs() <= 1e-12);
        assert!((vals[1] - penalty_boundary(&l)).abs() <= 1e-12);
        assert!((vals[2] - penalty_constraints(&l, &cfg).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let l = violating();
        let cfg = all_constraints();
        let (_, grads) = on_tape(&l, &cfg);
        let f = |l: &Layout| penalty_overlap(l) + penalty_boundary(l) + penalty_constraints(l, &cfg).unwrap();
        let eps = 1e-6;
        for (k, item) in l.top_level().into_iter().enumerate() {
            for d in 0..4 {
                let mut a = l.item_rect(item).to_array();
                let mut up = l.clone();
                a[d] += eps;
                up.set_item_rect(item, Rect::from_array(a));
                let mut down = l.clone();
                a[d] -= 2.0 * eps;
                down.set_item_rect(item, Rect::from_array(a));
                let numeric = (f(&up) - f(&down)) / (2.0 * eps);
                assert!((grads[k][d] - numeric).abs() <= 1e-5 * numeric.abs().max(1.0), "item {k} dim {d}");
            }
        }
    }

    #[test]
    fn descending_the_gradient_reduces_violations() {
        let l = violating();
        let cfg = all_constraints();
        let (_, grads) = on_tape(&l, &cfg);
        let f = |l: &Layout| penalty_overlap(l) + penalty_boundary(l) + penalty_constraints(l, &cfg).unwrap();
        // sign test on every parameter with a nonzero gradient
        for (k, item) in l.top_level().into_iter().enumerate() {
            for d in 0..4 {
                if grads[k][d] == 0.0 {
                    continue;
                }
                let mut a = l.item_rect(item).to_array();
                a[d] -= 1e-4 * grads[k][d].signum();
                let mut moved = l.clone();
                moved.set_item_rect(item, Rect::from_array(a));
                assert!(f(&moved) < f(&l), "item {k} dim {d}");
            }
        }
    }

    #[test]
    fn widening_the_gap_reduces_overlap() {
        let l = layout(&[Rect::new(0.4, 0.5, 0.2, 0.2), Rect::new(0.55, 0.5, 0.2, 0.2)]);
        let (_, g) = on_tape(&l, &PenaltyConfig::default());
        assert!(g[0][0] > 0.0 && g[1][0] < 0.0);
    }
}
