use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{overlap_area, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapViolation {
    pub a: String,
    pub b: String,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryViolation {
    pub id: String,
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub overlaps: Vec<OverlapViolation>,
    pub boundary: Vec<BoundaryViolation>,
    pub invariants: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.overlaps.is_empty() && self.boundary.is_empty() && self.invariants.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        for o in &self.overlaps {
            parts.push(format!("`{}` overlaps `{}` (area {:.4})", o.a, o.b, o.area));
        }
        for b in &self.boundary {
            parts.push(format!("`{}` exceeds the screen by {:.4}", b.id, b.excess));
        }
        parts.extend(self.invariants.iter().cloned());
        parts.join("; ")
    }
}

const ASPECT_TOL: f64 = 1e-6;
const CONTAINMENT_TOL: f64 = 1e-9;

/// Checks overlap among top-level items, screen bounds and structural invariants.
pub fn validate_layout(layout: &Layout) -> ValidationReport {
    let mut report = ValidationReport::default();

    if layout.screen.width_px == 0 || layout.screen.height_px == 0 {
        report.invariants.push("screen dimensions must be positive".into());
    }

    let mut seen = HashSet::new();
    for id in layout.elements.iter().map(|e| &e.id).chain(layout.containers.iter().map(|c| &c.id)) {
        if !seen.insert(id.as_str()) {
            report.invariants.push(format!("duplicate id `{id}`"));
        }
    }

    for e in &layout.elements {
        if !(e.rect.w > 0.0 && e.rect.h > 0.0) {
            report.invariants.push(format!("`{}` has non-positive extent", e.id));
        }
        if let Some(cid) = &e.container_id {
            match layout.container(cid) {
                None => report.invariants.push(format!("`{}` references missing container `{cid}`", e.id)),
                Some(c) => {
                    if !c.member_ids.contains(&e.id) {
                        report.invariants.push(format!("container `{cid}` does not list member `{}`", e.id));
                    }
                    if !c.rect.contains(&e.rect, CONTAINMENT_TOL) {
                        report.invariants.push(format!("member `{}` lies outside container `{cid}`", e.id));
                    }
                }
            }
        }
        if let Some(host) = &e.anchor_id {
            if layout.element(host).is_none() {
                report.invariants.push(format!("`{}` anchored to missing element `{host}`", e.id));
            }
        }
        if let Some(a) = e.aspect_ratio {
            let actual = e.rect.w / e.rect.h * layout.screen.aspect();
            if a <= 0.0 || (actual - a).abs() > ASPECT_TOL * a.max(1.0) {
                report.invariants.push(format!("`{}` aspect ratio {actual:.6} differs from fixed {a}", e.id));
            }
        }
        let excess = e.rect.boundary_excess();
        if excess > 0.0 {
            report.boundary.push(BoundaryViolation { id: e.id.clone(), excess });
        }
    }

    for c in &layout.containers {
        if !c.kind.is_container() {
            report.invariants.push(format!("`{}` is not a container kind", c.id));
        }
        if c.member_ids.is_empty() {
            report.invariants.push(format!("container `{}` has no members", c.id));
        }
        for m in &c.member_ids {
            match layout.element(m) {
                None => report.invariants.push(format!("container `{}` lists missing member `{m}`", c.id)),
                Some(e) if e.container_id.as_deref() != Some(c.id.as_str()) => {
                    report.invariants.push(format!("member `{m}` does not point back to `{}`", c.id))
                }
                _ => {}
            }
        }
        let excess = c.rect.boundary_excess();
        if excess > 0.0 {
            report.boundary.push(BoundaryViolation { id: c.id.clone(), excess });
        }
    }

    let items = layout.top_level();
    for (i, &a) in items.iter().enumerate() {
        for &b in &items[i + 1..] {
            let area = overlap_area(&layout.item_rect(a), &layout.item_rect(b));
            if area > 0.0 {
                report.overlaps.push(OverlapViolation { a: layout.item_id(a).to_string(), b: layout.item_id(b).to_string(), area });
            }
        }
    }

    report
}
