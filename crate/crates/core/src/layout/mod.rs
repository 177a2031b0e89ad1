//! Layout data model: screen, elements, group containers.

mod css;
mod generate;
mod reflow;
pub mod templates;
mod validate;

use serde::{Deserialize, Serialize};

pub use crate::geometry::{overlap_area, Rect};
pub use css::export_css;
pub use generate::{
    generate_random_layout, generate_random_layout_with, perturb_layout, perturb_layout_with, ElementSpec, GroupSpec, LayoutTemplate, MemberSpec,
    PerturbConfig, TemplateItem, DEFAULT_RETRY_CAP,
};
pub use reflow::{choose_grid, grid_rects, reflow_group, Grid, BUTTON_ASPECT, MEMBER_GAP, MIN_EXTENT};
pub use validate::{validate_layout, BoundaryViolation, OverlapViolation, ValidationReport};

use crate::error::{Error, Result};
use crate::tasks::Placement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for ScreenSpec {
    fn default() -> Self {
        Self { width_px: 375, height_px: 667 }
    }
}

impl ScreenSpec {
    /// Width over height.
    pub fn aspect(&self) -> f64 {
        self.width_px as f64 / self.height_px as f64
    }

    /// Factor that converts a normalized vertical extent into screen-width units.
    pub fn y_to_width_units(&self) -> f64 {
        self.height_px as f64 / self.width_px as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Icon,
    IconGroupContainer,
    IconGroupMember,
    ButtonGroupContainer,
    ButtonGroupMember,
    Slider,
    StaticDiv,
    DropTarget,
}

impl ElementKind {
    pub const ALL: [ElementKind; 8] = [
        ElementKind::Icon,
        ElementKind::IconGroupContainer,
        ElementKind::IconGroupMember,
        ElementKind::ButtonGroupContainer,
        ElementKind::ButtonGroupMember,
        ElementKind::Slider,
        ElementKind::StaticDiv,
        ElementKind::DropTarget,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).unwrap()
    }

    pub fn one_hot(self) -> [f64; 8] {
        let mut v = [0.0; 8];
        v[self.index()] = 1.0;
        v
    }

    pub fn is_container(self) -> bool {
        matches!(self, ElementKind::IconGroupContainer | ElementKind::ButtonGroupContainer)
    }

    pub fn is_member(self) -> bool {
        matches!(self, ElementKind::IconGroupMember | ElementKind::ButtonGroupMember)
    }

    /// The member kind that goes with a container kind.
    pub fn member_kind(self) -> Option<ElementKind> {
        match self {
            ElementKind::IconGroupContainer => Some(ElementKind::IconGroupMember),
            ElementKind::ButtonGroupContainer => Some(ElementKind::ButtonGroupMember),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Horizontal,
    Vertical,
    #[default]
    None,
}

impl Orientation {
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            Orientation::Horizontal => [1.0, 0.0, 0.0],
            Orientation::Vertical => [0.0, 1.0, 0.0],
            Orientation::None => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiElement {
    pub id: String,
    pub kind: ElementKind,
    pub label: String,
    #[serde(flatten)]
    pub rect: Rect,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container_id: Option<String>,
    /// Pixel width over pixel height, fixed for icons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_ratio: Option<f64>,
    pub label_salience: u32,
    /// Static div this element floats on (drop targets inside a photo).
    /// Anchored elements follow their host and are not layout parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_id: Option<String>,
}

impl UiElement {
    pub fn is_member(&self) -> bool {
        self.container_id.is_some()
    }

    pub fn is_overlay(&self) -> bool {
        self.anchor_id.is_some()
    }

    /// Top-level elements are the ones the optimizer moves directly.
    pub fn is_free(&self) -> bool {
        !self.is_member() && !self.is_overlay()
    }

    /// Tapping this by mistake discards the current photo's edits.
    pub fn is_commit_action(&self) -> bool {
        matches!(self.label.as_str(), "save" | "cancel")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContainer {
    pub id: String,
    pub kind: ElementKind,
    #[serde(flatten)]
    pub rect: Rect,
    pub member_ids: Vec<String>,
}

/// Handle to a top-level item: a free element or a group container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemRef {
    Element(usize),
    Container(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub screen: ScreenSpec,
    pub elements: Vec<UiElement>,
    #[serde(default)]
    pub containers: Vec<GroupContainer>,
}

impl Layout {
    pub fn new(screen: ScreenSpec) -> Self {
        Self { screen, elements: Vec::new(), containers: Vec::new() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn element_index(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.id == id)
    }

    pub fn element(&self, id: &str) -> Option<&UiElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn element_mut(&mut self, id: &str) -> Option<&mut UiElement> {
        self.elements.iter_mut().find(|e| e.id == id)
    }

    pub fn container_index(&self, id: &str) -> Option<usize> {
        self.containers.iter().position(|c| c.id == id)
    }

    pub fn container(&self, id: &str) -> Option<&GroupContainer> {
        self.containers.iter().find(|c| c.id == id)
    }

    /// Free elements then containers, in declaration order.
    pub fn top_level(&self) -> Vec<ItemRef> {
        let mut items: Vec<ItemRef> = self.elements.iter().enumerate().filter(|(_, e)| e.is_free()).map(|(i, _)| ItemRef::Element(i)).collect();
        items.extend((0..self.containers.len()).map(ItemRef::Container));
        items
    }

    pub fn item_id(&self, item: ItemRef) -> &str {
        match item {
            ItemRef::Element(i) => &self.elements[i].id,
            ItemRef::Container(i) => &self.containers[i].id,
        }
    }

    pub fn item_rect(&self, item: ItemRef) -> Rect {
        match item {
            ItemRef::Element(i) => self.elements[i].rect,
            ItemRef::Container(i) => self.containers[i].rect,
        }
    }

    pub fn set_item_rect(&mut self, item: ItemRef, rect: Rect) {
        match item {
            ItemRef::Element(i) => self.elements[i].rect = rect,
            ItemRef::Container(i) => self.containers[i].rect = rect,
        }
    }

    /// Looks up a top-level item (or any element) by id.
    pub fn item_by_id(&self, id: &str) -> Option<ItemRef> {
        if let Some(i) = self.element_index(id) {
            return Some(ItemRef::Element(i));
        }
        self.container_index(id).map(ItemRef::Container)
    }

    /// Fixed pixel aspect ratio of a top-level item, if any.
    pub fn item_aspect(&self, item: ItemRef) -> Option<f64> {
        match item {
            ItemRef::Element(i) => self.elements[i].aspect_ratio,
            ItemRef::Container(_) => None,
        }
    }

    /// Re-derives every group's member rects from its container.
    pub fn reflow_all(&mut self) -> Result<()> {
        for ci in 0..self.containers.len() {
            let rects = {
                let container = &self.containers[ci];
                let members = self.members_of(container)?;
                reflow_group(container, &members, &self.screen)?
            };
            let ids = self.containers[ci].member_ids.clone();
            for (id, rect) in ids.iter().zip(rects) {
                self.element_mut(id).expect("member exists").rect = rect;
            }
        }
        Ok(())
    }

    pub(crate) fn members_of(&self, container: &GroupContainer) -> Result<Vec<&UiElement>> {
        container.member_ids.iter().map(|id| self.element(id).ok_or_else(|| Error::UnknownElement(id.clone()))).collect()
    }

    /// Position of an overlay relative to its host, as fractions of the host extent.
    pub fn overlay_relative(&self, id: &str) -> Option<(f64, f64)> {
        let el = self.element(id)?;
        let host = self.element(el.anchor_id.as_deref()?)?;
        Some(((el.rect.cx - host.rect.left()) / host.rect.w, (el.rect.cy - host.rect.top()) / host.rect.h))
    }

    /// Moves an overlay to a host-relative position.
    pub fn place_overlay(&mut self, id: &str, rx: f64, ry: f64) -> Result<()> {
        let idx = self.element_index(id).ok_or_else(|| Error::UnknownElement(id.to_string()))?;
        let host_id = self.elements[idx].anchor_id.clone().ok_or_else(|| Error::UnknownElement(format!("{id} has no anchor")))?;
        let host = self.element(&host_id).ok_or_else(|| Error::UnknownElement(host_id.clone()))?.rect;
        let r = &mut self.elements[idx].rect;
        r.cx = host.left() + rx * host.w;
        r.cy = host.top() + ry * host.h;
        Ok(())
    }

    /// A copy with the given overlay placements applied.
    pub fn staged(&self, placements: &[Placement]) -> Result<Layout> {
        let mut out = self.clone();
        for p in placements {
            out.place_overlay(&p.id, p.rx, p.ry)?;
        }
        Ok(out)
    }

    /// Relative positions of every overlay, for re-anchoring after hosts move.
    pub fn overlay_anchors(&self) -> Vec<(String, f64, f64)> {
        self.elements.iter().filter(|e| e.is_overlay()).filter_map(|e| self.overlay_relative(&e.id).map(|(rx, ry)| (e.id.clone(), rx, ry))).collect()
    }

    pub fn restore_overlays(&mut self, anchors: &[(String, f64, f64)]) -> Result<()> {
        for (id, rx, ry) in anchors {
            self.place_overlay(id, *rx, *ry)?;
        }
        Ok(())
    }
}
