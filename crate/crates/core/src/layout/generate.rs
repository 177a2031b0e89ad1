//! Random and perturbed layout generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{overlap_area, reflow_group, ElementKind, GroupContainer, Layout, Orientation, Rect, ScreenSpec, UiElement};
use crate::error::{Error, Result};
use crate::seed;

/// Re-randomizations allowed per element before giving up.
pub const DEFAULT_RETRY_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementSpec {
    pub id: String,
    pub kind: ElementKind,
    pub label: String,
    pub label_salience: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_ratio: Option<f64>,
    /// Pixel width range in the horizontal (or unoriented) pose.
    pub width_px: [f64; 2],
    /// Pixel height range; ignored when `aspect_ratio` is set.
    pub height_px: [f64; 2],
    #[serde(default = "default_orientations")]
    pub orientations: Vec<Orientation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub id: String,
    pub label: String,
    pub label_salience: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub id: String,
    pub kind: ElementKind,
    pub width_px: [f64; 2],
    pub height_px: [f64; 2],
    #[serde(default = "default_orientations")]
    pub orientations: Vec<Orientation>,
    pub members: Vec<MemberSpec>,
}

fn default_orientations() -> Vec<Orientation> {
    vec![Orientation::None]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "kebab-case")]
pub enum TemplateItem {
    Element(ElementSpec),
    Group(GroupSpec),
}

/// The element set of a UI, with size ranges for random generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutTemplate {
    pub name: String,
    #[serde(default)]
    pub screen: ScreenSpec,
    pub items: Vec<TemplateItem>,
}

impl LayoutTemplate {
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for item in &self.items {
            let (id, w, h) = match item {
                TemplateItem::Element(e) => (&e.id, e.width_px, e.height_px),
                TemplateItem::Group(g) => {
                    if !g.kind.is_container() || g.members.is_empty() {
                        return Err(Error::InvalidTask(format!("group `{}` needs a container kind and members", g.id)));
                    }
                    for m in &g.members {
                        if !ids.insert(m.id.clone()) {
                            return Err(Error::InvalidTask(format!("duplicate template id `{}`", m.id)));
                        }
                    }
                    (&g.id, g.width_px, g.height_px)
                }
            };
            if !ids.insert(id.clone()) {
                return Err(Error::InvalidTask(format!("duplicate template id `{id}`")));
            }
            if !(w[0] > 0.0 && w[0] <= w[1] && h[0] > 0.0 && h[0] <= h[1]) {
                return Err(Error::InvalidTask(format!("bad size range for `{id}`")));
            }
        }
        Ok(())
    }
}

fn pick_orientation(rng: &mut ChaCha8Rng, options: &[Orientation]) -> Orientation {
    if options.is_empty() {
        Orientation::None
    } else {
        options[rng.random_range(0..options.len())]
    }
}

fn draw_size(
    rng: &mut ChaCha8Rng,
    width_px: [f64; 2],
    height_px: [f64; 2],
    aspect: Option<f64>,
    orientation: Orientation,
    screen: &ScreenSpec,
) -> (f64, f64) {
    let w = rng.random_range(width_px[0]..=width_px[1]);
    let h = match aspect {
        Some(a) => w / a,
        None => rng.random_range(height_px[0]..=height_px[1]),
    };
    let (w, h) = if orientation == Orientation::Vertical { (h, w) } else { (w, h) };
    (w / screen.width_px as f64, h / screen.height_px as f64)
}

fn draw_center(rng: &mut ChaCha8Rng, w: f64, h: f64) -> Option<Rect> {
    if w > 1.0 || h > 1.0 {
        return None;
    }
    let cx = rng.random_range(w / 2.0..=1.0 - w / 2.0);
    let cy = rng.random_range(h / 2.0..=1.0 - h / 2.0);
    Some(Rect::new(cx, cy, w, h))
}

fn collides(rect: &Rect, placed: &[Rect]) -> bool {
    placed.iter().any(|p| overlap_area(rect, p) > 0.0)
}

/// Random layout with the default retry cap.
pub fn generate_random_layout(template: &LayoutTemplate, seed: u64) -> Result<Layout> {
    generate_random_layout_with(template, seed, DEFAULT_RETRY_CAP)
}

/// Adds template items one at a time, re-randomizing an item's orientation,
/// size and position whenever it overlaps something already placed.
pub fn generate_random_layout_with(template: &LayoutTemplate, seed: u64, retry_cap: usize) -> Result<Layout> {
    template.validate()?;
    let screen = template.screen;
    let mut rng = seed::rng(seed, "random-layout", 0);
    let mut layout = Layout::new(screen);
    let mut placed: Vec<Rect> = Vec::new();
    let attempts = retry_cap + 1;

    let (overlays, main): (Vec<&TemplateItem>, Vec<&TemplateItem>) =
        template.items.iter().partition(|item| matches!(item, TemplateItem::Element(e) if e.anchor_id.is_some()));

    for item in main {
        match item {
            TemplateItem::Element(spec) => {
                let mut done = false;
                for _ in 0..attempts {
                    let orientation = pick_orientation(&mut rng, &spec.orientations);
                    let (w, h) = draw_size(&mut rng, spec.width_px, spec.height_px, spec.aspect_ratio, orientation, &screen);
                    let Some(rect) = draw_center(&mut rng, w, h) else { continue };
                    if collides(&rect, &placed) {
                        continue;
                    }
                    placed.push(rect);
                    layout.elements.push(UiElement {
                        id: spec.id.clone(),
                        kind: spec.kind,
                        label: spec.label.clone(),
                        rect,
                        orientation,
                        container_id: None,
                        aspect_ratio: spec.aspect_ratio,
                        label_salience: spec.label_salience,
                        anchor_id: None,
                    });
                    done = true;
                    break;
                }
                if !done {
                    return Err(Error::PlacementFailure { id: spec.id.clone(), attempts });
                }
            }
            TemplateItem::Group(spec) => {
                let member_kind = spec.kind.member_kind().expect("validated container kind");
                let mut done = false;
                for _ in 0..attempts {
                    let orientation = pick_orientation(&mut rng, &spec.orientations);
                    let (w, h) = draw_size(&mut rng, spec.width_px, spec.height_px, None, orientation, &screen);
                    let Some(rect) = draw_center(&mut rng, w, h) else { continue };
                    if collides(&rect, &placed) {
                        continue;
                    }
                    let container = GroupContainer {
                        id: spec.id.clone(),
                        kind: spec.kind,
                        rect,
                        member_ids: spec.members.iter().map(|m| m.id.clone()).collect(),
                    };
                    let members: Vec<UiElement> = spec
                        .members
                        .iter()
                        .map(|m| UiElement {
                            id: m.id.clone(),
                            kind: member_kind,
                            label: m.label.clone(),
                            rect: Rect::default(),
                            orientation,
                            container_id: Some(spec.id.clone()),
                            aspect_ratio: m.aspect_ratio,
                            label_salience: m.label_salience,
                            anchor_id: None,
                        })
                        .collect();
                    let refs: Vec<&UiElement> = members.iter().collect();
                    let Ok(rects) = reflow_group(&container, &refs, &screen) else { continue };
                    placed.push(rect);
                    for (mut m, r) in members.into_iter().zip(rects) {
                        m.rect = r;
                        layout.elements.push(m);
                    }
                    layout.containers.push(container);
                    done = true;
                    break;
                }
                if !done {
                    return Err(Error::PlacementFailure { id: spec.id.clone(), attempts });
                }
            }
        }
    }

    // Overlays sit inside their host and only avoid each other.
    let mut placed_overlays: Vec<Rect> = Vec::new();
    for item in overlays {
        let TemplateItem::Element(spec) = item else { unreachable!() };
        let host_id = spec.anchor_id.as_deref().unwrap();
        let host = layout.element(host_id).ok_or_else(|| Error::UnknownElement(host_id.to_string()))?.rect;
        let mut done = false;
        for _ in 0..attempts {
            let orientation = pick_orientation(&mut rng, &spec.orientations);
            let (w, h) = draw_size(&mut rng, spec.width_px, spec.height_px, spec.aspect_ratio, orientation, &screen);
            if w > host.w || h > host.h {
                continue;
            }
            let cx = rng.random_range(host.left() + w / 2.0..=host.right() - w / 2.0);
            let cy = rng.random_range(host.top() + h / 2.0..=host.bottom() - h / 2.0);
            let rect = Rect::new(cx, cy, w, h);
            if collides(&rect, &placed_overlays) {
                continue;
            }
            placed_overlays.push(rect);
            layout.elements.push(UiElement {
                id: spec.id.clone(),
                kind: spec.kind,
                label: spec.label.clone(),
                rect,
                orientation,
                container_id: None,
                aspect_ratio: spec.aspect_ratio,
                label_salience: spec.label_salience,
                anchor_id: Some(host_id.to_string()),
            });
            done = true;
            break;
        }
        if !done {
            return Err(Error::PlacementFailure { id: spec.id.clone(), attempts });
        }
    }

    Ok(layout)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    /// Size factors are drawn uniformly from this interval.
    pub scale_range: (f64, f64),
    /// Probability of swapping each adjacent pair.
    pub swap_probability: f64,
    /// Items closer than this (normalized) on both axes count as adjacent.
    pub adjacency_gap: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { scale_range: (0.7, 1.3), swap_probability: 0.15, adjacency_gap: 0.05 }
    }
}

/// Random perturbation with the default factor interval and swap probability.
pub fn perturb_layout(layout: &Layout, seed: u64) -> Layout {
    perturb_layout_with(layout, &PerturbConfig::default(), seed)
}

/// Rescales every item about its center, swaps some adjacent pairs, then
/// re-derives group members and overlays. The result may be infeasible.
pub fn perturb_layout_with(layout: &Layout, config: &PerturbConfig, seed: u64) -> Layout {
    let mut rng = seed::rng(seed, "perturb", 0);
    let mut out = layout.clone();
    let anchors = out.overlay_anchors();
    let (lo, hi) = config.scale_range;
    let draw = |rng: &mut ChaCha8Rng| if lo == hi { lo } else { rng.random_range(lo..=hi) };

    for e in out.elements.iter_mut().filter(|e| !e.is_member()) {
        let (sw, sh) = if e.aspect_ratio.is_some() {
            let s = draw(&mut rng);
            (s, s)
        } else {
            (draw(&mut rng), draw(&mut rng))
        };
        e.rect.w *= sw;
        e.rect.h *= sh;
    }
    for c in out.containers.iter_mut() {
        c.rect.w *= draw(&mut rng);
        c.rect.h *= draw(&mut rng);
    }

    let items = out.top_level();
    let mut swapped = vec![false; items.len()];
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let a = out.item_rect(items[i]);
            let b = out.item_rect(items[j]);
            let (gx, gy) = a.gaps(&b);
            if gx.max(gy) >= config.adjacency_gap {
                continue;
            }
            let roll: f64 = rng.random();
            if swapped[i] || swapped[j] || roll >= config.swap_probability {
                continue;
            }
            let (mut na, mut nb) = (a, b);
            na.cx = b.cx;
            na.cy = b.cy;
            nb.cx = a.cx;
            nb.cy = a.cy;
            out.set_item_rect(items[i], na);
            out.set_item_rect(items[j], nb);
            swapped[i] = true;
            swapped[j] = true;
        }
    }

    // A degenerate container leaves its members untouched; validation reports it.
    let _ = out.reflow_all();
    let _ = out.restore_overlays(&anchors);
    out
}
