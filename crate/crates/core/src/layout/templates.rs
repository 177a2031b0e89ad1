//! Bundled UIs: the photo editor and the recipe planner, with hand-built
//! good and bad layouts and random-generation templates.

use super::{
    ElementKind, ElementSpec, GroupContainer, GroupSpec, Layout, LayoutTemplate, MemberSpec, Orientation, Rect, ScreenSpec, TemplateItem, UiElement,
};

/// Salience assigned to icons and other label-less graphics.
pub const ICON_SALIENCE: u32 = 1;

pub mod photo {
    pub const UNDO: &str = "undo";
    pub const UPLOAD: &str = "upload";
    pub const SLIDER: &str = "slider";
    pub const CATEGORIES: &str = "categories";
    pub const CATEGORY_BUTTONS: [&str; 3] = ["btn_text", "btn_emoji", "btn_filter"];
    pub const STICKERS: &str = "stickers";
    pub const STICKER_ICONS: [&str; 6] = ["sticker_1", "sticker_2", "sticker_3", "sticker_4", "sticker_5", "sticker_6"];
    pub const EXIT: &str = "exit";
    pub const SAVE: &str = "save";
    pub const CANCEL: &str = "cancel";
    pub const PHOTO: &str = "photo";
    pub const DROP_TARGETS: [&str; 3] = ["drop_1", "drop_2", "drop_3"];

    pub(super) const CATEGORY_LABELS: [&str; 3] = ["text", "emoji", "filter"];
    pub(super) const STICKER_LABELS: [&str; 6] = ["heart", "star", "smile", "sun", "flower", "cat"];
}

pub mod recipe {
    pub const UNDO: &str = "undo";
    pub const CANCEL: &str = "cancel";
    pub const GET_RECIPE_GROUP: &str = "get_recipe_group";
    pub const GET_RECIPE: &str = "get_recipe";
    pub const CATEGORIES: &str = "ingredient_buttons";
    pub const CATEGORY_BUTTONS: [&str; 3] = ["btn_grains", "btn_fruits", "btn_veg"];
    pub const STICKERS: &str = "ingredients";
    pub const INGREDIENT_ICONS: [&str; 6] = ["ing_apple", "ing_pear", "ing_rice", "ing_wheat", "ing_carrot", "ing_pepper"];
    pub const LIKE: &str = "like_box";
    pub const DISLIKE: &str = "dislike_box";

    pub(super) const CATEGORY_LABELS: [&str; 3] = ["grains", "fruits", "veg"];
    pub(super) const INGREDIENT_LABELS: [&str; 6] = ["apple", "pear", "rice", "wheat", "carrot", "pepper"];
}

fn salience(label: &str) -> u32 {
    label.chars().count() as u32
}

fn icon_spec(id: &str, label: &str, width: [f64; 2]) -> TemplateItem {
    TemplateItem::Element(ElementSpec {
        id: id.into(),
        kind: ElementKind::Icon,
        label: label.into(),
        label_salience: ICON_SALIENCE,
        aspect_ratio: Some(1.0),
        width_px: width,
        height_px: width,
        orientations: vec![Orientation::None],
        anchor_id: None,
    })
}

fn group_spec(
    id: &str,
    kind: ElementKind,
    width: [f64; 2],
    height: [f64; 2],
    members: impl IntoIterator<Item = (&'static str, &'static str)>,
) -> TemplateItem {
    let icons = kind == ElementKind::IconGroupContainer;
    TemplateItem::Group(GroupSpec {
        id: id.into(),
        kind,
        width_px: width,
        height_px: height,
        orientations: vec![Orientation::Horizontal, Orientation::Vertical],
        members: members
            .into_iter()
            .map(|(mid, label)| MemberSpec {
                id: mid.into(),
                label: label.into(),
                label_salience: if icons { ICON_SALIENCE } else { salience(label) },
                aspect_ratio: icons.then_some(1.0),
            })
            .collect(),
    })
}

pub fn photo_editing_template() -> LayoutTemplate {
    use photo::*;
    let mut items = vec![
        TemplateItem::Element(ElementSpec {
            id: PHOTO.into(),
            kind: ElementKind::StaticDiv,
            label: "photo".into(),
            label_salience: ICON_SALIENCE,
            aspect_ratio: None,
            width_px: [200.0, 345.0],
            height_px: [180.0, 320.0],
            orientations: vec![Orientation::None],
            anchor_id: None,
        }),
        group_spec(STICKERS, ElementKind::IconGroupContainer, [150.0, 345.0], [60.0, 160.0], STICKER_ICONS.into_iter().zip(STICKER_LABELS)),
        group_spec(CATEGORIES, ElementKind::ButtonGroupContainer, [150.0, 345.0], [36.0, 60.0], CATEGORY_BUTTONS.into_iter().zip(CATEGORY_LABELS)),
        TemplateItem::Element(ElementSpec {
            id: SLIDER.into(),
            kind: ElementKind::Slider,
            label: "slider".into(),
            label_salience: ICON_SALIENCE,
            aspect_ratio: None,
            width_px: [120.0, 320.0],
            height_px: [20.0, 44.0],
            orientations: vec![Orientation::Horizontal, Orientation::Vertical],
            anchor_id: None,
        }),
        group_spec(EXIT, ElementKind::ButtonGroupContainer, [100.0, 250.0], [34.0, 56.0], [(SAVE, "save"), (CANCEL, "cancel")]),
        icon_spec(UNDO, "undo", [22.0, 64.0]),
        icon_spec(UPLOAD, "upload", [22.0, 64.0]),
    ];
    for id in DROP_TARGETS {
        items.push(TemplateItem::Element(ElementSpec {
            id: id.into(),
            kind: ElementKind::DropTarget,
            label: "target".into(),
            label_salience: ICON_SALIENCE,
            aspect_ratio: None,
            width_px: [36.0, 70.0],
            height_px: [36.0, 70.0],
            orientations: vec![Orientation::None],
            anchor_id: Some(PHOTO.into()),
        }));
    }
    LayoutTemplate { name: "photo-editing".into(), screen: ScreenSpec::default(), items }
}

pub fn recipe_planner_template() -> LayoutTemplate {
    use recipe::*;
    let drop_box = |id: &str, label: &str| {
        TemplateItem::Element(ElementSpec {
            id: id.into(),
            kind: ElementKind::DropTarget,
            label: label.into(),
            label_salience: salience(label),
            aspect_ratio: None,
            width_px: [100.0, 180.0],
            height_px: [80.0, 200.0],
            orientations: vec![Orientation::None],
            anchor_id: None,
        })
    };
    let items = vec![
        drop_box(LIKE, "like"),
        drop_box(DISLIKE, "dislike"),
        group_spec(STICKERS, ElementKind::IconGroupContainer, [150.0, 345.0], [60.0, 160.0], INGREDIENT_ICONS.into_iter().zip(INGREDIENT_LABELS)),
        group_spec(CATEGORIES, ElementKind::ButtonGroupContainer, [150.0, 345.0], [36.0, 60.0], CATEGORY_BUTTONS.into_iter().zip(CATEGORY_LABELS)),
        group_spec(GET_RECIPE_GROUP, ElementKind::ButtonGroupContainer, [100.0, 300.0], [34.0, 60.0], [(GET_RECIPE, "recipe")]),
        icon_spec(UNDO, "undo", [22.0, 64.0]),
        icon_spec(CANCEL, "cancel", [22.0, 64.0]),
    ];
    LayoutTemplate { name: "recipe-planner".into(), screen: ScreenSpec::default(), items }
}

/// Pixel-space rect: left, top, width, height.
#[derive(Clone, Copy)]
struct Px(f64, f64, f64, f64);

impl Px {
    fn to_rect(self, s: &ScreenSpec) -> Rect {
        let (sw, sh) = (s.width_px as f64, s.height_px as f64);
        Rect::from_edges(self.0 / sw, self.1 / sh, (self.0 + self.2) / sw, (self.1 + self.3) / sh)
    }
}

/// Incremental builder for hand-made layouts in pixel coordinates.
struct Builder {
    layout: Layout,
}

impl Builder {
    fn new() -> Self {
        Self { layout: Layout::new(ScreenSpec::default()) }
    }

    fn element(&mut self, id: &str, kind: ElementKind, label: &str, px: Px, orientation: Orientation, aspect: Option<f64>) {
        let label_salience = match kind {
            ElementKind::ButtonGroupMember | ElementKind::DropTarget if label != "target" => salience(label),
            _ => ICON_SALIENCE,
        };
        self.layout.elements.push(UiElement {
            id: id.into(),
            kind,
            label: label.into(),
            rect: px.to_rect(&self.layout.screen),
            orientation,
            container_id: None,
            aspect_ratio: aspect,
            label_salience,
            anchor_id: None,
        });
    }

    fn icon(&mut self, id: &str, label: &str, left: f64, top: f64, size: f64) {
        self.element(id, ElementKind::Icon, label, Px(left, top, size, size), Orientation::None, Some(1.0));
    }

    fn group(&mut self, id: &str, kind: ElementKind, px: Px, orientation: Orientation, members: &[(&str, &str)]) {
        let member_kind = kind.member_kind().expect("container kind");
        let icons = kind == ElementKind::IconGroupContainer;
        for (mid, label) in members {
            self.layout.elements.push(UiElement {
                id: (*mid).into(),
                kind: member_kind,
                label: (*label).into(),
                rect: Rect::default(),
                orientation,
                container_id: Some(id.into()),
                aspect_ratio: icons.then_some(1.0),
                label_salience: if icons { ICON_SALIENCE } else { salience(label) },
                anchor_id: None,
            });
        }
        self.layout.containers.push(GroupContainer {
            id: id.into(),
            kind,
            rect: px.to_rect(&self.layout.screen),
            member_ids: members.iter().map(|(m, _)| (*m).to_string()).collect(),
        });
    }

    fn overlay(&mut self, id: &str, host: &str, rx: f64, ry: f64, size_px: f64) {
        let s = self.layout.screen;
        self.layout.elements.push(UiElement {
            id: id.into(),
            kind: ElementKind::DropTarget,
            label: "target".into(),
            rect: Rect::new(0.0, 0.0, size_px / s.width_px as f64, size_px / s.height_px as f64),
            orientation: Orientation::None,
            container_id: None,
            aspect_ratio: None,
            label_salience: ICON_SALIENCE,
            anchor_id: Some(host.into()),
        });
        self.layout.place_overlay(id, rx, ry).expect("host exists");
    }

    fn finish(mut self) -> Layout {
        self.layout.reflow_all().expect("hand-built groups fit");
        self.layout
    }
}

struct PhotoPlan {
    undo: (f64, f64, f64),
    upload: (f64, f64, f64),
    photo: Px,
    slider: (Px, Orientation),
    categories: (Px, Orientation),
    stickers: (Px, Orientation),
    exit: (Px, Orientation),
    drop_size: f64,
}

fn build_photo(plan: PhotoPlan) -> Layout {
    use photo::*;
    let mut b = Builder::new();
    b.icon(UNDO, "undo", plan.undo.0, plan.undo.1, plan.undo.2);
    b.icon(UPLOAD, "upload", plan.upload.0, plan.upload.1, plan.upload.2);
    b.element(PHOTO, ElementKind::StaticDiv, "photo", plan.photo, Orientation::None, None);
    b.element(SLIDER, ElementKind::Slider, "slider", plan.slider.0, plan.slider.1, None);
    let cats: Vec<(&str, &str)> = CATEGORY_BUTTONS.into_iter().zip(CATEGORY_LABELS).collect();
    b.group(CATEGORIES, ElementKind::ButtonGroupContainer, plan.categories.0, plan.categories.1, &cats);
    let stickers: Vec<(&str, &str)> = STICKER_ICONS.into_iter().zip(STICKER_LABELS).collect();
    b.group(STICKERS, ElementKind::IconGroupContainer, plan.stickers.0, plan.stickers.1, &stickers);
    b.group(EXIT, ElementKind::ButtonGroupContainer, plan.exit.0, plan.exit.1, &[(SAVE, "save"), (CANCEL, "cancel")]);
    for (id, (rx, ry)) in DROP_TARGETS.into_iter().zip([(0.25, 0.3), (0.72, 0.42), (0.5, 0.76)]) {
        b.overlay(id, PHOTO, rx, ry, plan.drop_size);
    }
    b.finish()
}

/// Number of bundled good photo-editing layouts.
pub const PHOTO_GOOD_COUNT: usize = 5;
/// Number of bundled bad photo-editing layouts.
pub const PHOTO_BAD_COUNT: usize = 3;

/// Hand-built photo-editing layouts that follow common mobile guidelines:
/// large targets, related controls next to each other, frequent controls
/// within easy thumb reach. `index` is taken modulo [`PHOTO_GOOD_COUNT`].
pub fn photo_good(index: usize) -> Layout {
    use Orientation::{Horizontal as H, Vertical as V};
    let plan = match index % PHOTO_GOOD_COUNT {
        0 => PhotoPlan {
            undo: (16.0, 12.0, 48.0),
            upload: (311.0, 12.0, 48.0),
            photo: Px(15.0, 72.0, 345.0, 300.0),
            slider: (Px(37.0, 382.0, 300.0, 36.0), H),
            categories: (Px(15.0, 428.0, 345.0, 52.0), H),
            stickers: (Px(15.0, 488.0, 345.0, 112.0), H),
            exit: (Px(15.0, 608.0, 345.0, 52.0), H),
            drop_size: 58.0,
        },
        1 => PhotoPlan {
            undo: (18.0, 364.0, 46.0),
            upload: (311.0, 364.0, 46.0),
            photo: Px(15.0, 62.0, 345.0, 290.0),
            slider: (Px(78.0, 369.0, 219.0, 36.0), H),
            categories: (Px(15.0, 420.0, 345.0, 52.0), H),
            stickers: (Px(15.0, 480.0, 345.0, 176.0), H),
            exit: (Px(15.0, 6.0, 345.0, 48.0), H),
            drop_size: 60.0,
        },
        2 => PhotoPlan {
            undo: (16.0, 8.0, 48.0),
            upload: (311.0, 8.0, 48.0),
            photo: Px(15.0, 64.0, 345.0, 280.0),
            slider: (Px(37.0, 354.0, 300.0, 36.0), H),
            categories: (Px(15.0, 400.0, 345.0, 52.0), H),
            stickers: (Px(15.0, 460.0, 345.0, 140.0), H),
            exit: (Px(15.0, 608.0, 345.0, 52.0), H),
            drop_size: 56.0,
        },
        3 => PhotoPlan {
            undo: (16.0, 8.0, 48.0),
            upload: (311.0, 8.0, 48.0),
            photo: Px(15.0, 64.0, 275.0, 300.0),
            slider: (Px(37.0, 374.0, 300.0, 36.0), H),
            categories: (Px(298.0, 64.0, 62.0, 300.0), V),
            stickers: (Px(15.0, 420.0, 345.0, 176.0), H),
            exit: (Px(110.0, 8.0, 155.0, 48.0), H),
            drop_size: 56.0,
        },
        _ => PhotoPlan {
            undo: (16.0, 8.0, 48.0),
            upload: (311.0, 8.0, 48.0),
            photo: Px(15.0, 64.0, 345.0, 262.0),
            slider: (Px(37.0, 334.0, 300.0, 36.0), H),
            categories: (Px(15.0, 378.0, 345.0, 52.0), H),
            stickers: (Px(15.0, 438.0, 345.0, 162.0), H),
            exit: (Px(15.0, 608.0, 345.0, 52.0), H),
            drop_size: 60.0,
        },
    };
    build_photo(plan)
}

/// Hand-built photo-editing layouts that break the same guidelines: tiny
/// targets, related controls far apart, frequent controls at the far corners.
/// `index` is taken modulo [`PHOTO_BAD_COUNT`].
pub fn photo_bad(index: usize) -> Layout {
    use Orientation::{Horizontal as H, Vertical as V};
    let plan = match index % PHOTO_BAD_COUNT {
        0 => PhotoPlan {
            undo: (4.0, 640.0, 20.0),
            upload: (351.0, 4.0, 20.0),
            photo: Px(100.0, 150.0, 200.0, 200.0),
            slider: (Px(4.0, 100.0, 16.0, 200.0), V),
            categories: (Px(340.0, 400.0, 30.0, 200.0), V),
            stickers: (Px(4.0, 4.0, 180.0, 40.0), H),
            exit: (Px(250.0, 640.0, 90.0, 22.0), H),
            drop_size: 38.0,
        },
        1 => PhotoPlan {
            undo: (340.0, 300.0, 20.0),
            upload: (4.0, 300.0, 20.0),
            photo: Px(60.0, 200.0, 250.0, 250.0),
            slider: (Px(200.0, 600.0, 120.0, 14.0), H),
            categories: (Px(200.0, 4.0, 170.0, 26.0), H),
            stickers: (Px(4.0, 620.0, 150.0, 40.0), H),
            exit: (Px(4.0, 4.0, 26.0, 60.0), V),
            drop_size: 38.0,
        },
        _ => PhotoPlan {
            undo: (4.0, 640.0, 18.0),
            upload: (340.0, 4.0, 18.0),
            photo: Px(40.0, 40.0, 295.0, 200.0),
            slider: (Px(180.0, 260.0, 14.0, 260.0), V),
            categories: (Px(4.0, 300.0, 120.0, 24.0), H),
            stickers: (Px(200.0, 560.0, 160.0, 50.0), H),
            exit: (Px(250.0, 300.0, 110.0, 20.0), H),
            drop_size: 36.0,
        },
    };
    build_photo(plan)
}

struct RecipePlan {
    undo: (f64, f64, f64),
    cancel: (f64, f64, f64),
    like: Px,
    dislike: Px,
    categories: (Px, Orientation),
    ingredients: (Px, Orientation),
    get_recipe: Px,
}

fn build_recipe(plan: RecipePlan) -> Layout {
    use recipe::*;
    let mut b = Builder::new();
    b.icon(UNDO, "undo", plan.undo.0, plan.undo.1, plan.undo.2);
    b.icon(CANCEL, "cancel", plan.cancel.0, plan.cancel.1, plan.cancel.2);
    b.element(LIKE, ElementKind::DropTarget, "like", plan.like, Orientation::None, None);
    b.element(DISLIKE, ElementKind::DropTarget, "dislike", plan.dislike, Orientation::None, None);
    let cats: Vec<(&str, &str)> = CATEGORY_BUTTONS.into_iter().zip(CATEGORY_LABELS).collect();
    b.group(CATEGORIES, ElementKind::ButtonGroupContainer, plan.categories.0, plan.categories.1, &cats);
    let ings: Vec<(&str, &str)> = INGREDIENT_ICONS.into_iter().zip(INGREDIENT_LABELS).collect();
    b.group(STICKERS, ElementKind::IconGroupContainer, plan.ingredients.0, plan.ingredients.1, &ings);
    b.group(GET_RECIPE_GROUP, ElementKind::ButtonGroupContainer, plan.get_recipe, Orientation::Horizontal, &[(GET_RECIPE, "recipe")]);
    b.finish()
}

/// A reasonably designed recipe-planner layout.
pub fn recipe_good() -> Layout {
    use Orientation::Horizontal as H;
    build_recipe(RecipePlan {
        undo: (16.0, 8.0, 44.0),
        cancel: (315.0, 8.0, 44.0),
        like: Px(15.0, 64.0, 168.0, 200.0),
        dislike: Px(192.0, 64.0, 168.0, 200.0),
        categories: (Px(15.0, 284.0, 345.0, 52.0), H),
        ingredients: (Px(15.0, 344.0, 345.0, 176.0), H),
        get_recipe: Px(15.0, 560.0, 345.0, 56.0),
    })
}

/// A poorly designed recipe-planner layout: small targets, drop boxes far
/// from the ingredients, undo and cancel crowded together.
pub fn recipe_bad() -> Layout {
    use Orientation::{Horizontal as H, Vertical as V};
    build_recipe(RecipePlan {
        undo: (315.0, 4.0, 20.0),
        cancel: (340.0, 4.0, 20.0),
        like: Px(4.0, 4.0, 120.0, 100.0),
        dislike: Px(250.0, 560.0, 120.0, 100.0),
        categories: (Px(4.0, 300.0, 30.0, 200.0), V),
        ingredients: (Px(150.0, 300.0, 200.0, 40.0), H),
        get_recipe: Px(140.0, 150.0, 100.0, 30.0),
    })
}
