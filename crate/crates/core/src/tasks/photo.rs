//! Photo-editing task sequence: per photo a fixed schedule of task types,
//! with seeded choice of stickers, buttons, drop spots and slider ranges.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Demographics, Placement, TaskSequence, TaskSpec};
use crate::layout::templates::photo;
use crate::seed;

/// Slider destination ranges.
pub(crate) const SLIDE_RANGES: [[f64; 2]; 4] = [[0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]];

/// Cycles through a shuffled pool, reshuffling after each full pass.
pub(crate) struct RoundRobin<'a> {
    pool: Vec<&'a str>,
    next: usize,
}

impl<'a> RoundRobin<'a> {
    pub(crate) fn new(items: &[&'a str], rng: &mut ChaCha8Rng) -> Self {
        let mut pool = items.to_vec();
        pool.shuffle(rng);
        Self { pool, next: 0 }
    }

    pub(crate) fn take(&mut self, rng: &mut ChaCha8Rng) -> &'a str {
        if self.next == self.pool.len() {
            self.pool.shuffle(rng);
            self.next = 0;
        }
        self.next += 1;
        self.pool[self.next - 1]
    }
}

fn open_select<'a>(stickers: &mut RoundRobin<'a>, categories: &mut RoundRobin<'a>, rng: &mut ChaCha8Rng, out: &mut Vec<TaskSpec>) -> &'a str {
    let target = stickers.take(rng);
    out.push(TaskSpec::OpenAndSelect { opener: categories.take(rng).into(), target: target.into() });
    target
}

/// Tasks per photo before the occasional extra selection.
const BASE_TASKS_PER_PHOTO: usize = 14;
/// Fraction of photos that get one extra selection task.
const EXTRA_TASK_RATE: f64 = 0.2;

/// Builds the photo-editing sequence over `n_photos` photos.
///
/// Twenty photos give 284 tasks. Each photo ends by tapping save or cancel,
/// and the drop targets move to new spots inside the photo for every photo.
pub fn build_photo_editing_sequence(n_photos: usize, seed: u64) -> TaskSequence {
    let mut rng = seed::rng(seed, "photo-sequence", 0);
    let mut stickers = RoundRobin::new(&photo::STICKER_ICONS, &mut rng);
    let mut categories = RoundRobin::new(&photo::CATEGORY_BUTTONS, &mut rng);

    let n_extra = (n_photos as f64 * EXTRA_TASK_RATE).round() as usize;
    let mut photo_order: Vec<usize> = (0..n_photos).collect();
    photo_order.shuffle(&mut rng);
    let extra: Vec<bool> = {
        let mut v = vec![false; n_photos];
        for &p in &photo_order[..n_extra.min(n_photos)] {
            v[p] = true;
        }
        v
    };
    let cancel_offset = rng.random_range(0..3usize);

    let mut specs = Vec::with_capacity(n_photos * (BASE_TASKS_PER_PHOTO + 1));
    for (p, &has_extra) in extra.iter().enumerate() {
        let placements: Vec<Placement> = photo::DROP_TARGETS
            .iter()
            .map(|id| Placement { id: (*id).into(), rx: rng.random_range(0.15..0.85), ry: rng.random_range(0.15..0.85) })
            .collect();
        let mut drops = photo::DROP_TARGETS.to_vec();
        drops.shuffle(&mut rng);
        let mut drops = drops.into_iter();
        let mut icons = [photo::UNDO, photo::UPLOAD];
        icons.shuffle(&mut rng);
        let slide =
            |rng: &mut ChaCha8Rng| TaskSpec::Slide { slider: photo::SLIDER.into(), range: SLIDE_RANGES[rng.random_range(0..SLIDE_RANGES.len())] };

        let mut photo_specs = Vec::with_capacity(BASE_TASKS_PER_PHOTO + 1);
        let s = open_select(&mut stickers, &mut categories, &mut rng, &mut photo_specs);
        photo_specs.push(TaskSpec::DragDrop { target: s.into(), destination: drops.next().unwrap().into() });
        photo_specs.push(slide(&mut rng));
        let s = stickers.take(&mut rng);
        photo_specs.push(TaskSpec::Select { target: s.into() });
        photo_specs.push(TaskSpec::DragDrop { target: s.into(), destination: drops.next().unwrap().into() });
        photo_specs.push(TaskSpec::TapAction { target: icons[0].into() });
        let s = open_select(&mut stickers, &mut categories, &mut rng, &mut photo_specs);
        photo_specs.push(TaskSpec::DragDrop { target: s.into(), destination: drops.next().unwrap().into() });
        photo_specs.push(slide(&mut rng));
        photo_specs.push(TaskSpec::Select { target: stickers.take(&mut rng).into() });
        photo_specs.push(slide(&mut rng));
        open_select(&mut stickers, &mut categories, &mut rng, &mut photo_specs);
        photo_specs.push(TaskSpec::TapAction { target: icons[1].into() });
        if has_extra {
            photo_specs.push(TaskSpec::Select { target: stickers.take(&mut rng).into() });
        }
        let commit = if (p + cancel_offset) % 3 == 2 { photo::CANCEL } else { photo::SAVE };
        photo_specs.push(TaskSpec::TapAction { target: commit.into() });

        for (k, spec) in photo_specs.into_iter().enumerate() {
            specs.push((spec, if k == 0 { placements.clone() } else { Vec::new() }));
        }
    }
    TaskSequence::from_specs(specs, Demographics::POPULATION)
}
