//! Recipe-planner task sequence.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::photo::RoundRobin;
use super::{Demographics, TaskSequence, TaskSpec};
use crate::layout::templates::recipe;
use crate::seed;

const ROUNDS: usize = 8;

struct Round<'a, 'b> {
    rng: &'b mut ChaCha8Rng,
    ingredients: &'b mut RoundRobin<'a>,
    categories: &'b mut RoundRobin<'a>,
    out: Vec<TaskSpec>,
}

impl Round<'_, '_> {
    fn drag_spec(&mut self) -> (String, String) {
        let box_id = if self.rng.random_bool(0.5) { recipe::LIKE } else { recipe::DISLIKE };
        (self.ingredients.take(self.rng).into(), box_id.into())
    }

    fn drags(&mut self, n: usize) {
        for _ in 0..n {
            let (target, destination) = self.drag_spec();
            self.out.push(TaskSpec::DragDrop { target, destination });
        }
    }

    fn open_drag(&mut self) {
        let (target, destination) = self.drag_spec();
        let opener = self.categories.take(self.rng).into();
        self.out.push(TaskSpec::OpenAndDrag { opener, target, destination });
    }

    fn tap(&mut self, id: &str) {
        self.out.push(TaskSpec::TapAction { target: id.into() });
    }

    fn tap_category(&mut self) {
        let id = self.categories.take(self.rng);
        self.tap(id);
    }
}

/// Builds the 136-task recipe-planner sequence: taps on the category,
/// undo, cancel and get-recipe controls, ingredient drags onto the like and
/// dislike boxes, and three-interaction tasks that open a category first.
pub fn build_recipe_sequence(seed: u64) -> TaskSequence {
    let mut rng = seed::rng(seed, "recipe-sequence", 0);
    let mut ingredients = RoundRobin::new(&recipe::INGREDIENT_ICONS, &mut rng);
    let mut categories = RoundRobin::new(&recipe::CATEGORY_BUTTONS, &mut rng);
    let mut specs = Vec::with_capacity(ROUNDS * 17);

    for _ in 0..ROUNDS {
        let mut round = Round { rng: &mut rng, ingredients: &mut ingredients, categories: &mut categories, out: Vec::with_capacity(17) };
        round.tap_category();
        round.drags(3);
        round.open_drag();
        round.drags(2);
        round.tap(recipe::UNDO);
        round.open_drag();
        round.drags(2);
        round.tap(recipe::CANCEL);
        round.open_drag();
        round.drags(1);
        round.tap_category();
        round.drags(1);
        round.tap(recipe::GET_RECIPE);
        specs.extend(round.out.into_iter().map(|s| (s, Vec::new())));
    }
    TaskSequence::from_specs(specs, Demographics::POPULATION)
}
