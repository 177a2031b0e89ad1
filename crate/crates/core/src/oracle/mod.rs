//! Synthetic users standing in for measured task performance.
//!
//! Step time combines visual search with a learning discount, a Fitts
//! pointing term, a reach penalty for the far side of the screen, an age
//! slowdown and multiplicative lognormal noise. Small targets cause
//! mis-taps; a mis-tap aimed at save or cancel counts as severe.

mod stats;

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

pub use stats::{mad_filter, median, task_metric};

use crate::error::{Error, Result};
use crate::layout::{Layout, Orientation, UiElement};
use crate::model::TrainingExample;
use crate::scalar::sigmoid;
use crate::seed;
use crate::tasks::{Demographics, InteractionType, TaskSequence, TaskStep};

/// MAD multiplier for outlier removal.
pub const MAD_K: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleProfile {
    /// Fitts intercept, ms.
    pub fitts_a: f64,
    /// Fitts slope, ms per bit.
    pub fitts_b: f64,
    /// Visual search cost per candidate element, ms.
    pub search_base: f64,
    pub learning_floor: f64,
    pub learning_decay: f64,
    pub error_k: f64,
    /// Target size (screen widths) at which mis-taps become likely.
    pub min_comfort_size: f64,
    /// Extra ms for a target at the far edge on the non-dominant side.
    pub handed_penalty: f64,
    pub noise_sigma: f64,
    /// Slowdown per decade of age over 30.
    pub age_slowdown: f64,
}

impl Default for OracleProfile {
    fn default() -> Self {
        Self {
            fitts_a: 100.0,
            fitts_b: 150.0,
            search_base: 40.0,
            learning_floor: 0.3,
            learning_decay: 0.6,
            error_k: 60.0,
            min_comfort_size: 0.06,
            handed_penalty: 80.0,
            noise_sigma: 0.15,
            age_slowdown: 0.05,
        }
    }
}

impl OracleProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fitts_a", self.fitts_a),
            ("fitts_b", self.fitts_b),
            ("search_base", self.search_base),
            ("learning_floor", self.learning_floor),
            ("learning_decay", self.learning_decay),
            ("error_k", self.error_k),
            ("min_comfort_size", self.min_comfort_size),
            ("handed_penalty", self.handed_penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProfile(format!("{name} must be positive")));
            }
        }
        if self.learning_floor > 1.0 {
            return Err(Error::InvalidProfile("learning_floor must be at most 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.age_slowdown >= 0.0) {
            return Err(Error::InvalidProfile("noise_sigma and age_slowdown must be non-negative".into()));
        }
        Ok(())
    }

    /// Same profile with noise disabled.
    pub fn noiseless(self) -> Self {
        Self { noise_sigma: 0.0, ..self }
    }

    /// `a + b·log2(D/W + 1)`.
    pub fn pointing_time(&self, distance: f64, width: f64) -> f64 {
        self.fitts_a + self.fitts_b * (distance / width + 1.0).log2()
    }

    pub fn minor_error_probability(&self, width: f64) -> f64 {
        sigmoid(self.error_k * (self.min_comfort_size - width))
    }
}

/// How virtual users are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPopulation {
    pub frac_left_handed: f64,
    pub min_age: f64,
    pub max_age: f64,
    /// Lognormal sigma of the per-user speed factor.
    pub speed_sigma: f64,
}

impl Default for UserPopulation {
    fn default() -> Self {
        Self { frac_left_handed: 0.12, min_age: 18.0, max_age: 65.0, speed_sigma: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualUser {
    pub seed: u64,
    pub left_handed: bool,
    pub age_years: f64,
    pub speed_factor: f64,
}

impl VirtualUser {
    pub fn sample(seed: u64, population: &UserPopulation) -> Self {
        let mut rng = seed::rng(seed, "virtual-user", 0);
        let left_handed = rng.random_bool(population.frac_left_handed.clamp(0.0, 1.0));
        let age_years = rng.random_range(population.min_age..=population.max_age);
        let speed_factor =
            if population.speed_sigma > 0.0 { LogNormal::new(0.0, population.speed_sigma).expect("valid sigma").sample(&mut rng) } else { 1.0 };
        Self { seed, left_handed, age_years, speed_factor }
    }

    /// Age-dependent slowdown multiplier.
    pub fn age_factor(&self, profile: &OracleProfile) -> f64 {
        1.0 + profile.age_slowdown * ((self.age_years - 30.0) / 10.0).max(0.0)
    }
}

/// What a user carries from one step to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    /// Prior visits per element id.
    pub visits: HashMap<String, u32>,
    /// Last interaction point, x in screen widths and y in screen widths.
    pub hand: (f64, f64),
    /// Slider handle position in `[0, 1]`.
    pub slider_value: f64,
}

impl UserState {
    pub fn new(layout: &Layout) -> Self {
        Self { visits: HashMap::new(), hand: (0.5, 0.5 * layout.screen.y_to_width_units()), slider_value: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub time_ms: f64,
    pub minor_error: bool,
    pub severe_error: bool,
}

/// Point along a slider at value `v`, in screen-width units.
fn slider_point(el: &UiElement, v: f64, r: f64) -> (f64, f64) {
    let rect = &el.rect;
    match el.orientation {
        Orientation::Vertical => (rect.cx, (rect.bottom() - v * rect.h) * r),
        _ => (rect.left() + v * rect.w, rect.cy * r),
    }
}

fn element<'a>(layout: &'a Layout, id: &str) -> Result<&'a UiElement> {
    layout.element(id).ok_or_else(|| Error::UnknownElement(id.to_string()))
}

/// Simulates one interaction step and advances `state`.
pub fn simulate_step(
    layout: &Layout,
    step: &TaskStep,
    user: &VirtualUser,
    state: &mut UserState,
    profile: &OracleProfile,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let r = layout.screen.y_to_width_units();
    let target = element(layout, &step.target_id)?;
    // element searched for, point reached and its effective width
    let (searched, point, width) = match step.interaction {
        InteractionType::Tap | InteractionType::Acquire => {
            let p = if target.kind == crate::layout::ElementKind::Slider {
                slider_point(target, state.slider_value, r)
            } else {
                (target.rect.cx, target.rect.cy * r)
            };
            (target, p, target.rect.w.min(target.rect.h * r))
        }
        InteractionType::DragAndDrop => {
            let dest_id = step.destination_id.as_deref().ok_or(Error::MissingDestination(4))?;
            let dest = element(layout, dest_id)?;
            (dest, (dest.rect.cx, dest.rect.cy * r), dest.rect.w.min(dest.rect.h * r))
        }
        InteractionType::Slide => {
            let [lo, hi] = step.slide_range.ok_or(Error::MissingDestination(3))?;
            let length = match target.orientation {
                Orientation::Vertical => target.rect.h * r,
                _ => target.rect.w,
            };
            state.hand = slider_point(target, state.slider_value, r);
            state.slider_value = 0.5 * (lo + hi);
            (target, slider_point(target, state.slider_value, r), (hi - lo) * length)
        }
    };
    let width = width.max(1e-6);
    let distance = ((point.0 - state.hand.0).powi(2) + (point.1 - state.hand.1).powi(2)).sqrt();

    let visits = state.visits.get(&searched.id).copied().unwrap_or(0);
    let familiarity = (-profile.learning_decay * visits as f64).exp().max(profile.learning_floor);
    let search = profile.search_base * layout.elements.len() as f64 * familiarity;
    // reach cost grows toward the edge away from the dominant hand
    let side = if user.left_handed { point.0 - 0.5 } else { 0.5 - point.0 };
    let reach = profile.handed_penalty * (2.0 * side).clamp(0.0, 1.0);
    let noise = if profile.noise_sigma > 0.0 { LogNormal::new(0.0, profile.noise_sigma).expect("valid sigma").sample(rng) } else { 1.0 };
    let time_ms = user.speed_factor * user.age_factor(profile) * (search + reach + profile.pointing_time(distance, width)) * noise;

    let mistap = rng.random_bool(profile.minor_error_probability(width));
    let severe_error = mistap && searched.is_commit_action();
    let minor_error = mistap && !severe_error;

    *state.visits.entry(searched.id.clone()).or_insert(0) += 1;
    state.hand = point;
    Ok(StepOutcome { time_ms, minor_error, severe_error })
}

/// One user's pass through a sequence: per-task (time, minor, severe).
pub fn simulate_user(layout: &Layout, sequence: &TaskSequence, user: &VirtualUser, profile: &OracleProfile) -> Result<Vec<StepOutcome>> {
    let (task_scene, scenes) = sequence.scenes();
    let staged: Vec<Layout> = scenes.iter().map(|p| layout.staged(p)).collect::<Result<_>>()?;
    let mut state = UserState::new(layout);
    let mut rng = seed::rng(user.seed, "user-noise", 0);
    sequence
        .tasks
        .iter()
        .enumerate()
        .map(|(ti, task)| {
            let scene = &staged[task_scene[ti]];
            let mut total = StepOutcome { time_ms: 0.0, minor_error: false, severe_error: false };
            for step in &task.steps {
                let o = simulate_step(scene, step, user, &mut state, profile, &mut rng)?;
                total.time_ms += o.time_ms;
                total.minor_error |= o.minor_error;
                total.severe_error |= o.severe_error;
            }
            total.minor_error &= !total.severe_error;
            Ok(total)
        })
        .collect()
}

/// One JSON-lines record of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub layout_id: String,
    pub task_index: usize,
    pub metric: f64,
    pub avg_time: f64,
    pub frac_minor: f64,
    pub frac_severe: f64,
    pub n_retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRecord {
    pub id: String,
    pub layout: Layout,
    /// The sequence as run, with the sampled users' demographics.
    pub sequence: TaskSequence,
    pub users: Vec<VirtualUser>,
    pub tasks: Vec<TaskRecord>,
}

impl LayoutRecord {
    pub fn metrics(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.metric).collect()
    }

    pub fn sequence_metric(&self) -> f64 {
        self.tasks.iter().map(|t| t.metric).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub layouts: Vec<LayoutRecord>,
}

impl Dataset {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in self.layouts.iter().flat_map(|l| &l.tasks) {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(s: &str) -> Result<Vec<TaskRecord>> {
        s.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
    }

    pub fn examples(&self) -> Vec<TrainingExample> {
        self.layouts
            .iter()
            .map(|l| TrainingExample { id: l.id.clone(), layout: l.layout.clone(), sequence: l.sequence.clone(), observed: l.metrics() })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Aggregates per-user outcomes of one task into a record.
pub fn aggregate_task(layout_id: &str, task_index: usize, outcomes: &[StepOutcome]) -> TaskRecord {
    let n = outcomes.len() as f64;
    let frac_minor = outcomes.iter().filter(|o| o.minor_error).count() as f64 / n;
    let frac_severe = outcomes.iter().filter(|o| o.severe_error).count() as f64 / n;
    let correct: Vec<f64> = outcomes.iter().filter(|o| !o.minor_error && !o.severe_error).map(|o| o.time_ms).collect();
    let times = if correct.is_empty() { outcomes.iter().map(|o| o.time_ms).collect() } else { correct };
    let kept = mad_filter(&times, MAD_K);
    let avg_time = kept.iter().sum::<f64>() / kept.len() as f64;
    TaskRecord {
        layout_id: layout_id.to_string(),
        task_index,
        metric: task_metric(avg_time, frac_minor, frac_severe),
        avg_time,
        frac_minor,
        frac_severe,
        n_retained: kept.len(),
    }
}

/// Runs `n_users` seeded users per layout through the sequence.
pub fn simulate_layout(
    id: &str,
    layout: &Layout,
    sequence: &TaskSequence,
    n_users: usize,
    seed: u64,
    profile: &OracleProfile,
    population: &UserPopulation,
) -> Result<LayoutRecord> {
    if n_users < 3 {
        return Err(Error::TooFewUsers(n_users));
    }
    profile.validate()?;
    sequence.validate_against(layout)?;
    let layout_seed = seed::derive(seed, id, 0);
    let users: Vec<VirtualUser> = (0..n_users).map(|u| VirtualUser::sample(seed::derive(layout_seed, "user", u as u64), population)).collect();
    let runs: Vec<Vec<StepOutcome>> = users.iter().map(|u| simulate_user(layout, sequence, u, profile)).collect::<Result<_>>()?;
    let tasks = (0..sequence.tasks.len())
        .map(|t| {
            let outcomes: Vec<StepOutcome> = runs.iter().map(|r| r[t]).collect();
            aggregate_task(id, t, &outcomes)
        })
        .collect();
    let demographics = Demographics {
        frac_left_handed: users.iter().filter(|u| u.left_handed).count() as f64 / n_users as f64,
        avg_age_years: users.iter().map(|u| u.age_years).sum::<f64>() / n_users as f64,
    };
    Ok(LayoutRecord { id: id.to_string(), layout: layout.clone(), sequence: sequence.clone().with_demographics(demographics), users, tasks })
}

/// Simulates every layout; records come out in the given layout order.
pub fn simulate_dataset(
    layouts: &[(String, Layout)],
    sequence: &TaskSequence,
    n_users: usize,
    seed: u64,
    profile: &OracleProfile,
    population: &UserPopulation,
) -> Result<Dataset> {
    if n_users < 3 {
        return Err(Error::TooFewUsers(n_users));
    }
    let layouts = layouts.iter().map(|(id, l)| simulate_layout(id, l, sequence, n_users, seed, profile, population)).collect::<Result<_>>()?;
    Ok(Dataset { layouts })
}

/// Oracle sequence metric (sum of task metrics) of one layout.
pub fn evaluate_layout(layout: &Layout, sequence: &TaskSequence, n_users: usize, seed: u64, profile: &OracleProfile) -> Result<f64> {
    Ok(simulate_layout("eval", layout, sequence, n_users, seed, profile, &UserPopulation::default())?.sequence_metric())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{templates, ElementKind, Rect, ScreenSpec};
    use crate::tasks::build_photo_editing_sequence;
    use rand::SeedableRng;

    fn user() -> VirtualUser {
        VirtualUser { seed: 1, left_handed: false, age_years: 30.0, speed_factor: 1.0 }
    }

    fn single(cx: f64, cy: f64, w: f64, h: f64) -> Layout {
        let mut l = Layout::new(ScreenSpec { width_px: 400, height_px: 400 });
        l.elements.push(UiElement {
            id: "b".into(),
            kind: ElementKind::Icon,
            label: "undo".into(),
            rect: Rect::new(cx, cy, w, h),
            orientation: Orientation::None,
            container_id: None,
            aspect_ratio: None,
            label_salience: 1,
            anchor_id: None,
        });
        l
    }

    fn tap() -> TaskStep {
        TaskStep { interaction: InteractionType::Tap, target_id: "b".into(), destination_id: None, step_index: 1, total_steps: 1, slide_range: None }
    }

    fn quiet() -> OracleProfile {
        OracleProfile { handed_penalty: 1e-9, ..OracleProfile::default().noiseless() }
    }

    fn time(layout: &Layout, profile: &OracleProfile) -> f64 {
        let mut state = UserState::new(layout);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        simulate_step(layout, &tap(), &user(), &mut state, profile, &mut rng).unwrap().time_ms
    }

    #[test]
    fn pointing_example() {
        let p = OracleProfile::default();
        assert!((p.pointing_time(4.0, 1.0) - (100.0 + 150.0 * 5f64.log2())).abs() <= 1e-12);
        assert!((p.pointing_time(4.0, 1.0) - 448.3).abs() < 0.05);
    }

    #[test]
    fn step_time_follows_formula() {
        // D = 0.3, W = 0.1 from the screen center, one element, no learning yet
        let l = single(0.8, 0.5, 0.1, 0.1);
        let p = quiet();
        let expected = p.search_base * 1.0 + p.pointing_time(0.3, 0.1);
        assert!((time(&l, &p) - expected).abs() <= 1e-6);
    }

    #[test]
    fn second_visit_is_faster() {
        let l = single(0.8, 0.5, 0.1, 0.1);
        let p = quiet();
        let mut state = UserState::new(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = simulate_step(&l, &tap(), &user(), &mut state, &p, &mut rng).unwrap().time_ms;
        state.hand = (0.5, 0.5);
        let second = simulate_step(&l, &tap(), &user(), &mut state, &p, &mut rng).unwrap().time_ms;
        assert!(second < first);
    }

    #[test]
    fn comfortable_targets_rarely_mistap() {
        let p = OracleProfile::default();
        assert!(p.minor_error_probability(0.2) < 0.5);
        assert!(p.minor_error_probability(0.01) > 0.5);
    }

    #[test]
    fn age_and_handedness_slow_down() {
        let l = single(0.1, 0.5, 0.1, 0.1);
        let p = OracleProfile::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = |u: &VirtualUser, rng: &mut ChaCha8Rng| {
            let mut s = UserState::new(&l);
            simulate_step(&l, &tap(), u, &mut s, &p, rng).unwrap().time_ms
        };
        let right = run(&user(), &mut rng);
        let left = run(&VirtualUser { left_handed: true, ..user() }, &mut rng);
        let old = run(&VirtualUser { age_years: 60.0, ..user() }, &mut rng);
        assert!(left < right, "target on the left is far for right-handers");
        assert!(old > right);
    }

    #[test]
    fn severe_errors_only_on_commit_targets() {
        let mut l = single(0.5, 0.5, 0.005, 0.005);
        let p = OracleProfile::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = UserState::new(&l);
        let o = simulate_step(&l, &tap(), &user(), &mut s, &p, &mut rng).unwrap();
        assert!(!o.severe_error);
        l.elements[0].label = "save".into();
        let mut seen_severe = false;
        for _ in 0..20 {
            let o = simulate_step(&l, &tap(), &user(), &mut s, &p, &mut rng).unwrap();
            assert!(!o.minor_error);
            seen_severe |= o.severe_error;
        }
        assert!(seen_severe);
    }

    #[test]
    fn needs_three_users() {
        let l = templates::photo_good(0);
        let seq = build_photo_editing_sequence(1, 0);
        let r = simulate_dataset(&[("g".into(), l)], &seq, 2, 0, &OracleProfile::default(), &UserPopulation::default());
        assert!(matches!(r, Err(Error::TooFewUsers(2))));
    }

    #[test]
    fn dataset_is_seeded() {
        let layouts = vec![("g0".to_string(), templates::photo_good(0)), ("b0".to_string(), templates::photo_bad(0))];
        let seq = build_photo_editing_sequence(1, 0);
        let p = OracleProfile::default();
        let pop = UserPopulation::default();
        let a = simulate_dataset(&layouts, &seq, 4, 9, &p, &pop).unwrap();
        assert_eq!(a, simulate_dataset(&layouts, &seq, 4, 9, &p, &pop).unwrap());
        assert_ne!(a, simulate_dataset(&layouts, &seq, 4, 10, &p, &pop).unwrap());
        assert_eq!(a.to_jsonl().lines().count(), 2 * seq.tasks.len());
        assert_eq!(Dataset::parse_jsonl(&a.to_jsonl()).unwrap(), a.layouts.iter().flat_map(|l| l.tasks.clone()).collect::<Vec<_>>());
        for rec in a.layouts.iter().flat_map(|l| &l.tasks) {
            assert!(rec.metric.is_finite() && rec.metric > 0.0);
        }
    }

    #[test]
    fn larger_targets_lower_metric() {
        let seq = build_photo_editing_sequence(1, 0);
        let p = OracleProfile::default().noiseless();
        let l = templates::photo_good(0);
        let mut big = l.clone();
        for e in big.elements.iter_mut() {
            e.rect.w *= 1.15;
            e.rect.h *= 1.15;
        }
        let small = evaluate_layout(&l, &seq, 6, 3, &p).unwrap();
        let large = evaluate_layout(&big, &seq, 6, 3, &p).unwrap();
        assert!(large < small, "{large} vs {small}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn time_increases_with_distance(d1 in 0.01..0.2f64, extra in 0.01..0.2f64, w in 0.02..0.15f64) {
                let p = quiet();
                let near = time(&single(0.5 + d1, 0.5, w, w), &p);
                let far = time(&single(0.5 + d1 + extra, 0.5, w, w), &p);
                prop_assert!(far > near);
            }

            #[test]
            fn time_decreases_with_width(d in 0.05..0.3f64, w in 0.02..0.1f64, extra in 0.005..0.05f64) {
                let p = quiet();
                let narrow = time(&single(0.5 + d, 0.5, w, w), &p);
                let wide = time(&single(0.5 + d, 0.5, w + extra, w + extra), &p);
                prop_assert!(wide < narrow);
            }
        }
    }
}
