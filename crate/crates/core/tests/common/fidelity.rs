//! Worked examples with hand-derived answers, and randomized identities
//! checked against brute-force oracles. Each check returns a description of
//! what went wrong instead of panicking so callers can report all of them.

#![allow(dead_code)]

use layoutforge_core::autodiff::Tape;
use layoutforge_core::features::{embed_label, salience_norm, task_tail, EmbeddingTable, VOCABULARY};
use layoutforge_core::geometry::{overlap_area, Rect};
use layoutforge_core::layout::{
    choose_grid, export_css, generate_random_layout, grid_rects, perturb_layout_with, templates, validate_layout, ElementKind, Layout, Orientation,
    PerturbConfig, ScreenSpec, UiElement,
};
use layoutforge_core::model::{clip_global_norm, clip_norm, loss_ls, target_level_r2, ModelParams, OutputScale};
use layoutforge_core::optimizer::{
    constraint_value, layout_gradients, objective, penalty_boundary, penalty_overlap, swap_is_beneficial, Constraint, PenaltyConfig,
};
use layoutforge_core::oracle::{mad_filter, task_metric, OracleProfile};
use layoutforge_core::scalar::relu;
use layoutforge_core::tasks::{Demographics, InteractionType, Task, TaskSequence, TaskSpec, TaskStep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

fn close(got: f64, want: f64, what: &str) -> Check {
    if (got - want).abs() <= 1e-12 * want.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

fn ensure(ok: bool, what: impl Into<String>) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

pub fn icon(id: &str, r: Rect) -> UiElement {
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

fn layout_of(elements: Vec<UiElement>) -> Layout {
    let mut l = Layout::new(ScreenSpec::default());
    l.elements = elements;
    l
}

fn tap_task(target: &str, trial: u32) -> Task {
    Task {
        task_type: 5,
        steps: vec![TaskStep {
            interaction: InteractionType::Tap,
            target_id: target.into(),
            destination_id: None,
            step_index: 1,
            total_steps: 1,
            slide_range: None,
        }],
        trial_index: trial,
        placements: Vec::new(),
    }
}

fn overlapping_pair() -> Layout {
    layout_of(vec![icon("undo", Rect::new(0.5, 0.5, 0.3, 0.2)), icon("upload", Rect::new(0.6, 0.5, 0.3, 0.2))])
}

fn geometry() -> Check {
    let (a, b) = (Rect::new(0.5, 0.5, 0.3, 0.2), Rect::new(0.6, 0.5, 0.3, 0.2));
    close(overlap_area(&a, &b), 0.2 * 0.2, "overlap of offset rects")?;
    let report = validate_layout(&overlapping_pair());
    ensure(report.overlaps.len() == 1 && report.boundary.is_empty(), format!("expected one overlap pair: {report:?}"))?;
    for seed in 0..20 {
        let l = generate_random_layout(&templates::photo_editing_template(), seed).map_err(|e| e.to_string())?;
        ensure(validate_layout(&l).is_empty(), format!("random photo layout {seed} infeasible"))?;
    }
    Ok(())
}

fn perturbation() -> Check {
    let l = layout_of(vec![icon("undo", Rect::new(0.5, 0.5, 0.2, 0.1))]);
    let cfg = PerturbConfig { scale_range: (1.3, 1.3), swap_probability: 0.0, ..Default::default() };
    let out = perturb_layout_with(&l, &cfg, 4);
    close(out.elements[0].rect.w, 0.26, "width after a 1.3 draw")
}

fn grids() -> Check {
    let screen = ScreenSpec::default();
    // 150 px by 75 px
    let wide = Rect::new(0.5, 0.5, 150.0 / 375.0, 75.0 / 667.0);
    let g = choose_grid(&wide, 4, Some(1.0), &screen);
    ensure((g.rows, g.cols) == (2, 2), format!("four squares in a 2:1 box chose {g:?}"))?;
    // square members; three fit across but a fourth row would shrink them
    let box3 = Rect::new(0.5, 0.5, 330.0 / 375.0, 230.0 / 667.0);
    let g = choose_grid(&box3, 6, Some(1.0), &screen);
    let rects = grid_rects(&box3, 6, Some(1.0), &screen, g);
    let mut rows: Vec<(f64, usize)> = Vec::new();
    for r in &rects {
        match rows.iter_mut().find(|(cy, _)| (cy - r.cy).abs() < 1e-9) {
            Some(row) => row.1 += 1,
            None => rows.push((r.cy, 1)),
        }
    }
    let counts: Vec<usize> = rows.iter().map(|r| r.1).collect();
    ensure(counts == [3, 3], format!("six members laid out as {counts:?}"))
}

fn css() -> Check {
    let l = layout_of(vec![icon("undo", Rect::new(0.5, 0.5, 0.2, 0.1))]);
    let text = export_css(&l);
    // top edge at 0.5 − 0.1/2 = 0.45 of 667 px
    ensure(text.contains("#undo { position: absolute; left: 150px; top: 300px; width: 75px; height: 67px; }"), format!("css rule: {text}"))
}

fn features() -> Check {
    let table = EmbeddingTable::standard();
    close(salience_norm(table.max_word_len() as u32, table), 1.0, "salience of the longest word")?;
    let single = &tap_task("undo", 1).steps[0];
    let tail = task_tail(single, &Demographics::POPULATION);
    close(tail[4], 0.25, "step of a single tap")?;
    close(tail[5], 0.25, "length of a single tap")?;
    let two = TaskSpec::OpenAndSelect { opener: "stickers".into(), target: "heart".into() }.expand();
    close(task_tail(&two[1], &Demographics::POPULATION)[4], 0.5, "second of two steps")?;
    let cos = |a: &str, b: &str| -> Result<f64, String> {
        let (x, y) = (embed_label(a).map_err(|e| e.to_string())?, embed_label(b).map_err(|e| e.to_string())?);
        Ok(x.iter().zip(&y).map(|(p, q)| p * q).sum())
    };
    ensure(cos("apple", "pear")? > cos("apple", "undo")?, "fruit words should be closer to each other")?;
    ensure(VOCABULARY.iter().flat_map(|(_, words)| words.iter()).all(|w| table.contains(w)), "standard table covers the vocabulary")
}

fn sequence_losses() -> Check {
    close(loss_ls(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?, 1.0, "mean predictor")?;
    close(loss_ls(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?, 0.5, "one-off predictor")?;

    let tasks = [tap_task("a", 1), tap_task("a", 1), tap_task("b", 1), tap_task("b", 1)];
    let observed = [1.0, 3.0, 4.0, 4.0];
    let r2 = |pred: &[f64]| target_level_r2(pred, &observed, &tasks).map_err(|e| e.to_string());
    close(r2(&[3.0, 3.0, 3.0, 3.0])?, 0.0, "group means at the global mean")?;
    close(r2(&[2.0, 3.0, 3.0, 4.0])?, 0.75, "group means 2.5 and 3.5")?;

    let mut grads = vec![vec![3.0], vec![4.0]];
    let norm = clip_global_norm(&mut grads, 1.0);
    close(norm, 5.0, "norm before clipping")?;
    close(grads[0][0], 0.6, "clipped first entry")?;
    close(grads[1][0], 0.8, "clipped second entry")?;
    let mut item = [1.2_f64, 1.6];
    clip_norm(&mut item, 0.5);
    close((item[0] * item[0] + item[1] * item[1]).sqrt(), 0.5, "item clipped to 0.5")
}

fn oracle_formulas() -> Check {
    let p = OracleProfile::default();
    close(p.pointing_time(4.0, 1.0), 100.0 + 150.0 * 5f64.log2(), "pointing time at D/W = 4")?;
    let kept = mad_filter(&[1.0, 2.0, 3.0, 4.0, 100.0], 1.5);
    ensure(kept == [2.0, 3.0, 4.0], format!("MAD filter kept {kept:?}"))?;
    close(task_metric(1000.0, 0.2, 0.0), 1100.0, "metric with minor errors")?;
    close(task_metric(1000.0, 0.0, 0.25), 1200.0, "metric with severe errors")
}

fn penalties() -> Check {
    close(penalty_overlap(&overlapping_pair()), 0.04, "overlap penalty")?;
    let right = layout_of(vec![icon("undo", Rect::new(0.9, 0.5, 0.3, 0.2))]);
    close(penalty_boundary(&right), 0.05, "right edge at 1.05")?;
    let r = Rect::new(-0.25, 0.3, 0.3, 0.2);
    let outside = layout_of(vec![icon("undo", r)]);
    let direct = relu(-r.left()) + relu(r.right() - 1.0) + relu(-r.top()) + relu(r.bottom() - 1.0);
    close(penalty_boundary(&outside), direct, "element past the left edge")?;
    close(direct, 0.4, "left edge at -0.4")?;
    let small = layout_of(vec![icon("undo", Rect::new(0.5, 0.5, 0.05, 0.07))]);
    let c = Constraint::MinSize { id: "undo".into(), min_w: 0.08, min_h: 0.08 };
    close(constraint_value(&small, &c).map_err(|e| e.to_string())?, 0.03 + 0.01, "minimum size shortfall")?;

    // objective picks up 10000 · 0.04 from the forced overlap
    let seq = TaskSequence::from_specs(vec![(TaskSpec::TapAction { target: "undo".into() }, vec![])], Demographics::POPULATION);
    let mut params = ModelParams::<f64>::init(2);
    params.output = OutputScale { offset: 500.0, scale: 100.0 };
    let v = objective(&overlapping_pair(), &seq, &params, &PenaltyConfig::default()).map_err(|e| e.to_string())?;
    close(v.objective - v.predicted_total, 400.0, "overlap share of the objective")?;

    // widening the gap lowers the overlap term
    let pair = overlapping_pair();
    let g = layout_gradients(&pair, &seq, &ModelParams::<f64>::init(2), &PenaltyConfig::default(), f64::INFINITY).map_err(|e| e.to_string())?;
    let by_id = g.by_id(&pair);
    ensure(by_id["undo"][0] > 0.0 && by_id["upload"][0] < 0.0, "descent should push the pair apart")?;
    let eps = 1e-6;
    let mut apart = overlapping_pair();
    apart.elements[1].rect.cx += eps;
    let mut closer = overlapping_pair();
    closer.elements[1].rect.cx -= eps;
    ensure(penalty_overlap(&apart) < penalty_overlap(&closer), "finite difference in cx")?;

    ensure(swap_is_beneficial([1.0, 0.0], [0.7, 0.5], [-1.0, 0.0], [0.3, 0.5]), "opposed gradients should swap")?;
    ensure(!swap_is_beneficial([-1.0, 0.0], [0.7, 0.5], [1.0, 0.0], [0.3, 0.5]), "reversed gradients should not swap")
}

/// Every worked example, by name.
pub fn worked_examples() -> Vec<(&'static str, Check)> {
    vec![
        ("geometry and validation", geometry()),
        ("perturbation scaling", perturbation()),
        ("group reflow grids", grids()),
        ("css export", css()),
        ("feature encoding", features()),
        ("loss, R² and clipping", sequence_losses()),
        ("oracle formulas", oracle_formulas()),
        ("penalties and swaps", penalties()),
    ]
}

/// Interval overlap from the sorted endpoints: when the intervals meet, the
/// shared stretch lies between the second and third of the four endpoints.
fn brute_overlap_1d(a: (f64, f64), b: (f64, f64)) -> f64 {
    if a.1 <= b.0 || b.1 <= a.0 {
        return 0.0;
    }
    let mut e = [a.0, a.1, b.0, b.1];
    e.sort_by(f64::total_cmp);
    e[2] - e[1]
}

fn random_rect(rng: &mut ChaCha8Rng) -> Rect {
    Rect::new(rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2), rng.random_range(0.01..0.6), rng.random_range(0.01..0.6))
}

/// ReLU and overlap identities on `n` seeded random cases.
pub fn random_identities(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..n {
        let x: f64 = rng.random_range(-5.0..5.0);
        ensure(relu(x) == if x > 0.0 { x } else { 0.0 }, format!("relu({x})"))?;
        ensure((relu(x) - relu(-x) - x).abs() <= 1e-15, format!("relu({x}) − relu(−x) ≠ x"))?;

        let mut tape = Tape::<f64>::new();
        let v = tape.var(vec![x]);
        let y = tape.relu(v);
        let g = tape.backward(y).map_err(|e| e.to_string())?;
        let want = if x > 0.0 { 1.0 } else { 0.0 };
        ensure(g.get(v).map(|d| d[0]) == Some(want) || (want == 0.0 && g.get(v).is_none()), format!("relu'({x})"))?;

        let (a, b) = (random_rect(&mut rng), random_rect(&mut rng));
        let brute = brute_overlap_1d((a.left(), a.right()), (b.left(), b.right())) * brute_overlap_1d((a.top(), a.bottom()), (b.top(), b.bottom()));
        let got = overlap_area(&a, &b);
        ensure((got - brute).abs() <= 1e-15, format!("case {case}: overlap {got} vs brute force {brute}"))?;
        ensure(got == overlap_area(&b, &a), format!("case {case}: overlap not symmetric"))?;
        ensure(got <= a.area().min(b.area()) + 1e-15, format!("case {case}: overlap exceeds an area"))?;
        ensure((overlap_area(&a, &a) - a.area()).abs() <= 1e-15, format!("case {case}: self overlap ≠ area"))?;

        let edges = relu(-a.left()) + relu(a.right() - 1.0) + relu(-a.top()) + relu(a.bottom() - 1.0);
        ensure((a.boundary_excess() - edges).abs() <= 1e-15, format!("case {case}: boundary excess"))?;
    }
    Ok(())
}
