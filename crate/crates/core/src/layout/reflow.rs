//! Row-major placement of group members inside their container.
//!
//! Members get the largest size that fits the container with a minimum
//! inter-member gap of `MEMBER_GAP` times the member size, keeping any fixed
//! aspect ratio. The remaining space is spread evenly, so horizontal gaps are
//! all equal and vertical gaps are all equal.

use super::{GroupContainer, Rect, ScreenSpec, UiElement};
use crate::error::{Error, Result};

/// Minimum gap between adjacent members, relative to the member size.
pub const MEMBER_GAP: f64 = 0.1;

/// Preferred pixel aspect for members without a fixed one (buttons).
pub const BUTTON_ASPECT: f64 = 2.5;

/// Smallest normalized extent any rect may take.
pub const MIN_EXTENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

/// Member pixel size for a given grid.
fn member_px(cont_w: f64, cont_h: f64, grid: Grid, aspect: Option<f64>) -> (f64, f64) {
    let c = grid.cols as f64;
    let r = grid.rows as f64;
    let max_w = cont_w / (c + (c - 1.0) * MEMBER_GAP);
    let max_h = cont_h / (r + (r - 1.0) * MEMBER_GAP);
    match aspect {
        Some(a) => {
            let h = max_h.min(max_w / a);
            (a * h, h)
        }
        None => (max_w, max_h),
    }
}

/// Picks rows x cols for `n` members. Fixed-aspect members maximize their size;
/// free members pick the cell shape closest to `BUTTON_ASPECT`. Ties go to fewer rows.
pub fn choose_grid(container: &Rect, n: usize, aspect: Option<f64>, screen: &ScreenSpec) -> Grid {
    let cont_w = container.w * screen.width_px as f64;
    let cont_h = container.h * screen.height_px as f64;
    let mut best = Grid { rows: 1, cols: n.max(1) };
    let mut best_score = f64::NEG_INFINITY;
    for rows in 1..=n.max(1) {
        let cols = n.max(1).div_ceil(rows);
        // skip grids with a fully empty trailing row
        if (rows - 1) * cols >= n.max(1) {
            continue;
        }
        let grid = Grid { rows, cols };
        let (w, h) = member_px(cont_w, cont_h, grid, aspect);
        let score = match aspect {
            Some(_) => h,
            None => -((w / h) / BUTTON_ASPECT).ln().abs(),
        };
        if best_score == f64::NEG_INFINITY || score > best_score + 1e-12 * best_score.abs().max(1.0) {
            best_score = score;
            best = grid;
        }
    }
    best
}

/// Member rects for a fixed grid, row-major.
pub fn grid_rects(container: &Rect, n: usize, aspect: Option<f64>, screen: &ScreenSpec, grid: Grid) -> Vec<Rect> {
    let sw = screen.width_px as f64;
    let sh = screen.height_px as f64;
    let cont_w = container.w * sw;
    let cont_h = container.h * sh;
    let (mw, mh) = member_px(cont_w, cont_h, grid, aspect);
    let gx = (cont_w - grid.cols as f64 * mw) / (grid.cols as f64 + 1.0);
    let gy = (cont_h - grid.rows as f64 * mh) / (grid.rows as f64 + 1.0);
    let left = container.left() * sw;
    let top = container.top() * sh;
    (0..n)
        .map(|k| {
            let row = (k / grid.cols) as f64;
            let col = (k % grid.cols) as f64;
            let l = left + gx + col * (mw + gx);
            let t = top + gy + row * (mh + gy);
            Rect::new((l + mw / 2.0) / sw, (t + mh / 2.0) / sh, mw / sw, mh / sh)
        })
        .collect()
}

/// Lays out a group's members inside its container.
pub fn reflow_group(container: &GroupContainer, members: &[&UiElement], screen: &ScreenSpec) -> Result<Vec<Rect>> {
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let aspect = members[0].aspect_ratio;
    let rect = &container.rect;
    if !(rect.w > 0.0 && rect.h > 0.0) {
        return Err(Error::DegenerateContainer(container.id.clone()));
    }
    let grid = choose_grid(rect, members.len(), aspect, screen);
    let rects = grid_rects(rect, members.len(), aspect, screen, grid);
    if rects.iter().any(|r| r.w < MIN_EXTENT || r.h < MIN_EXTENT) {
        return Err(Error::DegenerateContainer(container.id.clone()));
    }
    Ok(rects)
}
