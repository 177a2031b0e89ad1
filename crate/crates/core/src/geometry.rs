//! Axis-aligned rectangles in normalized screen coordinates.

use serde::{Deserialize, Serialize};

use crate::scalar::{relu, Real};

/// Rectangle stored as normalized center and extent.
///
/// `cx`, `w` are fractions of the screen width and `cy`, `h` fractions of the
/// screen height.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect<T = f64> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
}

impl<T: Real> Rect<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_edges(left: T, top: T, right: T, bottom: T) -> Self {
        let two = T::lit(2.0);
        Self { cx: (left + right) / two, cy: (top + bottom) / two, w: right - left, h: bottom - top }
    }

    #[inline]
    pub fn left(&self) -> T {
        self.cx - self.w / T::lit(2.0)
    }

    #[inline]
    pub fn right(&self) -> T {
        self.cx + self.w / T::lit(2.0)
    }

    #[inline]
    pub fn top(&self) -> T {
        self.cy - self.h / T::lit(2.0)
    }

    #[inline]
    pub fn bottom(&self) -> T {
        self.cy + self.h / T::lit(2.0)
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Signed overlap extents along x and y. Negative means separated.
    pub fn overlap_extents(&self, other: &Self) -> (T, T) {
        let x = self.right().min(other.right()) - self.left().max(other.left());
        let y = self.bottom().min(other.bottom()) - self.top().max(other.top());
        (x, y)
    }

    /// Separation along x and y (zero where the intervals intersect).
    pub fn gaps(&self, other: &Self) -> (T, T) {
        let (x, y) = self.overlap_extents(other);
        (relu(-x), relu(-y))
    }

    /// Total amount by which the rect leaves the unit square.
    pub fn boundary_excess(&self) -> T {
        relu(-self.left()) + relu(self.right() - T::one()) + relu(-self.top()) + relu(self.bottom() - T::one())
    }

    pub fn is_inside_unit(&self) -> bool {
        self.boundary_excess() == T::zero()
    }

    /// Whether `other` lies inside `self`, with tolerance `tol` on each edge.
    pub fn contains(&self, other: &Self, tol: T) -> bool {
        other.left() >= self.left() - tol
            && other.right() <= self.right() + tol
            && other.top() >= self.top() - tol
            && other.bottom() <= self.bottom() + tol
    }
}

/// Intersection area of two rects; zero when they are disjoint on either axis.
pub fn overlap_area<T: Real>(a: &Rect<T>, b: &Rect<T>) -> T {
    let (x, y) = a.overlap_extents(b);
    relu(x) * relu(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disjoint_rects_do_not_overlap() {
        let a: Rect = Rect::new(0.2, 0.2, 0.1, 0.1);
        let b: Rect = Rect::new(0.8, 0.8, 0.1, 0.1);
        assert_eq!(overlap_area(&a, &b), 0.0);
    }

    #[test]
    fn self_overlap_is_own_area() {
        let a: Rect = Rect::new(0.5, 0.5, 0.2, 0.2);
        assert!((overlap_area(&a, &a) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn shifted_pair_overlap() {
        let a: Rect = Rect::new(0.5, 0.5, 0.3, 0.2);
        let b: Rect = Rect::new(0.6, 0.5, 0.3, 0.2);
        // x: [0.35,0.65] ∩ [0.45,0.75] = 0.2, y: 0.2
        assert!((overlap_area(&a, &b) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let a: Rect<f32> = Rect::new(0.5, 0.5, 0.2, 0.2);
        assert!((overlap_area(&a, &a) - 0.04).abs() < 1e-6);
    }

    #[test]
    fn boundary_excess_of_right_edge() {
        let r: Rect = Rect::from_edges(0.85, 0.1, 1.05, 0.2);
        assert!((r.boundary_excess() - 0.05).abs() < 1e-12);
    }

    fn rect() -> impl Strategy<Value = Rect> {
        (0.0..1.0f64, 0.0..1.0f64, 0.01..0.6f64, 0.01..0.6f64).prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn overlap_symmetric_and_nonnegative(a in rect(), b in rect()) {
            let ab = overlap_area(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, overlap_area(&b, &a));
            let (gx, gy) = a.gaps(&b);
            prop_assert_eq!(ab == 0.0, gx > 0.0 || gy > 0.0 || a.overlap_extents(&b).0 == 0.0 || a.overlap_extents(&b).1 == 0.0);
        }

        // Brute-force oracle: count cells of a 200x200 grid over [-0.5, 1.5]²
        // whose centers lie in both rects.
        #[test]
        fn overlap_matches_rasterization(a in rect(), b in rect()) {
            let n = 200;
            let h = 2.0 / n as f64;
            let inside = |r: &Rect, x: f64, y: f64| x >= r.left() && x <= r.right() && y >= r.top() && y <= r.bottom();
            let mut cells = 0usize;
            for i in 0..n {
                let x = -0.5 + (i as f64 + 0.5) * h;
                for j in 0..n {
                    let y = -0.5 + (j as f64 + 0.5) * h;
                    if inside(&a, x, y) && inside(&b, x, y) {
                        cells += 1;
                    }
                }
            }
            let raster = cells as f64 * h * h;
            let (ix, iy) = a.overlap_extents(&b);
            let (ix, iy) = (ix.max(0.0), iy.max(0.0));
            let bound = h * (ix + iy) + h * h;
            prop_assert!((overlap_area(&a, &b) - raster).abs() <= bound + 1e-12);
        }
    }
}
