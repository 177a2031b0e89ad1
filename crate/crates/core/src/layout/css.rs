use std::fmt::Write;

use super::Layout;
use crate::features::order_elements;

/// Absolute-positioned CSS rules for every element, in encoder order.
pub fn export_css(layout: &Layout) -> String {
    let sw = layout.screen.width_px as f64;
    let sh = layout.screen.height_px as f64;
    let mut out = format!("/* layout {}x{} */\n", layout.screen.width_px, layout.screen.height_px);
    for e in order_elements(layout) {
        let r = &e.rect;
        let _ = writeln!(
            out,
            "#{} {{ position: absolute; left: {}px; top: {}px; width: {}px; height: {}px; }}",
            e.id,
            (r.left() * sw).round() as i64,
            (r.top() * sh).round() as i64,
            (r.w * sw).round() as i64,
            (r.h * sh).round() as i64,
        );
    }
    out
}
