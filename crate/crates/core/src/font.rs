//! 8x8 bitmap text, optionally rotated to read bottom-to-top.

use font8x8::legacy::BASIC_LEGACY;

use crate::geom::PlotRect;
use crate::raster::{Raster, Rgb};

pub const GLYPH_PX: i32 = 8;

fn glyph(c: char) -> &'static [u8; 8] {
    let code = c as usize;
    if (32..128).contains(&code) {
        &BASIC_LEGACY[code]
    } else {
        &BASIC_LEGACY['?' as usize]
    }
}

/// (width, height) of a horizontal string at integer `scale`.
pub fn text_size(text: &str, scale: i32) -> (i32, i32) {
    (text.chars().count() as i32 * GLYPH_PX * scale, GLYPH_PX * scale)
}

/// Bounding box of `text` with top-left corner at `(x, y)`.
pub fn text_box(text: &str, x: i32, y: i32, scale: i32, rotated: bool) -> PlotRect {
    let (w, h) = text_size(text, scale);
    if rotated {
        PlotRect::new(x, y, x + h, y + w)
    } else {
        PlotRect::new(x, y, x + w, y + h)
    }
}

/// Draws `text` with top-left corner at `(x, y)`. Rotated text runs upward
/// from the bottom of its box.
pub fn draw_text(img: &mut Raster, text: &str, x: i32, y: i32, scale: i32, rotated: bool, color: Rgb) {
    let len_px = text_size(text, scale).0;
    for (i, c) in text.chars().enumerate() {
        let g = glyph(c);
        let offset = i as i32 * GLYPH_PX * scale;
        for (row, bits) in g.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                let (gx, gy) = (offset + col * scale, row as i32 * scale);
                let (ox, oy) = if rotated {
                    // 90 degrees counter-clockwise inside a (h x len) box
                    (x + gy, y + len_px - 1 - gx - (scale - 1))
                } else {
                    (x + gx, y + gy)
                };
                img.fill_rect(ox, oy, ox + scale, oy + scale, color);
            }
        }
    }
}
