//! RGB8 raster with the few drawing primitives the chart templates need.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PixelPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// Largest per-channel absolute difference.
    pub fn channel_distance(&self, other: &Rgb) -> u8 {
        let d = |a: u8, b: u8| a.abs_diff(b);
        d(self.r, other.r).max(d(self.g, other.g)).max(d(self.b, other.b))
    }

    fn mix(&self, over: Rgb, alpha: f64) -> Rgb {
        let m = |a: u8, b: u8| libm::round(f64::from(a) * (1.0 - alpha) + f64::from(b) * alpha) as u8;
        Rgb::new(m(self.r, over.r), m(self.g, over.g), m(self.b, over.b))
    }
}

impl From<[u8; 3]> for Rgb {
    fn from([r, g, b]: [u8; 3]) -> Self {
        Rgb::new(r, g, b)
    }
}

impl From<Rgb> for [u8; 3] {
    fn from(c: Rgb) -> Self {
        [c.r, c.g, c.b]
    }
}

/// Row-major RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let mut data = vec![0u8; width as usize * height as usize * 3];
        for px in data.chunks_exact_mut(3) {
            px.copy_from_slice(&[fill.r, fill.g, fill.b]);
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::InvalidArgument("raster buffer length mismatch".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    fn index(&self, x: i32, y: i32) -> Option<usize> {
        (x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height)
            .then(|| (y as usize * self.width as usize + x as usize) * 3)
    }

    pub fn get(&self, x: i32, y: i32) -> Option<Rgb> {
        self.index(x, y)
            .map(|i| Rgb::new(self.data[i], self.data[i + 1], self.data[i + 2]))
    }

    /// Exact stored colour at `px`.
    pub fn probe(&self, px: PixelPoint) -> Result<Rgb> {
        self.get(px.x, px.y).ok_or_else(|| {
            Error::OutOfRange(alloc::format!(
                "pixel ({}, {}) outside {}x{} image",
                px.x,
                px.y,
                self.width,
                self.height
            ))
        })
    }

    pub fn set(&mut self, x: i32, y: i32, c: Rgb) {
        if let Some(i) = self.index(x, y) {
            self.data[i..i + 3].copy_from_slice(&[c.r, c.g, c.b]);
        }
    }

    pub fn blend(&mut self, x: i32, y: i32, c: Rgb, alpha: f64) {
        if alpha <= 0.0 {
            return;
        }
        if alpha >= 1.0 {
            self.set(x, y, c);
        } else if let Some(old) = self.get(x, y) {
            self.set(x, y, old.mix(c, alpha));
        }
    }

    /// Fills columns `x0..x1` and rows `y0..y1` (half-open).
    pub fn fill_rect(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, c: Rgb) {
        for y in y0.max(0)..y1.min(self.height as i32) {
            for x in x0.max(0)..x1.min(self.width as i32) {
                self.set(x, y, c);
            }
        }
    }

    pub fn stroke_rect(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, c: Rgb) {
        self.fill_rect(x0, y0, x1, y0 + 1, c);
        self.fill_rect(x0, y1 - 1, x1, y1, c);
        self.fill_rect(x0, y0, x0 + 1, y1, c);
        self.fill_rect(x1 - 1, y0, x1, y1, c);
    }

    /// Filled disc without anti-aliasing: every pixel whose centre lies within `radius`.
    pub fn fill_disc(&mut self, cx: i32, cy: i32, radius: f64, c: Rgb) {
        let r = libm::ceil(radius) as i32;
        let r2 = radius * radius;
        for dy in -r..=r {
            for dx in -r..=r {
                if f64::from(dx * dx + dy * dy) <= r2 {
                    self.set(cx + dx, cy + dy, c);
                }
            }
        }
    }

    /// Anti-aliased segment of the given stroke width (coverage from distance
    /// to the segment, with a one-pixel ramp).
    pub fn draw_line_aa(&mut self, a: (f64, f64), b: (f64, f64), width: f64, c: Rgb) {
        let half = width / 2.0;
        let pad = half + 1.0;
        let x0 = libm::floor(a.0.min(b.0) - pad) as i32;
        let x1 = libm::ceil(a.0.max(b.0) + pad) as i32;
        let y0 = libm::floor(a.1.min(b.1) - pad) as i32;
        let y1 = libm::ceil(a.1.max(b.1) + pad) as i32;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        for y in y0.max(0)..=y1.min(self.height as i32 - 1) {
            for x in x0.max(0)..=x1.min(self.width as i32 - 1) {
                let (px, py) = (f64::from(x), f64::from(y));
                let t = if len2 > 0.0 {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (qx, qy) = (a.0 + t * dx - px, a.1 + t * dy - py);
                let d = libm::sqrt(qx * qx + qy * qy);
                let coverage = (half + 0.5 - d).clamp(0.0, 1.0);
                self.blend(x, y, c, coverage);
            }
        }
    }
}
