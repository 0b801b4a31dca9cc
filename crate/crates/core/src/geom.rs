//! Pixel and chart coordinate systems and the affine calibration between them.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack, in pixels, allowed around the plot area when mapping back to chart space.
pub const PLOT_AREA_SLACK_PX: i32 = 2;

/// Integer pixel position: `x` is the column (0 at left), `y` the row (0 at top).
///
/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct PixelPoint {
    pub x: i32,
    pub y: i32,
}

impl PixelPoint {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        libm::sqrt(dx * dx + dy * dy)
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        self.x >= 0 && self.y >= 0 && (self.x as i64) < width as i64 && (self.y as i64) < height as i64
    }
}

impl From<[i32; 2]> for PixelPoint {
    fn from([x, y]: [i32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<PixelPoint> for [i32; 2] {
    fn from(p: PixelPoint) -> Self {
        [p.x, p.y]
    }
}

/// A position in axis units. On categorical axes `x` is the slot index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x: f64,
    pub y: f64,
}

impl ChartPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Pixel rectangle, edges inclusive of `left`/`top`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotRect {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl PlotRect {
    pub const fn new(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> i32 {
        self.right - self.left
    }

    pub fn height(&self) -> i32 {
        self.bottom - self.top
    }

    pub fn area(&self) -> i64 {
        i64::from(self.width().max(0)) * i64::from(self.height().max(0))
    }

    pub fn contains(&self, p: PixelPoint, slack: i32) -> bool {
        p.x >= self.left - slack && p.x <= self.right + slack && p.y >= self.top - slack && p.y <= self.bottom + slack
    }

    pub fn intersection(&self, other: &PlotRect) -> Option<PlotRect> {
        let r = PlotRect::new(
            self.left.max(other.left),
            self.top.max(other.top),
            self.right.min(other.right),
            self.bottom.min(other.bottom),
        );
        (r.width() > 0 && r.height() > 0).then_some(r)
    }

    /// Multiplies every edge by `factor` and rounds to the nearest pixel.
    pub fn scaled(&self, factor: f64) -> PlotRect {
        let s = |v: i32| round_px(f64::from(v) * factor);
        PlotRect::new(s(self.left), s(self.top), s(self.right), s(self.bottom))
    }
}

/// Horizontal axis mapping: a numeric interval or explicit categorical slot centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XRange {
    /// `[min, max]` mapped linearly onto `[left, right]`.
    Numeric([f64; 2]),
    /// Pixel column of each category slot centre, strictly increasing.
    Slots(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawCalibration {
    plot_area_px: PlotRect,
    x_range: XRange,
    y_range: [f64; 2],
}

/// Affine map between chart units and pixels for one rendered chart.
///
/// Construction validates the invariants, so every `AxisCalibration` in
/// circulation has a non-degenerate plot area and value ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCalibration", into = "RawCalibration")]
pub struct AxisCalibration {
    plot_area_px: PlotRect,
    x_range: XRange,
    y_range: [f64; 2],
}

impl TryFrom<RawCalibration> for AxisCalibration {
    type Error = Error;

    fn try_from(raw: RawCalibration) -> Result<Self> {
        AxisCalibration::new(raw.plot_area_px, raw.x_range, raw.y_range)
    }
}

impl From<AxisCalibration> for RawCalibration {
    fn from(c: AxisCalibration) -> Self {
        RawCalibration {
            plot_area_px: c.plot_area_px,
            x_range: c.x_range,
            y_range: c.y_range,
        }
    }
}

impl AxisCalibration {
    pub fn new(plot_area_px: PlotRect, x_range: XRange, y_range: [f64; 2]) -> Result<Self> {
        if plot_area_px.left >= plot_area_px.right || plot_area_px.top >= plot_area_px.bottom {
            return Err(Error::InvalidCalibration(format!(
                "degenerate plot area {plot_area_px:?}"
            )));
        }
        if !(y_range[0].is_finite() && y_range[1].is_finite() && y_range[0] < y_range[1]) {
            return Err(Error::InvalidCalibration(format!(
                "y range must satisfy min < max, got {y_range:?}"
            )));
        }
        match &x_range {
            XRange::Numeric([lo, hi]) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidCalibration(format!(
                        "x range must satisfy min < max, got [{lo}, {hi}]"
                    )));
                }
            }
            XRange::Slots(slots) => {
                if slots.is_empty() {
                    return Err(Error::InvalidCalibration("no categorical slots".into()));
                }
                if slots.iter().any(|s| !s.is_finite()) || slots.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidCalibration(
                        "categorical slots must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(Self {
            plot_area_px,
            x_range,
            y_range,
        })
    }

    pub fn plot_area(&self) -> PlotRect {
        self.plot_area_px
    }

    pub fn x_range(&self) -> &XRange {
        &self.x_range
    }

    pub fn y_range(&self) -> [f64; 2] {
        self.y_range
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.x_range, XRange::Slots(_))
    }

    /// Axis units covered by one pixel, horizontally and vertically.
    ///
    /// For categorical axes the horizontal value is 0: slot snapping is exact.
    pub fn units_per_pixel(&self) -> (f64, f64) {
        let r = self.plot_area_px;
        let ux = match &self.x_range {
            XRange::Numeric([lo, hi]) => (hi - lo) / f64::from(r.width()),
            XRange::Slots(_) => 0.0,
        };
        let uy = (self.y_range[1] - self.y_range[0]) / f64::from(r.height());
        (ux, uy)
    }

    /// Unrounded pixel position of a chart point.
    pub fn chart_to_pixel_f64(&self, p: ChartPoint) -> Result<(f64, f64)> {
        let r = self.plot_area_px;
        let x = match &self.x_range {
            XRange::Numeric([lo, hi]) => {
                if !(p.x >= *lo - range_eps(*lo, *hi) && p.x <= *hi + range_eps(*lo, *hi)) {
                    return Err(Error::OutOfRange(format!("x = {} outside [{lo}, {hi}]", p.x)));
                }
                f64::from(r.left) + (p.x - lo) / (hi - lo) * f64::from(r.width())
            }
            XRange::Slots(slots) => {
                let idx = libm::rint(p.x);
                if !(idx >= 0.0 && idx < slots.len() as f64 && (p.x - idx).abs() < 1e-9) {
                    return Err(Error::OutOfRange(format!(
                        "category index {} outside 0..{}",
                        p.x,
                        slots.len()
                    )));
                }
                slots[idx as usize]
            }
        };
        let [lo, hi] = self.y_range;
        if !(p.y >= lo - range_eps(lo, hi) && p.y <= hi + range_eps(lo, hi)) {
            return Err(Error::OutOfRange(format!("y = {} outside [{lo}, {hi}]", p.y)));
        }
        let y = f64::from(r.bottom) - (p.y - lo) / (hi - lo) * f64::from(r.height());
        Ok((x, y))
    }

    /// Maps a chart point to the nearest pixel (ties to even).
    pub fn chart_to_pixel(&self, p: ChartPoint) -> Result<PixelPoint> {
        let (x, y) = self.chart_to_pixel_f64(p)?;
        Ok(PixelPoint::new(round_px(x), round_px(y)))
    }

    /// Inverse of [`chart_to_pixel`](Self::chart_to_pixel); categorical x snaps
    /// to the nearest slot.
    pub fn pixel_to_chart(&self, px: PixelPoint) -> Result<ChartPoint> {
        let r = self.plot_area_px;
        if !r.contains(px, PLOT_AREA_SLACK_PX) {
            return Err(Error::OutOfRange(format!(
                "pixel ({}, {}) outside plot area {r:?}",
                px.x, px.y
            )));
        }
        let fx = f64::from(px.x);
        let x = match &self.x_range {
            XRange::Numeric([lo, hi]) => lo + (fx - f64::from(r.left)) / f64::from(r.width()) * (hi - lo),
            XRange::Slots(slots) => nearest_slot(slots, fx) as f64,
        };
        let [lo, hi] = self.y_range;
        let y = lo + (f64::from(r.bottom) - f64::from(px.y)) / f64::from(r.height()) * (hi - lo);
        Ok(ChartPoint::new(x, y))
    }

    /// The same calibration after scaling the raster by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<AxisCalibration> {
        let x_range = match &self.x_range {
            XRange::Numeric(r) => XRange::Numeric(*r),
            XRange::Slots(s) => XRange::Slots(s.iter().map(|v| v * factor).collect()),
        };
        AxisCalibration::new(self.plot_area_px.scaled(factor), x_range, self.y_range)
    }
}

fn range_eps(lo: f64, hi: f64) -> f64 {
    (hi - lo).abs() * 1e-12
}

fn nearest_slot(slots: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in slots.iter().enumerate() {
        let d = (s - x).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Round half to even, as pixel coordinates are integers.
pub fn round_px(v: f64) -> i32 {
    libm::rint(v) as i32
}
