//! Chart templates: rasterize a [`ChartSpec`] into an image together with its
//! calibration and pixel-anchored annotation, plus feedback markers and the
//! longest-side resize rule.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::annotation::{
    AnnotatedPoint, AnnotatedSeries, AxisKind, ChartAnnotation, ChartType, ImageSize, XAxis, YAxis,
};
use crate::error::{Error, Result};
use crate::font::{draw_text, text_box, text_size, GLYPH_PX};
use crate::geom::{round_px, AxisCalibration, ChartPoint, PixelPoint, PlotRect, XRange};
use crate::raster::{Raster, Rgb};

pub const MIN_DIMENSION: u32 = 224;
/// Longest side fed to the model.
pub const DEFAULT_LONGEST_SIDE: u32 = 1036;
/// Anchors closer than this are flagged occluded.
pub const OCCLUSION_RADIUS_PX: f64 = 3.0;

pub const MARKER_COLOR: Rgb = Rgb::new(255, 215, 0);
pub const MARKER_OUTLINE: Rgb = Rgb::BLACK;
pub const MARKER_RADIUS_PX: f64 = 6.0;
pub const MARKER_OUTLINE_PX: f64 = 1.0;

const TEXT_COLOR: Rgb = Rgb::new(30, 30, 30);
const AXIS_COLOR: Rgb = Rgb::new(40, 40, 40);
const PAD: i32 = 10;
const TICK_LEN: i32 = 5;
const MIN_PLOT_W: i32 = 100;
const MIN_PLOT_H: i32 = 80;
const MIN_BAR_PX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegendPosition {
    Top,
    Right,
    Bottom,
    Inside,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerShape {
    Circle,
    Square,
    Triangle,
    Diamond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleConfig {
    pub palette: Vec<Rgb>,
    pub background: Rgb,
    pub font_scale: f64,
    pub grid: bool,
    pub legend_position: LegendPosition,
    pub marker_shape: MarkerShape,
    pub marker_size_px: u32,
    pub line_width_px: u32,
    pub bar_width_fraction: f64,
}

/// Minimum per-channel separation between palette colours and against the background.
pub const MIN_CONTRAST: u8 = 30;

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            palette: vec![
                Rgb::new(31, 119, 180),
                Rgb::new(255, 127, 14),
                Rgb::new(44, 160, 44),
                Rgb::new(214, 39, 40),
                Rgb::new(148, 103, 189),
                Rgb::new(140, 86, 75),
                Rgb::new(227, 119, 194),
                Rgb::new(23, 190, 207),
            ],
            background: Rgb::WHITE,
            font_scale: 1.0,
            grid: true,
            legend_position: LegendPosition::Right,
            marker_shape: MarkerShape::Circle,
            marker_size_px: 7,
            line_width_px: 2,
            bar_width_fraction: 0.8,
        }
    }
}

impl StyleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.palette.is_empty() {
            return Err(Error::InvalidSpec("empty palette".into()));
        }
        for (i, a) in self.palette.iter().enumerate() {
            for b in &self.palette[i + 1..] {
                if a.channel_distance(b) < MIN_CONTRAST {
                    return Err(Error::InvalidSpec(format!(
                        "palette colours {a:?} and {b:?} closer than {MIN_CONTRAST}"
                    )));
                }
            }
        }
        if !(self.bar_width_fraction > 0.0 && self.bar_width_fraction <= 1.0) {
            return Err(Error::InvalidSpec("bar_width_fraction must lie in (0, 1]".into()));
        }
        if !(self.font_scale.is_finite() && self.font_scale > 0.0) {
            return Err(Error::InvalidSpec("font_scale must be positive".into()));
        }
        if self.line_width_px == 0 || self.marker_size_px == 0 {
            return Err(Error::InvalidSpec("stroke and marker sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn series_color(&self, i: usize) -> Rgb {
        self.palette[i % self.palette.len()]
    }
}

/// One data series. Categorical charts leave `xs` empty and give one value per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub label: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub xs: Option<Vec<f64>>,
}

/// Renderable description of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_id: String,
    pub chart_type: ChartType,
    pub title: Option<String>,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
    /// Category labels; empty for numeric x axes.
    pub categories: Vec<String>,
    pub series: Vec<SeriesSpec>,
}

impl ChartSpec {
    pub fn is_categorical(&self) -> bool {
        !self.categories.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.series.is_empty() {
            return bad("chart has no series".into());
        }
        for (i, s) in self.series.iter().enumerate() {
            if s.values.is_empty() {
                return bad(format!("series {:?} has no points", s.label));
            }
            if s.label.trim().is_empty() {
                return bad("empty series label".into());
            }
            if self.series[..i].iter().any(|o| o.label == s.label) {
                return bad(format!("duplicate series label {:?}", s.label));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return bad(format!("non-finite value in {:?}", s.label));
            }
            match (&s.xs, self.is_categorical()) {
                (None, true) if s.values.len() == self.categories.len() => {}
                (Some(xs), false) if xs.len() == s.values.len() && xs.iter().all(|x| x.is_finite()) => {}
                _ => return bad(format!("series {:?} does not match the x axis", s.label)),
            }
        }
        match self.chart_type {
            ChartType::Bar | ChartType::GroupedBar => {
                if !self.is_categorical() {
                    return bad("bar charts need categories".into());
                }
                if self.chart_type == ChartType::Bar && self.series.len() != 1 {
                    return bad("bar chart takes exactly one series".into());
                }
                if self.series.iter().flat_map(|s| &s.values).any(|v| *v < 0.0) {
                    return bad("bar values must be non-negative".into());
                }
            }
            ChartType::Scatter if self.is_categorical() => {
                return bad("scatter needs a numeric x axis".into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// Geometry recorded while laying out a chart, used by the quality filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartLayout {
    pub plot_area: PlotRect,
    pub text_boxes: Vec<PlotRect>,
    pub legend: Option<PlotRect>,
    pub glyph_scale: i32,
    pub rotated_x_labels: bool,
}

impl ChartLayout {
    fn scaled(&self, f: f64) -> ChartLayout {
        ChartLayout {
            plot_area: self.plot_area.scaled(f),
            text_boxes: self.text_boxes.iter().map(|b| b.scaled(f)).collect(),
            legend: self.legend.map(|l| l.scaled(f)),
            glyph_scale: self.glyph_scale,
            rotated_x_labels: self.rotated_x_labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedChart {
    pub image: Raster,
    pub calibration: AxisCalibration,
    pub annotation: ChartAnnotation,
    pub layout: ChartLayout,
    pub style: StyleConfig,
}

/// Evenly spaced "nice" ticks (steps of 1, 2 or 5 times a power of ten).
#[derive(Debug, Clone, PartialEq)]
struct Ticks {
    first: i64,
    last: i64,
    step: f64,
    decimals: usize,
}

impl Ticks {
    fn covering(lo: f64, hi: f64, target: f64) -> Ticks {
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let raw = span / target;
        let mag = libm::pow(10.0, libm::floor(libm::log10(raw)));
        let norm = raw / mag;
        let step = mag
            * if norm <= 1.0 {
                1.0
            } else if norm <= 2.0 {
                2.0
            } else if norm <= 5.0 {
                5.0
            } else {
                10.0
            };
        let first = libm::floor(lo / step) as i64;
        let mut last = libm::ceil(hi / step) as i64;
        if last <= first {
            last = first + 1;
        }
        let decimals = if step >= 1.0 {
            0
        } else {
            libm::ceil(-libm::log10(step) - 1e-9) as usize
        };
        Ticks {
            first,
            last,
            step,
            decimals,
        }
    }

    fn lo(&self) -> f64 {
        self.first as f64 * self.step
    }

    fn hi(&self) -> f64 {
        self.last as f64 * self.step
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (self.first..=self.last).map(move |k| k as f64 * self.step)
    }

    fn label(&self, v: f64) -> String {
        let s = format!("{:.*}", self.decimals, v);
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].into()
        } else {
            s
        }
    }
}

fn padded_range(values: impl Iterator<Item = f64>, from_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if from_zero {
        lo = 0.0;
    }
    if hi - lo <= 0.0 {
        let d = if hi.abs() > 0.0 { hi.abs() * 0.1 } else { 1.0 };
        hi += d;
        if !from_zero {
            lo -= d;
        }
    }
    let pad = (hi - lo) * 0.05;
    (if from_zero { 0.0 } else { lo - pad }, hi + pad)
}

struct LegendEntry<'a> {
    label: &'a str,
    color: Rgb,
}

fn legend_entry_w(label: &str, s: i32) -> i32 {
    GLYPH_PX * s + 4 + text_size(label, s).0
}

/// Legend box width, height and each entry's offset inside it.
type LegendBox = (i32, i32, Vec<(i32, i32)>);

/// Row layout for horizontal legends.
fn legend_rows(entries: &[LegendEntry], s: i32, max_w: i32) -> Result<LegendBox> {
    let row_h = GLYPH_PX * s + 6;
    let mut offsets = Vec::with_capacity(entries.len());
    let (mut x, mut y, mut widest) = (6, 6, 0);
    for e in entries {
        let w = legend_entry_w(e.label, s);
        if w + 12 > max_w {
            return Err(Error::Layout(format!(
                "legend entry {:?} wider than the image",
                e.label
            )));
        }
        if x > 6 && x + w + 6 > max_w {
            x = 6;
            y += row_h;
        }
        offsets.push((x, y));
        x += w + 12;
        widest = widest.max(x - 6);
    }
    Ok((widest, y + row_h, offsets))
}

fn legend_column(entries: &[LegendEntry], s: i32) -> (i32, i32, Vec<(i32, i32)>) {
    let row_h = GLYPH_PX * s + 6;
    let w = entries.iter().map(|e| legend_entry_w(e.label, s)).max().unwrap_or(0) + 12;
    let offsets = (0..entries.len()).map(|i| (6, 6 + i as i32 * row_h)).collect();
    (w, 6 + entries.len() as i32 * row_h, offsets)
}

fn draw_marker(img: &mut Raster, at: PixelPoint, shape: MarkerShape, size: u32, c: Rgb) {
    let h = (size / 2) as i32;
    match shape {
        MarkerShape::Circle => img.fill_disc(at.x, at.y, f64::from(size) / 2.0, c),
        MarkerShape::Square => img.fill_rect(at.x - h, at.y - h, at.x + h + 1, at.y + h + 1, c),
        MarkerShape::Diamond => {
            for dy in -h..=h {
                let w = h - dy.abs();
                img.fill_rect(at.x - w, at.y + dy, at.x + w + 1, at.y + dy + 1, c);
            }
        }
        MarkerShape::Triangle => {
            for dy in -h..=h {
                let w = (dy + h) / 2;
                img.fill_rect(at.x - w, at.y + dy, at.x + w + 1, at.y + dy + 1, c);
            }
        }
    }
}

fn glyph_scale_candidates(font_scale: f64) -> impl Iterator<Item = i32> {
    let top = (libm::round(font_scale) as i32).clamp(1, 3);
    (1..=top).rev()
}

/// Renders a chart and its ground truth. Deterministic in all inputs.
///
/// Text that cannot be placed at any glyph scale down to 1 yields
/// [`Error::Layout`]; callers may retry with another style.
pub fn rasterize(spec: &ChartSpec, style: &StyleConfig, width: u32, height: u32) -> Result<RenderedChart> {
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(Error::InvalidArgument(format!(
            "image must be at least {MIN_DIMENSION}x{MIN_DIMENSION}, got {width}x{height}"
        )));
    }
    spec.validate()?;
    style.validate()?;
    let mut last_err = None;
    for s in glyph_scale_candidates(style.font_scale) {
        match rasterize_at_scale(spec, style, width as i32, height as i32, s) {
            Ok(rc) => return Ok(rc),
            Err(e @ Error::Layout(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Layout("no glyph scale available".into())))
}

fn rasterize_at_scale(spec: &ChartSpec, style: &StyleConfig, w: i32, h: i32, s: i32) -> Result<RenderedChart> {
    let glyph = GLYPH_PX * s;
    let is_bar = spec.chart_type.is_bar();
    let categorical = spec.is_categorical();

    let (ylo, yhi) = padded_range(spec.series.iter().flat_map(|se| se.values.iter().copied()), is_bar);
    let yticks = Ticks::covering(ylo, yhi, 5.0);
    let y_range = [if is_bar { 0.0 } else { yticks.lo() }, yticks.hi()];
    let ytick_labels: Vec<(f64, String)> = yticks.values().map(|v| (v, yticks.label(v))).collect();

    let xticks = (!categorical).then(|| {
        let (lo, hi) = padded_range(spec.series.iter().flat_map(|se| se.xs.iter().flatten().copied()), false);
        Ticks::covering(lo, hi, 6.0)
    });

    let entries: Vec<LegendEntry> = spec
        .series
        .iter()
        .enumerate()
        .map(|(i, se)| LegendEntry {
            label: &se.label,
            color: style.series_color(i),
        })
        .collect();

    // Horizontal margins.
    let ytick_w = ytick_labels.iter().map(|(_, l)| text_size(l, s).0).max().unwrap_or(0);
    let ylabel_w = if spec.y_label.is_some() { glyph + 6 } else { 0 };
    let left = PAD + ylabel_w + ytick_w + 4 + TICK_LEN;
    let mut right_margin = PAD + glyph;
    let mut legend_box: Option<LegendBox> = None;
    match style.legend_position {
        LegendPosition::Right => {
            let col = legend_column(&entries, s);
            right_margin = PAD + col.0 + PAD;
            legend_box = Some(col);
        }
        LegendPosition::Top | LegendPosition::Bottom => {
            legend_box = Some(legend_rows(&entries, s, w - 2 * PAD)?);
        }
        LegendPosition::Inside => legend_box = Some(legend_column(&entries, s)),
        LegendPosition::None => {}
    }
    let right = w - right_margin;
    if right - left < MIN_PLOT_W {
        return Err(Error::Layout("plot area too narrow".into()));
    }
    let plot_w = f64::from(right - left);

    // X tick placement decides label orientation.
    let x_labels: Vec<(f64, String)> = match &xticks {
        None => {
            let n = spec.categories.len() as f64;
            spec.categories
                .iter()
                .enumerate()
                .map(|(i, c)| (f64::from(left) + (i as f64 + 0.5) * plot_w / n, c.clone()))
                .collect()
        }
        Some(t) => t
            .values()
            .map(|v| (f64::from(left) + (v - t.lo()) / (t.hi() - t.lo()) * plot_w, t.label(v)))
            .collect(),
    };
    let spacing = if x_labels.len() > 1 {
        x_labels[1].0 - x_labels[0].0
    } else {
        plot_w
    };
    let widest_x = x_labels.iter().map(|(_, l)| text_size(l, s).0).max().unwrap_or(0);
    let rotated = f64::from(widest_x + 4) > spacing;
    if rotated && f64::from(glyph + 2) > spacing {
        return Err(Error::Layout("x tick labels do not fit".into()));
    }
    let xlabels_h = if rotated { widest_x } else { glyph };

    // Vertical margins.
    let title_h = if spec.title.is_some() { glyph + PAD } else { 0 };
    let mut top = PAD + title_h + glyph / 2;
    if let (LegendPosition::Top, Some((_, lh, _))) = (style.legend_position, &legend_box) {
        top += lh + 6;
    }
    let xlabel_h = if spec.x_label.is_some() { glyph + 6 } else { 0 };
    let mut bottom_margin = TICK_LEN + 4 + xlabels_h + xlabel_h + PAD;
    if let (LegendPosition::Bottom, Some((_, lh, _))) = (style.legend_position, &legend_box) {
        bottom_margin += lh + 6;
    }
    let bottom = h - bottom_margin;
    if bottom - top < MIN_PLOT_H {
        return Err(Error::Layout("plot area too short".into()));
    }
    let plot = PlotRect::new(left, top, right, bottom);

    let x_range = match &xticks {
        None => XRange::Slots(x_labels.iter().map(|(p, _)| *p).collect()),
        Some(t) => XRange::Numeric([t.lo(), t.hi()]),
    };
    let calibration = AxisCalibration::new(plot, x_range, y_range)?;

    // Anchors.
    let n_series = spec.series.len();
    let slot_w = if categorical {
        plot_w / spec.categories.len() as f64
    } else {
        0.0
    };
    let group_w = slot_w * style.bar_width_fraction;
    let bar_w = if spec.chart_type == ChartType::GroupedBar {
        group_w / n_series as f64
    } else {
        group_w
    };
    if is_bar && bar_w < MIN_BAR_PX {
        return Err(Error::Layout(format!("bars {bar_w:.2} px wide")));
    }
    let mut anchors: Vec<Vec<PixelPoint>> = Vec::with_capacity(n_series);
    let mut bar_cols: Vec<Vec<(i32, i32)>> = Vec::new();
    for (si, se) in spec.series.iter().enumerate() {
        let mut pts = Vec::with_capacity(se.values.len());
        let mut cols = Vec::new();
        for (pi, &v) in se.values.iter().enumerate() {
            let x = match &se.xs {
                Some(xs) => xs[pi],
                None => pi as f64,
            };
            let (fx, fy) = calibration.chart_to_pixel_f64(ChartPoint::new(x, v))?;
            if is_bar {
                let center = if spec.chart_type == ChartType::GroupedBar {
                    fx - group_w / 2.0 + (si as f64 + 0.5) * bar_w
                } else {
                    fx
                };
                let anchor = PixelPoint::new(round_px(center), round_px(fy));
                if f64::from(bottom - anchor.y) < MIN_BAR_PX {
                    return Err(Error::Layout(format!("bar for {v} shorter than {MIN_BAR_PX} px")));
                }
                let c0 = round_px(center - bar_w / 2.0);
                let c1 = round_px(center + bar_w / 2.0).max(c0 + 1);
                cols.push((c0, c1));
                pts.push(anchor);
            } else {
                pts.push(PixelPoint::new(round_px(fx), round_px(fy)));
            }
        }
        anchors.push(pts);
        bar_cols.push(cols);
    }

    // Legend placement.
    let legend_rect = legend_box.as_ref().map(|(lw, lh, _)| match style.legend_position {
        LegendPosition::Right => PlotRect::new(right + PAD, top, right + PAD + lw, top + lh),
        LegendPosition::Top => {
            let x = (w - lw) / 2;
            PlotRect::new(x, PAD + title_h, x + lw, PAD + title_h + lh)
        }
        LegendPosition::Bottom => {
            let x = (w - lw) / 2;
            PlotRect::new(x, h - PAD - lh, x + lw, h - PAD)
        }
        _ => inside_legend_rect(plot, *lw, *lh, &anchors),
    });
    if let Some(r) = legend_rect {
        if r.left < 0 || r.top < 0 || r.right > w || r.bottom > h {
            return Err(Error::Layout("legend does not fit".into()));
        }
    }

    // Draw.
    let mut img = Raster::new(w as u32, h as u32, style.background);
    let grid_color = Rgb::new(
        style.background.r.saturating_sub(28),
        style.background.g.saturating_sub(28),
        style.background.b.saturating_sub(28),
    );
    let mut text_boxes = Vec::new();
    for (v, label) in &ytick_labels {
        let y = round_px(
            calibration
                .chart_to_pixel_f64(ChartPoint::new(
                    if categorical {
                        0.0
                    } else {
                        calibration_x_lo(&calibration)
                    },
                    *v,
                ))?
                .1,
        );
        if style.grid && y > top && y < bottom {
            img.fill_rect(left + 1, y, right + 1, y + 1, grid_color);
        }
        img.fill_rect(left - TICK_LEN, y, left, y + 1, AXIS_COLOR);
        let (tw, _) = text_size(label, s);
        let b = text_box(label, left - TICK_LEN - 4 - tw, y - glyph / 2, s, false);
        draw_text(&mut img, label, b.left, b.top, s, false, TEXT_COLOR);
        text_boxes.push(b);
    }
    for (xp, label) in &x_labels {
        let x = round_px(*xp);
        if style.grid && !categorical && x > left && x < right {
            img.fill_rect(x, top, x + 1, bottom, grid_color);
        }
        img.fill_rect(x, bottom + 1, x + 1, bottom + 1 + TICK_LEN, AXIS_COLOR);
        let (tw, _) = text_size(label, s);
        let b = if rotated {
            text_box(label, x - glyph / 2, bottom + TICK_LEN + 4, s, true)
        } else {
            text_box(label, x - tw / 2, bottom + TICK_LEN + 4, s, false)
        };
        draw_text(&mut img, label, b.left, b.top, s, rotated, TEXT_COLOR);
        text_boxes.push(b);
    }
    img.fill_rect(left, top, left + 1, bottom + 1, AXIS_COLOR);
    img.fill_rect(left, bottom, right + 1, bottom + 1, AXIS_COLOR);

    match spec.chart_type {
        ChartType::Bar | ChartType::GroupedBar => {
            for (si, cols) in bar_cols.iter().enumerate() {
                let c = style.series_color(si);
                for (pi, (c0, c1)) in cols.iter().enumerate() {
                    img.fill_rect(*c0, anchors[si][pi].y, *c1, bottom, c);
                }
            }
        }
        ChartType::Line => {
            for (si, pts) in anchors.iter().enumerate() {
                let c = style.series_color(si);
                for seg in pts.windows(2) {
                    img.draw_line_aa(
                        (f64::from(seg[0].x), f64::from(seg[0].y)),
                        (f64::from(seg[1].x), f64::from(seg[1].y)),
                        f64::from(style.line_width_px),
                        c,
                    );
                }
            }
            for (si, pts) in anchors.iter().enumerate() {
                for p in pts {
                    draw_marker(
                        &mut img,
                        *p,
                        style.marker_shape,
                        style.marker_size_px,
                        style.series_color(si),
                    );
                }
            }
        }
        ChartType::Scatter => {
            for (si, pts) in anchors.iter().enumerate() {
                for p in pts {
                    draw_marker(
                        &mut img,
                        *p,
                        style.marker_shape,
                        style.marker_size_px,
                        style.series_color(si),
                    );
                }
            }
        }
    }

    if let (Some(r), Some((_, _, offsets))) = (legend_rect, &legend_box) {
        img.fill_rect(r.left, r.top, r.right, r.bottom, style.background);
        img.stroke_rect(r.left, r.top, r.right, r.bottom, grid_color);
        for (e, (ox, oy)) in entries.iter().zip(offsets) {
            let (x, y) = (r.left + ox, r.top + oy);
            img.fill_rect(x, y, x + glyph, y + glyph, e.color);
            let b = text_box(e.label, x + glyph + 4, y, s, false);
            draw_text(&mut img, e.label, b.left, b.top, s, false, TEXT_COLOR);
            text_boxes.push(b);
        }
    }

    if let Some(t) = &spec.title {
        let (tw, _) = text_size(t, s);
        let b = text_box(t, (w - tw) / 2, PAD, s, false);
        draw_text(&mut img, t, b.left, b.top, s, false, TEXT_COLOR);
        text_boxes.push(b);
    }
    if let Some(l) = &spec.x_label {
        let (tw, _) = text_size(l, s);
        let b = text_box(
            l,
            left + (right - left - tw) / 2,
            bottom + TICK_LEN + 4 + xlabels_h + 6,
            s,
            false,
        );
        draw_text(&mut img, l, b.left, b.top, s, false, TEXT_COLOR);
        text_boxes.push(b);
    }
    if let Some(l) = &spec.y_label {
        let (tw, _) = text_size(l, s);
        let b = text_box(l, PAD, top + (bottom - top - tw) / 2, s, true);
        draw_text(&mut img, l, b.left, b.top, s, true, TEXT_COLOR);
        text_boxes.push(b);
    }
    for b in &text_boxes {
        if b.left < 0 || b.top < 0 || b.right > w || b.bottom > h {
            return Err(Error::Layout("text runs off the image".into()));
        }
    }

    // Annotation.
    let occluded = occlusion_flags(
        &anchors,
        is_bar,
        legend_rect.filter(|_| style.legend_position == LegendPosition::Inside),
        style,
    );
    let series = spec
        .series
        .iter()
        .enumerate()
        .map(|(si, se)| AnnotatedSeries {
            label: se.label.clone(),
            points: se
                .values
                .iter()
                .enumerate()
                .map(|(pi, &v)| AnnotatedPoint {
                    category: categorical.then(|| spec.categories[pi].clone()),
                    x: se.xs.as_ref().map(|xs| xs[pi]),
                    y: v,
                    px: anchors[si][pi],
                    occluded: occluded[si][pi],
                })
                .collect(),
        })
        .collect();
    let annotation = ChartAnnotation {
        chart_id: spec.chart_id.clone(),
        chart_type: spec.chart_type,
        title: spec.title.clone(),
        x_axis: XAxis {
            label: spec.x_label.clone(),
            kind: if categorical {
                AxisKind::Categorical
            } else {
                AxisKind::Numeric
            },
            categories: categorical.then(|| spec.categories.clone()),
            range: xticks.as_ref().map(|t| [t.lo(), t.hi()]),
        },
        y_axis: YAxis {
            label: spec.y_label.clone(),
            range: y_range,
        },
        calibration: calibration.clone(),
        image: ImageSize {
            width: w as u32,
            height: h as u32,
        },
        series,
    };
    Ok(RenderedChart {
        image: img,
        calibration,
        annotation,
        layout: ChartLayout {
            plot_area: plot,
            text_boxes,
            legend: legend_rect,
            glyph_scale: s,
            rotated_x_labels: rotated,
        },
        style: style.clone(),
    })
}

fn calibration_x_lo(c: &AxisCalibration) -> f64 {
    match c.x_range() {
        XRange::Numeric([lo, _]) => *lo,
        XRange::Slots(_) => 0.0,
    }
}

/// Picks the plot corner whose legend box covers the fewest anchors.
fn inside_legend_rect(plot: PlotRect, lw: i32, lh: i32, anchors: &[Vec<PixelPoint>]) -> PlotRect {
    let inset = 6;
    let corners = [
        PlotRect::new(
            plot.right - inset - lw,
            plot.top + inset,
            plot.right - inset,
            plot.top + inset + lh,
        ),
        PlotRect::new(
            plot.left + inset,
            plot.top + inset,
            plot.left + inset + lw,
            plot.top + inset + lh,
        ),
        PlotRect::new(
            plot.right - inset - lw,
            plot.bottom - inset - lh,
            plot.right - inset,
            plot.bottom - inset,
        ),
        PlotRect::new(
            plot.left + inset,
            plot.bottom - inset - lh,
            plot.left + inset + lw,
            plot.bottom - inset,
        ),
    ];
    let covered = |r: &PlotRect| anchors.iter().flatten().filter(|p| r.contains(**p, 8)).count();
    let mut best = corners[0];
    let mut best_n = covered(&best);
    for c in &corners[1..] {
        let n = covered(c);
        if n < best_n {
            best = *c;
            best_n = n;
        }
    }
    best
}

fn occlusion_flags(
    anchors: &[Vec<PixelPoint>],
    is_bar: bool,
    inside_legend: Option<PlotRect>,
    style: &StyleConfig,
) -> Vec<Vec<bool>> {
    let mut flags: Vec<Vec<bool>> = anchors.iter().map(|s| vec![false; s.len()]).collect();
    let flat: Vec<(usize, usize, PixelPoint)> = anchors
        .iter()
        .enumerate()
        .flat_map(|(si, s)| s.iter().enumerate().map(move |(pi, p)| (si, pi, *p)))
        .collect();
    if !is_bar {
        for i in 0..flat.len() {
            for j in i + 1..flat.len() {
                if flat[i].2.distance(&flat[j].2) <= OCCLUSION_RADIUS_PX {
                    flags[flat[i].0][flat[i].1] = true;
                    flags[flat[j].0][flat[j].1] = true;
                }
            }
        }
    }
    if let Some(r) = inside_legend {
        let reach = (style.marker_size_px / 2) as i32 + 1;
        for (si, pi, p) in &flat {
            if r.contains(*p, reach) {
                flags[*si][*pi] = true;
            }
        }
    }
    flags
}

/// Result of drawing feedback markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub image: Raster,
    /// Points whose centre fell outside the image and were not drawn.
    pub clipped: Vec<PixelPoint>,
}

/// Draws each point as a gold disc (radius 6) with a 1 px black outline on a
/// copy of `image`. Points whose centre is outside the image are skipped.
pub fn overlay_markers(image: &Raster, points: &[PixelPoint]) -> Overlay {
    let mut out = image.clone();
    let mut clipped = Vec::new();
    let outer = MARKER_RADIUS_PX + MARKER_OUTLINE_PX;
    for p in points {
        if !p.in_bounds(image.width(), image.height()) {
            clipped.push(*p);
            continue;
        }
        out.fill_disc(p.x, p.y, outer, MARKER_OUTLINE);
        out.fill_disc(p.x, p.y, MARKER_RADIUS_PX, MARKER_COLOR);
    }
    Overlay { image: out, clipped }
}

/// Exact stored colour at `px`.
pub fn probe(image: &Raster, px: PixelPoint) -> Result<Rgb> {
    image.probe(px)
}

fn check_target(target: u32) -> Result<()> {
    if target == 0 || !target.is_multiple_of(28) {
        return Err(Error::InvalidArgument(format!(
            "resize target {target} is not a positive multiple of 28"
        )));
    }
    Ok(())
}

/// Scale factor and output size that bring the longer side to `target`.
pub fn resize_dims(width: u32, height: u32, target: u32) -> (f64, u32, u32) {
    let longer = width.max(height);
    let f = f64::from(target) / f64::from(longer);
    let sw = libm::rint(f64::from(width) * f).max(1.0) as u32;
    let sh = libm::rint(f64::from(height) * f).max(1.0) as u32;
    if width >= height {
        (f, target, sh)
    } else {
        (f, sw, target)
    }
}

/// Bilinear resample of a bare raster so its longer side equals `target`.
pub fn resize_raster_longest(image: &Raster, target: u32) -> Result<(Raster, f64)> {
    check_target(target)?;
    let (f, w, h) = resize_dims(image.width(), image.height(), target);
    if w == image.width() && h == image.height() {
        return Ok((image.clone(), 1.0));
    }
    Ok((bilinear(image, w, h), f))
}

fn bilinear(src: &Raster, w: u32, h: u32) -> Raster {
    let sx = f64::from(src.width()) / f64::from(w);
    let sy = f64::from(src.height()) / f64::from(h);
    let maxx = src.width() as i32 - 1;
    let maxy = src.height() as i32 - 1;
    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    for y in 0..h {
        let fy = ((f64::from(y) + 0.5) * sy - 0.5).clamp(0.0, f64::from(maxy));
        let y0 = libm::floor(fy) as i32;
        let y1 = (y0 + 1).min(maxy);
        let ty = fy - f64::from(y0);
        for x in 0..w {
            let fx = ((f64::from(x) + 0.5) * sx - 0.5).clamp(0.0, f64::from(maxx));
            let x0 = libm::floor(fx) as i32;
            let x1 = (x0 + 1).min(maxx);
            let tx = fx - f64::from(x0);
            let p = |xx, yy| src.get(xx, yy).unwrap_or(Rgb::BLACK);
            let (a, b, c, d) = (p(x0, y0), p(x1, y0), p(x0, y1), p(x1, y1));
            let ch = |a: u8, b: u8, c: u8, d: u8| {
                let top = f64::from(a) * (1.0 - tx) + f64::from(b) * tx;
                let bot = f64::from(c) * (1.0 - tx) + f64::from(d) * tx;
                libm::round(top * (1.0 - ty) + bot * ty) as u8
            };
            data.extend_from_slice(&[ch(a.r, b.r, c.r, d.r), ch(a.g, b.g, c.g, d.g), ch(a.b, b.b, c.b, d.b)]);
        }
    }
    Raster::from_raw(w, h, data).expect("buffer sized to w*h*3")
}

/// The annotation of an image scaled by `f` to `width` x `height`.
pub fn scale_annotation(annotation: &ChartAnnotation, f: f64, width: u32, height: u32) -> Result<ChartAnnotation> {
    let mut out = annotation.clone();
    out.calibration = annotation.calibration.scaled(f)?;
    out.image = ImageSize { width, height };
    for s in &mut out.series {
        for p in &mut s.points {
            p.px = PixelPoint::new(round_px(f64::from(p.px.x) * f), round_px(f64::from(p.px.y) * f));
        }
    }
    Ok(out)
}

/// Resizes an image and its annotation together; see [`resize_longest`].
pub fn resize_annotated(
    image: &Raster,
    annotation: &ChartAnnotation,
    target: u32,
) -> Result<(Raster, ChartAnnotation)> {
    let (resized, f) = resize_raster_longest(image, target)?;
    if f == 1.0 {
        return Ok((resized, annotation.clone()));
    }
    let ann = scale_annotation(annotation, f, resized.width(), resized.height())?;
    Ok((resized, ann))
}

/// Resizes so the longer side equals `target` (a multiple of 28), rescaling
/// anchors, calibration and layout by the same factor.
pub fn resize_longest(rc: &RenderedChart, target: u32) -> Result<RenderedChart> {
    let (image, f) = resize_raster_longest(&rc.image, target)?;
    if f == 1.0 {
        return Ok(rc.clone());
    }
    let annotation = scale_annotation(&rc.annotation, f, image.width(), image.height())?;
    Ok(RenderedChart {
        image,
        calibration: annotation.calibration.clone(),
        annotation,
        layout: rc.layout.scaled(f),
        style: rc.style.clone(),
    })
}
