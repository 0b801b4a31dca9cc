//! Ground-truth annotations, parse results and the triplets evaluated by SCRM.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{AxisCalibration, ChartPoint, PixelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Line,
    Bar,
    GroupedBar,
    Scatter,
}

impl ChartType {
    pub const ALL: [ChartType; 4] = [
        ChartType::Line,
        ChartType::Bar,
        ChartType::GroupedBar,
        ChartType::Scatter,
    ];

    pub fn is_bar(self) -> bool {
        matches!(self, ChartType::Bar | ChartType::GroupedBar)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChartType::Line => "line",
            ChartType::Bar => "bar",
            ChartType::GroupedBar => "grouped_bar",
            ChartType::Scatter => "scatter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XAxis {
    pub label: Option<String>,
    pub kind: AxisKind,
    pub categories: Option<Vec<String>>,
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YAxis {
    pub label: Option<String>,
    pub range: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPoint {
    pub category: Option<String>,
    pub x: Option<f64>,
    pub y: f64,
    pub px: PixelPoint,
    /// Anchor sits within the occlusion radius of another anchor or under the legend.
    #[serde(default, skip_serializing_if = "is_false")]
    pub occluded: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSeries {
    pub label: String,
    pub points: Vec<AnnotatedPoint>,
}

/// Ground truth for one chart image: data values, pixel anchors and calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartAnnotation {
    pub chart_id: String,
    pub chart_type: ChartType,
    pub title: Option<String>,
    pub x_axis: XAxis,
    pub y_axis: YAxis,
    pub calibration: AxisCalibration,
    pub image: ImageSize,
    pub series: Vec<AnnotatedSeries>,
}

impl ChartAnnotation {
    pub fn point_count(&self) -> usize {
        self.series.iter().map(|s| s.points.len()).sum()
    }

    /// All pixel anchors in series-major order.
    pub fn anchors(&self) -> Vec<PixelPoint> {
        self.series.iter().flat_map(|s| s.points.iter().map(|p| p.px)).collect()
    }

    /// Chart-space position of a point: slot index on categorical axes.
    pub fn chart_point(&self, point: &AnnotatedPoint) -> Result<ChartPoint> {
        let x = match self.x_axis.kind {
            AxisKind::Numeric => point
                .x
                .ok_or_else(|| Error::InvalidSpec("numeric point without x".into()))?,
            AxisKind::Categorical => {
                let cat = point
                    .category
                    .as_deref()
                    .ok_or_else(|| Error::InvalidSpec("categorical point without category".into()))?;
                let cats = self.x_axis.categories.as_deref().unwrap_or(&[]);
                cats.iter()
                    .position(|c| c == cat)
                    .ok_or_else(|| Error::InvalidSpec(format!("unknown category {cat:?}")))? as f64
            }
        };
        Ok(ChartPoint::new(x, point.y))
    }

    /// Checks the annotation invariants. `tolerance_px` bounds the distance
    /// between each anchor and the calibrated position of its value; the
    /// horizontal check is skipped for grouped bars, whose bars sit off the
    /// category slot centre.
    pub fn validate(&self, tolerance_px: f64) -> Result<()> {
        for (i, s) in self.series.iter().enumerate() {
            if self.series[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::InvalidSpec(format!("duplicate series label {:?}", s.label)));
            }
        }
        let area = self.calibration.plot_area();
        for s in &self.series {
            for p in &s.points {
                if !p.y.is_finite() || p.x.is_some_and(|x| !x.is_finite()) {
                    return Err(Error::InvalidSpec("non-finite value".into()));
                }
                if !area.contains(p.px, 2) {
                    return Err(Error::OutOfRange(format!("anchor {:?} outside plot area", p.px)));
                }
                let (fx, fy) = self.calibration.chart_to_pixel_f64(self.chart_point(p)?)?;
                let dx = (fx - f64::from(p.px.x)).abs();
                let dy = (fy - f64::from(p.px.y)).abs();
                let x_ok = self.chart_type == ChartType::GroupedBar || dx <= tolerance_px;
                if !x_ok || dy > tolerance_px {
                    return Err(Error::OutOfRange(format!(
                        "anchor {:?} is ({dx:.2}, {dy:.2}) px from its value",
                        p.px
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedPoint {
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub x: Option<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedSeries {
    pub label: String,
    pub points: Vec<ParsedPoint>,
}

/// Structured output of the decode stage: chart metadata and series values.
///
/// Metadata fields are optional so model replies that omit them still parse.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseResult {
    #[serde(default)]
    pub chart_id: String,
    #[serde(default)]
    pub chart_type: Option<ChartType>,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub x_axis: Option<XAxis>,
    #[serde(default)]
    pub y_axis: Option<YAxis>,
    #[serde(default)]
    pub image: Option<ImageSize>,
    pub series: Vec<ParsedSeries>,
}

impl ParseResult {
    pub fn validate(&self) -> Result<()> {
        for s in &self.series {
            if s.label.trim().is_empty() {
                return Err(Error::InvalidSpec("empty series label".into()));
            }
            if s.points
                .iter()
                .any(|p| !p.y.is_finite() || p.x.is_some_and(|x| !x.is_finite()))
            {
                return Err(Error::InvalidSpec(format!("non-finite value in series {:?}", s.label)));
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.series.iter().map(|s| s.points.len()).sum()
    }
}

impl From<&ChartAnnotation> for ParseResult {
    fn from(a: &ChartAnnotation) -> Self {
        ParseResult {
            chart_id: a.chart_id.clone(),
            chart_type: Some(a.chart_type),
            title: a.title.clone(),
            x_axis: Some(a.x_axis.clone()),
            y_axis: Some(a.y_axis.clone()),
            image: Some(a.image),
            series: a
                .series
                .iter()
                .map(|s| ParsedSeries {
                    label: s.label.clone(),
                    points: s
                        .points
                        .iter()
                        .map(|p| ParsedPoint {
                            category: p.category.clone(),
                            x: p.x,
                            y: p.y,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// The unit of comparison for SCRM: (series label, category label, value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    #[serde(rename = "series")]
    pub series_label: String,
    #[serde(rename = "category")]
    pub category_label: String,
    pub value: f64,
}

impl Triplet {
    pub fn new(series: impl Into<String>, category: impl Into<String>, value: f64) -> Self {
        Self {
            series_label: series.into(),
            category_label: category.into(),
            value,
        }
    }
}

/// Anything that flattens to series-major triplets.
pub trait TripletSource {
    fn triplets(&self) -> Vec<Triplet>;
}

fn category_label(category: &Option<String>, x: Option<f64>) -> String {
    match (category, x) {
        (Some(c), _) => c.clone(),
        (None, Some(x)) => format_number(x),
        (None, None) => String::new(),
    }
}

impl TripletSource for ChartAnnotation {
    fn triplets(&self) -> Vec<Triplet> {
        self.series
            .iter()
            .flat_map(|s| {
                s.points
                    .iter()
                    .map(move |p| Triplet::new(s.label.clone(), category_label(&p.category, p.x), p.y))
            })
            .collect()
    }
}

impl TripletSource for ParseResult {
    fn triplets(&self) -> Vec<Triplet> {
        self.series
            .iter()
            .flat_map(|s| {
                s.points
                    .iter()
                    .map(move |p| Triplet::new(s.label.clone(), category_label(&p.category, p.x), p.y))
            })
            .collect()
    }
}

/// One triplet per data point, series-major, point order preserved.
pub fn triplets_from<T: TripletSource + ?Sized>(source: &T) -> Vec<Triplet> {
    source.triplets()
}

/// Shortest decimal rendering that round-trips `v`; negative zero renders as `0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

/// Rounds to `decimals` places, half away from zero.
pub fn round_to(v: f64, decimals: u32) -> f64 {
    let scale = libm::pow(10.0, f64::from(decimals));
    libm::round(v * scale) / scale
}
