//! Heuristic rejection rules for low-quality renders.

use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::render::{RenderedChart, MIN_CONTRAST};

/// Text boxes may overlap by at most this fraction of the smaller box.
pub const MAX_TEXT_OVERLAP: f64 = 0.10;
/// Legend may cover at most this fraction of the plot area.
pub const MAX_LEGEND_COVERAGE: f64 = 0.25;
/// At most this fraction of anchors may be occluded.
pub const MAX_OCCLUDED_FRACTION: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    TextOverlap,
    Contrast,
    LegendCoverage,
    Occlusion,
}

impl FilterRule {
    pub fn name(self) -> &'static str {
        match self {
            FilterRule::TextOverlap => "text_overlap",
            FilterRule::Contrast => "contrast",
            FilterRule::LegendCoverage => "legend_coverage",
            FilterRule::Occlusion => "occlusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterVerdict {
    Pass,
    Fail { rule: FilterRule, detail: String },
}

impl FilterVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, FilterVerdict::Pass)
    }
}

pub fn quality_filter(rc: &RenderedChart) -> FilterVerdict {
    let fail = |rule, detail: String| FilterVerdict::Fail { rule, detail };
    let boxes = &rc.layout.text_boxes;
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            if let Some(overlap) = a.intersection(b) {
                let smaller = a.area().min(b.area()).max(1);
                if overlap.area() as f64 > MAX_TEXT_OVERLAP * smaller as f64 {
                    return fail(FilterRule::TextOverlap, alloc::format!("{a:?} overlaps {b:?}"));
                }
            }
        }
    }
    let bg = rc.style.background;
    for i in 0..rc.annotation.series.len() {
        let c = rc.style.series_color(i);
        if c.channel_distance(&bg) < MIN_CONTRAST {
            return fail(
                FilterRule::Contrast,
                alloc::format!("series colour {c:?} too close to background {bg:?}"),
            );
        }
    }
    if let Some(legend) = rc.layout.legend {
        let plot = rc.layout.plot_area;
        let covered = legend.intersection(&plot).map_or(0, |r| r.area());
        if covered as f64 > MAX_LEGEND_COVERAGE * plot.area() as f64 {
            return fail(FilterRule::LegendCoverage, alloc::format!("legend covers {covered} px"));
        }
    }
    let total = rc.annotation.point_count();
    let occluded = rc
        .annotation
        .series
        .iter()
        .flat_map(|s| &s.points)
        .filter(|p| p.occluded)
        .count();
    if total > 0 && occluded as f64 > MAX_OCCLUDED_FRACTION * total as f64 {
        return fail(
            FilterRule::Occlusion,
            alloc::format!("{occluded} of {total} anchors occluded"),
        );
    }
    FilterVerdict::Pass
}
