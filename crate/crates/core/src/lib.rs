#![no_std]
//! Chart parsing toolkit core: coordinate calibration, chart templates with
//! pixel ground truth, synthetic corpus generation, the visual self-refine
//! loop and the structural evaluation metrics.
//!
//! Everything here is pure computation over `alloc`; file formats, HTTP and
//! the command-line tool live in the companion `chartrefine` crate.

extern crate alloc;

pub mod annotation;
pub mod engine;
pub mod error;
pub mod font;
pub mod geom;
pub mod matching;
pub mod prompts;
pub mod quality;
pub mod raster;
pub mod refine;
pub mod render;
pub mod scrm;
pub mod words;

pub use annotation::{
    triplets_from, AnnotatedPoint, AnnotatedSeries, AxisKind, ChartAnnotation, ChartType, ImageSize, ParseResult,
    ParsedPoint, ParsedSeries, Triplet, TripletSource, XAxis, YAxis,
};
pub use error::{Error, Result};
pub use geom::{AxisCalibration, ChartPoint, PixelPoint, PlotRect, XRange};
pub use raster::{Raster, Rgb};
pub use render::{
    overlay_markers, probe, rasterize, resize_longest, ChartSpec, LegendPosition, MarkerShape, RenderedChart,
    SeriesSpec, StyleConfig,
};
