//! Hybrid configuration sampling: content and style drawn per chart from a
//! derived seed, rendered by the chart templates and screened by the filter.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::annotation::{round_to, ChartType};
use crate::engine::config::{GeneratorConfig, ValueGenerator};
use crate::engine::filter::{quality_filter, FilterVerdict};
use crate::error::{Error, Result};
use crate::quality::pearson;
use crate::raster::Rgb;
use crate::render::{
    rasterize, ChartSpec, LegendPosition, MarkerShape, RenderedChart, SeriesSpec, StyleConfig, MIN_CONTRAST,
};
use crate::words::{random_token, word_pool};

/// Attempts per corpus slot before generation gives up.
pub const MAX_ATTEMPTS: u32 = 20;
const SERIES_RESAMPLES: u32 = 10;
const MAX_LABEL_CHARS: usize = 12;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_4761_CE4E_5B9D);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for item `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn chart_id(index: u64) -> String {
    format!("chart_{index:06}")
}

/// A chart accepted by the filter, with the attempt that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedChart {
    pub index: u64,
    pub chart: RenderedChart,
    pub attempts: u32,
    pub seed: u64,
}

fn weighted<'a, K: Copy + 'a, R: Rng>(rng: &mut R, items: impl Iterator<Item = (&'a K, &'a f64)>) -> K {
    let items: Vec<(K, f64)> = items.map(|(k, w)| (*k, *w)).filter(|(_, w)| *w > 0.0).collect();
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in &items {
        if u < *w {
            return *k;
        }
        u -= w;
    }
    items[items.len() - 1].0
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct Labeler<'a> {
    pool: &'a [&'static str],
    mix: f64,
}

impl Labeler<'_> {
    fn word<R: Rng>(&self, rng: &mut R) -> String {
        if rng.random::<f64>() < self.mix {
            capitalize(self.pool[rng.random_range(0..self.pool.len())])
        } else {
            let len = rng.random_range(3..=8);
            random_token(rng, len)
        }
    }

    /// Short label, unique within `taken`.
    fn unique<R: Rng>(&self, rng: &mut R, taken: &mut BTreeSet<String>) -> String {
        for _ in 0..64 {
            let mut l = self.word(rng);
            l.truncate(MAX_LABEL_CHARS);
            if taken.insert(l.clone()) {
                return l;
            }
        }
        // pool exhausted for this chart: fall back to random tokens
        loop {
            let l = random_token(rng, 8);
            if taken.insert(l.clone()) {
                return l;
            }
        }
    }

    fn phrase<R: Rng>(&self, rng: &mut R, words: usize) -> String {
        let parts: Vec<String> = (0..words).map(|_| self.word(rng)).collect();
        parts.join(" ")
    }
}

/// Normalised shape in roughly [0, 1].
fn shape<R: Rng>(rng: &mut R, family: ValueGenerator, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut v: Vec<f64> = match family {
        ValueGenerator::IidUniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        ValueGenerator::RandomWalk => {
            let mut acc = 0.0;
            (0..n)
                .map(|_| {
                    acc += normal.sample(rng);
                    acc
                })
                .collect()
        }
        ValueGenerator::SinusoidNoise => {
            let f = rng.random_range(0.5..3.0);
            let phase = rng.random_range(0.0..core::f64::consts::TAU);
            let noise = rng.random_range(0.05..0.3);
            (0..n)
                .map(|i| {
                    libm::sin(core::f64::consts::TAU * f * i as f64 / n as f64 + phase) + noise * normal.sample(rng)
                })
                .collect()
        }
        ValueGenerator::SpikeMixture => {
            let p = rng.random_range(0.1..0.3);
            (0..n)
                .map(|_| {
                    let base = rng.random_range(0.1..0.35);
                    if rng.random::<f64>() < p {
                        base + rng.random_range(0.4..0.65)
                    } else {
                        base
                    }
                })
                .collect()
        }
    };
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for x in &mut v {
            *x = (*x - lo) / (hi - lo);
        }
    }
    v
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - libm::fabs(hp % 2.0 - 1.0));
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to = |u: f64| libm::round((u + m) * 255.0).clamp(0.0, 255.0) as u8;
    Rgb::new(to(r), to(g), to(b))
}

fn sample_style<R: Rng>(rng: &mut R, n_series: usize, chart_type: ChartType) -> StyleConfig {
    const BACKGROUNDS: [Rgb; 5] = [
        Rgb::WHITE,
        Rgb::WHITE,
        Rgb::new(250, 248, 240),
        Rgb::new(240, 244, 248),
        Rgb::new(245, 245, 245),
    ];
    let background = BACKGROUNDS[rng.random_range(0..BACKGROUNDS.len())];
    let mut palette: Vec<Rgb> = Vec::with_capacity(n_series);
    let mut tries = 0;
    while palette.len() < n_series.max(1) {
        tries += 1;
        let c = hsv(
            rng.random_range(0.0..360.0),
            rng.random_range(0.45..1.0),
            rng.random_range(0.3..0.85),
        );
        let spread = if tries > 200 { MIN_CONTRAST } else { 50 };
        if c.channel_distance(&background) >= 60 && palette.iter().all(|p| p.channel_distance(&c) >= spread) {
            palette.push(c);
        }
    }
    let legend_choices: &[LegendPosition] = if chart_type.is_bar() {
        &[LegendPosition::Top, LegendPosition::Right, LegendPosition::Bottom]
    } else {
        &[
            LegendPosition::Top,
            LegendPosition::Right,
            LegendPosition::Bottom,
            LegendPosition::Inside,
        ]
    };
    let mut legend_position = legend_choices[rng.random_range(0..legend_choices.len())];
    if n_series == 1 && rng.random::<f64>() < 0.5 {
        legend_position = LegendPosition::None;
    }
    const SHAPES: [MarkerShape; 4] = [
        MarkerShape::Circle,
        MarkerShape::Square,
        MarkerShape::Triangle,
        MarkerShape::Diamond,
    ];
    StyleConfig {
        palette,
        background,
        font_scale: if rng.random::<f64>() < 0.35 { 2.0 } else { 1.0 },
        grid: rng.random::<f64>() < 0.6,
        legend_position,
        marker_shape: SHAPES[rng.random_range(0..SHAPES.len())],
        marker_size_px: rng.random_range(5..=9),
        line_width_px: rng.random_range(1..=3),
        bar_width_fraction: rng.random_range(0.5..0.9),
    }
}

/// Rejects a series set when any aligned pair reaches the threshold.
fn max_pair_correlation(series: &[SeriesSpec], categorical: bool) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let aligned = categorical || series[i].xs == series[j].xs;
            if aligned && series[i].values.len() >= 3 {
                if let Some(r) = pearson(&series[i].values, &series[j].values) {
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

enum SpecFailure {
    Correlation(f64),
}

fn sample_spec<R: Rng>(
    rng: &mut R,
    config: &GeneratorConfig,
    id: &str,
) -> core::result::Result<ChartSpec, SpecFailure> {
    let pool = word_pool();
    let labeler = Labeler {
        pool: &pool,
        mix: config.label_source_mix,
    };
    let mut chart_type = weighted(rng, config.chart_type_weights.iter());
    let total = rng.random_range(config.points_per_chart[0]..=config.points_per_chart[1]) as usize;
    let n_series = rng.random_range(config.series_per_chart[0]..=config.series_per_chart[1]) as usize;
    match chart_type {
        ChartType::Bar if n_series > 1 => chart_type = ChartType::GroupedBar,
        ChartType::GroupedBar if n_series == 1 => chart_type = ChartType::Bar,
        _ => {}
    }
    let categorical = match chart_type {
        ChartType::Scatter => false,
        ChartType::Line => rng.random::<f64>() < 0.75,
        _ => true,
    };
    let min_total = config.points_per_chart[0] as usize;
    let per_series = if categorical {
        let mut c = (total / n_series).max(2);
        if c * n_series < min_total {
            c = min_total.div_ceil(n_series);
        }
        c
    } else {
        (total / n_series).max(1)
    };

    let mut taken = BTreeSet::new();
    let categories: Vec<String> = if categorical {
        (0..per_series).map(|_| labeler.unique(rng, &mut taken)).collect()
    } else {
        Vec::new()
    };
    let series_labels: Vec<String> = (0..n_series).map(|_| labeler.unique(rng, &mut taken)).collect();

    let decimals = config.decimals;
    let magnitude = libm::pow(10.0, rng.random_range(0.5..4.0));
    let offset = if chart_type.is_bar() {
        0.0
    } else if rng.random::<f64>() < 0.2 {
        -magnitude * rng.random_range(0.2..0.8)
    } else {
        magnitude * rng.random_range(0.0..0.6)
    };
    let shared_xs: Option<Vec<f64>> = (!categorical && chart_type == ChartType::Line).then(|| {
        let x0 = libm::pow(10.0, rng.random_range(0.0..3.0)) * rng.random_range(-1.0..1.0);
        let span = libm::pow(10.0, rng.random_range(0.5..3.5));
        let mut xs: Vec<f64> = (0..per_series)
            .map(|_| round_to(x0 + span * rng.random::<f64>(), decimals))
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    });
    let scatter_x = (
        libm::pow(10.0, rng.random_range(0.0..3.0)) * rng.random_range(-1.0..1.0),
        libm::pow(10.0, rng.random_range(0.5..3.5)),
    );

    let mut series: Vec<SeriesSpec> = Vec::with_capacity(n_series);
    for (si, label) in series_labels.into_iter().enumerate() {
        let scale = magnitude * rng.random_range(0.5..1.5);
        let mut best: Option<(f64, SeriesSpec)> = None;
        for _ in 0..SERIES_RESAMPLES {
            let family = weighted(rng, config.value_generators.iter());
            let (n, xs) = match (&shared_xs, categorical) {
                (_, true) => (per_series, None),
                (Some(xs), false) => (xs.len(), Some(xs.clone())),
                (None, false) => {
                    let extra = usize::from(si < total % n_series);
                    let n = per_series + extra;
                    let xs = (0..n)
                        .map(|_| round_to(scatter_x.0 + scatter_x.1 * rng.random::<f64>(), decimals))
                        .collect();
                    (n, Some(xs))
                }
            };
            let values: Vec<f64> = shape(rng, family, n)
                .into_iter()
                .map(|s| {
                    let s = if chart_type.is_bar() { 0.08 + 0.92 * s } else { s };
                    round_to(offset + scale * s, decimals)
                })
                .collect();
            let candidate = SeriesSpec {
                label: label.clone(),
                values,
                xs,
            };
            series.push(candidate);
            let corr = max_pair_correlation(&series, categorical);
            let candidate = series.pop().expect("just pushed");
            if corr < config.correlation_rejection_threshold {
                best = Some((corr, candidate));
                break;
            }
            if best.as_ref().is_none_or(|(c, _)| corr < *c) {
                best = Some((corr, candidate));
            }
        }
        let (corr, chosen) = best.expect("at least one sample");
        if corr >= config.correlation_rejection_threshold {
            return Err(SpecFailure::Correlation(corr));
        }
        series.push(chosen);
    }

    let title = (rng.random::<f64>() < 0.8).then(|| {
        let n = rng.random_range(2..=4);
        labeler.phrase(rng, n)
    });
    let x_label = (rng.random::<f64>() < 0.7).then(|| labeler.word(rng));
    let y_label = (rng.random::<f64>() < 0.7).then(|| labeler.word(rng));
    Ok(ChartSpec {
        chart_id: id.to_string(),
        chart_type,
        title,
        x_label,
        y_label,
        categories,
        series,
    })
}

/// Generates slot `index` of a corpus. Each attempt draws from its own derived
/// seed; the slot fails after [`MAX_ATTEMPTS`] rejections.
pub fn generate_chart(config: &GeneratorConfig, index: u64) -> Result<GeneratedChart> {
    config.validate()?;
    let slot_seed = derive_seed(config.seed, index);
    let id = chart_id(index);
    let mut last_rule = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let seed = derive_seed(slot_seed, u64::from(attempt));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = match sample_spec(&mut rng, config, &id) {
            Ok(s) => s,
            Err(SpecFailure::Correlation(r)) => {
                last_rule = format!("correlation (|r| = {r:.3})");
                continue;
            }
        };
        let style = sample_style(&mut rng, spec.series.len(), spec.chart_type);
        let width = rng.random_range(config.width_range[0]..=config.width_range[1]);
        let height = rng.random_range(config.height_range[0]..=config.height_range[1]);
        let chart = match rasterize(&spec, &style, width, height) {
            Ok(c) => c,
            Err(Error::Layout(m)) => {
                last_rule = format!("layout ({m})");
                continue;
            }
            Err(e) => return Err(e),
        };
        match quality_filter(&chart) {
            FilterVerdict::Pass => {
                return Ok(GeneratedChart {
                    index,
                    chart,
                    attempts: attempt + 1,
                    seed,
                })
            }
            FilterVerdict::Fail { rule, .. } => last_rule = rule.name().to_string(),
        }
    }
    Err(Error::Generation {
        index,
        attempts: MAX_ATTEMPTS,
        rule: last_rule,
    })
}

/// Sequential corpus generation; slot `i` depends only on `(config, i)`.
pub fn generate_corpus(config: &GeneratorConfig, n: u64) -> Result<Vec<GeneratedChart>> {
    if n == 0 {
        return Err(Error::InvalidArgument("corpus size must be at least 1".into()));
    }
    (0..n).map(|i| generate_chart(config, i)).collect()
}
