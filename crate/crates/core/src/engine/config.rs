use alloc::collections::BTreeMap;
use alloc::format;
use serde::{Deserialize, Serialize};

use crate::annotation::ChartType;
use crate::error::{Error, Result};

/// Families of synthetic value sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueGenerator {
    IidUniform,
    RandomWalk,
    SinusoidNoise,
    SpikeMixture,
}

impl ValueGenerator {
    pub const ALL: [ValueGenerator; 4] = [
        ValueGenerator::IidUniform,
        ValueGenerator::RandomWalk,
        ValueGenerator::SinusoidNoise,
        ValueGenerator::SpikeMixture,
    ];
}

/// Sampling space of the configuration generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub chart_type_weights: BTreeMap<ChartType, f64>,
    /// Inclusive range of data points per chart.
    pub points_per_chart: [u32; 2],
    pub series_per_chart: [u32; 2],
    pub value_generators: BTreeMap<ValueGenerator, f64>,
    /// Fraction of labels drawn from the real-word pool; the rest are random strings.
    pub label_source_mix: f64,
    /// Series pairs with |Pearson r| at or above this are resampled.
    pub correlation_rejection_threshold: f64,
    pub width_range: [u32; 2],
    pub height_range: [u32; 2],
    pub decimals: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            chart_type_weights: ChartType::ALL.iter().map(|t| (*t, 1.0)).collect(),
            points_per_chart: [8, 40],
            series_per_chart: [1, 5],
            value_generators: ValueGenerator::ALL.iter().map(|g| (*g, 1.0)).collect(),
            label_source_mix: 0.7,
            correlation_rejection_threshold: 0.9,
            width_range: [640, 1024],
            height_range: [480, 800],
            decimals: 2,
        }
    }
}

fn check_weights<K>(name: &str, w: &BTreeMap<K, f64>) -> Result<()> {
    if w.values().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "{name}: weights must be finite and non-negative"
        )));
    }
    if !w.values().any(|v| *v > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "{name}: at least one weight must be positive"
        )));
    }
    Ok(())
}

fn check_range(name: &str, r: [u32; 2], min: u32) -> Result<()> {
    if r[0] > r[1] || r[0] < min {
        return Err(Error::InvalidConfig(format!(
            "{name}: expected {min} <= min <= max, got [{}, {}]",
            r[0], r[1]
        )));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        check_weights("chart_type_weights", &self.chart_type_weights)?;
        check_weights("value_generators", &self.value_generators)?;
        check_range("points_per_chart", self.points_per_chart, 1)?;
        check_range("series_per_chart", self.series_per_chart, 1)?;
        check_range("width_range", self.width_range, crate::render::MIN_DIMENSION)?;
        check_range("height_range", self.height_range, crate::render::MIN_DIMENSION)?;
        if !(0.0..=1.0).contains(&self.label_source_mix) {
            return Err(Error::InvalidConfig("label_source_mix must lie in [0, 1]".into()));
        }
        if !(self.correlation_rejection_threshold > 0.0 && self.correlation_rejection_threshold <= 1.0) {
            return Err(Error::InvalidConfig(
                "correlation_rejection_threshold must lie in (0, 1]".into(),
            ));
        }
        if self.decimals > 6 {
            return Err(Error::InvalidConfig("decimals must be at most 6".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = GeneratorConfig::default();
        c.validate().unwrap();
        assert_eq!(c.points_per_chart, [8, 40]);
        assert_eq!(c.series_per_chart, [1, 5]);
        assert_eq!(c.correlation_rejection_threshold, 0.9);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let c = GeneratorConfig {
            points_per_chart: [10, 5],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut c = GeneratorConfig::default();
        c.chart_type_weights.values_mut().for_each(|v| *v = 0.0);
        assert!(c.validate().is_err());
        let mut c = GeneratorConfig::default();
        c.value_generators.insert(ValueGenerator::RandomWalk, -1.0);
        assert!(c.validate().is_err());
        let c = GeneratorConfig {
            label_source_mix: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
