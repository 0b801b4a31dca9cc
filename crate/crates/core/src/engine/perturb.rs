//! Synthetic localization errors: omissions, shifts, duplicates and
//! hallucinated points.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::annotation::ChartAnnotation;
use crate::error::{Error, Result};
use crate::geom::{round_px, PixelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub omission_rate: f64,
    pub shift_sigma_px: f64,
    /// Expected number of spurious points per chart.
    pub hallucination_rate: f64,
    pub duplicate_rate: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            omission_rate: 0.1,
            shift_sigma_px: 4.0,
            hallucination_rate: 0.5,
            duplicate_rate: 0.05,
        }
    }
}

impl PerturbationSpec {
    pub const NONE: PerturbationSpec = PerturbationSpec {
        omission_rate: 0.0,
        shift_sigma_px: 0.0,
        hallucination_rate: 0.0,
        duplicate_rate: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omission_rate,
            self.shift_sigma_px,
            self.hallucination_rate,
            self.duplicate_rate,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(
                "perturbation rates must be finite and non-negative".into(),
            ));
        }
        if self.omission_rate > 1.0 || self.duplicate_rate > 1.0 {
            return Err(Error::InvalidConfig(
                "omission_rate and duplicate_rate must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "snake_case")]
pub enum InjectedError {
    Omission { source: PixelPoint },
    Shift { source: PixelPoint, to: PixelPoint },
    Duplicate { source: PixelPoint, copy: PixelPoint },
    Hallucination { at: PixelPoint },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Perturbed {
    pub points: Vec<PixelPoint>,
    pub ledger: Vec<InjectedError>,
}

impl Perturbed {
    pub fn count(&self, f: impl Fn(&InjectedError) -> bool) -> usize {
        self.ledger.iter().filter(|e| f(e)).count()
    }
}

/// Perturbs the annotation's anchors. Output order: surviving anchors in
/// annotation order (each followed by its duplicate), then hallucinations.
pub fn inject_errors(annotation: &ChartAnnotation, spec: &PerturbationSpec, seed: u64) -> Result<Perturbed> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = annotation.image.width as i32;
    let h = annotation.image.height as i32;
    let shift =
        (spec.shift_sigma_px > 0.0).then(|| Normal::new(0.0, spec.shift_sigma_px).expect("finite positive sigma"));
    let mut out = Perturbed::default();
    for source in annotation.anchors() {
        if rng.random::<f64>() < spec.omission_rate {
            out.ledger.push(InjectedError::Omission { source });
            continue;
        }
        let mut p = source;
        if let Some(n) = &shift {
            let dx = round_px(n.sample(&mut rng));
            let dy = round_px(n.sample(&mut rng));
            p = PixelPoint::new((source.x + dx).clamp(0, w - 1), (source.y + dy).clamp(0, h - 1));
            if p != source {
                out.ledger.push(InjectedError::Shift { source, to: p });
            }
        }
        out.points.push(p);
        if rng.random::<f64>() < spec.duplicate_rate {
            out.points.push(p);
            out.ledger.push(InjectedError::Duplicate { source, copy: p });
        }
    }
    if spec.hallucination_rate > 0.0 {
        let k = Poisson::new(spec.hallucination_rate)
            .map_err(|e| Error::InvalidConfig(alloc::format!("hallucination_rate: {e}")))?
            .sample(&mut rng) as u64;
        let plot = annotation.calibration.plot_area();
        for _ in 0..k {
            let at = PixelPoint::new(
                rng.random_range(plot.left..=plot.right),
                rng.random_range(plot.top..=plot.bottom),
            );
            out.points.push(at);
            out.ledger.push(InjectedError::Hallucination { at });
        }
    }
    Ok(out)
}
