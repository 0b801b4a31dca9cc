//! Seeded stand-in for a trained model, scored against ground truth.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::client::{ClientError, ModelClient, Verdict};
use crate::annotation::{round_to, AxisKind, ChartAnnotation, ParseResult, ParsedPoint, ParsedSeries};
use crate::engine::generate::derive_seed;
use crate::engine::perturb::{inject_errors, PerturbationSpec};
use crate::error::{Error, Result};
use crate::geom::PixelPoint;
use crate::raster::Raster;

const LOCALIZE_STREAM: u64 = 1;
const DIRECT_STREAM: u64 = 2;
const DIALOGUE_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSpec {
    /// Errors in the first localization.
    pub initial: PerturbationSpec,
    /// Chance that each outstanding error is fixed by one verify call.
    pub fix_prob: f64,
    /// Chance of confirming while errors remain.
    pub false_confirm_prob: f64,
    /// Relative sigma of decoded values.
    pub decode_noise: f64,
}

impl Default for SimulatorSpec {
    fn default() -> Self {
        Self {
            initial: PerturbationSpec::default(),
            fix_prob: 0.7,
            false_confirm_prob: 0.1,
            decode_noise: 0.01,
        }
    }
}

impl SimulatorSpec {
    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        for (name, p) in [
            ("fix_prob", self.fix_prob),
            ("false_confirm_prob", self.false_confirm_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(alloc::format!("{name} must lie in [0, 1]")));
            }
        }
        if !self.decode_noise.is_finite() || self.decode_noise < 0.0 {
            return Err(Error::InvalidConfig(
                "decode_noise must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One localization error as the simulator sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fault {
    /// Prediction `pred` stands for ground-truth anchor `gt` at the wrong pixel.
    Misplaced {
        pred: usize,
        gt: usize,
    },
    Extra {
        pred: usize,
    },
    Missing {
        gt: usize,
    },
}

/// Pairs predictions with ground truth: exact pixel hits first, then the
/// closest remaining pairs greedily. Returns per-prediction GT indices for
/// exact hits and the faults left over.
fn diagnose(pred: &[PixelPoint], gt: &[PixelPoint]) -> (Vec<Option<usize>>, Vec<Fault>) {
    let mut by_pixel: BTreeMap<PixelPoint, Vec<usize>> = BTreeMap::new();
    for (j, g) in gt.iter().enumerate().rev() {
        by_pixel.entry(*g).or_default().push(j);
    }
    let mut exact = alloc::vec![None; pred.len()];
    let mut gt_used = alloc::vec![false; gt.len()];
    for (i, p) in pred.iter().enumerate() {
        if let Some(j) = by_pixel.get_mut(p).and_then(|v| v.pop()) {
            exact[i] = Some(j);
            gt_used[j] = true;
        }
    }
    let free_pred: Vec<usize> = (0..pred.len()).filter(|i| exact[*i].is_none()).collect();
    let free_gt: Vec<usize> = (0..gt.len()).filter(|j| !gt_used[*j]).collect();
    let mut pairs: Vec<(i64, usize, usize)> = Vec::with_capacity(free_pred.len() * free_gt.len());
    for &i in &free_pred {
        for &j in &free_gt {
            let dx = i64::from(pred[i].x - gt[j].x);
            let dy = i64::from(pred[i].y - gt[j].y);
            pairs.push((dx * dx + dy * dy, i, j));
        }
    }
    pairs.sort_unstable();
    let mut pred_done = alloc::vec![false; pred.len()];
    let mut faults = Vec::new();
    for (_, i, j) in pairs {
        if !pred_done[i] && !gt_used[j] {
            pred_done[i] = true;
            gt_used[j] = true;
            faults.push(Fault::Misplaced { pred: i, gt: j });
        }
    }
    faults.sort_unstable_by_key(|f| match f {
        Fault::Misplaced { pred, .. } => *pred,
        _ => 0,
    });
    faults.extend(
        free_pred
            .iter()
            .filter(|i| !pred_done[**i])
            .map(|&pred| Fault::Extra { pred }),
    );
    faults.extend(
        free_gt
            .iter()
            .filter(|j| !gt_used[**j])
            .map(|&gt| Fault::Missing { gt }),
    );
    (exact, faults)
}

/// Model stand-in for one chart. Deterministic given `(annotation, spec, seed)`
/// and the sequence of calls.
#[derive(Debug, Clone)]
pub struct SimulatedClient {
    annotation: ChartAnnotation,
    anchors: Vec<PixelPoint>,
    spec: SimulatorSpec,
    seed: u64,
    rng: ChaCha8Rng,
    decimals: u32,
}

impl SimulatedClient {
    pub fn new(annotation: ChartAnnotation, spec: SimulatorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            anchors: annotation.anchors(),
            annotation,
            spec,
            seed,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, DIALOGUE_STREAM)),
            decimals: 2,
        })
    }

    pub fn annotation(&self) -> &ChartAnnotation {
        &self.annotation
    }

    fn perturbed(&self, stream: u64) -> Result<Vec<PixelPoint>, ClientError> {
        inject_errors(&self.annotation, &self.spec.initial, derive_seed(self.seed, stream))
            .map(|p| p.points)
            .map_err(|e| ClientError::Other(alloc::format!("{e}")))
    }

    fn noisy(&mut self, y: f64) -> f64 {
        if self.spec.decode_noise == 0.0 {
            return y;
        }
        let n = Normal::new(0.0, self.spec.decode_noise).expect("finite sigma");
        round_to(y * (1.0 + n.sample(&mut self.rng)), self.decimals)
    }

    /// Series index of the ground-truth anchor nearest to `p`.
    fn nearest_series(&self, p: PixelPoint) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (si, s) in self.annotation.series.iter().enumerate() {
            for q in &s.points {
                let d = p.distance(&q.px);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, si));
                }
            }
        }
        best.map(|b| b.1)
    }

    fn read_point(&mut self, p: PixelPoint) -> Option<(usize, ParsedPoint)> {
        let series = self.nearest_series(p)?;
        let c = self.annotation.calibration.pixel_to_chart(p).ok()?;
        let point = match self.annotation.x_axis.kind {
            AxisKind::Categorical => {
                let cats = self.annotation.x_axis.categories.as_ref()?;
                ParsedPoint {
                    category: cats.get(c.x as usize).cloned(),
                    x: None,
                    y: round_to(c.y, self.decimals),
                }
            }
            AxisKind::Numeric => ParsedPoint {
                category: None,
                x: Some(round_to(c.x, self.decimals)),
                y: round_to(c.y, self.decimals),
            },
        };
        Some((series, point))
    }
}

impl ModelClient for SimulatedClient {
    fn localize(&mut self, _image: &Raster) -> Result<Vec<PixelPoint>, ClientError> {
        self.perturbed(LOCALIZE_STREAM)
    }

    fn verify(
        &mut self,
        _original: &Raster,
        _overlaid: &Raster,
        current: &[PixelPoint],
    ) -> Result<Verdict, ClientError> {
        let (_, faults) = diagnose(current, &self.anchors);
        if faults.is_empty() {
            return Ok(Verdict::Confirm);
        }
        if self.rng.random::<f64>() < self.spec.false_confirm_prob {
            return Ok(Verdict::Confirm);
        }
        let mut next: Vec<Option<PixelPoint>> = current.iter().copied().map(Some).collect();
        let mut added = Vec::new();
        for f in faults {
            if self.rng.random::<f64>() >= self.spec.fix_prob {
                continue;
            }
            match f {
                Fault::Misplaced { pred, gt } => next[pred] = Some(self.anchors[gt]),
                Fault::Extra { pred } => next[pred] = None,
                Fault::Missing { gt } => added.push(self.anchors[gt]),
            }
        }
        Ok(Verdict::Corrected(next.into_iter().flatten().chain(added).collect()))
    }

    fn decode(&mut self, _image: &Raster, anchors: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError> {
        let anchors = match anchors {
            Some(a) => a.to_vec(),
            None => self.perturbed(DIRECT_STREAM)?,
        };
        let (exact, _) = diagnose(&anchors, &self.anchors);
        // flat index -> (series, point)
        let flat: Vec<(usize, usize)> = self
            .annotation
            .series
            .iter()
            .enumerate()
            .flat_map(|(si, s)| (0..s.points.len()).map(move |pi| (si, pi)))
            .collect();
        let mut per_series: Vec<Vec<ParsedPoint>> = alloc::vec![Vec::new(); self.annotation.series.len()];
        for (i, p) in anchors.iter().enumerate() {
            let read = match exact[i] {
                Some(j) => {
                    let (si, pi) = flat[j];
                    let gt = &self.annotation.series[si].points[pi];
                    Some((
                        si,
                        ParsedPoint {
                            category: gt.category.clone(),
                            x: gt.x,
                            y: gt.y,
                        },
                    ))
                }
                None => self.read_point(*p),
            };
            if let Some((si, mut point)) = read {
                point.y = self.noisy(point.y);
                per_series[si].push(point);
            }
        }
        let template = ParseResult::from(&self.annotation);
        Ok(ParseResult {
            series: template
                .series
                .into_iter()
                .zip(per_series)
                .filter(|(_, pts)| !pts.is_empty())
                .map(|(s, points)| ParsedSeries { label: s.label, points })
                .collect(),
            ..template
        })
    }
}
