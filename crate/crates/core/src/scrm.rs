//! Structuring Chart-oriented Representation Metric.
//!
//! A predicted triplet matches a ground-truth triplet when the summed edit
//! distance of the series and category labels is at most `j_thr` and the
//! relative value error is at most `e_thr`. Per-chart IoU uses a maximum
//! one-to-one matching, so the intersection never exceeds `min(P, Q)`; the
//! dataset score averages the indicator `IoU >= t` over charts and IoU
//! thresholds.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::annotation::Triplet;
use crate::error::{Error, Result};
use crate::matching::matching_size;

/// Thresholds of one SCRM setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrmSetting {
    pub j_thr: u32,
    pub e_thr: f64,
}

impl ScrmSetting {
    pub const STRICT: ScrmSetting = ScrmSetting { j_thr: 0, e_thr: 0.0 };
    pub const SLIGHT: ScrmSetting = ScrmSetting { j_thr: 2, e_thr: 0.05 };
    pub const HIGH: ScrmSetting = ScrmSetting { j_thr: 5, e_thr: 0.10 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Strict,
    Slight,
    High,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Strict, Preset::Slight, Preset::High];

    pub fn setting(self) -> ScrmSetting {
        match self {
            Preset::Strict => ScrmSetting::STRICT,
            Preset::Slight => ScrmSetting::SLIGHT,
            Preset::High => ScrmSetting::HIGH,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Strict => "strict",
            Preset::Slight => "slight",
            Preset::High => "high",
        }
    }
}

/// Ordered IoU thresholds, strictly increasing within (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IouThresholds(Vec<f64>);

impl IouThresholds {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("IoU thresholds"));
        }
        if values.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "IoU thresholds must be strictly increasing within (0, 1]".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for IouThresholds {
    /// 0.50, 0.55, ..., 0.95
    fn default() -> Self {
        Self((0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect())
    }
}

impl TryFrom<Vec<f64>> for IouThresholds {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        IouThresholds::new(v)
    }
}

impl From<IouThresholds> for Vec<f64> {
    fn from(t: IouThresholds) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartScore {
    pub chart_id: String,
    pub iou: f64,
    pub matched: usize,
    pub p_count: usize,
    pub q_count: usize,
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `|pred - gt| / |gt|`; with `gt == 0` the error is 0 for an exact hit and
/// infinite otherwise.
pub fn relative_error(pred: f64, gt: f64) -> f64 {
    if gt == 0.0 {
        if pred == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (pred - gt).abs() / gt.abs()
    }
}

/// Summed label edit distance between two triplets after trimming whitespace.
pub fn label_distance(p: &Triplet, q: &Triplet) -> usize {
    levenshtein(p.series_label.trim(), q.series_label.trim())
        + levenshtein(p.category_label.trim(), q.category_label.trim())
}

pub fn triplet_match(p: &Triplet, q: &Triplet, s: ScrmSetting) -> bool {
    label_distance(p, q) <= s.j_thr as usize && relative_error(p.value, q.value) <= s.e_thr
}

/// Image-level structural IoU.
pub fn image_iou(preds: &[Triplet], gts: &[Triplet], s: ScrmSetting) -> ChartScore {
    let matched = matching_size(preds.len(), gts.len(), |p, q| triplet_match(&preds[p], &gts[q], s));
    ChartScore {
        chart_id: String::new(),
        iou: iou_from_counts(matched, preds.len(), gts.len()),
        matched,
        p_count: preds.len(),
        q_count: gts.len(),
    }
}

pub fn iou_from_counts(matched: usize, p: usize, q: usize) -> f64 {
    if p == 0 && q == 0 {
        1.0
    } else {
        matched as f64 / (p + q - matched) as f64
    }
}

/// Mean over thresholds and charts of the indicator `IoU >= t`.
pub fn dataset_ap(scores: &[ChartScore], thresholds: &IouThresholds) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("chart scores"));
    }
    let hits: usize = thresholds
        .values()
        .iter()
        .map(|t| scores.iter().filter(|s| s.iou >= *t).count())
        .sum();
    Ok(hits as f64 / (thresholds.values().len() * scores.len()) as f64)
}

/// Triplets of one chart keyed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartTriplets {
    pub chart_id: String,
    pub triplets: Vec<Triplet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub preset: Preset,
    pub j_thr: u32,
    pub e_thr: f64,
    pub ap: f64,
    pub per_chart: Vec<ChartScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrmReport {
    pub iou_thresholds: IouThresholds,
    pub chart_count: usize,
    pub presets: Vec<PresetReport>,
    /// Ground-truth charts with no prediction; scored as IoU 0.
    pub missing_predictions: Vec<String>,
    /// Predictions without ground truth; ignored.
    pub unmatched_predictions: Vec<String>,
}

impl ScrmReport {
    pub fn ap(&self, preset: Preset) -> Option<f64> {
        self.presets.iter().find(|p| p.preset == preset).map(|p| p.ap)
    }
}

fn index_unique(charts: &[ChartTriplets]) -> Result<BTreeMap<&str, &[Triplet]>> {
    let mut map = BTreeMap::new();
    for c in charts {
        if map.insert(c.chart_id.as_str(), c.triplets.as_slice()).is_some() {
            return Err(Error::DuplicateChartId(c.chart_id.clone()));
        }
    }
    Ok(map)
}

/// Scores every ground-truth chart under each preset and aggregates AP.
///
/// Charts are reported in chart-id order.
pub fn evaluate(
    predictions: &[ChartTriplets],
    ground_truth: &[ChartTriplets],
    presets: &[Preset],
    thresholds: &IouThresholds,
) -> Result<ScrmReport> {
    let preds = index_unique(predictions)?;
    let gts = index_unique(ground_truth)?;
    if gts.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    let missing = gts
        .keys()
        .filter(|k| !preds.contains_key(*k))
        .map(|k| String::from(*k))
        .collect();
    let unmatched = preds
        .keys()
        .filter(|k| !gts.contains_key(*k))
        .map(|k| String::from(*k))
        .collect();
    let mut reports = Vec::with_capacity(presets.len());
    for &preset in presets {
        let setting = preset.setting();
        let per_chart: Vec<ChartScore> = gts
            .iter()
            .map(|(id, gt)| {
                let mut score = image_iou(preds.get(id).copied().unwrap_or(&[]), gt, setting);
                if !preds.contains_key(id) {
                    score.iou = 0.0;
                }
                score.chart_id = String::from(*id);
                score
            })
            .collect();
        reports.push(PresetReport {
            preset,
            j_thr: setting.j_thr,
            e_thr: setting.e_thr,
            ap: dataset_ap(&per_chart, thresholds)?,
            per_chart,
        });
    }
    Ok(ScrmReport {
        iou_thresholds: thresholds.clone(),
        chart_count: gts.len(),
        presets: reports,
        missing_predictions: missing,
        unmatched_predictions: unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(s: &str, c: &str, v: f64) -> Triplet {
        Triplet::new(s, c, v)
    }

    #[test]
    fn edit_distances() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "ab"), 2);
        assert_eq!(levenshtein("USA", "US"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("héllo", "hello"), 1);
    }

    #[test]
    fn relative_errors() {
        assert!((relative_error(10.5, 10.0) - 0.05).abs() < 1e-15);
        assert_eq!(relative_error(5.0, 5.0), 0.0);
        assert_eq!(relative_error(1.0, 0.0), f64::INFINITY);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
    }

    #[test]
    fn matching_thresholds_are_inclusive() {
        let a = t("A", "Q1", 10.0);
        assert!(triplet_match(&a, &a, ScrmSetting::STRICT));
        assert!(triplet_match(&t("A", "Q1", 10.5), &a, ScrmSetting::SLIGHT));
        assert!(!triplet_match(&t("A", "Q1", 10.6), &a, ScrmSetting::SLIGHT));
        let p = t("AB", "Q1", 10.0);
        let q = t("A", "Q2", 10.0);
        assert!(triplet_match(&p, &q, ScrmSetting::SLIGHT));
        assert!(!triplet_match(&p, &q, ScrmSetting::STRICT));
        assert!(triplet_match(&t(" A ", "Q1 ", 10.0), &a, ScrmSetting::STRICT));
        assert!(!triplet_match(&t("a", "Q1", 10.0), &a, ScrmSetting::STRICT));
    }

    #[test]
    fn image_iou_cases() {
        let gts = vec![t("A", "x", 1.0), t("A", "y", 2.0)];
        let s = image_iou(&gts.clone(), &gts, ScrmSetting::STRICT);
        assert_eq!((s.matched, s.iou), (2, 1.0));
        let preds = vec![t("A", "x", 1.0), t("B", "zzz", 9.0)];
        let s = image_iou(&preds, &gts, ScrmSetting::STRICT);
        assert_eq!(s.matched, 1);
        assert!((s.iou - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(image_iou(&[], &gts, ScrmSetting::HIGH).iou, 0.0);
        assert_eq!(image_iou(&gts, &[], ScrmSetting::HIGH).iou, 0.0);
        assert_eq!(image_iou(&[], &[], ScrmSetting::HIGH).iou, 1.0);
    }

    #[test]
    fn one_prediction_cannot_match_twice() {
        let gts = vec![t("A", "x", 1.0), t("A", "x", 1.0)];
        let s = image_iou(&[t("A", "x", 1.0)], &gts, ScrmSetting::STRICT);
        assert_eq!(s.matched, 1);
        assert!((s.iou - 0.5).abs() < 1e-15);
    }

    fn score(iou: f64) -> ChartScore {
        ChartScore {
            chart_id: String::new(),
            iou,
            matched: 0,
            p_count: 0,
            q_count: 0,
        }
    }

    #[test]
    fn ap_counts_inclusive_threshold_hits() {
        let th = IouThresholds::default();
        assert_eq!(th.values().len(), 10);
        assert_eq!(th.values()[1], 0.55);
        assert_eq!(dataset_ap(&[score(1.0)], &th).unwrap(), 1.0);
        assert!((dataset_ap(&[score(0.72)], &th).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(dataset_ap(&[score(1.0), score(0.0)], &th).unwrap(), 0.5);
        assert_eq!(dataset_ap(&[score(0.75)], &th).unwrap(), 0.6);
        assert!(dataset_ap(&[], &th).is_err());
    }

    #[test]
    fn threshold_validation() {
        assert!(IouThresholds::new(vec![0.5, 0.5]).is_err());
        assert!(IouThresholds::new(vec![0.0, 0.5]).is_err());
        assert!(IouThresholds::new(vec![]).is_err());
        assert!(IouThresholds::new(vec![0.3, 1.0]).is_ok());
    }

    #[test]
    fn evaluate_handles_missing_and_duplicates() {
        let gt = vec![
            ChartTriplets {
                chart_id: "a".into(),
                triplets: vec![t("s", "c", 1.0)],
            },
            ChartTriplets {
                chart_id: "b".into(),
                triplets: vec![t("s", "c", 2.0)],
            },
        ];
        let r = evaluate(&gt, &gt, &Preset::ALL, &IouThresholds::default()).unwrap();
        for p in Preset::ALL {
            assert_eq!(r.ap(p), Some(1.0));
        }
        let r = evaluate(&[], &gt, &Preset::ALL, &IouThresholds::default()).unwrap();
        assert_eq!(r.ap(Preset::High), Some(0.0));
        assert_eq!(r.missing_predictions, vec![String::from("a"), String::from("b")]);
        let dup = vec![gt[0].clone(), gt[0].clone()];
        assert!(matches!(
            evaluate(&dup, &gt, &Preset::ALL, &IouThresholds::default()),
            Err(Error::DuplicateChartId(_))
        ));
    }

    #[test]
    fn empty_ground_truth_chart_missing_prediction_scores_zero() {
        let gt = vec![ChartTriplets {
            chart_id: "a".into(),
            triplets: vec![],
        }];
        let r = evaluate(&[], &gt, &[Preset::Strict], &IouThresholds::default()).unwrap();
        assert_eq!(r.ap(Preset::Strict), Some(0.0));
    }
}
