//! Per-round error counts, error recall and confirmation precision.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::run::{RefineTranscript, RoundAction};
use crate::geom::PixelPoint;
use crate::matching::matching_size;

/// Marker radius plus outline.
pub const DEFAULT_MATCH_TOLERANCE_PX: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u32,
    /// Charts whose localizations at this round do not match ground truth.
    /// Charts that stopped earlier keep their final localizations.
    pub error_samples: usize,
    /// Share of round `r - 1` error samples that were verified at round `r`
    /// and received a correction. Undefined at round 0 or with no such charts.
    pub error_recall: Option<f64>,
    /// Share of round-`r` confirmations whose localizations were correct.
    pub correct_confirmation: Option<f64>,
    /// Charts still inside the loop at this round.
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAnalytics {
    pub match_tolerance_px: u32,
    pub chart_count: usize,
    pub rounds: Vec<RoundStats>,
}

impl RoundAnalytics {
    pub fn round(&self, r: u32) -> Option<&RoundStats> {
        self.rounds.get(r as usize)
    }
}

/// True when a one-to-one matching within `tolerance_px` leaves any point
/// unmatched on either side.
pub fn is_error_sample(localizations: &[PixelPoint], truth: &[PixelPoint], tolerance_px: u32) -> bool {
    if localizations.len() != truth.len() {
        return true;
    }
    let tol = f64::from(tolerance_px);
    let m = matching_size(localizations.len(), truth.len(), |i, j| {
        localizations[i].distance(&truth[j]) <= tol
    });
    m < truth.len()
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `charts` pairs each transcript with its ground-truth anchors. Transcripts
/// without rounds (direct decoding) contribute nothing.
pub fn round_analytics(charts: &[(&RefineTranscript, &[PixelPoint])], tolerance_px: u32) -> RoundAnalytics {
    let charts: Vec<_> = charts.iter().filter(|(t, _)| !t.rounds.is_empty()).collect();
    let last = charts.iter().map(|(t, _)| t.rounds.len() - 1).max().unwrap_or(0);
    let errors: Vec<Vec<bool>> = charts
        .iter()
        .map(|(t, gt)| {
            (0..=last)
                .map(|r| is_error_sample(&t.rounds[r.min(t.rounds.len() - 1)].localizations, gt, tolerance_px))
                .collect()
        })
        .collect();

    let mut rounds = Vec::with_capacity(last + 1);
    if charts.is_empty() {
        return RoundAnalytics {
            match_tolerance_px: tolerance_px,
            chart_count: 0,
            rounds,
        };
    }
    for r in 0..=last {
        let error_samples = errors.iter().filter(|e| e[r]).count();
        let active = charts.iter().filter(|(t, _)| t.rounds.len() > r).count();
        let (mut flagged, mut eligible, mut confirms, mut good_confirms) = (0, 0, 0, 0);
        if r > 0 {
            for (i, (t, _)) in charts.iter().enumerate() {
                let Some(round) = t.rounds.get(r) else { continue };
                if errors[i][r - 1] {
                    eligible += 1;
                    if matches!(round.action, RoundAction::Corrected | RoundAction::ForcedStop) {
                        flagged += 1;
                    }
                }
                if round.action == RoundAction::Confirmed {
                    confirms += 1;
                    if !errors[i][r] {
                        good_confirms += 1;
                    }
                }
            }
        }
        rounds.push(RoundStats {
            round: r as u32,
            error_samples,
            error_recall: ratio(flagged, eligible),
            correct_confirmation: ratio(good_confirms, confirms),
            active,
        });
    }
    RoundAnalytics {
        match_tolerance_px: tolerance_px,
        chart_count: charts.len(),
        rounds,
    }
}
