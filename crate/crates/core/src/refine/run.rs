use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::client::{ClientError, ModelClient, Verdict};
use crate::annotation::ParseResult;
use crate::geom::PixelPoint;
use crate::raster::Raster;
use crate::render::{overlay_markers, Overlay};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundAction {
    Initial,
    Corrected,
    Confirmed,
    ForcedStop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub round_index: u32,
    pub localizations: Vec<PixelPoint>,
    pub action: RoundAction,
}

/// How a chart is parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseMode {
    /// Refine loop, then decode with the verified anchors.
    Vsr,
    /// Localize once and decode with those anchors.
    AnchorsOnly,
    /// Decode straight from the image.
    Direct,
}

impl ParseMode {
    pub const ALL: [ParseMode; 3] = [ParseMode::Vsr, ParseMode::AnchorsOnly, ParseMode::Direct];

    pub fn name(self) -> &'static str {
        match self {
            ParseMode::Vsr => "vsr",
            ParseMode::AnchorsOnly => "anchors-only",
            ParseMode::Direct => "direct",
        }
    }
}

/// Rounds of one chart. `call_count` counts inference calls made so far,
/// including the decode call once it has happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineTranscript {
    #[serde(default)]
    pub chart_id: String,
    pub mode: ParseMode,
    pub n_max: u32,
    pub rounds: Vec<Round>,
    pub call_count: u32,
}

impl RefineTranscript {
    fn new(mode: ParseMode, n_max: u32) -> Self {
        Self {
            chart_id: String::new(),
            mode,
            n_max,
            rounds: Vec::new(),
            call_count: 0,
        }
    }

    /// Localizations after the last round; empty before localize.
    pub fn final_localizations(&self) -> &[PixelPoint] {
        self.rounds.last().map_or(&[], |r| &r.localizations)
    }

    pub fn verify_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.action != RoundAction::Initial).count()
    }

    pub fn confirmed(&self) -> bool {
        self.rounds.iter().any(|r| r.action == RoundAction::Confirmed)
    }
}

/// A client failure with everything recorded before it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{error} (after {} inference calls)", transcript.call_count)]
pub struct RefineError {
    pub error: ClientError,
    pub transcript: RefineTranscript,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VsrOutcome {
    pub parse: ParseResult,
    pub transcript: RefineTranscript,
}

fn check_n_max(n_max: u32, t: &RefineTranscript) -> Result<(), RefineError> {
    if n_max == 0 {
        return Err(RefineError {
            error: ClientError::Other("n_max must be at least 1".into()),
            transcript: t.clone(),
        });
    }
    Ok(())
}

fn refine_into<C: ModelClient + ?Sized>(
    image: &Raster,
    client: &mut C,
    n_max: u32,
    t: &mut RefineTranscript,
    on_overlay: &mut dyn FnMut(u32, &Overlay),
) -> Result<(), ClientError> {
    let initial = client.localize(image)?;
    t.call_count += 1;
    t.rounds.push(Round {
        round_index: 0,
        localizations: initial,
        action: RoundAction::Initial,
    });
    for round_index in 1..=n_max {
        let current = t.final_localizations().to_vec();
        let overlay = overlay_markers(image, &current);
        on_overlay(round_index, &overlay);
        let verdict = client.verify(image, &overlay.image, &current)?;
        t.call_count += 1;
        let (localizations, action) = match verdict {
            Verdict::Confirm => (current, RoundAction::Confirmed),
            Verdict::Corrected(next) if round_index == n_max => (next, RoundAction::ForcedStop),
            Verdict::Corrected(next) => (next, RoundAction::Corrected),
        };
        t.rounds.push(Round {
            round_index,
            localizations,
            action,
        });
        if action == RoundAction::Confirmed {
            break;
        }
    }
    Ok(())
}

/// Refine stage only. `on_overlay` sees the overlay sent with each verify
/// call, keyed by round index.
pub fn run_refine_with<C: ModelClient + ?Sized>(
    image: &Raster,
    client: &mut C,
    n_max: u32,
    on_overlay: &mut dyn FnMut(u32, &Overlay),
) -> Result<RefineTranscript, RefineError> {
    let mut t = RefineTranscript::new(ParseMode::Vsr, n_max);
    check_n_max(n_max, &t)?;
    match refine_into(image, client, n_max, &mut t, on_overlay) {
        Ok(()) => Ok(t),
        Err(error) => Err(RefineError { error, transcript: t }),
    }
}

pub fn run_refine<C: ModelClient + ?Sized>(
    image: &Raster,
    client: &mut C,
    n_max: u32,
) -> Result<RefineTranscript, RefineError> {
    run_refine_with(image, client, n_max, &mut |_, _| {})
}

/// Refine then decode: between 3 and `n_max + 2` inference calls.
pub fn run_vsr_with<C: ModelClient + ?Sized>(
    image: &Raster,
    client: &mut C,
    n_max: u32,
    on_overlay: &mut dyn FnMut(u32, &Overlay),
) -> Result<VsrOutcome, RefineError> {
    let mut transcript = run_refine_with(image, client, n_max, on_overlay)?;
    match client.decode(image, Some(transcript.final_localizations())) {
        Ok(parse) => {
            transcript.call_count += 1;
            Ok(VsrOutcome { parse, transcript })
        }
        Err(error) => Err(RefineError { error, transcript }),
    }
}

pub fn run_vsr<C: ModelClient + ?Sized>(image: &Raster, client: &mut C, n_max: u32) -> Result<VsrOutcome, RefineError> {
    run_vsr_with(image, client, n_max, &mut |_, _| {})
}

/// Localize once, decode with those anchors: 2 calls.
pub fn run_anchors_only<C: ModelClient + ?Sized>(image: &Raster, client: &mut C) -> Result<VsrOutcome, RefineError> {
    let mut t = RefineTranscript::new(ParseMode::AnchorsOnly, 0);
    let fail = |error, t: &RefineTranscript| RefineError {
        error,
        transcript: t.clone(),
    };
    let initial = client.localize(image).map_err(|e| fail(e, &t))?;
    t.call_count += 1;
    t.rounds.push(Round {
        round_index: 0,
        localizations: initial,
        action: RoundAction::Initial,
    });
    let parse = client
        .decode(image, Some(t.final_localizations()))
        .map_err(|e| fail(e, &t))?;
    t.call_count += 1;
    Ok(VsrOutcome { parse, transcript: t })
}

/// Single decode call without anchors.
pub fn run_direct<C: ModelClient + ?Sized>(image: &Raster, client: &mut C) -> Result<VsrOutcome, RefineError> {
    let mut t = RefineTranscript::new(ParseMode::Direct, 0);
    let parse = client.decode(image, None).map_err(|error| RefineError {
        error,
        transcript: t.clone(),
    })?;
    t.call_count += 1;
    Ok(VsrOutcome { parse, transcript: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Rgb;
    use alloc::vec;

    /// Confirms at verify number `confirm_at` (1-based); 0 never confirms.
    struct Scripted {
        confirm_at: u32,
        verifies: u32,
        seen_overlays: Vec<Vec<PixelPoint>>,
        fail_decode: bool,
    }

    impl Scripted {
        fn new(confirm_at: u32) -> Self {
            Self {
                confirm_at,
                verifies: 0,
                seen_overlays: Vec::new(),
                fail_decode: false,
            }
        }
    }

    impl ModelClient for Scripted {
        fn localize(&mut self, _: &Raster) -> Result<Vec<PixelPoint>, ClientError> {
            Ok(vec![PixelPoint::new(5, 5)])
        }
        fn verify(&mut self, _: &Raster, _: &Raster, current: &[PixelPoint]) -> Result<Verdict, ClientError> {
            self.verifies += 1;
            self.seen_overlays.push(current.to_vec());
            if self.verifies == self.confirm_at {
                Ok(Verdict::Confirm)
            } else {
                let n = self.verifies as i32;
                Ok(Verdict::Corrected(vec![PixelPoint::new(5 + n, 5)]))
            }
        }
        fn decode(&mut self, _: &Raster, _: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError> {
            if self.fail_decode {
                return Err(ClientError::Transport("down".into()));
            }
            Ok(ParseResult::default())
        }
    }

    fn img() -> Raster {
        Raster::new(32, 32, Rgb::WHITE)
    }

    fn actions(t: &RefineTranscript) -> Vec<RoundAction> {
        t.rounds.iter().map(|r| r.action).collect()
    }

    #[test]
    fn early_exit() {
        let t = run_refine(&img(), &mut Scripted::new(1), 3).unwrap();
        assert_eq!(actions(&t), [RoundAction::Initial, RoundAction::Confirmed]);
        assert_eq!(t.call_count, 2);
    }

    #[test]
    fn cap_reached() {
        let t = run_refine(&img(), &mut Scripted::new(0), 2).unwrap();
        assert_eq!(
            actions(&t),
            [RoundAction::Initial, RoundAction::Corrected, RoundAction::ForcedStop]
        );
        assert_eq!(t.call_count, 3);
    }

    #[test]
    fn verify_sees_previous_round() {
        let mut c = Scripted::new(0);
        let t = run_refine(&img(), &mut c, 3).unwrap();
        for (i, seen) in c.seen_overlays.iter().enumerate() {
            assert_eq!(seen, &t.rounds[i].localizations);
        }
    }

    #[test]
    fn vsr_call_counts() {
        for n in 1..=4 {
            let v = run_vsr(&img(), &mut Scripted::new(1), n).unwrap();
            assert_eq!(v.transcript.call_count, 3);
            let v = run_vsr(&img(), &mut Scripted::new(0), n).unwrap();
            assert_eq!(v.transcript.call_count, n + 2);
        }
        assert_eq!(
            run_anchors_only(&img(), &mut Scripted::new(0))
                .unwrap()
                .transcript
                .call_count,
            2
        );
        assert_eq!(
            run_direct(&img(), &mut Scripted::new(0)).unwrap().transcript.call_count,
            1
        );
    }

    #[test]
    fn errors_keep_partial_transcript() {
        let mut c = Scripted::new(1);
        c.fail_decode = true;
        let e = run_vsr(&img(), &mut c, 2).unwrap_err();
        assert_eq!(e.transcript.call_count, 2);
        assert_eq!(e.transcript.rounds.len(), 2);
        assert!(run_refine(&img(), &mut Scripted::new(1), 0).is_err());
    }
}
