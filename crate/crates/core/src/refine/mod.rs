//! Visual self-refine: localize, overlay, verify and correct until the model
//! confirms or the round cap is hit, then decode with the verified anchors.

pub mod analytics;
pub mod client;
pub mod run;
pub mod sim;

pub use analytics::{is_error_sample, round_analytics, RoundAnalytics, RoundStats, DEFAULT_MATCH_TOLERANCE_PX};
pub use client::{ClientError, ModelClient, Verdict};
pub use run::{
    run_anchors_only, run_direct, run_refine, run_refine_with, run_vsr, run_vsr_with, ParseMode, RefineError,
    RefineTranscript, Round, RoundAction, VsrOutcome,
};
pub use sim::{SimulatedClient, SimulatorSpec};
