//! Subcommand implementations. Each `cmd_*` writes its outputs plus one
//! `run_manifest.json` into the output directory.

mod eval;
mod generate;
mod parse;
mod quality;
mod simulate;

pub use eval::{cmd_eval, load_charts, EvalArgs, PresetArg, EVAL_REPORT};
pub use generate::{cmd_generate, GenerateArgs, CORPUS_MANIFEST, TRAINING_SAMPLES};
pub use parse::{cmd_parse, parse_with, ChartInput, ClientFactory, ParseArgs, ParseSummary, PARSE_SUMMARY};
pub use quality::{cmd_quality, QualityArgs, QUALITY_REPORT};
pub use simulate::{cmd_simulate, SimulateArgs, SimulationReport, SIMULATION_REPORT};

use crate::error::{CliError, Result};

pub(crate) fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs:?} workers: {e}")))
}
