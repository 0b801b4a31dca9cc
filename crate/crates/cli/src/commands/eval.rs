use std::path::{Path, PathBuf};

use chartrefine_core::scrm::{evaluate, ChartTriplets, IouThresholds, Preset, ScrmReport};
use chartrefine_core::{triplets_from, ParseResult, Triplet};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{ensure_dir, list_chart_json, read_json, stem, write_json};
use crate::manifest::RunRecorder;

pub const EVAL_REPORT: &str = "scrm_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    Strict,
    Slight,
    High,
    All,
}

impl PresetArg {
    fn presets(self) -> &'static [Preset] {
        match self {
            PresetArg::Strict => &[Preset::Strict],
            PresetArg::Slight => &[Preset::Slight],
            PresetArg::High => &[Preset::High],
            PresetArg::All => &Preset::ALL,
        }
    }
}

/// A prediction file: a bare triplet list or anything shaped like a ParseResult.
#[derive(Deserialize)]
#[serde(untagged)]
enum ChartFile {
    Triplets { triplets: Vec<Triplet> },
    Parsed(ParseResult),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Directory of predicted ParseResult files, `<chart_id>.json`.
    #[arg(long)]
    pub pred_dir: PathBuf,
    /// Directory of ground-truth annotations or ParseResult files.
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Comma-separated IoU thresholds; defaults to 0.50:0.05:0.95.
    #[arg(long, value_delimiter = ',')]
    pub iou_thresholds: Option<Vec<f64>>,
    /// Presets to score (repeatable); defaults to all.
    #[arg(long, value_enum)]
    pub preset: Vec<PresetArg>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Reads every chart file of `dir`, keyed by file stem. Generator
/// annotations work as ground truth.
pub fn load_charts(dir: &Path) -> Result<Vec<ChartTriplets>> {
    list_chart_json(dir)?
        .into_iter()
        .map(|path| {
            let triplets = match read_json(&path)? {
                ChartFile::Triplets { triplets } => triplets,
                ChartFile::Parsed(parsed) => triplets_from(&parsed),
            };
            Ok(ChartTriplets {
                chart_id: stem(&path),
                triplets,
            })
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<ScrmReport> {
    let thresholds = match &args.iou_thresholds {
        Some(t) => IouThresholds::new(t.clone()).map_err(|e| CliError::Usage(e.to_string()))?,
        None => IouThresholds::default(),
    };
    let mut presets: Vec<Preset> = Vec::new();
    for p in args.preset.iter().flat_map(|a| a.presets()) {
        if !presets.contains(p) {
            presets.push(*p);
        }
    }
    if presets.is_empty() {
        presets = Preset::ALL.to_vec();
    }
    let echo = serde_json::json!({ "iou_thresholds": &thresholds, "presets": &presets });
    let mut run = RunRecorder::start("eval", None, args, &echo);
    ensure_dir(&args.out)?;
    let gts = load_charts(&args.gt_dir)?;
    let preds = load_charts(&args.pred_dir)?;
    let report = evaluate(&preds, &gts, &presets, &thresholds)?;
    if !report.missing_predictions.is_empty() {
        log::warn!(
            "{} charts have no prediction and score 0: {}",
            report.missing_predictions.len(),
            report.missing_predictions.join(", ")
        );
    }
    if !report.unmatched_predictions.is_empty() {
        log::warn!(
            "ignoring {} predictions without ground truth: {}",
            report.unmatched_predictions.len(),
            report.unmatched_predictions.join(", ")
        );
    }
    write_json(&args.out.join(EVAL_REPORT), &report)?;
    run.output(EVAL_REPORT);
    run.finish(&args.out, "ok")?;
    for p in &report.presets {
        println!(
            "AP-{:<6} {:.4}  (J_thr={}, e_thr={})",
            p.preset.name(),
            p.ap,
            p.j_thr,
            p.e_thr
        );
    }
    Ok(report)
}
