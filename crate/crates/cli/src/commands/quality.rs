use std::path::PathBuf;

use chartrefine_core::quality::{corpus_stats, CorpusStats, DEFAULT_PMI_TOP_K};
use chartrefine_core::ChartAnnotation;
use clap::Args;
use serde::Serialize;

use crate::error::Result;
use crate::io::{ensure_dir, list_chart_json, read_json, write_json};
use crate::manifest::RunRecorder;

pub const QUALITY_REPORT: &str = "corpus_stats.json";

#[derive(Debug, Clone, Args, Serialize)]
pub struct QualityArgs {
    /// Directory of chart annotations.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Number of most frequent label pairs averaged for PMI.
    #[arg(long, default_value_t = DEFAULT_PMI_TOP_K)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

pub fn cmd_quality(args: &QualityArgs) -> Result<CorpusStats> {
    let mut run = RunRecorder::start("quality", None, args, &());
    ensure_dir(&args.out)?;
    let corpus: Vec<ChartAnnotation> = list_chart_json(&args.corpus)?
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<_>>()?;
    let stats = corpus_stats(&corpus, args.k)?;
    write_json(&args.out.join(QUALITY_REPORT), &stats)?;
    run.output(QUALITY_REPORT);
    run.finish(&args.out, "ok")?;
    println!("charts                   {}", stats.chart_count);
    println!("avg points per chart     {:.2}", stats.avg_points_per_chart);
    println!("unique numerical ratio   {:.4}", stats.unique_numerical_ratio);
    println!("avg abs correlation      {}", show(stats.avg_abs_correlation));
    println!(
        "avg PMI (top {:>3} of {:>3}) {}",
        stats.k_used,
        stats.k_requested,
        show(stats.avg_pmi_top_k)
    );
    Ok(stats)
}
