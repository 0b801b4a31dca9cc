use std::path::PathBuf;

use chartrefine_core::engine::{
    build_training_samples, derive_seed, generate_chart, GeneratorConfig, ImageRole, PerturbationSpec, SampleKind,
    SampleTarget,
};
use chartrefine_core::ChartType;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Result;
use crate::io::{ensure_dir, to_json_pretty, write_atomic, write_json, write_png};
use crate::manifest::RunRecorder;

pub const CORPUS_MANIFEST: &str = "manifest.json";
pub const TRAINING_SAMPLES: &str = "training_samples.jsonl";
const TRAINING_SALT: u64 = 0x7472_6169_6e69_6e67;

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// TOML config; its [generator] and [training] sections apply.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of charts.
    #[arg(short = 'n', long = "count", value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write four training samples per chart.
    #[arg(long)]
    pub with_training_samples: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartEntry {
    pub chart_id: String,
    pub chart_type: ChartType,
    pub width: u32,
    pub height: u32,
    pub series: usize,
    pub points: usize,
    pub occluded: usize,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool_version: String,
    pub chart_count: u64,
    pub generator: GeneratorConfig,
    pub training: Option<PerturbationSpec>,
    pub charts: Vec<ChartEntry>,
}

#[derive(Serialize)]
struct SampleRecord<'a> {
    chart_id: &'a str,
    kind: SampleKind,
    images: Vec<String>,
    prompt: &'a str,
    target: &'a SampleTarget,
}

fn image_path(chart_id: &str, role: ImageRole) -> String {
    match role {
        ImageRole::Original => format!("{chart_id}.png"),
        ImageRole::ConfirmOverlay => format!("training/{chart_id}_confirm.png"),
        ImageRole::CorrectOverlay => format!("training/{chart_id}_correct.png"),
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<CorpusManifest> {
    let mut config = Config::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.generator.seed = seed;
    }
    let gen = config.generator.clone();
    let training = args.with_training_samples.then_some(config.training);
    let prompts = config.prompt_templates()?;
    let mut run = RunRecorder::start("generate", Some(gen.seed), args, &config);
    ensure_dir(&args.out)?;

    let results: Vec<Result<(ChartEntry, Vec<String>)>> = super::pool(args.jobs)?.install(|| {
        (0..args.count)
            .into_par_iter()
            .map(|i| {
                let g = generate_chart(&gen, i)?;
                let ann = &g.chart.annotation;
                let id = ann.chart_id.clone();
                write_png(&args.out.join(format!("{id}.png")), &g.chart.image)?;
                write_json(&args.out.join(format!("{id}.json")), ann)?;
                let mut lines = Vec::new();
                if let Some(spec) = &training {
                    let seed = derive_seed(gen.seed ^ TRAINING_SALT, i);
                    let set = build_training_samples(&g.chart, spec, seed, &prompts)?;
                    for role in [ImageRole::ConfirmOverlay, ImageRole::CorrectOverlay] {
                        let img = set.image(role).expect("overlay roles carry images");
                        write_png(&args.out.join(image_path(&id, role)), img)?;
                    }
                    for s in &set.samples {
                        let rec = SampleRecord {
                            chart_id: &s.chart_id,
                            kind: s.kind,
                            images: s.images.iter().map(|r| image_path(&id, *r)).collect(),
                            prompt: &s.prompt,
                            target: &s.target,
                        };
                        lines.push(serde_json::to_string(&rec).expect("serializable sample"));
                    }
                }
                let entry = ChartEntry {
                    chart_id: id,
                    chart_type: ann.chart_type,
                    width: ann.image.width,
                    height: ann.image.height,
                    series: ann.series.len(),
                    points: ann.point_count(),
                    occluded: ann.series.iter().flat_map(|s| &s.points).filter(|p| p.occluded).count(),
                    attempts: g.attempts,
                };
                Ok((entry, lines))
            })
            .collect()
    });

    let mut charts = Vec::with_capacity(results.len());
    let mut jsonl = String::new();
    for r in results {
        let (entry, lines) = match r {
            Ok(v) => v,
            Err(e) => {
                run.finish(&args.out, &format!("error: {e}"))?;
                return Err(e);
            }
        };
        run.output(format!("{}.png", entry.chart_id));
        run.output(format!("{}.json", entry.chart_id));
        charts.push(entry);
        for l in lines {
            jsonl.push_str(&l);
            jsonl.push('\n');
        }
    }
    if training.is_some() {
        write_atomic(&args.out.join(TRAINING_SAMPLES), jsonl.as_bytes())?;
        run.output(TRAINING_SAMPLES);
    }
    let manifest = CorpusManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        chart_count: args.count,
        generator: gen,
        training,
        charts,
    };
    write_atomic(&args.out.join(CORPUS_MANIFEST), &to_json_pretty(&manifest))?;
    run.output(CORPUS_MANIFEST);
    run.finish(&args.out, "ok")?;
    let points: usize = manifest.charts.iter().map(|c| c.points).sum();
    println!(
        "generated {} charts ({:.2} points per chart) in {}",
        manifest.chart_count,
        points as f64 / manifest.chart_count as f64,
        args.out.display()
    );
    Ok(manifest)
}
