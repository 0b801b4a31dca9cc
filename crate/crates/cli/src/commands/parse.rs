use std::path::PathBuf;
use std::sync::Arc;

use chartrefine_core::engine::derive_seed;
use chartrefine_core::refine::{
    run_anchors_only, run_direct, run_vsr_with, ModelClient, ParseMode, RefineError, RefineTranscript, SimulatedClient,
    VsrOutcome,
};
use chartrefine_core::render::{resize_annotated, resize_raster_longest, DEFAULT_LONGEST_SIDE};
use chartrefine_core::{ChartAnnotation, Raster};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ClientKind, Config};
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, list_corpus, read_json, read_png, stem, write_json, write_png};
use crate::manifest::RunRecorder;
use crate::remote::{InFlight, RemoteClient};

pub const PARSE_SUMMARY: &str = "parse_summary.json";

fn parse_mode(s: &str) -> std::result::Result<ParseMode, String> {
    ParseMode::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown mode {s:?}; expected vsr, anchors-only or direct"))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParseArgs {
    /// A chart PNG or a corpus directory.
    #[arg(long)]
    pub input: PathBuf,
    /// TOML config; [client], [remote], [simulator] and [prompts] apply.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_max: u32,
    #[arg(long, default_value = "vsr", value_parser = parse_mode)]
    pub mode: ParseMode,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep the marker overlay sent with every verify call.
    #[arg(long)]
    pub save_rounds: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Seed for the simulator client.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Longer image side sent to the model (multiple of 28); 0 keeps the original size.
    #[arg(long, default_value_t = DEFAULT_LONGEST_SIDE)]
    pub resize: u32,
}

/// One chart as handed to the model.
pub struct ChartInput {
    pub index: u64,
    pub chart_id: String,
    pub image: Raster,
    /// Ground truth in the coordinates of `image`, when available.
    pub annotation: Option<ChartAnnotation>,
    pub scale: f64,
}

pub type ClientFactory<'a> = dyn Fn(&ChartInput) -> Result<Box<dyn ModelClient + Send>> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartOutcome {
    pub chart_id: String,
    pub ok: bool,
    pub call_count: u32,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseSummary {
    pub mode: ParseMode,
    pub n_max: u32,
    pub charts: Vec<ChartOutcome>,
    pub total_calls: u64,
    pub failed: usize,
}

#[derive(Serialize)]
struct TranscriptRecord<'a> {
    #[serde(flatten)]
    transcript: &'a RefineTranscript,
    /// Factor from the original image to the model's pixel space.
    image_scale: f64,
    error: Option<String>,
}

fn load_inputs(args: &ParseArgs) -> Result<Vec<(String, PathBuf, Option<PathBuf>)>> {
    if args.input.is_dir() {
        let entries = list_corpus(&args.input)?;
        if entries.is_empty() {
            return Err(CliError::Usage(format!("{} holds no charts", args.input.display())));
        }
        Ok(entries
            .into_iter()
            .map(|e| (e.chart_id, e.image_path, Some(e.annotation_path)))
            .collect())
    } else if args.input.is_file() {
        let ann = args.input.with_extension("json");
        Ok(vec![(
            stem(&args.input),
            args.input.clone(),
            ann.is_file().then_some(ann),
        )])
    } else {
        Err(CliError::io(
            &args.input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

fn prepare(index: u64, chart_id: String, image: PathBuf, ann: Option<PathBuf>, resize: u32) -> Result<ChartInput> {
    let raster = read_png(&image)?;
    let annotation: Option<ChartAnnotation> = ann.map(|p| read_json(&p)).transpose()?;
    if resize == 0 {
        return Ok(ChartInput {
            index,
            chart_id,
            image: raster,
            annotation,
            scale: 1.0,
        });
    }
    let longer = f64::from(raster.width().max(raster.height()));
    let (image, annotation) = match annotation {
        Some(a) => {
            let (img, a) = resize_annotated(&raster, &a, resize)?;
            (img, Some(a))
        }
        None => (resize_raster_longest(&raster, resize)?.0, None),
    };
    Ok(ChartInput {
        index,
        chart_id,
        image,
        annotation,
        scale: f64::from(resize) / longer,
    })
}

fn run_one(
    args: &ParseArgs,
    input: &ChartInput,
    client: &mut dyn ModelClient,
) -> std::result::Result<VsrOutcome, RefineError> {
    match args.mode {
        ParseMode::Vsr => {
            let rounds_dir = args.out.join("rounds");
            let mut save = |round: u32, o: &chartrefine_core::render::Overlay| {
                if args.save_rounds {
                    let path = rounds_dir.join(format!("{}_round{round}.png", input.chart_id));
                    if let Err(e) = write_png(&path, &o.image) {
                        log::warn!("{e}");
                    }
                }
            };
            run_vsr_with(&input.image, client, args.n_max, &mut save)
        }
        ParseMode::AnchorsOnly => run_anchors_only(&input.image, client),
        ParseMode::Direct => run_direct(&input.image, client),
    }
}

/// `cmd_parse` with a caller-supplied client per chart.
pub fn parse_with(args: &ParseArgs, config: &Config, factory: &ClientFactory<'_>) -> Result<ParseSummary> {
    let mut run = RunRecorder::start("parse", Some(args.seed), args, config);
    ensure_dir(&args.out)?;
    ensure_dir(&args.out.join("transcripts"))?;
    let inputs = load_inputs(args)?;
    let outcomes: Vec<Result<ChartOutcome>> = super::pool(args.jobs)?.install(|| {
        inputs
            .into_par_iter()
            .enumerate()
            .map(|(i, (id, image, ann))| {
                let input = prepare(i as u64, id.clone(), image, ann, args.resize)?;
                let mut client = factory(&input)?;
                let result = run_one(args, &input, client.as_mut());
                let (transcript, error) = match &result {
                    Ok(v) => (&v.transcript, None),
                    Err(e) => (&e.transcript, Some(e.error.to_string())),
                };
                let mut transcript = transcript.clone();
                transcript.chart_id = id.clone();
                let record = TranscriptRecord {
                    transcript: &transcript,
                    image_scale: input.scale,
                    error: error.clone(),
                };
                write_json(&args.out.join("transcripts").join(format!("{id}.json")), &record)?;
                if let Ok(v) = result {
                    let mut parse = v.parse;
                    parse.chart_id = id.clone();
                    write_json(&args.out.join(format!("{id}.json")), &parse)?;
                } else if let Some(e) = &error {
                    log::error!("{id}: {e}");
                }
                Ok(ChartOutcome {
                    chart_id: id,
                    ok: error.is_none(),
                    call_count: transcript.call_count,
                    error,
                })
            })
            .collect()
    });
    let charts = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = ParseSummary {
        mode: args.mode,
        n_max: args.n_max,
        total_calls: charts.iter().map(|c| u64::from(c.call_count)).sum(),
        failed: charts.iter().filter(|c| !c.ok).count(),
        charts,
    };
    write_json(&args.out.join(PARSE_SUMMARY), &summary)?;
    run.output(PARSE_SUMMARY);
    println!(
        "parsed {} charts in mode {} ({} inference calls, {} failed)",
        summary.charts.len(),
        args.mode.name(),
        summary.total_calls,
        summary.failed
    );
    if summary.failed > 0 {
        run.finish(&args.out, "endpoint errors")?;
        return Err(CliError::Endpoint(format!(
            "{} of {} charts failed; see {}",
            summary.failed,
            summary.charts.len(),
            PARSE_SUMMARY
        )));
    }
    run.finish(&args.out, "ok")?;
    Ok(summary)
}

pub fn cmd_parse(args: &ParseArgs) -> Result<ParseSummary> {
    let config = Config::load(args.config.as_deref())?;
    match config.client.kind {
        ClientKind::Simulator => {
            let spec = config.simulator;
            let factory = move |input: &ChartInput| -> Result<Box<dyn ModelClient + Send>> {
                let ann = input.annotation.clone().ok_or_else(|| {
                    CliError::Usage(format!(
                        "the simulator client needs the annotation {}.json next to the image",
                        input.chart_id
                    ))
                })?;
                Ok(Box::new(SimulatedClient::new(
                    ann,
                    spec,
                    derive_seed(args.seed, input.index),
                )?))
            };
            parse_with(args, &config, &factory)
        }
        ClientKind::Remote => {
            let endpoint = config.remote.clone().expect("validated config has [remote]");
            let limiter = InFlight::new(endpoint.max_in_flight);
            let prompts = config.prompt_templates()?;
            let factory = move |_: &ChartInput| -> Result<Box<dyn ModelClient + Send>> {
                Ok(Box::new(RemoteClient::new(
                    endpoint.clone(),
                    prompts.clone(),
                    Arc::clone(&limiter),
                )))
            };
            parse_with(args, &config, &factory)
        }
    }
}
