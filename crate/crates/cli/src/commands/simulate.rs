use std::collections::BTreeMap;
use std::path::PathBuf;

use chartrefine_core::engine::derive_seed;
use chartrefine_core::refine::{
    round_analytics, run_anchors_only, run_direct, run_vsr, ParseMode, RefineTranscript, RoundAnalytics,
    SimulatedClient, SimulatorSpec, VsrOutcome, DEFAULT_MATCH_TOLERANCE_PX,
};
use chartrefine_core::scrm::{dataset_ap, image_iou, ChartScore, IouThresholds, Preset};
use chartrefine_core::{triplets_from, ChartAnnotation, PixelPoint, Raster};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, list_corpus, read_json, read_png, write_json};
use crate::manifest::RunRecorder;

pub const SIMULATION_REPORT: &str = "simulation_report.json";

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Corpus directory written by `generate`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// TOML config; only [simulator] applies.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_max: u32,
    /// Independent simulator runs over the whole corpus.
    #[arg(long, default_value_t = 1)]
    pub trials: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Pixel distance within which a localization counts as correct.
    #[arg(long, default_value_t = DEFAULT_MATCH_TOLERANCE_PX)]
    pub tolerance: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetScore {
    pub preset: Preset,
    pub mean_iou: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: ParseMode,
    pub runs: usize,
    pub total_calls: u64,
    pub mean_calls: f64,
    pub max_calls: u32,
    /// Share of runs whose loop ended on a confirmation (vsr only).
    pub confirmed_share: Option<f64>,
    pub scores: Vec<PresetScore>,
}

/// Per-chart comparison of vsr against another mode under the High preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub against: ParseMode,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub chart_count: usize,
    pub trials: u32,
    pub seed: u64,
    pub n_max: u32,
    pub simulator: SimulatorSpec,
    pub rounds: RoundAnalytics,
    pub modes: Vec<ModeReport>,
    pub paired: Vec<PairedComparison>,
}

struct Run {
    outcome: VsrOutcome,
    /// IoU under each preset, in `Preset::ALL` order.
    iou: [f64; 3],
}

fn score(outcome: &VsrOutcome, ann: &ChartAnnotation) -> [f64; 3] {
    let pred = triplets_from(&outcome.parse);
    let gt = triplets_from(ann);
    Preset::ALL.map(|p| image_iou(&pred, &gt, p.setting()).iou)
}

fn simulate_chart(
    image: &Raster,
    ann: &ChartAnnotation,
    spec: SimulatorSpec,
    seed: u64,
    n_max: u32,
) -> Result<Vec<Run>> {
    let mut runs = Vec::with_capacity(3);
    for mode in ParseMode::ALL {
        let mut client = SimulatedClient::new(ann.clone(), spec, seed)?;
        let outcome = match mode {
            ParseMode::Vsr => run_vsr(image, &mut client, n_max),
            ParseMode::AnchorsOnly => run_anchors_only(image, &mut client),
            ParseMode::Direct => run_direct(image, &mut client),
        }
        .map_err(|e| CliError::Endpoint(format!("{}: {e}", ann.chart_id)))?;
        let iou = score(&outcome, ann);
        runs.push(Run { outcome, iou });
    }
    Ok(runs)
}

fn mode_report(mode: ParseMode, runs: &[&Run]) -> Result<ModeReport> {
    let total_calls: u64 = runs.iter().map(|r| u64::from(r.outcome.transcript.call_count)).sum();
    let n = runs.len();
    let scores = Preset::ALL
        .iter()
        .enumerate()
        .map(|(k, &preset)| {
            let per_chart: Vec<ChartScore> = runs
                .iter()
                .map(|r| ChartScore {
                    chart_id: r.outcome.transcript.chart_id.clone(),
                    iou: r.iou[k],
                    matched: 0,
                    p_count: 0,
                    q_count: 0,
                })
                .collect();
            Ok(PresetScore {
                preset,
                mean_iou: per_chart.iter().map(|s| s.iou).sum::<f64>() / n as f64,
                ap: dataset_ap(&per_chart, &IouThresholds::default())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeReport {
        mode,
        runs: n,
        total_calls,
        mean_calls: total_calls as f64 / n as f64,
        max_calls: runs.iter().map(|r| r.outcome.transcript.call_count).max().unwrap_or(0),
        confirmed_share: (mode == ParseMode::Vsr)
            .then(|| runs.iter().filter(|r| r.outcome.transcript.confirmed()).count() as f64 / n as f64),
        scores,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulationReport> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let config = Config::load(args.config.as_deref())?;
    let spec = config.simulator;
    let mut run = RunRecorder::start("simulate", Some(args.seed), args, &spec);
    ensure_dir(&args.out)?;
    let entries = list_corpus(&args.corpus)?;
    if entries.is_empty() {
        return Err(CliError::Usage(format!("{} holds no charts", args.corpus.display())));
    }
    let pool = super::pool(args.jobs)?;
    let charts: Vec<(Raster, ChartAnnotation)> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| Ok((read_png(&e.image_path)?, read_json(&e.annotation_path)?)))
            .collect::<Result<_>>()
    })?;

    let jobs: Vec<(u32, usize)> = (0..args.trials)
        .flat_map(|t| (0..charts.len()).map(move |i| (t, i)))
        .collect();
    let results: Vec<Vec<Run>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(t, i)| {
                let (image, ann) = &charts[i];
                let seed = derive_seed(derive_seed(args.seed, u64::from(t)), i as u64);
                let mut runs = simulate_chart(image, ann, spec, seed, args.n_max)?;
                for r in &mut runs {
                    r.outcome.transcript.chart_id = entries[i].chart_id.clone();
                }
                Ok(runs)
            })
            .collect::<Result<_>>()
    })?;

    let anchors: Vec<Vec<PixelPoint>> = charts.iter().map(|(_, a)| a.anchors()).collect();
    let vsr: Vec<(&RefineTranscript, &[PixelPoint])> = jobs
        .iter()
        .zip(&results)
        .map(|(&(_, i), runs)| (&runs[0].outcome.transcript, anchors[i].as_slice()))
        .collect();
    let rounds = round_analytics(&vsr, args.tolerance);

    let mut by_mode: BTreeMap<usize, Vec<&Run>> = BTreeMap::new();
    for runs in &results {
        for (k, r) in runs.iter().enumerate() {
            by_mode.entry(k).or_default().push(r);
        }
    }
    let modes = ParseMode::ALL
        .iter()
        .enumerate()
        .map(|(k, &m)| mode_report(m, &by_mode[&k]))
        .collect::<Result<Vec<_>>>()?;
    let high = Preset::ALL
        .iter()
        .position(|p| *p == Preset::High)
        .expect("high preset");
    let paired = [1, 2]
        .into_iter()
        .map(|k| {
            let mut c = PairedComparison {
                against: ParseMode::ALL[k],
                wins: 0,
                ties: 0,
                losses: 0,
            };
            for runs in &results {
                let (a, b) = (runs[0].iou[high], runs[k].iou[high]);
                match a.partial_cmp(&b) {
                    Some(std::cmp::Ordering::Greater) => c.wins += 1,
                    Some(std::cmp::Ordering::Less) => c.losses += 1,
                    _ => c.ties += 1,
                }
            }
            c
        })
        .collect();

    let report = SimulationReport {
        chart_count: charts.len(),
        trials: args.trials,
        seed: args.seed,
        n_max: args.n_max,
        simulator: spec,
        rounds,
        modes,
        paired,
    };
    write_json(&args.out.join(SIMULATION_REPORT), &report)?;
    run.output(SIMULATION_REPORT);
    print_report(&report);
    run.finish(&args.out, "ok")?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:.1}%", v * 100.0))
}

fn print_report(r: &SimulationReport) {
    println!(
        "{} charts x {} trials, n_max {}, match tolerance {} px",
        r.chart_count, r.trials, r.n_max, r.rounds.match_tolerance_px
    );
    println!(
        "{:<8}{:>14}{:>14}{:>22}{:>8}",
        "round", "error samples", "error recall", "correct confirmation", "active"
    );
    for s in &r.rounds.rounds {
        println!(
            "{:<8}{:>14}{:>14}{:>22}{:>8}",
            s.round,
            s.error_samples,
            fmt_opt(s.error_recall),
            fmt_opt(s.correct_confirmation),
            s.active
        );
    }
    for m in &r.modes {
        let scores: Vec<String> = m
            .scores
            .iter()
            .map(|s| format!("{} iou {:.3} ap {:.3}", s.preset.name(), s.mean_iou, s.ap))
            .collect();
        println!(
            "{:<13} calls {:.2} | {}",
            m.mode.name(),
            m.mean_calls,
            scores.join(" | ")
        );
    }
    for p in &r.paired {
        println!(
            "vsr vs {}: {} wins, {} ties, {} losses",
            p.against.name(),
            p.wins,
            p.ties,
            p.losses
        );
    }
}
