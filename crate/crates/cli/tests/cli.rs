mod common;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::thread;

use chartrefine::commands::{
    cmd_eval, cmd_generate, cmd_parse, cmd_quality, cmd_simulate, load_charts, parse_with, ChartInput, EvalArgs,
    ParseArgs, ParseSummary, PresetArg, QualityArgs, SimulateArgs, SimulationReport, EVAL_REPORT, TRAINING_SAMPLES,
};
use chartrefine::config::Config;
use chartrefine::io::{list_chart_json, load_annotations, read_json};
use chartrefine::remote::{EndpointConfig, InFlight, RemoteClient};
use chartrefine::CliError;
use chartrefine_core::prompts::PromptTemplates;
use chartrefine_core::refine::{ClientError, ModelClient, ParseMode, Verdict};
use chartrefine_core::scrm::Preset;
use chartrefine_core::{ChartAnnotation, ParseResult, PixelPoint, Raster, Rgb};
use common::*;
use serde_json::Value;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chartrefine"))
}

fn eval_args(pred: &Path, gt: &Path, out: &Path) -> EvalArgs {
    EvalArgs {
        pred_dir: pred.to_path_buf(),
        gt_dir: gt.to_path_buf(),
        iou_thresholds: None,
        preset: vec![PresetArg::All],
        out: out.to_path_buf(),
    }
}

fn parse_args(input: &Path, out: &Path, mode: ParseMode) -> ParseArgs {
    ParseArgs {
        input: input.to_path_buf(),
        config: None,
        n_max: 3,
        mode,
        out: out.to_path_buf(),
        save_rounds: false,
        jobs: Some(2),
        seed: 0,
        resize: 1036,
    }
}

fn simulate_args(corpus: &Path, out: &Path, config: Option<&Path>) -> SimulateArgs {
    SimulateArgs {
        corpus: corpus.to_path_buf(),
        config: config.map(Path::to_path_buf),
        n_max: 3,
        trials: 1,
        seed: 11,
        out: out.to_path_buf(),
        jobs: None,
        tolerance: 8,
    }
}

#[test]
fn generate_twice_gives_identical_corpora() {
    let d = tempdir().unwrap();
    generate(&d.path().join("a"), 10, 7);
    generate(&d.path().join("b"), 10, 7);
    assert!(snapshot(&d.path().join("a")).len() >= 21);
    assert_eq!(
        snapshot_diff(&d.path().join("a"), &d.path().join("b")),
        Vec::<std::path::PathBuf>::new()
    );
    generate(&d.path().join("c"), 10, 8);
    assert!(!snapshot_diff(&d.path().join("a"), &d.path().join("c")).is_empty());
}

#[test]
fn generate_zero_is_usage_error() {
    let d = tempdir().unwrap();
    let out = bin()
        .args(["generate", "-n", "0", "--out"])
        .arg(d.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.path().join("c").exists());
}

#[test]
fn training_samples_are_four_per_chart() {
    let d = tempdir().unwrap();
    let mut args = generate_args(d.path(), 6, 3);
    args.with_training_samples = true;
    cmd_generate(&args).unwrap();
    let file = fs::File::open(d.path().join(TRAINING_SAMPLES)).unwrap();
    let records: Vec<Value> = BufReader::new(file)
        .lines()
        .map(|l| serde_json::from_str(&l.unwrap()).unwrap())
        .collect();
    assert_eq!(records.len(), 4 * 6);
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        *kinds.entry(r["kind"].as_str().unwrap().to_string()).or_default() += 1;
        for img in r["images"].as_array().unwrap() {
            assert!(d.path().join(img.as_str().unwrap()).is_file(), "{img}");
        }
    }
    assert_eq!(kinds.len(), 4);
    assert!(kinds.values().all(|&n| n == 6));
}

#[test]
fn config_errors_exit_with_config_status() {
    let d = tempdir().unwrap();
    let cfg = write(&d.path().join("bad.toml"), "[generator]\nseed = 1\nwidth = 3\n");
    let out = bin()
        .args(["generate", "-n", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("width"), "{err}");
}

#[test]
fn missing_input_is_io_error() {
    let d = tempdir().unwrap();
    let out = bin()
        .args(["quality", "--corpus"])
        .arg(d.path().join("nope"))
        .arg("--out")
        .arg(d.path().join("q"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_against_itself_is_perfect() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 12, 5);
    let r = cmd_eval(&eval_args(&corpus, &corpus, &d.path().join("e"))).unwrap();
    for p in Preset::ALL {
        assert_eq!(r.ap(p), Some(1.0));
    }
    assert!(r.missing_predictions.is_empty());
}

#[test]
fn eval_with_empty_predictions_scores_zero() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 5, 5);
    fs::create_dir(d.path().join("empty")).unwrap();
    let r = cmd_eval(&eval_args(&d.path().join("empty"), &corpus, &d.path().join("e"))).unwrap();
    for p in Preset::ALL {
        assert_eq!(r.ap(p), Some(0.0));
    }
    assert_eq!(r.missing_predictions.len(), 5);
}

#[test]
fn eval_report_matches_schema() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 6, 9);
    let out = d.path().join("e");
    cmd_eval(&eval_args(&corpus, &corpus, &out)).unwrap();
    let schema: Value = serde_json::from_str(include_str!("../schemas/scrm_report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let report: Value = read_json(&out.join(EVAL_REPORT)).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let mut broken = report.clone();
    broken["presets"][0]["ap"] = Value::from(1.5);
    assert!(!validator.is_valid(&broken));
}

#[test]
fn eval_reads_triplet_files_and_single_presets() {
    let d = tempdir().unwrap();
    let (pred, gt) = (d.path().join("p"), d.path().join("g"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    write(
        &gt.join("a.json"),
        r#"{"series": [{"label": "s", "points": [{"category": "x", "y": 10.0}, {"category": "y", "y": 20.0}]}]}"#,
    );
    write(
        &pred.join("a.json"),
        r#"{"chart_id": "a", "triplets": [{"series": "s", "category": "x", "value": 10.4}]}"#,
    );
    let mut args = eval_args(&pred, &gt, &d.path().join("e"));
    args.preset = vec![PresetArg::High];
    args.iou_thresholds = Some(vec![0.5]);
    let r = cmd_eval(&args).unwrap();
    assert_eq!(r.presets.len(), 1);
    // one of two ground-truth triplets matched: IoU 1/2
    assert_eq!(r.presets[0].per_chart[0].iou, 0.5);
    assert_eq!(r.ap(Preset::High), Some(1.0));
    assert_eq!(load_charts(&pred).unwrap()[0].triplets.len(), 1);
}

/// One series holding `n` copies of the chart's first point.
fn with_points(ann: &ChartAnnotation, n: usize) -> ChartAnnotation {
    let mut a = ann.clone();
    a.series.truncate(1);
    let p = a.series[0].points[0].clone();
    a.series[0].points = vec![p; n];
    a
}

#[test]
fn quality_mirrors_metric_examples() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 4, 21);
    let anns = load_annotations(&corpus).unwrap();
    let run = |name: &str, charts: &[ChartAnnotation]| {
        let dir = d.path().join(name);
        fs::create_dir(&dir).unwrap();
        for (i, a) in charts.iter().enumerate() {
            fs::write(dir.join(format!("{i}.json")), serde_json::to_vec(a).unwrap()).unwrap();
        }
        cmd_quality(&QualityArgs {
            corpus: dir,
            k: 100,
            out: d.path().join(format!("{name}_out")),
        })
        .unwrap()
    };
    let s = run("two", &[with_points(&anns[0], 4), with_points(&anns[1], 6)]);
    assert_eq!(s.avg_points_per_chart, 5.0);
    let s = run("one", &[with_points(&anns[2], 22)]);
    assert_eq!(s.avg_points_per_chart, 22.0);
    assert!(d.path().join("one_out/corpus_stats.json").is_file());

    // a generated corpus stays inside the configured point range
    let s = cmd_quality(&QualityArgs {
        corpus: corpus.clone(),
        k: 100,
        out: d.path().join("q"),
    })
    .unwrap();
    let range = Config::default().generator.points_per_chart;
    let expected = anns.iter().map(|a| a.point_count()).sum::<usize>() as f64 / 4.0;
    assert_eq!(s.avg_points_per_chart, expected);
    assert!(s.avg_points_per_chart >= f64::from(range[0]) && s.avg_points_per_chart <= f64::from(range[1]));
    assert_eq!(s.chart_count, 4);
}

#[test]
fn parse_direct_makes_one_call_per_chart() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 5, 1);
    let s = cmd_parse(&parse_args(&corpus, &d.path().join("p"), ParseMode::Direct)).unwrap();
    assert_eq!(s.charts.len(), 5);
    assert!(s.charts.iter().all(|c| c.call_count == 1 && c.ok));
    let s = cmd_parse(&parse_args(&corpus, &d.path().join("p2"), ParseMode::AnchorsOnly)).unwrap();
    assert!(s.charts.iter().all(|c| c.call_count == 2));
}

struct NeverConfirm;

impl ModelClient for NeverConfirm {
    fn localize(&mut self, _: &Raster) -> Result<Vec<PixelPoint>, ClientError> {
        Ok(vec![PixelPoint::new(1, 1)])
    }
    fn verify(&mut self, _: &Raster, _: &Raster, current: &[PixelPoint]) -> Result<Verdict, ClientError> {
        Ok(Verdict::Corrected(
            current.iter().map(|p| PixelPoint::new(p.x + 1, p.y)).collect(),
        ))
    }
    fn decode(&mut self, _: &Raster, _: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError> {
        Ok(ParseResult::default())
    }
}

#[test]
fn parse_never_confirming_client_uses_n_max_plus_two_calls() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 4, 2);
    let mut args = parse_args(&corpus, &d.path().join("p"), ParseMode::Vsr);
    args.save_rounds = true;
    let factory = |_: &ChartInput| -> chartrefine::Result<Box<dyn ModelClient + Send>> { Ok(Box::new(NeverConfirm)) };
    let s: ParseSummary = parse_with(&args, &Config::default(), &factory).unwrap();
    assert!(s.charts.iter().all(|c| c.call_count == 5));
    assert_eq!(s.total_calls, 20);
    let rounds = fs::read_dir(d.path().join("p/rounds")).unwrap().count();
    assert_eq!(rounds, 4 * 3);
    let t: Value = read_json(&d.path().join("p/transcripts/chart_000000.json")).unwrap();
    assert_eq!(t["rounds"].as_array().unwrap().len(), 4);
    assert_eq!(t["rounds"][3]["action"], "forced_stop");
}

struct Broken;

impl ModelClient for Broken {
    fn localize(&mut self, _: &Raster) -> Result<Vec<PixelPoint>, ClientError> {
        Err(ClientError::Transport("connection refused".into()))
    }
    fn verify(&mut self, _: &Raster, _: &Raster, _: &[PixelPoint]) -> Result<Verdict, ClientError> {
        unreachable!()
    }
    fn decode(&mut self, _: &Raster, _: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError> {
        Ok(ParseResult::default())
    }
}

#[test]
fn endpoint_failures_do_not_abort_the_batch() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 4, 2);
    let out = d.path().join("p");
    let args = parse_args(&corpus, &out, ParseMode::Vsr);
    let factory = |c: &ChartInput| -> chartrefine::Result<Box<dyn ModelClient + Send>> {
        if c.index == 1 {
            Ok(Box::new(Broken))
        } else {
            Ok(Box::new(NeverConfirm))
        }
    };
    let e = parse_with(&args, &Config::default(), &factory).unwrap_err();
    assert!(matches!(e, CliError::Endpoint(_)));
    assert_eq!(e.exit_code(), 5);
    let s: ParseSummary = read_json(&out.join("parse_summary.json")).unwrap();
    assert_eq!(s.failed, 1);
    assert!(!s.charts[1].ok && s.charts[1].error.as_deref().unwrap().contains("connection refused"));
    assert_eq!(list_chart_json(&out).unwrap().len(), 3);
    assert!(out.join("run_manifest.json").is_file());
}

#[test]
fn noiseless_simulator_parse_scores_perfectly() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 8, 4);
    let cfg = write(&d.path().join("sim.toml"), NOISELESS_SIMULATOR);
    let out = d.path().join("p");
    let mut args = parse_args(&corpus, &out, ParseMode::Vsr);
    args.config = Some(cfg);
    let s = cmd_parse(&args).unwrap();
    assert!(s.charts.iter().all(|c| c.call_count == 3));
    let r = cmd_eval(&eval_args(&out, &corpus, &d.path().join("e"))).unwrap();
    for p in &r.presets {
        assert!(p.per_chart.iter().all(|c| c.iou == 1.0), "{:?}", p.preset);
    }
}

#[test]
fn parse_single_image_without_annotation_needs_remote_client() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 1, 4);
    let img = d.path().join("lone.png");
    fs::copy(corpus.join("chart_000000.png"), &img).unwrap();
    let e = cmd_parse(&parse_args(&img, &d.path().join("p"), ParseMode::Direct)).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let ok = cmd_parse(&parse_args(
        &corpus.join("chart_000000.png"),
        &d.path().join("p2"),
        ParseMode::Direct,
    ))
    .unwrap();
    assert_eq!(ok.charts[0].chart_id, "chart_000000");
}

#[test]
fn simulate_forced_fixer_recalls_every_error() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 20, 6);
    let cfg = write(
        &d.path().join("fix.toml"),
        "[simulator]\nfix_prob = 1.0\nfalse_confirm_prob = 0.0\n",
    );
    let r = cmd_simulate(&simulate_args(&corpus, &d.path().join("s"), Some(&cfg))).unwrap();
    let r1 = r.rounds.round(1).unwrap();
    assert_eq!(r1.error_recall, Some(1.0));
    assert!(r.rounds.round(0).unwrap().error_samples > 0);
}

#[test]
fn simulate_without_perturbation_confirms_correctly() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 15, 6);
    let cfg = write(
        &d.path().join("zero.toml"),
        "[simulator]\ninitial = { omission_rate = 0.0, shift_sigma_px = 0.0, hallucination_rate = 0.0, duplicate_rate = 0.0 }\n",
    );
    let r = cmd_simulate(&simulate_args(&corpus, &d.path().join("s"), Some(&cfg))).unwrap();
    assert_eq!(r.rounds.round(0).unwrap().error_samples, 0);
    for s in &r.rounds.rounds[1..] {
        assert!(s.correct_confirmation.is_none_or(|c| c == 1.0));
    }
    assert_eq!(r.rounds.round(1).unwrap().correct_confirmation, Some(1.0));
}

#[test]
fn simulate_default_spec_reduces_errors() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 100, 0);
    let r: SimulationReport = cmd_simulate(&simulate_args(&corpus, &d.path().join("s"), None)).unwrap();
    assert!(r.rounds.round(1).unwrap().error_samples < r.rounds.round(0).unwrap().error_samples);
    let saved: SimulationReport = read_json(&d.path().join("s/simulation_report.json")).unwrap();
    assert_eq!(saved, r);
}

#[test]
fn simulate_rejects_zero_trials() {
    let d = tempdir().unwrap();
    let corpus = d.path().join("c");
    generate(&corpus, 2, 6);
    let mut args = simulate_args(&corpus, &d.path().join("s"), None);
    args.trials = 0;
    assert_eq!(cmd_simulate(&args).unwrap_err().exit_code(), 2);
}

/// Minimal HTTP server answering each request with the next canned response.
fn mock_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock()
                .unwrap()
                .push(serde_json::from_slice(&buf).unwrap_or(Value::Null));
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn remote(base_url: String) -> RemoteClient {
    let config = EndpointConfig {
        base_url,
        api_key_env: "CHARTREFINE_TEST_NO_KEY".into(),
        timeout_secs: 10,
        backoff_initial_ms: 1,
        max_attempts: 3,
        ..EndpointConfig::default()
    };
    RemoteClient::new(config, PromptTemplates::default(), InFlight::new(1))
}

#[test]
fn remote_client_retries_and_parses_lenient_replies() {
    let (url, seen) = mock_server(vec![
        (503, "busy".into()),
        (200, completion("Sure! The points are [[10, 20], [30, 40]].")),
        (200, completion("```\nCONFIRM\n```")),
        (200, completion("[[11, 21]]")),
    ]);
    let mut c = remote(url);
    let img = Raster::new(40, 30, Rgb::WHITE);
    let pts = c.localize(&img).unwrap();
    assert_eq!(pts, vec![PixelPoint::new(10, 20), PixelPoint::new(30, 40)]);
    assert_eq!(c.retries, 1);
    assert_eq!(c.verify(&img, &img, &pts).unwrap(), Verdict::Confirm);
    assert_eq!(
        c.verify(&img, &img, &pts).unwrap(),
        Verdict::Corrected(vec![PixelPoint::new(11, 21)])
    );
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 4);
    let content = seen[2]["messages"][0]["content"].as_array().unwrap();
    assert_eq!(content.iter().filter(|c| c["type"] == "image_url").count(), 2);
    assert!(content[0]["text"].as_str().unwrap().contains("[[10, 20], [30, 40]]"));
}

#[test]
fn remote_client_gives_up_on_client_errors() {
    let (url, seen) = mock_server(vec![(400, r#"{"error": "bad"}"#.into())]);
    let mut c = remote(url);
    let e = c.localize(&Raster::new(8, 8, Rgb::WHITE)).unwrap_err();
    assert!(matches!(e, ClientError::Transport(ref m) if m.contains("400")), "{e:?}");
    assert_eq!(c.retries, 0);
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn remote_client_reports_unparseable_replies() {
    let (url, _) = mock_server(vec![(200, completion("I cannot see any chart."))]);
    let mut c = remote(url);
    let e = c.localize(&Raster::new(8, 8, Rgb::WHITE)).unwrap_err();
    assert!(matches!(e, ClientError::Protocol { .. }), "{e:?}");
}
