use chartrefine_core::engine::{
    build_training_samples, derive_seed, generate_chart, generate_corpus, inject_errors, quality_filter, FilterRule,
    FilterVerdict, GeneratorConfig, ImageRole, InjectedError, PerturbationSpec, SampleKind, SampleTarget,
};
use chartrefine_core::prompts::{PromptTemplates, CONFIRM_TOKEN};
use chartrefine_core::quality::chart_pair_correlations;
use chartrefine_core::render::{rasterize, ChartSpec, LegendPosition, SeriesSpec, StyleConfig};
use chartrefine_core::{ChartType, ParseResult, PixelPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn line_spec() -> ChartSpec {
    ChartSpec {
        chart_id: "t".into(),
        chart_type: ChartType::Line,
        title: Some("Rainfall".into()),
        x_label: Some("Month".into()),
        y_label: Some("mm".into()),
        categories: ["Jan", "Feb", "Mar", "Apr"].map(String::from).to_vec(),
        series: vec![
            SeriesSpec {
                label: "North".into(),
                values: vec![3.0, 7.5, 4.25, 9.0],
                xs: None,
            },
            SeriesSpec {
                label: "South".into(),
                values: vec![1.0, 2.0, 8.0, 6.0],
                xs: None,
            },
        ],
    }
}

#[test]
fn generation_is_deterministic() {
    let cfg = GeneratorConfig {
        seed: 7,
        ..Default::default()
    };
    let a = generate_chart(&cfg, 0).unwrap();
    let b = generate_chart(&cfg, 0).unwrap();
    assert_eq!(a.chart.image.as_raw(), b.chart.image.as_raw());
    assert_eq!(a.chart.annotation, b.chart.annotation);
    assert_eq!(a.chart.annotation.chart_id, "chart_000000");
}

#[test]
fn slots_do_not_depend_on_each_other() {
    let cfg = GeneratorConfig {
        seed: 99,
        ..Default::default()
    };
    let corpus = generate_corpus(&cfg, 4).unwrap();
    let alone = generate_chart(&cfg, 3).unwrap();
    assert_eq!(corpus[3].chart.annotation, alone.chart.annotation);
    assert_ne!(derive_seed(99, 0), derive_seed(99, 1));
    assert_ne!(derive_seed(99, 0), derive_seed(100, 0));
    assert!(generate_corpus(&cfg, 0).is_err());
}

#[test]
fn generated_annotations_are_consistent() {
    let cfg = GeneratorConfig {
        seed: 3,
        ..Default::default()
    };
    for g in generate_corpus(&cfg, 40).unwrap() {
        let a = &g.chart.annotation;
        a.validate(1.0).unwrap();
        assert!(quality_filter(&g.chart).passed());
        assert_eq!(ParseResult::from(a).validate(), Ok(()));
        let n = a.point_count() as u32;
        assert!(n >= 2, "{n}");
    }
}

#[test]
fn correlated_series_are_rejected() {
    let cfg = GeneratorConfig {
        seed: 5,
        series_per_chart: [2, 2],
        correlation_rejection_threshold: 0.9,
        ..Default::default()
    };
    for g in generate_corpus(&cfg, 60).unwrap() {
        for r in chart_pair_correlations(&g.chart.annotation) {
            assert!(r < 0.9, "{} has |r| = {r}", g.chart.annotation.chart_id);
        }
    }
}

#[test]
fn filter_passes_default_chart() {
    let rc = rasterize(&line_spec(), &StyleConfig::default(), 640, 480).unwrap();
    assert_eq!(quality_filter(&rc), FilterVerdict::Pass);
}

#[test]
fn filter_rejects_low_contrast() {
    let mut style = StyleConfig::default();
    style.palette[0] = style.background;
    let rc = rasterize(&line_spec(), &style, 640, 480).unwrap();
    assert!(matches!(
        quality_filter(&rc),
        FilterVerdict::Fail {
            rule: FilterRule::Contrast,
            ..
        }
    ));
}

#[test]
fn filter_rejects_clustered_scatter() {
    // 40 points inside a 10 px cluster: x in [0, 1] over a ~500 px axis with a
    // wide range anchor point keeps the cluster tight.
    let mut xs: Vec<f64> = (0..40).map(|i| 500.0 + f64::from(i % 8) * 0.2).collect();
    let mut ys: Vec<f64> = (0..40).map(|i| 500.0 + f64::from(i / 8) * 0.2).collect();
    xs.push(0.0);
    ys.push(0.0);
    xs.push(1000.0);
    ys.push(1000.0);
    let spec = ChartSpec {
        chart_id: "cluster".into(),
        chart_type: ChartType::Scatter,
        title: None,
        x_label: None,
        y_label: None,
        categories: vec![],
        series: vec![SeriesSpec {
            label: "Dots".into(),
            values: ys,
            xs: Some(xs),
        }],
    };
    let style = StyleConfig {
        legend_position: LegendPosition::None,
        ..Default::default()
    };
    let rc = rasterize(&spec, &style, 640, 480).unwrap();
    let anchors = rc.annotation.anchors();
    let cluster = &anchors[..40];
    // oracle: every cluster point has a neighbour within 3 px
    let crowded = cluster
        .iter()
        .enumerate()
        .filter(|(i, p)| cluster.iter().enumerate().any(|(j, q)| *i != j && p.distance(q) <= 3.0))
        .count();
    assert!(crowded as f64 > 0.3 * anchors.len() as f64);
    assert!(matches!(
        quality_filter(&rc),
        FilterVerdict::Fail {
            rule: FilterRule::Occlusion,
            ..
        }
    ));
}

fn rendered() -> chartrefine_core::RenderedChart {
    rasterize(&line_spec(), &StyleConfig::default(), 640, 480).unwrap()
}

#[test]
fn zero_perturbation_is_identity() {
    let rc = rendered();
    let p = inject_errors(&rc.annotation, &PerturbationSpec::NONE, 1).unwrap();
    assert_eq!(p.points, rc.annotation.anchors());
    assert!(p.ledger.is_empty());
}

#[test]
fn full_omission_empties_the_list() {
    let rc = rendered();
    let spec = PerturbationSpec {
        omission_rate: 1.0,
        ..PerturbationSpec::NONE
    };
    let p = inject_errors(&rc.annotation, &spec, 1).unwrap();
    assert!(p.points.is_empty());
    assert_eq!(p.ledger.len(), rc.annotation.point_count());
    assert!(p.ledger.iter().all(|e| matches!(e, InjectedError::Omission { .. })));
}

#[test]
fn hallucinations_follow_the_seeded_stream() {
    let rc = rendered();
    let spec = PerturbationSpec {
        hallucination_rate: 2.0,
        ..PerturbationSpec::NONE
    };
    for seed in 0..20 {
        let p = inject_errors(&rc.annotation, &spec, seed).unwrap();
        // replay: two uniform draws per anchor, then the Poisson count
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..rc.annotation.point_count() {
            let _: f64 = rng.random();
            let _: f64 = rng.random();
        }
        let k = Poisson::new(2.0).unwrap().sample(&mut rng) as usize;
        assert_eq!(p.points.len(), rc.annotation.point_count() + k);
        let plot = rc.calibration.plot_area();
        for e in &p.ledger {
            let InjectedError::Hallucination { at } = e else {
                panic!("{e:?}")
            };
            assert!(plot.contains(*at, 0));
        }
    }
}

fn any_spec() -> impl Strategy<Value = PerturbationSpec> {
    (0.0..=1.0f64, 0.0..10.0f64, 0.0..4.0f64, 0.0..=1.0f64).prop_map(|(o, s, h, d)| PerturbationSpec {
        omission_rate: o,
        shift_sigma_px: s,
        hallucination_rate: h,
        duplicate_rate: d,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ledger_reconciles_counts(spec in any_spec(), seed in any::<u64>()) {
        let rc = rendered();
        let p = inject_errors(&rc.annotation, &spec, seed).unwrap();
        let om = p.count(|e| matches!(e, InjectedError::Omission { .. }));
        let dup = p.count(|e| matches!(e, InjectedError::Duplicate { .. }));
        let hal = p.count(|e| matches!(e, InjectedError::Hallucination { .. }));
        prop_assert_eq!(p.points.len(), rc.annotation.point_count() - om + dup + hal);
        let (w, h) = (rc.image.width(), rc.image.height());
        prop_assert!(p.points.iter().all(|q| q.in_bounds(w, h)));
    }

    #[test]
    fn correction_target_is_ground_truth(spec in any_spec(), seed in any::<u64>()) {
        let rc = rendered();
        let set = build_training_samples(&rc, &spec, seed, &PromptTemplates::default()).unwrap();
        let correct = set.samples.iter().find(|s| s.kind == SampleKind::RefineCorrect).unwrap();
        prop_assert_eq!(&correct.target, &SampleTarget::Localizations(rc.annotation.anchors()));
    }
}

#[test]
fn four_training_samples() {
    let rc = rendered();
    let set = build_training_samples(&rc, &PerturbationSpec::default(), 4, &PromptTemplates::default()).unwrap();
    let kinds: Vec<SampleKind> = set.samples.iter().map(|s| s.kind).collect();
    assert_eq!(
        kinds,
        [
            SampleKind::RefineFromScratch,
            SampleKind::RefineConfirm,
            SampleKind::RefineCorrect,
            SampleKind::Decode
        ]
    );
    let confirm = &set.samples[1];
    assert_eq!(confirm.target, SampleTarget::Token(CONFIRM_TOKEN.into()));
    assert_eq!(CONFIRM_TOKEN, "CONFIRM");
    assert_eq!(set.samples[2].images, [ImageRole::Original, ImageRole::CorrectOverlay]);
    let SampleTarget::Parse(parse) = &set.samples[3].target else {
        panic!()
    };
    parse.validate().unwrap();
    assert_eq!(parse, &ParseResult::from(&rc.annotation));
    // confirm overlay shows every anchor in marker gold
    for PixelPoint { x, y } in rc.annotation.anchors() {
        assert_eq!(
            set.confirm_overlay.get(x, y),
            Some(chartrefine_core::render::MARKER_COLOR)
        );
    }
    let json = serde_json::to_string(&set.samples[1]).unwrap();
    assert!(json.contains("\"target\":\"CONFIRM\""), "{json}");
}
