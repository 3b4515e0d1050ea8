use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use cbsbench_core::corpus::{load_corpus, sample_corpus_dir, validate_corpus, Corpus, FindingKind};
use cbsbench_core::harness::*;
use cbsbench_core::metric::RunResult;
use cbsbench_core::scoring::{
    reference_score, AggregationMode, Directionality, FillScore, ReferenceScorer, ScoreError, Scorer,
    ScorerHandle, ScorerKind,
};
use cbsbench_core::text::derive_seed;
use cbsbench_core::transforms::TransformSpec;
use proptest::prelude::*;

fn sample() -> Corpus {
    load_corpus(sample_corpus_dir()).unwrap()
}

fn seeded() -> EvalOptions {
    EvalOptions {
        seed: Some(11),
        ..EvalOptions::default()
    }
}

/// Reference probabilities pushed through a strictly increasing map.
struct Rescaled<F>(F, Directionality);

impl<F: Fn(f64) -> f64 + Send + Sync> Scorer for Rescaled<F> {
    fn handle(&self) -> ScorerHandle {
        ScorerHandle {
            model_id: "rescaled".into(),
            kind: ScorerKind::Reference,
            endpoint: None,
            directionality: self.1,
        }
    }

    fn score_batch(&self, text: &str, candidates: &[String], mode: AggregationMode) -> Result<Vec<FillScore>, ScoreError> {
        candidates
            .iter()
            .map(|c| {
                let p = reference_score(text, c)?.aggregate;
                FillScore::from_subwords(c.clone(), vec![(self.0)(p)], mode)
            })
            .collect()
    }
}

/// Reference scorer that answers after a pseudo-random delay.
struct Jittery(AtomicUsize);

impl Scorer for Jittery {
    fn handle(&self) -> ScorerHandle {
        ReferenceScorer::default().handle()
    }

    fn score_batch(&self, text: &str, candidates: &[String], mode: AggregationMode) -> Result<Vec<FillScore>, ScoreError> {
        let n = self.0.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(Duration::from_micros(derive_seed(n as u64, &[text]) % 3000));
        ReferenceScorer::default().score_batch(text, candidates, mode)
    }
}

struct Failing;

impl Scorer for Failing {
    fn handle(&self) -> ScorerHandle {
        ReferenceScorer::default().handle()
    }

    fn score_batch(&self, _: &str, _: &[String], _: AggregationMode) -> Result<Vec<FillScore>, ScoreError> {
        Err(ScoreError::Unreachable { endpoint: "stub".into(), message: "down".into() })
    }
}

fn cbs_values(r: &RunResult) -> Vec<(String, f64)> {
    r.aspect_results
        .iter()
        .map(|a| (a.aspect_id.clone(), a.cbs_percent))
        .collect()
}

#[test]
fn sample_corpus_validates() {
    let corpus = sample();
    let report = validate_corpus(&corpus);
    assert!(report.is_ok(), "{report}");
    assert_eq!(corpus.aspects.len(), 10);
    assert!(report
        .findings
        .iter()
        .any(|f| f.aspect_id == "food" && matches!(f.kind, FindingKind::UnequalTargetCounts { .. })));
    assert!(corpus
        .prompts_for("literature")
        .all(|p| !p.has_first_person_pronoun));
}

#[test]
fn unequal_targets_need_a_seed() {
    let err = evaluate(&sample(), &ReferenceScorer::default(), &EvalOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::MissingSeed(_)));
    let only_equal = EvalOptions {
        aspects: AspectSelection::List(vec!["beverage".into()]),
        ..EvalOptions::default()
    };
    evaluate(&sample(), &ReferenceScorer::default(), &only_equal).unwrap();
}

#[test]
fn evaluation_is_repeatable_and_complete() {
    let corpus = sample();
    let a = evaluate(&corpus, &ReferenceScorer::default(), &seeded()).unwrap();
    let b = evaluate(&corpus, &ReferenceScorer::default(), &seeded()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.result.aspect_results.len(), 10);
    assert_eq!(a.meta.corpus_version, corpus.version);
    let food = a.result.aspect("food").unwrap();
    assert!(food.per_prompt.iter().all(|p| p.n_arab == 4 && p.n_western == 4));
    assert!(!a.meta.right_context_ignored);
}

#[test]
fn unknown_aspect_is_rejected() {
    let opts = EvalOptions {
        aspects: AspectSelection::List(vec!["music".into()]),
        ..seeded()
    };
    assert!(matches!(
        evaluate(&sample(), &ReferenceScorer::default(), &opts),
        Err(HarnessError::UnknownAspect(id)) if id == "music"
    ));
}

#[test]
fn monotone_rescaling_leaves_scores_unchanged() {
    let corpus = sample();
    let base = evaluate(&corpus, &Rescaled(|p| p, Directionality::Bidirectional), &seeded()).unwrap();
    let squared = evaluate(&corpus, &Rescaled(|p| p * p, Directionality::Bidirectional), &seeded()).unwrap();
    assert_eq!(cbs_values(&base.result), cbs_values(&squared.result));
}

#[test]
fn completion_order_does_not_matter() {
    let corpus = sample();
    let serial = evaluate(&corpus, &ReferenceScorer::default(), &EvalOptions { max_in_flight: 1, ..seeded() }).unwrap();
    for bound in [3, 16] {
        let parallel = evaluate(
            &corpus,
            &Jittery(AtomicUsize::new(0)),
            &EvalOptions { max_in_flight: bound, ..seeded() },
        )
        .unwrap();
        assert_eq!(serial, parallel);
    }
}

#[test]
fn scorer_failure_maps_to_exit_code_two() {
    let err = evaluate(&sample(), &Failing, &seeded()).unwrap_err();
    assert!(matches!(err, HarnessError::Score(ScoreError::Unreachable { .. })));
    assert_eq!(err.exit_code(), 2);
    assert_eq!(HarnessError::UnknownAspect("x".into()).exit_code(), 1);
}

#[test]
fn left_to_right_scorers_are_flagged() {
    let out = evaluate(&sample(), &Rescaled(|p| p, Directionality::LeftToRight), &seeded()).unwrap();
    assert!(out.meta.right_context_ignored);
}

#[test]
fn pronoun_drop_leaves_literature_alone() {
    let corpus = sample();
    let plain = evaluate(&corpus, &ReferenceScorer::default(), &seeded()).unwrap();
    let dropped = evaluate(
        &corpus,
        &ReferenceScorer::default(),
        &EvalOptions {
            transform: TransformSpec::PronounDrop,
            ..seeded()
        },
    )
    .unwrap();
    assert_eq!(
        plain.result.aspect("literature").unwrap().per_prompt,
        dropped.result.aspect("literature").unwrap().per_prompt
    );
    assert_eq!(dropped.meta.transform_label, "pronoun_drop");
}

#[test]
fn demonstrations_are_seeded() {
    let corpus = sample();
    let opts = EvalOptions {
        transform: TransformSpec::Demonstrations { demo_count: 2, seed: None },
        ..seeded()
    };
    let a = evaluate(&corpus, &ReferenceScorer::default(), &opts).unwrap();
    let b = evaluate(&corpus, &ReferenceScorer::default(), &opts).unwrap();
    assert_eq!(a, b);
    let too_many = EvalOptions {
        transform: TransformSpec::Demonstrations { demo_count: 9, seed: None },
        ..seeded()
    };
    assert!(matches!(
        evaluate(&corpus, &ReferenceScorer::default(), &too_many),
        Err(HarnessError::Transform(_))
    ));
}

#[test]
fn bootstrap_interval_brackets_the_estimate() {
    let opts = EvalOptions {
        bootstrap: Some(BootstrapConfig { resamples: 200, confidence: 0.9 }),
        ..seeded()
    };
    let out = evaluate(&sample(), &ReferenceScorer::default(), &opts).unwrap();
    for a in &out.result.aspect_results {
        let (lo, hi) = (a.ci_low.unwrap(), a.ci_high.unwrap());
        assert!(lo <= a.cbs_percent && a.cbs_percent <= hi);
    }
    let no_seed = EvalOptions { seed: None, ..opts };
    assert!(evaluate(&sample(), &ReferenceScorer::default(), &no_seed).is_err());
}

#[test]
fn results_round_trip_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = evaluate(&sample(), &ReferenceScorer::default(), &seeded()).unwrap();
    let (p1, p2) = (dir.path().join("a.jsonl"), dir.path().join("b/c.jsonl"));
    write_results(&p1, &out).unwrap();
    let back = read_results(&p1).unwrap();
    assert_eq!(back, out);
    write_results(&p2, &back).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn tampered_results_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = evaluate(&sample(), &ReferenceScorer::default(), &seeded()).unwrap();
    let path = dir.path().join("r.jsonl");
    write_results(&path, &out).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, truncated).unwrap();
    assert!(matches!(read_results(&path), Err(HarnessError::ResultsFormat { .. })));
}

#[test]
fn run_evaluation_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "corpus_path": sample_corpus_dir(),
        "scorer": {"model_id": "reference", "kind": "reference", "cache_path": "scores.jsonl"},
        "aspects": "all",
        "transform": {"kind": "identity"},
        "aggregation_mode": "arithmetic_mean",
        "seed": 11,
        "output_path": "results.jsonl"
    });
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let config = RunConfig::from_file(&cfg_path).unwrap();
    let first = run_evaluation(&config).unwrap();
    assert!(dir.path().join("scores.jsonl").exists());

    // Replaying the populated store reproduces every score.
    let mut replay = config.clone();
    replay.scorer.kind = ScorerKind::Cached;
    replay.output_path = dir.path().join("replayed.jsonl");
    let second = run_evaluation(&replay).unwrap();
    assert_eq!(cbs_values(&first.result), cbs_values(&second.result));
    assert_eq!(second.meta.scorer.kind, ScorerKind::Cached);
}

#[test]
fn remote_without_endpoint_is_a_config_error() {
    std::env::remove_var(cbsbench_core::scoring::ENDPOINT_ENV);
    let cfg = ScorerConfig {
        model_id: "m".into(),
        kind: ScorerKind::Remote,
        endpoint: None,
        directionality: None,
        cache_path: None,
        max_in_flight: 1,
    };
    assert!(matches!(build_scorer(&cfg), Err(HarnessError::Config(_))));
}

#[test]
fn report_layout_and_markers() {
    let corpus = sample();
    let a = evaluate(&corpus, &ReferenceScorer::new("model-a"), &seeded()).unwrap().result;
    let b = evaluate(&corpus, &Rescaled(|p| 1.0 - p, Directionality::Bidirectional), &seeded())
        .unwrap()
        .result;
    let csv = render_report(&[a.clone(), b.clone()], ReportFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.split(',').count() == 12));
    assert!(lines[0].ends_with(",Avg"));
    assert_eq!(lines[1].split(',').next_back().unwrap(), format_percent(a.average_cbs));

    let md = render_report(&[a.clone(), b.clone()], ReportFormat::Markdown).unwrap();
    assert!(md.contains("**"));
    assert_eq!(md.lines().filter(|l| l.starts_with('|')).count(), 4);
    let plain = render_report(&[a.clone(), b], ReportFormat::PlainTable).unwrap();
    assert!(plain.contains('*'));
    if a.aspect_results.iter().any(|r| r.cbs_percent >= 50.0) {
        assert!(plain.contains('†'));
    }

    assert!(matches!(render_report(&[], ReportFormat::Csv), Err(HarnessError::EmptyResults)));
    let mut fewer = a.clone();
    fewer.aspect_results.pop();
    assert!(matches!(
        render_report(&[a, fewer], ReportFormat::Csv),
        Err(HarnessError::AspectSetMismatch(..))
    ));
}

#[test]
fn comparison_matches_direct_subtraction() {
    let corpus = sample();
    let vanilla = evaluate(&corpus, &ReferenceScorer::default(), &seeded()).unwrap();
    let token = evaluate(
        &corpus,
        &ReferenceScorer::default(),
        &EvalOptions {
            transform: TransformSpec::culture_token(),
            ..seeded()
        },
    )
    .unwrap();
    let same = compare_runs(&vanilla, &vanilla).unwrap();
    assert!(same.rows.iter().all(|r| r.difference == 0.0));
    assert_eq!(same.average.difference, 0.0);

    let c = compare_runs(&vanilla, &token).unwrap();
    for row in &c.rows {
        let a = vanilla.result.aspect(&row.aspect_id).unwrap().cbs_percent;
        let b = token.result.aspect(&row.aspect_id).unwrap().cbs_percent;
        assert_eq!(row.difference, b - a);
    }
    assert!(c.label_b.contains("culture_token"));
    assert!(render_comparison(&c, ReportFormat::Markdown).contains("Avg"));

    let mut other = token.clone();
    other.meta.corpus_version = "sha256:0000".into();
    assert!(matches!(
        compare_runs(&vanilla, &other),
        Err(HarnessError::CorpusVersionMismatch(..))
    ));
}

#[test]
fn delta_rows_skip_literature() {
    let corpus = sample();
    let eng = evaluate(&corpus, &ReferenceScorer::default(), &seeded()).unwrap().result;
    let pd = evaluate(
        &corpus,
        &ReferenceScorer::default(),
        &EvalOptions {
            transform: TransformSpec::PronounDrop,
            ..seeded()
        },
    )
    .unwrap()
    .result;
    let row = delta_row(&eng, &pd).unwrap();
    let expected: Vec<f64> = eng
        .aspect_results
        .iter()
        .filter(|a| a.aspect_id != "literature")
        .map(|a| a.cbs_percent)
        .collect();
    assert_eq!(row.english_like, expected.iter().sum::<f64>() / 9.0);
    assert_eq!(row.delta, row.english_like - row.prodrop);

    let table = render_delta_report(&[DeltaRow::new("ARBERT", 54.94, 53.70)], ReportFormat::Csv).unwrap();
    assert_eq!(table.lines().nth(1).unwrap(), "ARBERT,54.94,53.70,1.24");
}

#[test]
fn percent_formatting() {
    for (v, s) in [
        (46.507, "46.51"),
        (44.768, "44.77"),
        (1.005, "1.01"),
        (2.675, "2.68"),
        (-0.5, "-0.50"),
        (-0.001, "0.00"),
        (99.995, "100.00"),
        (0.0, "0.00"),
        (12.0, "12.00"),
        (1e-20, "0.00"),
    ] {
        assert_eq!(format_percent(v), s, "{v}");
    }
    assert_eq!(format_percent(54.94 - 53.70), "1.24");
    assert_eq!(format_percent(51.79 - 52.29), "-0.50");
}

proptest! {
    #[test]
    fn formatted_value_is_within_half_a_cent(v in -100.0f64..100.0) {
        let s = format_percent(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 0.005 + 1e-9);
        prop_assert_eq!(s.split('.').nth(1).unwrap().len(), 2);
    }
}
