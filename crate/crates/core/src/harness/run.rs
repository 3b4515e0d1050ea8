use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use log::{debug, info};

use super::{AspectSelection, BootstrapConfig, HarnessError, RunConfig, RunMeta, RunOutput, ScorerConfig};
use crate::corpus::{
    applicable_targets, equalize_targets, validate_corpus, Corpus, Prompt, TargetEntry, TargetSet,
};
use crate::metric::{cbs_prompt, AspectResult, RunResult};
use crate::scoring::{
    score_candidates, AggregationMode, CachedScorer, Directionality, ReferenceScorer, RemoteScorer,
    RetryPolicy, ScoreError, ScoreStore, Scorer, ScorerKind, ENDPOINT_ENV,
};
use crate::text::derive_seed;
use crate::transforms::{build_demonstrations, drop_pronouns, prepend_culture_token, prepend_demonstrations, TransformSpec};

/// Everything `evaluate` needs besides the corpus and the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub aspects: AspectSelection,
    pub transform: TransformSpec,
    pub aggregation_mode: AggregationMode,
    pub bootstrap: Option<BootstrapConfig>,
    pub seed: Option<u64>,
    /// Upper bound on concurrent scoring calls.
    pub max_in_flight: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            aspects: AspectSelection::All,
            transform: TransformSpec::Identity,
            aggregation_mode: AggregationMode::ArithmeticMean,
            bootstrap: None,
            seed: None,
            max_in_flight: 4,
        }
    }
}

impl EvalOptions {
    pub fn from_config(config: &RunConfig) -> Self {
        Self {
            aspects: config.aspects.clone(),
            transform: config.transform.clone(),
            aggregation_mode: config.aggregation_mode,
            bootstrap: config.bootstrap,
            seed: config.seed,
            max_in_flight: config.scorer.max_in_flight,
        }
    }
}

/// Instantiate the configured backend. A `cache_path` on a live scorer
/// puts a score store in front of it.
pub fn build_scorer(config: &ScorerConfig) -> Result<Box<dyn Scorer>, HarnessError> {
    let inner: Box<dyn Scorer> = match config.kind {
        ScorerKind::Reference => Box::new(ReferenceScorer::new(config.model_id.clone())),
        ScorerKind::Remote => {
            let endpoint = match &config.endpoint {
                Some(e) => e.clone(),
                None => std::env::var(ENDPOINT_ENV).map_err(|_| {
                    HarnessError::Config(format!("remote scorer needs scorer.endpoint or {ENDPOINT_ENV}"))
                })?,
            };
            Box::new(RemoteScorer::connect(&endpoint, &config.model_id, RetryPolicy::default())?)
        }
        ScorerKind::Cached => {
            let path = config
                .cache_path
                .as_ref()
                .ok_or_else(|| HarnessError::Config("a cached scorer needs scorer.cache_path".into()))?;
            let store = ScoreStore::open(path)?;
            let replay = CachedScorer::replay(config.model_id.clone(), store)
                .with_directionality(config.directionality.unwrap_or_default());
            return Ok(Box::new(replay));
        }
    };
    match &config.cache_path {
        Some(path) => Ok(Box::new(CachedScorer::wrap(inner, ScoreStore::open(path)?))),
        None => Ok(inner),
    }
}

/// Load, evaluate and persist one run.
pub fn run_evaluation(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    config.check()?;
    let corpus = crate::corpus::load_corpus(&config.corpus_path)?;
    let scorer = build_scorer(&config.scorer)?;
    let output = evaluate(&corpus, scorer.as_ref(), &EvalOptions::from_config(config))?;
    super::write_results(&config.output_path, &output)?;
    info!(
        "{}: average CBS {:.4} over {} aspects -> {}",
        output.meta.model_id,
        output.meta.average_cbs,
        output.meta.aspect_count,
        config.output_path.display()
    );
    Ok(output)
}

/// One prompt of one aspect, with the text to score for every target.
struct PromptPlan {
    prompt_id: String,
    arab: Vec<(String, String)>,
    western: Vec<(String, String)>,
}

struct AspectPlan {
    aspect_id: String,
    prompts: Vec<PromptPlan>,
}

/// Score every applicable (prompt, target) pair of the selected aspects.
///
/// Scoring may run concurrently, but results are keyed by request, so the
/// output never depends on completion order.
pub fn evaluate(corpus: &Corpus, scorer: &dyn Scorer, options: &EvalOptions) -> Result<RunOutput, HarnessError> {
    let report = validate_corpus(corpus);
    if !report.is_ok() {
        return Err(HarnessError::Validation {
            errors: report.error_count(),
        });
    }
    if options.max_in_flight == 0 {
        return Err(HarnessError::Config("max_in_flight must be at least 1".into()));
    }
    if options.bootstrap.is_some() && options.seed.is_none() {
        return Err(HarnessError::MissingSeed("bootstrap resampling needs seed".into()));
    }

    let aspect_ids: Vec<String> = match &options.aspects {
        AspectSelection::All => corpus.aspect_ids().map(str::to_string).collect(),
        AspectSelection::List(ids) => {
            for id in ids {
                if corpus.aspect(id).is_none() {
                    return Err(HarnessError::UnknownAspect(id.clone()));
                }
            }
            ids.clone()
        }
    };

    let plans = aspect_ids
        .iter()
        .map(|id| plan_aspect(corpus, id, options))
        .collect::<Result<Vec<_>, _>>()?;

    // Unique texts in first-seen order, each with its unique candidates.
    let mut jobs: Vec<(String, Vec<String>)> = Vec::new();
    let mut job_of_text: HashMap<&str, usize> = HashMap::new();
    let mut queued: HashMap<(&str, &str), ()> = HashMap::new();
    for pair in plans
        .iter()
        .flat_map(|a| &a.prompts)
        .flat_map(|p| p.arab.iter().chain(&p.western))
    {
        let (text, candidate) = (pair.0.as_str(), pair.1.as_str());
        if queued.insert((text, candidate), ()).is_some() {
            continue;
        }
        let j = *job_of_text.entry(text).or_insert_with(|| {
            jobs.push((text.to_string(), Vec::new()));
            jobs.len() - 1
        });
        jobs[j].1.push(candidate.to_string());
    }
    debug!(
        "{} scoring requests covering {} pairs",
        jobs.len(),
        queued.len()
    );

    let scored = run_jobs(scorer, &jobs, options.aggregation_mode, options.max_in_flight)?;
    let mut probability: HashMap<(&str, &str), f64> = HashMap::new();
    for ((text, candidates), scores) in jobs.iter().zip(&scored) {
        for (c, s) in candidates.iter().zip(scores) {
            probability.insert((text.as_str(), c.as_str()), *s);
        }
    }
    let lookup = |pairs: &[(String, String)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|(t, c)| probability[&(t.as_str(), c.as_str())])
            .collect()
    };

    let handle = scorer.handle();
    let label = options.transform.label();
    let mut aspect_results = Vec::with_capacity(plans.len());
    for plan in &plans {
        let per_prompt = plan
            .prompts
            .iter()
            .map(|p| cbs_prompt(p.prompt_id.clone(), &lookup(&p.arab), &lookup(&p.western)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut result = AspectResult::new(plan.aspect_id.clone(), per_prompt, handle.clone(), label.clone())?;
        if let (Some(b), Some(seed)) = (options.bootstrap, options.seed) {
            result = result.with_bootstrap(
                b.resamples,
                b.confidence,
                derive_seed(seed, &["bootstrap", &plan.aspect_id]),
            )?;
        }
        aspect_results.push(result);
    }

    let result = RunResult::new(handle.model_id.clone(), aspect_results)?;
    let meta = RunMeta {
        model_id: handle.model_id.clone(),
        corpus_version: corpus.version.clone(),
        right_context_ignored: handle.directionality == Directionality::LeftToRight,
        scorer: handle,
        transform: options.transform.clone(),
        transform_label: label,
        aggregation_mode: options.aggregation_mode,
        seed: options.seed,
        bootstrap: options.bootstrap,
        aspect_count: result.aspect_results.len(),
        average_cbs: result.average_cbs,
    };
    Ok(RunOutput { meta, result })
}

fn plan_aspect(corpus: &Corpus, aspect_id: &str, options: &EvalOptions) -> Result<AspectPlan, HarnessError> {
    let no_pairs = || HarnessError::NoPairs(aspect_id.to_string());
    let raw_set = corpus.target_set(aspect_id).ok_or_else(no_pairs)?;
    if raw_set.arab.is_empty() || raw_set.western.is_empty() {
        return Err(no_pairs());
    }
    let set = if raw_set.arab.len() == raw_set.western.len() {
        raw_set.clone()
    } else {
        let seed = options.seed.ok_or_else(|| {
            HarnessError::MissingSeed(format!("aspect {aspect_id} has unequal target counts and needs equalization"))
        })?;
        equalize_targets(raw_set, derive_seed(seed, &["equalize", aspect_id]))?
    };

    let mut prompts = Vec::new();
    for prompt in corpus.prompts_for(aspect_id) {
        let base = match &options.transform {
            TransformSpec::Identity | TransformSpec::Demonstrations { .. } => prompt.clone(),
            TransformSpec::PronounDrop => drop_pronouns(prompt),
            TransformSpec::CultureToken { token } => prepend_culture_token(prompt, token)?,
        };
        let (arab, western) = applicable_targets(prompt, &set)?;
        let texts = |targets: Vec<&TargetEntry>| -> Result<Vec<(String, String)>, HarnessError> {
            targets
                .into_iter()
                .map(|t| Ok((text_for(&base, &set, t, options)?, t.surface.clone())))
                .collect()
        };
        prompts.push(PromptPlan {
            prompt_id: prompt.id.clone(),
            arab: texts(arab)?,
            western: texts(western)?,
        });
    }
    if prompts.is_empty() {
        return Err(no_pairs());
    }
    Ok(AspectPlan {
        aspect_id: aspect_id.to_string(),
        prompts,
    })
}

/// Text scored for one target. Demonstrations are drawn afresh for every
/// (prompt, target) pair from a seed derived from both.
fn text_for(base: &Prompt, set: &TargetSet, target: &TargetEntry, options: &EvalOptions) -> Result<String, HarnessError> {
    let TransformSpec::Demonstrations { demo_count, seed } = &options.transform else {
        return Ok(base.text.clone());
    };
    let root = seed
        .or(options.seed)
        .ok_or_else(|| HarnessError::MissingSeed("demonstration sampling needs a seed".into()))?;
    let pair_seed = derive_seed(root, &[&base.id, &target.surface]);
    let demos = build_demonstrations(set, target, *demo_count, pair_seed)?;
    Ok(prepend_demonstrations(base, &demos)?.text)
}

/// Run scoring jobs on at most `bound` threads. On failure the error of the
/// lowest-indexed failing job is returned, which is the same whatever the
/// completion order because jobs are claimed in index order.
fn run_jobs(
    scorer: &dyn Scorer,
    jobs: &[(String, Vec<String>)],
    mode: AggregationMode,
    bound: usize,
) -> Result<Vec<Vec<f64>>, ScoreError> {
    let slots: Vec<Mutex<Option<Result<Vec<f64>, ScoreError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = bound.min(jobs.len()).max(1);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((text, candidates)) = jobs.get(i) else { break };
                let outcome = score_candidates(scorer, text, candidates, mode)
                    .map(|scores| scores.into_iter().map(|s| s.aggregate).collect());
                if outcome.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });
    let mut out = Vec::with_capacity(jobs.len());
    for slot in slots {
        match slot.into_inner().expect("slot lock") {
            Some(Ok(scores)) => out.push(scores),
            Some(Err(e)) => return Err(e),
            // Unclaimed jobs all sit after the failing one, which is
            // reached first.
            None => unreachable!("job {} skipped without an earlier failure", out.len()),
        }
    }
    Ok(out)
}
