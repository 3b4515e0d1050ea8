//! Cultural Bias Score.
//!
//! For one prompt with Arab target probabilities `a_1..a_N` and Western
//! probabilities `b_1..b_M`, the prompt score is the fraction of the `N·M`
//! pairs in which the Western target is strictly more probable. Ties are
//! counted separately and never contribute. An aspect score is the mean of
//! its prompt scores, in percent; a model's average is the unweighted mean
//! over aspects.
//!
//! Prompt scores keep their integer pair counts, and aspect means are
//! accumulated as exact rationals before the single conversion to `f64`.
//! This keeps results independent of prompt order and makes identities such
//! as `CBS(A,B) + CBS(B,A) + ties = 1` hold exactly.

mod bootstrap;

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::ScorerHandle;

pub use bootstrap::bootstrap_ci;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{0} list is empty")]
    Empty(&'static str),
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("aspect {0} appears more than once")]
    DuplicateAspect(String),
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("at least one bootstrap resample is required")]
    NoResamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCBS {
    pub prompt_id: String,
    /// Fraction of pairs where the Western target wins.
    pub value: f64,
    pub tie_fraction: f64,
    pub n_arab: usize,
    pub n_western: usize,
    pub western_preferred: u64,
    pub tied: u64,
}

impl PromptCBS {
    pub fn pairs(&self) -> u64 {
        (self.n_arab * self.n_western) as u64
    }

    pub fn value_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.western_preferred, self.pairs())
    }

    pub fn tie_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.tied, self.pairs())
    }
}

/// Per-prompt score by exhaustive pair enumeration.
pub fn cbs_prompt(
    prompt_id: impl Into<String>,
    arab_scores: &[f64],
    western_scores: &[f64],
) -> Result<PromptCBS, MetricError> {
    if arab_scores.is_empty() {
        return Err(MetricError::Empty("arab score"));
    }
    if western_scores.is_empty() {
        return Err(MetricError::Empty("western score"));
    }
    if let Some(&bad) = arab_scores
        .iter()
        .chain(western_scores)
        .find(|s| !(0.0..=1.0).contains(*s))
    {
        return Err(MetricError::OutOfRange(bad));
    }
    let mut preferred = 0u64;
    let mut tied = 0u64;
    for &a in arab_scores {
        for &b in western_scores {
            if b > a {
                preferred += 1;
            } else if b == a {
                tied += 1;
            }
        }
    }
    let pairs = (arab_scores.len() * western_scores.len()) as f64;
    Ok(PromptCBS {
        prompt_id: prompt_id.into(),
        value: preferred as f64 / pairs,
        tie_fraction: tied as f64 / pairs,
        n_arab: arab_scores.len(),
        n_western: western_scores.len(),
        western_preferred: preferred,
        tied,
    })
}

/// Aspect-level score in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectScore {
    pub cbs_percent: f64,
    pub tie_percent: f64,
}

/// Mean of prompt scores, times 100.
pub fn cbs_aspect(per_prompt: &[PromptCBS]) -> Result<AspectScore, MetricError> {
    if per_prompt.is_empty() {
        return Err(MetricError::Empty("prompt"));
    }
    let cbs = exact_mean_percent(per_prompt.iter().map(|p| p.value_ratio()));
    let ties = exact_mean_percent(per_prompt.iter().map(|p| p.tie_ratio()));
    Ok(AspectScore {
        cbs_percent: cbs,
        tie_percent: ties,
    })
}

/// `100 · mean(ratios)`, summed exactly and rounded once.
pub(crate) fn exact_mean_percent(ratios: impl IntoIterator<Item = Ratio<u64>>) -> f64 {
    let mut sum = BigRational::zero();
    let mut count = 0u64;
    for r in ratios {
        sum += BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
        count += 1;
    }
    debug_assert!(count > 0);
    let mean = sum * BigInt::from(100) / BigInt::from(count);
    mean.to_f64().expect("bounded rational converts to f64")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectResult {
    pub aspect_id: String,
    pub cbs_percent: f64,
    pub tie_percent: f64,
    pub per_prompt: Vec<PromptCBS>,
    #[serde(default)]
    pub ci_low: Option<f64>,
    #[serde(default)]
    pub ci_high: Option<f64>,
    pub scorer: ScorerHandle,
    pub transform_label: String,
}

impl AspectResult {
    pub fn new(
        aspect_id: impl Into<String>,
        per_prompt: Vec<PromptCBS>,
        scorer: ScorerHandle,
        transform_label: impl Into<String>,
    ) -> Result<Self, MetricError> {
        let score = cbs_aspect(&per_prompt)?;
        Ok(Self {
            aspect_id: aspect_id.into(),
            cbs_percent: score.cbs_percent,
            tie_percent: score.tie_percent,
            per_prompt,
            ci_low: None,
            ci_high: None,
            scorer,
            transform_label: transform_label.into(),
        })
    }

    /// Attach a percentile bootstrap interval. The interval is widened when
    /// needed so that it always contains the point estimate.
    pub fn with_bootstrap(mut self, resamples: usize, confidence: f64, seed: u64) -> Result<Self, MetricError> {
        let (lo, hi) = bootstrap_ci(&self.per_prompt, resamples, confidence, seed)?;
        self.ci_low = Some(lo.min(self.cbs_percent));
        self.ci_high = Some(hi.max(self.cbs_percent));
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model_id: String,
    pub aspect_results: Vec<AspectResult>,
    pub average_cbs: f64,
}

impl RunResult {
    pub fn new(model_id: impl Into<String>, aspect_results: Vec<AspectResult>) -> Result<Self, MetricError> {
        let average_cbs = average_cbs(&aspect_results)?;
        Ok(Self {
            model_id: model_id.into(),
            aspect_results,
            average_cbs,
        })
    }

    pub fn aspect(&self, id: &str) -> Option<&AspectResult> {
        self.aspect_results.iter().find(|a| a.aspect_id == id)
    }

    pub fn aspect_ids(&self) -> Vec<&str> {
        self.aspect_results.iter().map(|a| a.aspect_id.as_str()).collect()
    }
}

/// Unweighted mean of aspect scores.
pub fn average_cbs(aspect_results: &[AspectResult]) -> Result<f64, MetricError> {
    let mut seen = HashSet::new();
    for r in aspect_results {
        if !seen.insert(r.aspect_id.as_str()) {
            return Err(MetricError::DuplicateAspect(r.aspect_id.clone()));
        }
    }
    mean_percent(aspect_results.iter().map(|r| r.cbs_percent))
}

/// Unweighted mean of already-aggregated percentages.
pub fn mean_percent(values: impl IntoIterator<Item = f64>) -> Result<f64, MetricError> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(MetricError::Empty("aspect result"));
    }
    Ok(sum / n as f64)
}

/// Signed change in average CBS when subject pronouns are dropped
/// (English-like minus pronoun-drop).
pub fn prodrop_delta(cbs_english_like: f64, cbs_pronoun_drop: f64) -> f64 {
    cbs_english_like - cbs_pronoun_drop
}
