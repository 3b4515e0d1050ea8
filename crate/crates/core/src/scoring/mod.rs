//! Fill probabilities for candidates occupying a prompt's masked slot.
//!
//! Every backend sits behind [`Scorer`]. [`ReferenceScorer`] is a
//! deterministic character-bigram scorer used for tests and reproducibility
//! checks. [`RemoteScorer`] speaks the HTTP fill-mask protocol in
//! [`protocol`], and [`CachedScorer`] fronts either of them (or replays on
//! its own) through a persistent [`ScoreStore`].
//!
//! Multi-subword candidates are reduced to one number with an
//! [`AggregationMode`]; the mode is recorded on every [`FillScore`].

mod cache;
pub mod protocol;
mod reference;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::count_mask_markers;

pub use cache::{CachedScorer, ScoreCacheKey, ScoreStore};
pub use reference::{reference_score, ReferenceScorer};
pub use remote::{RemoteScorer, RetryPolicy, ENDPOINT_ENV};

/// Tolerance between a backend-reported aggregate and the locally recomputed one.
pub const AGGREGATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Reference,
    Remote,
    Cached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directionality {
    #[default]
    Bidirectional,
    LeftToRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    #[default]
    ArithmeticMean,
    GeometricMean,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::ArithmeticMean => "arithmetic_mean",
            AggregationMode::GeometricMean => "geometric_mean",
        }
    }

    /// Mean of a non-empty slice of probabilities.
    ///
    /// The geometric mean of a list containing zero is zero.
    pub fn aggregate(self, probs: &[f64]) -> f64 {
        debug_assert!(!probs.is_empty());
        let n = probs.len() as f64;
        match self {
            AggregationMode::ArithmeticMean => probs.iter().sum::<f64>() / n,
            AggregationMode::GeometricMean => {
                if probs.contains(&0.0) {
                    0.0
                } else {
                    (probs.iter().map(|p| p.ln()).sum::<f64>() / n).exp().min(1.0)
                }
            }
        }
    }
}

/// Identity of a scorer as recorded in results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerHandle {
    pub model_id: String,
    pub kind: ScorerKind,
    /// Present exactly when `kind` is remote.
    pub endpoint: Option<String>,
    pub directionality: Directionality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillScore {
    pub candidate: String,
    pub subword_probabilities: Vec<f64>,
    pub aggregate: f64,
    pub aggregation_mode: AggregationMode,
}

impl FillScore {
    /// Build a score from per-subword probabilities, computing the aggregate.
    pub fn from_subwords(
        candidate: impl Into<String>,
        subword_probabilities: Vec<f64>,
        mode: AggregationMode,
    ) -> Result<Self, ScoreError> {
        let candidate = candidate.into();
        if subword_probabilities.is_empty() {
            return Err(ScoreError::EmptySubwords { candidate });
        }
        if let Some(&bad) = subword_probabilities
            .iter()
            .find(|p| !(0.0..=1.0).contains(*p))
        {
            return Err(ScoreError::InvalidProbability {
                candidate,
                value: bad,
            });
        }
        let aggregate = mode.aggregate(&subword_probabilities);
        Ok(Self {
            candidate,
            subword_probabilities,
            aggregate,
            aggregation_mode: mode,
        })
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("scorer endpoint {endpoint} unreachable: {message}")]
    Unreachable { endpoint: String, message: String },
    #[error("scorer returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed scorer response: {0}")]
    Protocol(String),
    #[error("expected {expected} results, scorer returned {got}")]
    CandidateCount { expected: usize, got: usize },
    #[error("result {index} is for {got:?}, expected {expected:?}")]
    CandidateMismatch {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("probability {value} for {candidate:?} is outside [0, 1]")]
    InvalidProbability { candidate: String, value: f64 },
    #[error("aggregate {reported} for {candidate:?} disagrees with recomputed {expected}")]
    AggregateMismatch {
        candidate: String,
        reported: f64,
        expected: f64,
    },
    #[error("no subword probabilities for {candidate:?}")]
    EmptySubwords { candidate: String },
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no candidates to score")]
    NoCandidates,
    #[error("prompt must contain exactly one [MASK] marker, found {0}")]
    MaskCount(usize),
    #[error("model mismatch: configured {configured}, backend serves {served}")]
    ModelMismatch { configured: String, served: String },
    #[error("no cached score for {candidate:?} and no fallback scorer")]
    CacheMiss { candidate: String },
    #[error("score store I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl ScoreError {
    /// Transport failures and server-side errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ScoreError::Unreachable { .. } => true,
            ScoreError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// A source of fill probabilities. Implementations must be safe to call
/// from several worker threads at once.
pub trait Scorer: Send + Sync {
    fn handle(&self) -> ScorerHandle;

    /// Score `candidates` in `text`, which contains exactly one mask marker.
    /// Must return one score per candidate, in order.
    fn score_batch(
        &self,
        text: &str,
        candidates: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError>;
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn handle(&self) -> ScorerHandle {
        (**self).handle()
    }

    fn score_batch(
        &self,
        text: &str,
        candidates: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError> {
        (**self).score_batch(text, candidates, mode)
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn handle(&self) -> ScorerHandle {
        (**self).handle()
    }

    fn score_batch(
        &self,
        text: &str,
        candidates: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError> {
        (**self).score_batch(text, candidates, mode)
    }
}

/// Score candidates through any backend and check the result contract:
/// one score per candidate in request order, probabilities in `[0, 1]`, and
/// aggregates equal to the declared mean.
pub fn score_candidates(
    scorer: &dyn Scorer,
    text: &str,
    candidates: &[String],
    mode: AggregationMode,
) -> Result<Vec<FillScore>, ScoreError> {
    let masks = count_mask_markers(text);
    if masks != 1 {
        return Err(ScoreError::MaskCount(masks));
    }
    if candidates.is_empty() {
        return Err(ScoreError::NoCandidates);
    }
    if candidates.iter().any(|c| c.trim().is_empty()) {
        return Err(ScoreError::EmptyCandidate);
    }
    let scores = scorer.score_batch(text, candidates, mode)?;
    check_results(candidates, &scores, mode)?;
    Ok(scores)
}

pub(crate) fn check_results(
    candidates: &[String],
    scores: &[FillScore],
    mode: AggregationMode,
) -> Result<(), ScoreError> {
    if scores.len() != candidates.len() {
        return Err(ScoreError::CandidateCount {
            expected: candidates.len(),
            got: scores.len(),
        });
    }
    for (index, (cand, score)) in candidates.iter().zip(scores).enumerate() {
        if &score.candidate != cand {
            return Err(ScoreError::CandidateMismatch {
                index,
                expected: cand.clone(),
                got: score.candidate.clone(),
            });
        }
        if score.subword_probabilities.is_empty() {
            return Err(ScoreError::EmptySubwords {
                candidate: cand.clone(),
            });
        }
        for &p in score.subword_probabilities.iter().chain([&score.aggregate]) {
            if !(0.0..=1.0).contains(&p) {
                return Err(ScoreError::InvalidProbability {
                    candidate: cand.clone(),
                    value: p,
                });
            }
        }
        let expected = mode.aggregate(&score.subword_probabilities);
        if score.aggregation_mode != mode || (expected - score.aggregate).abs() > 1e-12 {
            return Err(ScoreError::AggregateMismatch {
                candidate: cand.clone(),
                reported: score.aggregate,
                expected,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<Vec<f64>>);

    impl Scorer for Fixed {
        fn handle(&self) -> ScorerHandle {
            ScorerHandle {
                model_id: "fixed".into(),
                kind: ScorerKind::Reference,
                endpoint: None,
                directionality: Directionality::Bidirectional,
            }
        }

        fn score_batch(
            &self,
            _text: &str,
            candidates: &[String],
            mode: AggregationMode,
        ) -> Result<Vec<FillScore>, ScoreError> {
            candidates
                .iter()
                .zip(&self.0)
                .map(|(c, p)| FillScore::from_subwords(c.clone(), p.clone(), mode))
                .collect()
        }
    }

    fn cands(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_subword_aggregate_is_identity() {
        let s = Fixed(vec![vec![0.2]]);
        let out = score_candidates(&s, "x [MASK]", &cands(&["a"]), AggregationMode::ArithmeticMean).unwrap();
        assert_eq!(out[0].aggregate, 0.2);
    }

    #[test]
    fn arithmetic_mean_of_two_subwords() {
        let agg = AggregationMode::ArithmeticMean.aggregate(&[0.1, 0.3]);
        assert!((agg - 0.2).abs() < 1e-12);
    }

    #[test]
    fn geometric_mean_of_two_subwords() {
        let agg = AggregationMode::GeometricMean.aggregate(&[0.1, 0.4]);
        assert!((agg - 0.2).abs() < 1e-12);
        assert_eq!(AggregationMode::GeometricMean.aggregate(&[0.0, 0.9]), 0.0);
        assert_eq!(AggregationMode::GeometricMean.aggregate(&[1.0, 1.0]), 1.0);
    }

    #[test]
    fn wrong_count_is_rejected() {
        let s = Fixed(vec![vec![0.2]]);
        assert!(matches!(
            score_candidates(&s, "[MASK]", &cands(&["a", "b"]), AggregationMode::ArithmeticMean),
            Err(ScoreError::CandidateCount { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        assert!(matches!(
            FillScore::from_subwords("a", vec![1.5], AggregationMode::ArithmeticMean),
            Err(ScoreError::InvalidProbability { .. })
        ));
    }

    #[test]
    fn preconditions() {
        let s = Fixed(vec![vec![0.2]]);
        let mode = AggregationMode::ArithmeticMean;
        assert!(matches!(score_candidates(&s, "no mask", &cands(&["a"]), mode), Err(ScoreError::MaskCount(0))));
        assert!(matches!(score_candidates(&s, "[MASK]", &[], mode), Err(ScoreError::NoCandidates)));
        assert!(matches!(score_candidates(&s, "[MASK]", &cands(&[" "]), mode), Err(ScoreError::EmptyCandidate)));
    }

    #[test]
    fn retryability() {
        assert!(ScoreError::Http { status: 503, body: String::new() }.is_retryable());
        assert!(!ScoreError::Http { status: 422, body: String::new() }.is_retryable());
        assert!(!ScoreError::CandidateCount { expected: 1, got: 2 }.is_retryable());
    }
}
