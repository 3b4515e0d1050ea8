use std::collections::HashSet;

use super::{
    AggregationMode, Directionality, FillScore, ScoreError, Scorer, ScorerHandle, ScorerKind,
};
use crate::text::{nfc, MASK_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Symbol {
    Start,
    Char(char),
    End,
}

type Bigram = (Symbol, Symbol);

fn padded_bigrams(token: &str) -> HashSet<Bigram> {
    let symbols: Vec<Symbol> = std::iter::once(Symbol::Start)
        .chain(token.chars().map(Symbol::Char))
        .chain(std::iter::once(Symbol::End))
        .collect();
    symbols.windows(2).map(|w| (w[0], w[1])).collect()
}

fn context_bigrams(prompt_text: &str) -> HashSet<Bigram> {
    let text = nfc(prompt_text).replace(MASK_MARKER, " ");
    text.split_whitespace().flat_map(padded_bigrams).collect()
}

fn unit_probabilities(context: &HashSet<Bigram>, candidate: &str) -> Result<Vec<f64>, ScoreError> {
    let candidate = nfc(candidate);
    let probs: Vec<f64> = candidate
        .split_whitespace()
        .map(|unit| {
            let grams = padded_bigrams(unit);
            let overlap = grams.intersection(context).count();
            (overlap as f64 + 1.0) / (grams.len() as f64 + 1.0)
        })
        .collect();
    if probs.is_empty() {
        return Err(ScoreError::EmptyCandidate);
    }
    Ok(probs)
}

/// Deterministic pseudo-probability of `candidate` filling the prompt's mask.
///
/// The candidate is split on whitespace into units. Each unit `u` scores
/// `(|G(u) ∩ G(ctx)| + 1) / (|G(u)| + 1)` where `G` is the set of character
/// bigrams padded with start and end symbols, and `G(ctx)` is the union over
/// the prompt's whitespace tokens with the mask marker removed. The aggregate
/// is the arithmetic mean over units.
pub fn reference_score(prompt_text: &str, candidate: &str) -> Result<FillScore, ScoreError> {
    let context = context_bigrams(prompt_text);
    let probs = unit_probabilities(&context, candidate)?;
    FillScore::from_subwords(candidate, probs, AggregationMode::ArithmeticMean)
}

/// In-process scorer backed by [`reference_score`]. Units play the role of
/// subwords, so the aggregation mode applies over units.
#[derive(Debug, Clone)]
pub struct ReferenceScorer {
    model_id: String,
}

impl ReferenceScorer {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
        }
    }
}

impl Default for ReferenceScorer {
    fn default() -> Self {
        Self::new("reference")
    }
}

impl Scorer for ReferenceScorer {
    fn handle(&self) -> ScorerHandle {
        ScorerHandle {
            model_id: self.model_id.clone(),
            kind: ScorerKind::Reference,
            endpoint: None,
            directionality: Directionality::Bidirectional,
        }
    }

    fn score_batch(
        &self,
        text: &str,
        candidates: &[String],
        mode: AggregationMode,
    ) -> Result<Vec<FillScore>, ScoreError> {
        let context = context_bigrams(text);
        candidates
            .iter()
            .map(|c| FillScore::from_subwords(c.clone(), unit_probabilities(&context, c)?, mode))
            .collect()
    }
}
