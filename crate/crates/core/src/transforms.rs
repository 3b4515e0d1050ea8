//! Prompt adaptations: subject-pronoun drop, culture-token prefix, and
//! in-context demonstrations of Arab targets.
//!
//! Every transform leaves the single `[MASK]` marker in place.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Prompt, TargetEntry, TargetSet};
use crate::text::{nfc, FIRST_PERSON_PRONOUN};

pub const DEFAULT_CULTURE_TOKEN: &str = "[عربي]";
pub const DEFAULT_DEMO_COUNT: usize = 3;

/// Arabic comma between demonstration targets.
pub const DEMO_SEPARATOR: &str = "، ";
/// Terminates the demonstration list before the prompt text.
pub const DEMO_TERMINATOR: &str = ". ";

fn default_token() -> String {
    DEFAULT_CULTURE_TOKEN.to_string()
}

fn default_demo_count() -> usize {
    DEFAULT_DEMO_COUNT
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    #[default]
    Identity,
    PronounDrop,
    CultureToken {
        #[serde(default = "default_token")]
        token: String,
    },
    Demonstrations {
        #[serde(default = "default_demo_count")]
        demo_count: usize,
        /// Falls back to the run seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl TransformSpec {
    pub fn culture_token() -> Self {
        TransformSpec::CultureToken {
            token: default_token(),
        }
    }

    /// Short description stored alongside results.
    pub fn label(&self) -> String {
        match self {
            TransformSpec::Identity => "identity".into(),
            TransformSpec::PronounDrop => "pronoun_drop".into(),
            TransformSpec::CultureToken { token } => format!("culture_token:{token}"),
            TransformSpec::Demonstrations { demo_count, seed } => match seed {
                Some(s) => format!("demonstrations:k={demo_count},seed={s}"),
                None => format!("demonstrations:k={demo_count}"),
            },
        }
    }

    pub fn is_per_target(&self) -> bool {
        matches!(self, TransformSpec::Demonstrations { .. })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("prompt {prompt_id} already starts with {token:?}")]
    AlreadyPrefixed { prompt_id: String, token: String },
    #[error("culture token is empty")]
    EmptyToken,
    #[error("need {needed} demonstration targets but only {available} are eligible")]
    TooFewTargets { needed: usize, available: usize },
    #[error("demonstration list is empty")]
    EmptyDemonstrations,
}

/// Remove every standalone first-person pronoun token.
///
/// When the pronoun occurs, whitespace in the result is collapsed to single
/// spaces. Prompts without it are returned unchanged.
pub fn drop_pronouns(prompt: &Prompt) -> Prompt {
    let mut out = prompt.clone();
    out.text = drop_pronouns_text(&prompt.text);
    out.has_first_person_pronoun = false;
    out
}

pub fn drop_pronouns_text(text: &str) -> String {
    let is_pronoun = |tok: &str| nfc(tok) == FIRST_PERSON_PRONOUN;
    if !text.split_whitespace().any(is_pronoun) {
        return text.to_string();
    }
    text.split_whitespace()
        .filter(|tok| !is_pronoun(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn prepend_culture_token(prompt: &Prompt, token: &str) -> Result<Prompt, TransformError> {
    if token.trim().is_empty() {
        return Err(TransformError::EmptyToken);
    }
    if nfc(&prompt.text).starts_with(nfc(token).as_ref()) {
        return Err(TransformError::AlreadyPrefixed {
            prompt_id: prompt.id.clone(),
            token: token.to_string(),
        });
    }
    let mut out = prompt.clone();
    out.text = format!("{token} {}", prompt.text);
    Ok(out)
}

/// Sample `k` distinct Arab targets other than `exclude`.
///
/// Entries are compared by NFC surface; duplicate surfaces count once. The
/// draw is without replacement from a ChaCha8 stream seeded with `seed`, and
/// the output keeps the sampled order.
pub fn build_demonstrations(
    target_set: &TargetSet,
    exclude: &TargetEntry,
    k: usize,
    seed: u64,
) -> Result<Vec<TargetEntry>, TransformError> {
    let excluded = nfc(exclude.surface.trim()).into_owned();
    let mut seen = HashSet::new();
    let eligible: Vec<&TargetEntry> = target_set
        .arab
        .iter()
        .filter(|t| {
            let key = nfc(t.surface.trim()).into_owned();
            key != excluded && seen.insert(key)
        })
        .collect();
    if eligible.len() < k {
        return Err(TransformError::TooFewTargets {
            needed: k,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, eligible.len(), k)
        .into_iter()
        .map(|i| eligible[i].clone())
        .collect())
}

/// Prefix the prompt with `d1، d2، ... dk. `.
pub fn prepend_demonstrations(prompt: &Prompt, demos: &[TargetEntry]) -> Result<Prompt, TransformError> {
    let prefix = demonstration_prefix(demos)?;
    let mut out = prompt.clone();
    out.text = format!("{prefix}{}", prompt.text);
    Ok(out)
}

pub fn demonstration_prefix(demos: &[TargetEntry]) -> Result<String, TransformError> {
    if demos.is_empty() {
        return Err(TransformError::EmptyDemonstrations);
    }
    let joined = demos
        .iter()
        .map(|d| d.surface.as_str())
        .collect::<Vec<_>>()
        .join(DEMO_SEPARATOR);
    Ok(format!("{joined}{DEMO_TERMINATOR}"))
}

/// Inverse of [`prepend_demonstrations`] for a known demonstration list.
pub fn strip_demonstrations<'a>(text: &'a str, demos: &[TargetEntry]) -> Option<&'a str> {
    let prefix = demonstration_prefix(demos).ok()?;
    text.strip_prefix(prefix.as_str())
}
