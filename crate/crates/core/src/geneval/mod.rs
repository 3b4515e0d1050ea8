//! Free-form generation study: sampling continuations from causal and chat
//! models, collecting human Arab/Western/Neutral judgments, aggregating them
//! and measuring inter-annotator agreement.

mod labels;
mod prompts;
mod sample;
mod server;
mod store;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::ScoreError;
use crate::text::count_mask_markers;

pub use labels::{
    aggregate_labels, cohen_kappa, kappa_between, pairwise_kappa, AgreementStats, LabelBreakdown,
    LabelReport, PairwiseKappa, Resolution, ADJUDICATOR_ID,
};
pub use prompts::{default_gen_prompts, wrap_chat_instruction, CHAT_INSTRUCTION_SEPARATOR};
pub use sample::{
    run_generation, sample_generations, GenConfig, GenerationBackend, HttpGenerationBackend, GENERATE_ENDPOINT_ENV,
};
pub use server::{annotation_router, serve_annotation, task_order, AnnotationState, NextTask, Progress, Stats};
pub use store::{read_generations, read_labels, write_generations, LabelStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenPrompt {
    pub id: String,
    pub aspect_id: String,
    /// Open-ended prefix the model continues.
    pub text: String,
    /// Wrap the text in the "give n completions" instruction before sending.
    #[serde(default)]
    pub chat_mode: bool,
}

impl GenPrompt {
    pub fn new(id: &str, aspect_id: &str, text: &str) -> Self {
        Self {
            id: id.to_string(),
            aspect_id: aspect_id.to_string(),
            text: text.to_string(),
            chat_mode: false,
        }
    }

    pub fn check(&self) -> Result<(), GenEvalError> {
        let reason = if self.text.trim().is_empty() {
            "text is empty"
        } else if count_mask_markers(&self.text) > 0 {
            "generation prompts must not contain a mask marker"
        } else {
            return Ok(());
        };
        Err(GenEvalError::InvalidPrompt {
            prompt_id: self.id.clone(),
            reason: reason.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generation {
    pub id: String,
    pub gen_prompt_id: String,
    pub aspect_id: String,
    pub model_id: String,
    /// Prompt as shown to annotators (never the chat wrapper).
    pub prompt_text: String,
    pub text: String,
    pub sample_index: usize,
    /// Seed echoed by the backend; absent when sampling was not seeded.
    #[serde(default)]
    pub seed: Option<u64>,
    pub max_tokens: usize,
}

impl Generation {
    pub fn make_id(model_id: &str, gen_prompt_id: &str, sample_index: usize) -> String {
        format!("{model_id}/{gen_prompt_id}/{sample_index}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Arab,
    Western,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Arab, Label::Western, Label::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Arab => "arab",
            Label::Western => "western",
            Label::Neutral => "neutral",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = GenEvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arab" => Ok(Label::Arab),
            "western" => Ok(Label::Western),
            "neutral" => Ok(Label::Neutral),
            other => Err(GenEvalError::InvalidLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub generation_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum GenEvalError {
    #[error("prompt {prompt_id}: {reason}")]
    InvalidPrompt { prompt_id: String, reason: String },
    #[error("prompt {0} is not in chat mode")]
    NotChatMode(String),
    #[error("samples per prompt must be at least 1")]
    ZeroSamples,
    #[error("generation backend: {0}")]
    Backend(#[from] ScoreError),
    #[error("backend returned {got} of {expected} generations for prompt {prompt_id}")]
    ShortGeneration {
        prompt_id: String,
        expected: usize,
        got: usize,
    },
    #[error("label {0:?} is not one of arab, western, neutral")]
    InvalidLabel(String),
    #[error("annotator id is empty")]
    EmptyAnnotator,
    #[error("label refers to unknown generation {0}")]
    DanglingGeneration(String),
    #[error("label lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no labels to compare")]
    EmptyLabels,
    #[error("{file} holds labels from {count} annotators; expected one")]
    MixedAnnotators { file: String, count: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("I/O error on {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

impl GenEvalError {
    /// Same convention as the scoring CLI: backend failures exit with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            GenEvalError::Backend(_) | GenEvalError::ShortGeneration { .. } => 2,
            _ => 1,
        }
    }
}
