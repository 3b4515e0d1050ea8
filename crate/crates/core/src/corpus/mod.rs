//! Prompt and target corpus: schema, loading, validation and curation.
//!
//! A corpus directory holds three line-delimited JSON files:
//!
//! * `aspects.jsonl`: one [`CulturalAspect`] per line
//! * `prompts.jsonl`: one [`Prompt`] per line, each with exactly one `[MASK]`
//! * `targets.jsonl`: one [`TargetSet`] per line, at most one per aspect
//!
//! Loaded corpora are immutable and can be shared across scoring workers.

mod curate;
mod load;
mod validate;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curate::{applicable_targets, equalize_targets};
pub use load::{load_corpus, ASPECTS_FILE, PROMPTS_FILE, TARGETS_FILE};
pub use validate::{validate_corpus, AspectSummary, Finding, FindingKind, Severity, ValidationReport};

/// Small bundled corpus with ten aspects, three prompts each, used by the
/// examples and tests.
pub fn sample_corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join("sample_corpus")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Culture {
    Arab,
    Western,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CulturalAspect {
    pub id: String,
    pub display_name: String,
    pub gendered: bool,
    /// Source queries used to collect the prompts. Metadata only.
    #[serde(default)]
    pub queries: Vec<String>,
}

impl CulturalAspect {
    /// Gender variant of a gendered aspect, read from its `_f` / `_m` id suffix.
    ///
    /// Returns `None` for ungendered aspects and for gendered aspects whose id
    /// carries no recognizable suffix.
    pub fn variant(&self) -> Option<Gender> {
        if !self.gendered {
            return None;
        }
        if self.id.ends_with("_f") {
            Some(Gender::Female)
        } else if self.id.ends_with("_m") {
            Some(Gender::Male)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prompt {
    pub id: String,
    pub aspect_id: String,
    pub text: String,
    pub gender: Gender,
    #[serde(default)]
    pub source: String,
    pub has_first_person_pronoun: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub surface: String,
    pub culture: Culture,
    pub gender: Gender,
}

impl TargetEntry {
    pub fn new(surface: impl Into<String>, culture: Culture, gender: Gender) -> Self {
        Self {
            surface: surface.into(),
            culture,
            gender,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    pub aspect_id: String,
    pub arab: Vec<TargetEntry>,
    pub western: Vec<TargetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub aspects: Vec<CulturalAspect>,
    pub prompts: Vec<Prompt>,
    pub targets: Vec<TargetSet>,
    /// Content digest of the three corpus files.
    pub version: String,
}

impl Corpus {
    pub fn aspect(&self, id: &str) -> Option<&CulturalAspect> {
        self.aspects.iter().find(|a| a.id == id)
    }

    pub fn prompts_for<'a>(&'a self, aspect_id: &'a str) -> impl Iterator<Item = &'a Prompt> + 'a {
        self.prompts.iter().filter(move |p| p.aspect_id == aspect_id)
    }

    pub fn target_set(&self, aspect_id: &str) -> Option<&TargetSet> {
        self.targets.iter().find(|t| t.aspect_id == aspect_id)
    }

    pub fn aspect_ids(&self) -> impl Iterator<Item = &str> {
        self.aspects.iter().map(|a| a.id.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed record: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("prompt {prompt_id} must contain exactly one [MASK] marker, found {count}")]
    MaskCount { prompt_id: String, count: usize },
    #[error("{record} {id} references undeclared aspect {aspect_id}")]
    DanglingAspect {
        record: &'static str,
        id: String,
        aspect_id: String,
    },
    #[error("aspect id {0} declared more than once")]
    DuplicateAspect(String),
    #[error("prompt id {0} declared more than once")]
    DuplicatePrompt(String),
    #[error("aspect {0} has more than one target set")]
    DuplicateTargetSet(String),
    #[error("{file}:{line}: target surface is empty after trimming")]
    EmptySurface { file: String, line: usize },
    #[error("target set for aspect {aspect_id} has an empty {culture:?} list")]
    EmptyTargets { aspect_id: String, culture: Culture },
    #[error("prompt {prompt_id} belongs to aspect {prompt_aspect} but the target set is for {set_aspect}")]
    AspectMismatch {
        prompt_id: String,
        prompt_aspect: String,
        set_aspect: String,
    },
    #[error("prompt {prompt_id} ({gender:?}) has no applicable {culture:?} targets in aspect {aspect_id}")]
    NoApplicableTargets {
        prompt_id: String,
        aspect_id: String,
        gender: Gender,
        culture: Culture,
    },
}
