use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use super::{Corpus, CorpusError, CulturalAspect, Prompt, TargetSet};
use crate::text::count_mask_markers;

pub const ASPECTS_FILE: &str = "aspects.jsonl";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const TARGETS_FILE: &str = "targets.jsonl";

/// Load and link a corpus directory.
///
/// Structural problems (unreadable files, bad JSON, mask-count violations,
/// dangling references, duplicate ids) fail the load. Content problems such
/// as gender mismatches are left for [`super::validate_corpus`].
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let dir = dir.as_ref();
    let aspects_raw = read_file(dir, ASPECTS_FILE)?;
    let prompts_raw = read_file(dir, PROMPTS_FILE)?;
    let targets_raw = read_file(dir, TARGETS_FILE)?;

    let aspects: Vec<CulturalAspect> = parse_lines(ASPECTS_FILE, &aspects_raw)?
        .into_iter()
        .map(|(_, a)| a)
        .collect();
    let mut seen = HashSet::new();
    for aspect in &aspects {
        if !seen.insert(aspect.id.as_str()) {
            return Err(CorpusError::DuplicateAspect(aspect.id.clone()));
        }
    }

    let mut prompts = Vec::new();
    let mut prompt_ids = HashSet::new();
    for (_, prompt) in parse_lines::<Prompt>(PROMPTS_FILE, &prompts_raw)? {
        let count = count_mask_markers(&prompt.text);
        if count != 1 {
            return Err(CorpusError::MaskCount {
                prompt_id: prompt.id,
                count,
            });
        }
        if !seen.contains(prompt.aspect_id.as_str()) {
            return Err(CorpusError::DanglingAspect {
                record: "prompt",
                id: prompt.id,
                aspect_id: prompt.aspect_id,
            });
        }
        if !prompt_ids.insert(prompt.id.clone()) {
            return Err(CorpusError::DuplicatePrompt(prompt.id));
        }
        prompts.push(prompt);
    }

    let mut targets = Vec::new();
    let mut with_targets = HashSet::new();
    for (line, set) in parse_lines::<TargetSet>(TARGETS_FILE, &targets_raw)? {
        if !seen.contains(set.aspect_id.as_str()) {
            return Err(CorpusError::DanglingAspect {
                record: "target set",
                id: format!("(line {line})"),
                aspect_id: set.aspect_id,
            });
        }
        if !with_targets.insert(set.aspect_id.clone()) {
            return Err(CorpusError::DuplicateTargetSet(set.aspect_id));
        }
        if set
            .arab
            .iter()
            .chain(&set.western)
            .any(|t| t.surface.trim().is_empty())
        {
            return Err(CorpusError::EmptySurface {
                file: TARGETS_FILE.to_string(),
                line,
            });
        }
        targets.push(set);
    }

    let version = content_version(&[&aspects_raw, &prompts_raw, &targets_raw]);
    Ok(Corpus {
        aspects,
        prompts,
        targets,
        version,
    })
}

fn read_file(dir: &Path, name: &str) -> Result<String, CorpusError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CorpusError::MissingFile { path });
    }
    fs::read_to_string(&path).map_err(|source| CorpusError::Io { path, source })
}

/// Parse non-blank lines, keeping 1-based line numbers.
fn parse_lines<T: DeserializeOwned>(file: &str, raw: &str) -> Result<Vec<(usize, T)>, CorpusError> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|rec| (i + 1, rec))
                .map_err(|e| CorpusError::Malformed {
                    file: file.to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

fn content_version(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hex::encode(hasher.finalize());
    format!("sha256:{}", &digest[..16])
}
