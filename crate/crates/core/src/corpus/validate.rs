use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Corpus, Culture, CulturalAspect, Gender, TargetEntry, TargetSet};
use crate::text::{has_first_person_pronoun, nfc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FindingKind {
    /// Aspect declared but has no prompts.
    EmptyAspect,
    /// Aspect declared but has no target set.
    MissingTargets,
    /// Arab and Western lists differ in size; equalization will downsample.
    UnequalTargetCounts { arab: usize, western: usize },
    /// Gendered aspect whose id carries no `_f` / `_m` suffix.
    UnknownGenderVariant,
    TargetGenderMismatch {
        surface: String,
        expected: Gender,
        found: Gender,
    },
    PromptGenderMismatch {
        prompt_id: String,
        found: Gender,
    },
    CultureMismatch {
        surface: String,
        list: Culture,
        found: Culture,
    },
    DuplicateSurface { surface: String, culture: Culture },
    PronounFlagMismatch { prompt_id: String, flagged: bool },
}

impl FindingKind {
    pub fn severity(&self) -> Severity {
        match self {
            FindingKind::EmptyAspect
            | FindingKind::MissingTargets
            | FindingKind::UnequalTargetCounts { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub aspect_id: String,
    pub severity: Severity,
    #[serde(flatten)]
    pub kind: FindingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectSummary {
    pub aspect_id: String,
    pub prompt_count: usize,
    pub arab_targets: usize,
    pub western_targets: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub aspects: Vec<AspectSummary>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn is_ok(&self) -> bool {
        self.error_count() == 0
    }

    pub fn findings_for<'a>(&'a self, aspect_id: &'a str) -> impl Iterator<Item = &'a Finding> + 'a {
        self.findings.iter().filter(move |f| f.aspect_id == aspect_id)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>8} {:>6} {:>8}", "aspect", "prompts", "arab", "western")?;
        for s in &self.aspects {
            writeln!(
                f,
                "{:<14} {:>8} {:>6} {:>8}",
                s.aspect_id, s.prompt_count, s.arab_targets, s.western_targets
            )?;
        }
        for finding in &self.findings {
            let level = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{level}: [{}] {}", finding.aspect_id, describe(&finding.kind))?;
        }
        write!(
            f,
            "{} error(s), {} warning(s)",
            self.error_count(),
            self.findings.len() - self.error_count()
        )
    }
}

fn describe(kind: &FindingKind) -> String {
    match kind {
        FindingKind::EmptyAspect => "aspect has no prompts".into(),
        FindingKind::MissingTargets => "aspect has no target set".into(),
        FindingKind::UnequalTargetCounts { arab, western } => {
            format!("unequal target counts (arab {arab}, western {western}); will be equalized")
        }
        FindingKind::UnknownGenderVariant => {
            "gendered aspect id must end in _f or _m".into()
        }
        FindingKind::TargetGenderMismatch {
            surface,
            expected,
            found,
        } => format!("target {surface:?} is {found:?}, aspect variant is {expected:?}"),
        FindingKind::PromptGenderMismatch { prompt_id, found } => {
            format!("prompt {prompt_id} is {found:?} but the aspect does not allow it")
        }
        FindingKind::CultureMismatch {
            surface,
            list,
            found,
        } => format!("target {surface:?} marked {found:?} sits in the {list:?} list"),
        FindingKind::DuplicateSurface { surface, culture } => {
            format!("duplicate {culture:?} target {surface:?}")
        }
        FindingKind::PronounFlagMismatch { prompt_id, flagged } => format!(
            "prompt {prompt_id} has has_first_person_pronoun={flagged} but the text says otherwise"
        ),
    }
}

/// Check every content invariant of a loaded corpus. Never fails; problems
/// are reported as findings.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    for aspect in &corpus.aspects {
        let mut findings = Vec::new();
        let mut push = |kind: FindingKind| {
            findings.push(Finding {
                aspect_id: aspect.id.clone(),
                severity: kind.severity(),
                kind,
            })
        };

        if aspect.gendered && aspect.variant().is_none() {
            push(FindingKind::UnknownGenderVariant);
        }

        let mut prompt_count = 0;
        for prompt in corpus.prompts_for(&aspect.id) {
            prompt_count += 1;
            if !prompt_gender_allowed(aspect, prompt.gender) {
                push(FindingKind::PromptGenderMismatch {
                    prompt_id: prompt.id.clone(),
                    found: prompt.gender,
                });
            }
            if has_first_person_pronoun(&prompt.text) != prompt.has_first_person_pronoun {
                push(FindingKind::PronounFlagMismatch {
                    prompt_id: prompt.id.clone(),
                    flagged: prompt.has_first_person_pronoun,
                });
            }
        }
        if prompt_count == 0 {
            push(FindingKind::EmptyAspect);
        }

        let (arab, western) = match corpus.target_set(&aspect.id) {
            Some(set) => {
                check_target_set(aspect, set, &mut push);
                (set.arab.len(), set.western.len())
            }
            None => {
                push(FindingKind::MissingTargets);
                (0, 0)
            }
        };

        report.aspects.push(AspectSummary {
            aspect_id: aspect.id.clone(),
            prompt_count,
            arab_targets: arab,
            western_targets: western,
        });
        report.findings.extend(findings);
    }
    report
}

fn prompt_gender_allowed(aspect: &CulturalAspect, gender: Gender) -> bool {
    match gender {
        Gender::Neutral => true,
        g => aspect.gendered && aspect.variant().is_none_or(|v| v == g),
    }
}

fn check_target_set(aspect: &CulturalAspect, set: &TargetSet, push: &mut impl FnMut(FindingKind)) {
    if set.arab.len() != set.western.len() {
        push(FindingKind::UnequalTargetCounts {
            arab: set.arab.len(),
            western: set.western.len(),
        });
    }
    for (list, entries) in [(Culture::Arab, &set.arab), (Culture::Western, &set.western)] {
        let mut seen = HashSet::new();
        for entry in entries {
            if entry.culture != list {
                push(FindingKind::CultureMismatch {
                    surface: entry.surface.clone(),
                    list,
                    found: entry.culture,
                });
            }
            if let Some(expected) = expected_target_gender(aspect) {
                if entry.gender != expected {
                    push(FindingKind::TargetGenderMismatch {
                        surface: entry.surface.clone(),
                        expected,
                        found: entry.gender,
                    });
                }
            }
            if !seen.insert(surface_key(entry)) {
                push(FindingKind::DuplicateSurface {
                    surface: entry.surface.clone(),
                    culture: list,
                });
            }
        }
    }
}

/// Gendered aspects require their variant; ungendered ones require neutral.
fn expected_target_gender(aspect: &CulturalAspect) -> Option<Gender> {
    if aspect.gendered {
        aspect.variant()
    } else {
        Some(Gender::Neutral)
    }
}

fn surface_key(entry: &TargetEntry) -> String {
    nfc(entry.surface.trim()).into_owned()
}
